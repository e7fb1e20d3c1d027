"""Command line entry points.

    armkit serve          --port 8750
    armkit bench          --cases 10000 --seed 42 --out report.csv
    armkit eval           --dataset <root> --split iw --folds 5 --predictor heuristic
    armkit augment        --dataset <root> --out <dir> --per-record 11 --seed 0
    armkit grasp-detect   --depth scene.pgm --heuristic --out rects.txt
    armkit ik             --pose "x y z qw qx qy qz"
    armkit fk             --joints "j1 j2 j3 j4 j5 j6 j7"
    armkit make-fixture   --out <dir> --scenes 20 --seed 7
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np


def _load_chain(args):
    from .arm_model import open_arms_chain, parse_chain_config

    if getattr(args, "chain_config", None):
        return parse_chain_config(Path(args.chain_config).read_text())
    return open_arms_chain()


def _load_predictor(spec_text: str):
    from .grasp_cnn import (WeightBundle, build_network, default_network_spec,
                            heuristic_predictor)

    if spec_text == "heuristic":
        return heuristic_predictor()
    if spec_text.startswith("weights:"):
        path = spec_text[len("weights:"):]
        bundle = WeightBundle.load(path)
        return build_network(default_network_spec(), bundle)
    raise SystemExit(f"unknown predictor {spec_text!r}; use heuristic or weights:<file>")


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    app = create_app(chain=_load_chain(args), ui_dir=args.ui)
    if args.ui:
        print(f"sandbox UI at http://{args.host}:{args.port}/ui/")
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")


def cmd_bench(args):
    from .solve_bench import (default_setups, format_report_lines, generate_cases,
                              report_csv, run_benchmark)

    chain = _load_chain(args)
    cases = generate_cases(chain, args.cases, rng_seed=args.seed)
    reports = run_benchmark(chain, cases, default_setups(rng_seed=args.seed))
    print(format_report_lines(reports))
    if args.out:
        Path(args.out).write_text(report_csv(reports))
        print(f"wrote {args.out}")


def cmd_eval(args):
    from .cornell_data import IW, OW, load_dataset
    from .evaluate import cross_validate

    records, report = load_dataset(args.dataset)
    print(f"dataset: {report.n_scenes} scenes, {report.n_pos} positive / "
          f"{report.n_neg} negative rectangles"
          + (f", {report.n_skipped_groups} skipped groups" if report.n_skipped_groups else ""))
    predictor = _load_predictor(args.predictor)
    mode = IW if args.split.lower() == "iw" else OW
    result = cross_validate(records, predictor, mode, folds=args.folds,
                            rng_seed=args.seed, out_size=args.out_size)
    print(result.summary())
    if args.out:
        rows = [["fold", "n_records", "n_success", "accuracy_pct"]]
        for f in result.folds:
            rows.append([f.fold, f.n_records, f.n_success, f"{100 * f.accuracy:.2f}"])
        rows.append(["all", result.n_records, result.n_success,
                     f"{100 * result.accuracy:.2f}"])
        with open(args.out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        print(f"wrote {args.out}")


def cmd_augment(args):
    from .cornell_data import AugmentSpec, augment_with_transforms, load_dataset, write_scene

    records, _ = load_dataset(args.dataset)
    out_root = Path(args.out) / "aug"
    out_root.mkdir(parents=True, exist_ok=True)
    spec = AugmentSpec(crop_jitter=args.jitter, rotation_range=args.rotation,
                       zoom_range=(args.zoom_min, args.zoom_max),
                       count_per_record=args.per_record, rng_seed=args.seed)
    manifest = []
    n_out = 0
    for rec in records:
        for aug_rec, transform in augment_with_transforms(rec, spec):
            write_scene(out_root, aug_rec)
            sidecar = {
                "id": aug_rec.id,
                "source_id": rec.id,
                "rotation_rad": transform.theta,
                "zoom": transform.scale,
                "shift_u": transform.shift[0],
                "shift_v": transform.shift[1],
            }
            (out_root / f"{aug_rec.id}.transform.json").write_text(
                json.dumps(sidecar, indent=2) + "\n")
            manifest.append((aug_rec.id, aug_rec.object_id))
            n_out += 1
    with open(out_root / "objects.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "object_id"])
        writer.writerows(manifest)
    print(f"wrote {n_out} augmented records to {out_root}")


def cmd_grasp_detect(args):
    from .cornell_data import inpaint, preprocess, read_depth_pgm
    from .evaluate import DEFAULT_INPUT_SIZE
    from .grasp_geometry import decode_grasp_map, rect_from_pixel, rects_to_text

    predictor = _load_predictor("heuristic" if args.heuristic else f"weights:{args.weights}")
    depth = read_depth_pgm(args.depth)
    size = getattr(predictor, "input_size", None) or DEFAULT_INPUT_SIZE
    processed, transform = preprocess(inpaint(depth), out_size=size)
    grasp_map = predictor.predict(processed.values[None])
    picks = decode_grasp_map(grasp_map, k=args.k, min_separation=args.min_separation)
    inverse = transform.inverse()
    rects = [inverse.apply_rect(rect_from_pixel(gp)) for gp in picks if gp.omega > 0]
    text = rects_to_text(rects)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(rects)} rectangles to {args.out}")
    else:
        sys.stdout.write(text)
    for gp in picks:
        print(f"  grasp at ({gp.u:.0f}, {gp.v:.0f})  phi {gp.phi:+.3f} rad  "
              f"width {gp.omega:.1f} px  q {gp.q:.3f}")


def _parse_floats(text, n, what):
    parts = text.replace(",", " ").split()
    if len(parts) != n:
        raise SystemExit(f"{what} needs {n} numbers, got {len(parts)}")
    return [float(p) for p in parts]


def cmd_ik(args):
    from .arm_model import Pose
    from .geometry import quat_normalize
    from .ik_engine import DEFAULT_LOOSE, DEFAULT_TIGHT, solve_two_stage

    chain = _load_chain(args)
    vals = _parse_floats(args.pose, 7, "--pose")
    target = Pose(vals[:3], quat_normalize(vals[3:]))
    seed = np.zeros(len(chain))
    if args.seed_joints:
        seed = np.asarray(_parse_floats(args.seed_joints, len(chain), "--seed-joints"))
    r = solve_two_stage(chain, target, seed, DEFAULT_LOOSE, DEFAULT_TIGHT)
    print(f"status {r.status} (stage {r.stage}), pos_err {r.pos_err:.2e} m, "
          f"ori_err {r.ori_err:.2e} rad, {r.iterations} iterations, "
          f"{r.elapsed * 1e3:.1f} ms")
    print("joints:", " ".join(f"{x:.6f}" for x in r.joints))


def cmd_fk(args):
    from .arm_model import forward_kinematics

    chain = _load_chain(args)
    q = _parse_floats(args.joints, len(chain), "--joints")
    pose = forward_kinematics(chain, q)
    print("position:", " ".join(f"{x:.6f}" for x in pose.position))
    print("quaternion (w x y z):", " ".join(f"{x:.6f}" for x in pose.orientation))


def cmd_make_fixture(args):
    from .synthetic import write_synthetic_dataset

    n_scenes, n_pos, n_neg = write_synthetic_dataset(
        args.out, n_scenes=args.scenes, seed=args.seed)
    print(f"wrote {n_scenes} scenes ({n_pos} positive / {n_neg} negative "
          f"rectangles) to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="armkit", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the teleop/grasp HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--chain-config", help="chain config file (default: stock 7-DoF arm)")
    p.add_argument("--ui", help="serve a built sandbox UI directory at /ui")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench", help="run the IK solve-rate benchmark")
    p.add_argument("--cases", type=int, default=10000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", help="write the CSV report here")
    p.add_argument("--chain-config")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="cross-validated grasp detection evaluation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=["iw", "ow"], default="iw")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--predictor", default="heuristic",
                   help="heuristic or weights:<file>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write per-fold CSV here")
    p.add_argument("--out-size", type=int, default=None,
                   help="override the preprocessing size")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("augment", help="write an augmented copy of a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-record", type=int, default=11)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=8.0, help="crop jitter in pixels")
    p.add_argument("--rotation", type=float, default=0.6, help="rotation range in radians")
    p.add_argument("--zoom-min", type=float, default=0.9)
    p.add_argument("--zoom-max", type=float, default=1.1)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("grasp-detect", help="detect grasps in a depth PGM")
    p.add_argument("--depth", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--heuristic", action="store_true")
    group.add_argument("--weights", help="weight bundle file")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--min-separation", type=float, default=10.0)
    p.add_argument("--out", help="write rectangles here (4 'x y' lines each)")
    p.set_defaults(func=cmd_grasp_detect)

    p = sub.add_parser("ik", help="solve one target pose")
    p.add_argument("--pose", required=True, help='"x y z qw qx qy qz"')
    p.add_argument("--seed-joints", help="seed joint values (default zeros)")
    p.add_argument("--chain-config")
    p.set_defaults(func=cmd_ik)

    p = sub.add_parser("fk", help="forward kinematics of joint values")
    p.add_argument("--joints", required=True, help="joint values in radians")
    p.add_argument("--chain-config")
    p.set_defaults(func=cmd_fk)

    p = sub.add_parser("make-fixture", help="write a synthetic labeled dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, default=20)
    p.add_argument("--seed", type=int, default=20240831)
    p.set_defaults(func=cmd_make_fixture)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
