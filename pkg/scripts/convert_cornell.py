#!/usr/bin/env python3
"""One-shot converter: original grasping-dataset files -> armkit layout.

The original distribution stores each scene as an ASCII point cloud
(pcdNNNN.txt) with "x y z rgb index" rows (index = row * 640 + col for a
640x480 image) plus pcdNNNNcpos.txt / pcdNNNNcneg.txt rectangle files whose
4-vertex groups start on a gripper-plate edge.

This script writes, for every scene found under --src:

    <dst>/pcdNNNNd.pgm      16-bit depth in millimeters (0 = missing)
    <dst>/pcdNNNNcpos.txt   rectangles, vertex cycle rotated by one so the
    <dst>/pcdNNNNcneg.txt   first edge runs along the grasp axis
    <dst>/objects.csv       copied from --objects-csv when given, otherwise
                            each scene becomes its own object id

Run once, then point tooling (and ARMKIT_CORNELL_ROOT for the acceptance
suite) at <dst>. Conversion is I/O plumbing, not part of the core library.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from armkit.cornell_data import DepthImage, write_depth_pgm  # noqa: E402

IMAGE_W = 640
IMAGE_H = 480


def read_pointcloud_depth(path: Path) -> DepthImage:
    values = np.zeros((IMAGE_H, IMAGE_W))
    mask = np.zeros((IMAGE_H, IMAGE_W), dtype=bool)
    with open(path) as f:
        in_data = False
        for line in f:
            line = line.strip()
            if not in_data:
                if line.startswith("DATA"):
                    in_data = True
                continue
            parts = line.split()
            if len(parts) < 5:
                continue
            try:
                z = float(parts[2])
                index = int(float(parts[4]))
            except ValueError:
                continue
            row, col = divmod(index, IMAGE_W)
            if 0 <= row < IMAGE_H and 0 <= col < IMAGE_W and np.isfinite(z) and z > 0:
                values[row, col] = z
                mask[row, col] = True
    return DepthImage(values, mask)


def rotate_rect_groups(text: str) -> str:
    """Shift each 4-line vertex cycle by one so edge 0->1 is the opening."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    out = []
    for i in range(0, len(lines) - len(lines) % 4, 4):
        group = lines[i:i + 4]
        out.extend(group[1:] + group[:1])
    return "\n".join(out) + ("\n" if out else "")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--src", required=True, help="original dataset root")
    parser.add_argument("--dst", required=True, help="output directory")
    parser.add_argument("--objects-csv",
                        help="optional scene_id,object_id manifest to copy")
    args = parser.parse_args()

    src = Path(args.src)
    dst = Path(args.dst)
    dst.mkdir(parents=True, exist_ok=True)

    clouds = sorted(p for p in src.rglob("pcd*.txt")
                    if not p.name.endswith(("cpos.txt", "cneg.txt")))
    if not clouds:
        raise SystemExit(f"no pcd*.txt point clouds under {src}")

    manifest = []
    for cloud in clouds:
        scene = cloud.stem              # pcdNNNN
        depth = read_pointcloud_depth(cloud)
        write_depth_pgm(dst / f"{scene}d.pgm", depth)
        for kind in ("cpos", "cneg"):
            rect_path = cloud.with_name(f"{scene}{kind}.txt")
            if rect_path.exists():
                (dst / rect_path.name).write_text(
                    rotate_rect_groups(rect_path.read_text()))
        manifest.append((scene, scene))
        print(f"converted {scene}")

    if args.objects_csv:
        (dst / "objects.csv").write_bytes(Path(args.objects_csv).read_bytes())
    else:
        with open(dst / "objects.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["scene_id", "object_id"])
            writer.writerows(manifest)
        print("note: no --objects-csv given; each scene maps to its own "
              "object id, which weakens OW splits")
    print(f"wrote {len(manifest)} scenes to {dst}")


if __name__ == "__main__":
    main()
