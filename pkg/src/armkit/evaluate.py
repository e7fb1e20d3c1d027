"""Cross-validated grasp detection evaluation.

For every validation record: inpaint, preprocess to the predictor's input
size, predict a grasp map, decode the best grasp, convert it to a
rectangle, map it back into the original image frame and score it with the
rectangle metric against the positive labels.

There is no training here; the same fixed predictor is scored on each
fold's validation records, which exercises the full IW/OW protocol.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cornell_data import inpaint, make_splits, preprocess
from .grasp_geometry import decode_grasp_map, grasp_success, rect_from_pixel

DEFAULT_INPUT_SIZE = 400


@dataclass(frozen=True)
class FoldResult:
    fold: int
    n_records: int
    n_success: int

    @property
    def accuracy(self) -> float:
        return self.n_success / self.n_records if self.n_records else 0.0


@dataclass(frozen=True)
class EvalReport:
    mode: str
    folds: tuple
    n_records: int
    n_success: int

    @property
    def accuracy(self) -> float:
        return self.n_success / self.n_records if self.n_records else 0.0

    def summary(self) -> str:
        lines = [f"{self.mode} split, {len(self.folds)} folds: "
                 f"accuracy {100 * self.accuracy:.1f}% "
                 f"({self.n_success}/{self.n_records})"]
        for f in self.folds:
            lines.append(f"  fold {f.fold}: {100 * f.accuracy:.1f}% "
                         f"({f.n_success}/{f.n_records})")
        return "\n".join(lines)


def detect_on_record(record, predictor, out_size=None, height_ratio=0.5):
    """Best predicted rectangle for one record, in original image
    coordinates. Returns None when the predictor yields no usable grasp."""
    size = out_size or getattr(predictor, "input_size", None) or DEFAULT_INPUT_SIZE
    processed, transform = preprocess(inpaint(record.depth), out_size=size)
    grasp_map = predictor.predict(processed.values[None])
    picks = decode_grasp_map(grasp_map, k=1)
    if not picks or picks[0].omega <= 0:
        return None
    rect = rect_from_pixel(picks[0], height_ratio=height_ratio)
    return transform.inverse().apply_rect(rect)


def evaluate_records(records, predictor, out_size=None) -> tuple[int, int]:
    """(n_success, n_scored) of top-1 detections over the given records."""
    n_success = 0
    n_scored = 0
    for rec in records:
        if not rec.pos_rects:
            continue
        n_scored += 1
        rect = detect_on_record(rec, predictor, out_size=out_size)
        if rect is not None and grasp_success(rect, rec.pos_rects):
            n_success += 1
    return n_success, n_scored


def cross_validate(records, predictor, mode: str, folds: int = 5,
                   rng_seed: int = 0, out_size=None) -> EvalReport:
    """Score the predictor on each fold's validation records."""
    records = list(records)
    split = make_splits(records, mode, folds=folds, rng_seed=rng_seed)
    by_id = {r.id: r for r in records}
    fold_results = []
    for fold in range(folds):
        val = [by_id[rid] for rid in split.fold_ids(fold)]
        n_success, n_scored = evaluate_records(val, predictor, out_size=out_size)
        fold_results.append(FoldResult(fold=fold, n_records=n_scored,
                                       n_success=n_success))
    return EvalReport(
        mode=mode,
        folds=tuple(fold_results),
        n_records=sum(f.n_records for f in fold_results),
        n_success=sum(f.n_success for f in fold_results),
    )
