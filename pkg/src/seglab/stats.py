"""Stability statistics over per-case metric reports.

Coefficient of variation and Tukey boxplot summaries, plus the per-loss
aggregation that turns bench rows into a summary table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import LossKind
from .metrics import MetricReport


class ZeroMeanError(Exception):
    pass


class TooFewValuesError(Exception):
    pass


class EmptyInputError(Exception):
    pass


SUMMARY_COLUMNS = (
    ["loss", "n", "dc_mean", "jc_mean", "hd_mean", "asd_mean", "pr_mean",
     "f1_mean", "hd_asd_excluded", "dc_cv", "pr_cv", "f1_cv"]
    + [f"{m}_{s}" for m in ("dc", "pr", "f1")
       for s in ("median", "q1", "q3", "outlier_count")]
)


@dataclass(frozen=True)
class BoxSummary:
    median: float
    q1: float
    q3: float
    iqr: float
    lower_whisker: float
    upper_whisker: float
    outliers: tuple[float, ...]


def cv(values) -> float:
    """Coefficient of variation: sample standard deviation / mean."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise TooFewValuesError("cv needs at least two values")
    mean = x.mean()
    if mean == 0.0:
        raise ZeroMeanError("cv undefined for zero mean")
    return float(x.std(ddof=1) / mean)


def box_summary(values) -> BoxSummary:
    """Quartiles by linear interpolation with Tukey 1.5*IQR fences."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    if x.size == 0:
        raise TooFewValuesError("box_summary needs at least one value")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75], method="linear")
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = x[(x < lo_fence) | (x > hi_fence)]
    return BoxSummary(median=float(med), q1=float(q1), q3=float(q3),
                      iqr=float(iqr),
                      lower_whisker=float(inside.min()),
                      upper_whisker=float(inside.max()),
                      outliers=tuple(float(v) for v in outliers))


def _safe_cv(values):
    try:
        return cv(values)
    except (TooFewValuesError, ZeroMeanError):
        return None


def aggregate_report(rows) -> list[dict]:
    """Per-loss summary from (loss_kind, case_id, MetricReport) rows.

    Losses are emitted in enum order; absent HD/ASD values are excluded
    from their means and counted. The PR column tracks voxel precision and
    the F1 column lesion-level F1 (the component-count reading of the
    separate F1 metric)."""
    if not rows:
        raise EmptyInputError("no rows to aggregate")
    by_loss: dict[str, list[MetricReport]] = {}
    for kind, _case_id, report in rows:
        key = kind.value if isinstance(kind, LossKind) else str(kind)
        by_loss.setdefault(key, []).append(report)
    enum_order = {k.value: i for i, k in enumerate(LossKind)}
    ordered = sorted(by_loss, key=lambda k: (enum_order.get(k, len(enum_order)), k))
    out = []
    for key in ordered:
        reports = by_loss[key]
        # sorted so the reductions are invariant to row order
        dc = sorted(r.dc for r in reports)
        jc = sorted(r.jc for r in reports)
        pr = sorted(r.voxel_pr for r in reports)
        f1 = sorted(r.lesion_f1 for r in reports)
        hd = sorted(r.hd for r in reports if r.hd is not None)
        asd = sorted(r.asd for r in reports if r.asd is not None)
        row = {
            "loss": key,
            "n": len(reports),
            "dc_mean": float(np.mean(dc)),
            "jc_mean": float(np.mean(jc)),
            "hd_mean": float(np.mean(hd)) if hd else None,
            "asd_mean": float(np.mean(asd)) if asd else None,
            "pr_mean": float(np.mean(pr)),
            "f1_mean": float(np.mean(f1)),
            "hd_asd_excluded": len(reports) - len(hd),
            "dc_cv": _safe_cv(dc),
            "pr_cv": _safe_cv(pr),
            "f1_cv": _safe_cv(f1),
        }
        for name, vals in (("dc", dc), ("pr", pr), ("f1", f1)):
            box = box_summary(vals)
            row[f"{name}_median"] = box.median
            row[f"{name}_q1"] = box.q1
            row[f"{name}_q3"] = box.q3
            row[f"{name}_outlier_count"] = len(box.outliers)
        out.append(row)
    return out


def summary_to_csv(rows: list[dict]) -> str:
    """Render aggregate_report output as CSV (absent values empty)."""
    lines = [",".join(SUMMARY_COLUMNS)]
    for row in rows:
        cells = []
        for col in SUMMARY_COLUMNS:
            v = row[col]
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(repr(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
