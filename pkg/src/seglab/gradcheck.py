"""Finite-difference verification of the analytic loss gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import LossSpec, loss_eval


class StepTooLargeError(Exception):
    pass


@dataclass(frozen=True)
class GradCheckReport:
    kind: str
    max_rel_err: float
    max_abs_err: float
    worst_voxel: int
    passed: bool
    trials: int
    seed: int

    def line(self) -> str:
        return (
            f"kind={self.kind} max_rel_err={self.max_rel_err:.3e} "
            f"max_abs_err={self.max_abs_err:.3e} trials={self.trials} "
            f"passed={str(self.passed).lower()}"
        )


def finite_diff_grad(spec: LossSpec, y, p, step: float = 1e-4) -> np.ndarray:
    """Central differences (L(p+h) - L(p-h)) / 2h per voxel, values only."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    ya = np.asarray(getattr(y, "data", y), dtype=np.float64).ravel()
    pa = np.asarray(getattr(p, "data", p), dtype=np.float64).ravel().copy()
    if pa.min() - step < 0.0 or pa.max() + step > 1.0:
        raise StepTooLargeError("perturbed probabilities would leave [0, 1]")
    grad = np.empty_like(pa)
    for j in range(pa.size):
        orig = pa[j]
        pa[j] = orig + step
        hi = loss_eval(spec, ya, pa).value
        pa[j] = orig - step
        lo = loss_eval(spec, ya, pa).value
        pa[j] = orig
        grad[j] = (hi - lo) / (2.0 * step)
    return grad


def grad_check(spec: LossSpec, trials: int = 20, seed: int = 42,
               rel_tol: float = 1e-4, abs_tol: float = 1e-7,
               step: float = 1e-4, dims: tuple[int, int, int] = (5, 5, 5),
               corrupt: bool = False) -> GradCheckReport:
    """Compare analytic against finite-difference gradients on random pairs.

    Probabilities are drawn in [0.05, 0.95] so no clamp kink is crossed.
    corrupt flips the analytic gradient sign (test hook for the checker)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    n = dims[0] * dims[1] * dims[2]
    max_rel = 0.0
    max_abs = 0.0
    worst = 0
    passed = True
    for _ in range(trials):
        y = (rng.random(n) < 0.3).astype(np.float64)
        p = rng.uniform(0.05, 0.95, size=n)
        analytic = loss_eval(spec, y, p).grad
        if corrupt:
            analytic = -analytic
        numeric = finite_diff_grad(spec, y, p, step)
        abs_err = np.abs(analytic - numeric)
        scale = np.maximum(np.abs(numeric), np.abs(analytic))
        with np.errstate(divide="ignore", invalid="ignore"):
            rel_err = np.where(scale > 0, abs_err / scale, 0.0)
        # tiny gradient entries are judged on absolute error only
        small = scale < 1e-3
        bad = (rel_err > rel_tol) & ~(small & (abs_err <= abs_tol))
        if bad.any():
            passed = False
        j = int(np.argmax(np.where(bad, rel_err, 0.0))) if bad.any() else int(np.argmax(rel_err))
        if rel_err[j] > max_rel:
            max_rel = float(rel_err[j])
            worst = j
        max_abs = max(max_abs, float(abs_err.max()))
    return GradCheckReport(kind=spec.kind.value, max_rel_err=max_rel,
                           max_abs_err=max_abs, worst_voxel=worst,
                           passed=passed, trials=trials, seed=seed)
