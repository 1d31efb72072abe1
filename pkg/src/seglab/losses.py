"""Segmentation loss functions with analytic gradients.

Thirteen losses built on four foundations (Dice, cross-entropy, focal,
Tversky). Every evaluation returns both the scalar value and the exact
gradient with respect to the predicted per-voxel probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .volume import BinaryMask, ProbGrid


class ShapeMismatchError(Exception):
    pass


class UnknownKindError(Exception):
    pass


class LossKind(str, Enum):
    DICE = "dice"
    CE = "ce"
    FOCAL = "focal"
    TVERSKY = "tversky"
    SYM_UNIFIED_FOCAL = "sym_unified_focal"
    ASYM_UNIFIED_FOCAL = "asym_unified_focal"
    LOGCOSH_DICE = "logcosh_dice"
    DICE_CE = "dice_ce"
    FOCAL_DICE = "focal_dice"
    FOCAL_TVERSKY = "focal_tversky"
    COMBO = "combo"
    WEIGHTED_CE = "weighted_ce"
    HYTVER = "hytver"


ALL_KINDS = list(LossKind)


class MceVariant(str, Enum):
    # "as_printed" keeps the sign-inconsistent positive term beta*(y - log p);
    # it is not a usable training loss but is retained for fidelity experiments.
    CANONICAL = "canonical"
    AS_PRINTED = "as_printed"


# FocalTversky/FocalDice raise the base loss to this power by default; the
# plain focal CE uses exponent 2.
FOCAL_EXP_DEFAULT = 2.0
FOCAL_EXP_TVERSKY = 4.0 / 3.0


@dataclass(frozen=True)
class LossSpec:
    """Loss kind plus hyperparameters.

    alpha weights false negatives inside the Tversky index, beta weights the
    positive term of the modified cross-entropy, gamma mixes the two halves
    of hybrid losses.
    """

    kind: LossKind
    alpha: float = 0.7
    beta: float = 0.5
    gamma: float = 0.5
    focal_exp: float | None = None
    pos_weight: float = 2.0
    smooth: float = 1e-6
    clamp_eps: float = 1e-7
    mce_variant: MceVariant = MceVariant.CANONICAL

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        object.__setattr__(self, "mce_variant", MceVariant(self.mce_variant))
        if self.focal_exp is None:
            default = (
                FOCAL_EXP_TVERSKY
                if self.kind in (LossKind.FOCAL_TVERSKY, LossKind.FOCAL_DICE)
                else FOCAL_EXP_DEFAULT
            )
            object.__setattr__(self, "focal_exp", default)
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")
        if not (0.0 < self.beta < 1.0):
            raise ValueError(f"beta must be in (0,1), got {self.beta}")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must be in [0,1], got {self.gamma}")
        if self.focal_exp <= 0:
            raise ValueError(f"focal_exp must be > 0, got {self.focal_exp}")
        if self.pos_weight <= 0:
            raise ValueError(f"pos_weight must be > 0, got {self.pos_weight}")
        if self.smooth < 0:
            raise ValueError(f"smooth must be >= 0, got {self.smooth}")
        if not (0.0 < self.clamp_eps < 0.5):
            raise ValueError(f"clamp_eps must be in (0, 0.5), got {self.clamp_eps}")

    def with_(self, **kwargs) -> "LossSpec":
        return replace(self, **kwargs)

    def to_kv(self) -> str:
        """Flat key-value text form, e.g. 'kind=hytver alpha=0.7 ...'."""
        return (
            f"kind={self.kind.value} alpha={self.alpha!r} beta={self.beta!r} "
            f"gamma={self.gamma!r} focal_exp={self.focal_exp!r} "
            f"pos_weight={self.pos_weight!r} smooth={self.smooth!r} "
            f"clamp_eps={self.clamp_eps!r} mce_variant={self.mce_variant.value}"
        )

    @classmethod
    def from_kv(cls, text: str) -> "LossSpec":
        kwargs = {}
        for token in text.split():
            key, _, val = token.partition("=")
            if not val:
                raise ValueError(f"malformed key-value token {token!r}")
            if key in ("kind", "mce_variant"):
                kwargs[key] = val
            else:
                kwargs[key] = float(val)
        if "kind" not in kwargs:
            raise ValueError("loss spec text missing kind=")
        return cls(**kwargs)


@dataclass(frozen=True)
class LossEval:
    """Scalar loss value plus gradient w.r.t. the flat probability array."""

    value: float
    grad: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not np.isfinite(self.value) or not np.all(np.isfinite(self.grad)):
            raise FloatingPointError("non-finite loss value or gradient")


def _as_arrays(y, p):
    ya = y.data if isinstance(y, BinaryMask) else np.asarray(y, dtype=np.float64).ravel()
    pa = p.data if isinstance(p, ProbGrid) else np.asarray(p, dtype=np.float64).ravel()
    if ya.shape != pa.shape:
        raise ShapeMismatchError(f"mask has {ya.size} voxels, probs {pa.size}")
    if isinstance(y, BinaryMask) and isinstance(p, ProbGrid) and y.dims != p.dims:
        raise ShapeMismatchError(f"dims differ: {y.dims} vs {p.dims}")
    return np.asarray(ya, dtype=np.float64), np.asarray(pa, dtype=np.float64)


# ---------------------------------------------------------------------------
# building blocks; each returns (value, grad) over float64 arrays


def _tversky(y, p, alpha, smooth):
    """Tversky index and its gradient. FN weighted by alpha, FP by 1-alpha."""
    inter = float(np.dot(y, p))
    fn = float(np.dot(y, 1.0 - p))
    fp = float(np.dot(1.0 - y, p))
    num = inter + smooth
    den = inter + alpha * fn + (1.0 - alpha) * fp + smooth
    ti = num / den
    # d den / d p_i = 1 - alpha for every voxel
    grad = (y * den - num * (1.0 - alpha)) / (den * den)
    return ti, grad


def _dice_loss(y, p, smooth):
    inter = float(np.dot(y, p))
    union = float(y.sum() + p.sum())
    num = 2.0 * inter + smooth
    den = union + smooth
    value = 1.0 - num / den
    grad = -(2.0 * y * den - num) / (den * den)
    return value, grad


def _bce(y, p, eps, w_pos=1.0, w_neg=1.0):
    pc = np.clip(p, eps, 1.0 - eps)
    n = y.size
    value = -float(np.sum(w_pos * y * np.log(pc) + w_neg * (1.0 - y) * np.log1p(-pc))) / n
    grad = -(w_pos * y / pc - w_neg * (1.0 - y) / (1.0 - pc)) / n
    return value, grad


def _mce(y, p, beta, variant, eps):
    if variant is MceVariant.CANONICAL:
        return _bce(y, p, eps, w_pos=beta, w_neg=1.0 - beta)
    # as printed: -(1/N) sum beta*(y - log p) + (1-beta)*(1-y)*log(1-p)
    pc = np.clip(p, eps, 1.0 - eps)
    n = y.size
    value = -float(np.sum(beta * (y - np.log(pc)) + (1.0 - beta) * (1.0 - y) * np.log1p(-pc))) / n
    grad = (beta / pc + (1.0 - beta) * (1.0 - y) / (1.0 - pc)) / n
    return value, grad


def _focal(y, p, exp, eps):
    pt = y * p + (1.0 - y) * (1.0 - p)
    ptc = np.clip(pt, eps, 1.0 - eps)
    n = y.size
    one_minus = 1.0 - pt
    value = -float(np.sum(one_minus ** exp * np.log(ptc))) / n
    d_dpt = -(-exp * one_minus ** (exp - 1.0) * np.log(ptc) + one_minus ** exp / ptc) / n
    grad = d_dpt * (2.0 * y - 1.0)
    return value, grad


def _modified_focal_ce(y, p, delta, exp, eps, suppress_foreground):
    """Class-weighted focal CE used inside the unified focal losses.

    The asymmetric variant keeps the foreground term unsuppressed."""
    pc = np.clip(p, eps, 1.0 - eps)
    n = y.size
    if suppress_foreground:
        fg = delta * y * (1.0 - p) ** exp * np.log(pc)
        d_fg = delta * y * (
            -exp * (1.0 - p) ** (exp - 1.0) * np.log(pc) + (1.0 - p) ** exp / pc
        )
    else:
        fg = delta * y * np.log(pc)
        d_fg = delta * y / pc
    bg = (1.0 - delta) * (1.0 - y) * p ** exp * np.log1p(-pc)
    d_bg = (1.0 - delta) * (1.0 - y) * (
        exp * p ** (exp - 1.0) * np.log1p(-pc) - p ** exp / (1.0 - pc)
    )
    value = -float(np.sum(fg + bg)) / n
    grad = -(d_fg + d_bg) / n
    return value, grad


def _powered(value, grad, exp):
    """(value)**exp with chained gradient; value assumed >= 0."""
    if value <= 0.0:  # rounding can push a zero Dice/Tversky loss slightly negative
        return 0.0, np.zeros_like(grad)
    return value ** exp, exp * value ** (exp - 1.0) * grad


# ---------------------------------------------------------------------------
# public operations


def tversky_index(y, p, alpha: float = 0.7, smooth: float = 1e-6) -> float:
    """Tversky index: overlap / (overlap + alpha*FN + (1-alpha)*FP)."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    ya, pa = _as_arrays(y, p)
    ti, _ = _tversky(ya, pa, alpha, smooth)
    return ti


def loss_mce(y, p, beta: float = 0.5,
             variant: MceVariant = MceVariant.CANONICAL,
             clamp_eps: float = 1e-7) -> LossEval:
    """Modified cross-entropy: beta on the positive term, 1-beta on the negative."""
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must be in (0,1), got {beta}")
    ya, pa = _as_arrays(y, p)
    value, grad = _mce(ya, pa, beta, MceVariant(variant), clamp_eps)
    return LossEval(value=value, grad=grad)


def loss_hytver(y, p, spec: LossSpec) -> LossEval:
    """Hybrid loss: gamma * mCE + (1 - gamma) * (1 - Tversky index)."""
    ya, pa = _as_arrays(y, p)
    return LossEval(*_eval_hytver(ya, pa, spec))


def _eval_hytver(ya, pa, spec):
    mce_v, mce_g = _mce(ya, pa, spec.beta, spec.mce_variant, spec.clamp_eps)
    ti, ti_g = _tversky(ya, pa, spec.alpha, spec.smooth)
    g = spec.gamma
    return g * mce_v + (1.0 - g) * (1.0 - ti), g * mce_g - (1.0 - g) * ti_g


def loss_comparator(kind, y, p, spec: LossSpec) -> LossEval:
    """Evaluate one of the twelve non-hybrid-Tversky losses."""
    kind = LossKind(kind)
    if kind is LossKind.HYTVER:
        raise UnknownKindError("use loss_hytver for the hybrid Tversky loss")
    ya, pa = _as_arrays(y, p)
    return LossEval(*_eval_kind(kind, ya, pa, spec))


def _eval_kind(kind, ya, pa, spec):
    eps = spec.clamp_eps
    if kind is LossKind.DICE:
        return _dice_loss(ya, pa, spec.smooth)
    if kind is LossKind.CE:
        return _bce(ya, pa, eps)
    if kind is LossKind.WEIGHTED_CE:
        return _bce(ya, pa, eps, w_pos=spec.pos_weight)
    if kind is LossKind.FOCAL:
        return _focal(ya, pa, spec.focal_exp, eps)
    if kind is LossKind.TVERSKY:
        ti, ti_g = _tversky(ya, pa, spec.alpha, spec.smooth)
        return 1.0 - ti, -ti_g
    if kind is LossKind.FOCAL_TVERSKY:
        ti, ti_g = _tversky(ya, pa, spec.alpha, spec.smooth)
        return _powered(1.0 - ti, -ti_g, spec.focal_exp)
    if kind is LossKind.FOCAL_DICE:
        d, d_g = _dice_loss(ya, pa, spec.smooth)
        return _powered(d, d_g, spec.focal_exp)
    if kind is LossKind.LOGCOSH_DICE:
        d, d_g = _dice_loss(ya, pa, spec.smooth)
        return float(np.log(np.cosh(d))), np.tanh(d) * d_g
    if kind is LossKind.DICE_CE:
        d, d_g = _dice_loss(ya, pa, spec.smooth)
        c, c_g = _bce(ya, pa, eps)
        return d + c, d_g + c_g
    if kind is LossKind.COMBO:
        m, m_g = _mce(ya, pa, spec.beta, spec.mce_variant, eps)
        d, d_g = _dice_loss(ya, pa, spec.smooth)
        g = spec.gamma
        return g * m + (1.0 - g) * d, g * m_g + (1.0 - g) * d_g
    if kind in (LossKind.SYM_UNIFIED_FOCAL, LossKind.ASYM_UNIFIED_FOCAL):
        suppress_fg = kind is LossKind.SYM_UNIFIED_FOCAL
        c, c_g = _modified_focal_ce(ya, pa, spec.alpha, spec.focal_exp, eps, suppress_fg)
        ti, ti_g = _tversky(ya, pa, spec.alpha, spec.smooth)
        t, t_g = _powered(1.0 - ti, -ti_g, spec.focal_exp)
        g = spec.gamma
        return g * c + (1.0 - g) * t, g * c_g + (1.0 - g) * t_g
    if kind is LossKind.HYTVER:
        return _eval_hytver(ya, pa, spec)
    raise UnknownKindError(f"unknown loss kind {kind!r}")


def loss_eval(spec: LossSpec, y, p) -> LossEval:
    """Dispatch to the loss named by spec.kind."""
    ya, pa = _as_arrays(y, p)
    return LossEval(*_eval_kind(spec.kind, ya, pa, spec))
