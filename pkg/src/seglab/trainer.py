"""Toy per-voxel segmentation model and training loop.

The model is linear-sigmoid over five hand-built features per voxel, which
keeps backpropagation exact and lets every loss run to convergence in
seconds while exercising its full gradient path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import ndimage
from scipy.special import expit

from .losses import LossSpec, loss_eval
from .metrics import MetricReport, full_report
from .synth import LongitudinalCase, difference_map, weighted_crop
from .volume import ProbGrid

N_FEATURES = 5  # baseline, followup, difference, 3x3x3 mean of difference, bias


class NonFiniteLossError(Exception):
    pass


class FeatureMismatchError(Exception):
    pass


class Optimizer(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass(frozen=True)
class ToyModel:
    weights: np.ndarray  # (N_FEATURES,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if w.size != N_FEATURES:
            raise FeatureMismatchError(f"expected {N_FEATURES} weights, got {w.size}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls) -> "ToyModel":
        return cls(weights=np.zeros(N_FEATURES))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    iterations: int = 250
    batch_size: int = 4
    optimizer: Optimizer = Optimizer.ADAM
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    patch_dims: tuple[int, int, int] = (32, 32, 32)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if self.learning_rate < 0 or self.iterations <= 0 or self.batch_size <= 0:
            raise ValueError("learning rate must be >= 0; iterations and batch size positive")


@dataclass
class TrainHistory:
    losses: list[float]
    model: ToyModel
    reports: list[MetricReport] = field(default_factory=list)
    diverged: bool = False


def featurize(case: LongitudinalCase) -> np.ndarray:
    """Per-voxel feature matrix, shape (n_voxels, N_FEATURES)."""
    b = case.baseline.volume()
    f = case.followup.volume()
    d = f - b
    # zero-padded 3x3x3 neighbourhood mean of the difference map
    local = ndimage.uniform_filter(d, size=3, mode="constant", cval=0.0)
    n = b.size
    feats = np.empty((n, N_FEATURES))
    feats[:, 0] = b.ravel()
    feats[:, 1] = f.ravel()
    feats[:, 2] = d.ravel()
    feats[:, 3] = local.ravel()
    feats[:, 4] = 1.0
    return feats


def predict(model: ToyModel, case: LongitudinalCase) -> ProbGrid:
    """Sigmoid of the linear score per voxel."""
    p = expit(featurize(case) @ model.weights)
    # expit saturates to exact 0/1 for huge scores; keep probs in (0,1)
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return ProbGrid(case.baseline.dims, case.baseline.spacing, p)


class _Adam:
    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.m = np.zeros(N_FEATURES)
        self.v = np.zeros(N_FEATURES)
        self.t = 0

    def step(self, w, grad):
        cfg = self.cfg
        self.t += 1
        self.m = cfg.adam_beta1 * self.m + (1.0 - cfg.adam_beta1) * grad
        self.v = cfg.adam_beta2 * self.v + (1.0 - cfg.adam_beta2) * grad * grad
        m_hat = self.m / (1.0 - cfg.adam_beta1 ** self.t)
        v_hat = self.v / (1.0 - cfg.adam_beta2 ** self.t)
        return w - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def batch_loss_and_grad(weights: np.ndarray, crops, loss: LossSpec):
    """Mean loss over crops and its gradient in weight space."""
    total = 0.0
    grad_w = np.zeros(N_FEATURES)
    for crop in crops:
        feats = featurize(crop)
        p = np.clip(expit(feats @ weights), 1e-12, 1.0 - 1e-12)
        ev = loss_eval(loss, crop.new_lesion_mask.data, p)
        total += ev.value
        grad_w += feats.T @ (ev.grad * p * (1.0 - p))
    k = len(crops)
    return total / k, grad_w / k


def train_toy(cases, loss: LossSpec, cfg: TrainConfig,
              eval_cases=None) -> TrainHistory:
    """Train the linear-sigmoid model with weighted-crop batches.

    Deterministic for a fixed cfg.seed. On a non-finite loss the loop
    aborts and returns the history accumulated so far with diverged set."""
    if not cases:
        raise ValueError("need at least one training case")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xC0FFEE]))
    w = np.zeros(N_FEATURES)
    adam = _Adam(cfg) if cfg.optimizer is Optimizer.ADAM else None
    losses: list[float] = []
    diverged = False
    for _ in range(cfg.iterations):
        crops = []
        for _ in range(cfg.batch_size):
            case = cases[int(rng.integers(len(cases)))]
            crops.append(weighted_crop(case, cfg.patch_dims,
                                       seed=int(rng.integers(2 ** 63))))
        try:
            value, grad_w = batch_loss_and_grad(w, crops, loss)
        except FloatingPointError:
            diverged = True
            break
        if not np.isfinite(value) or not np.all(np.isfinite(grad_w)):
            diverged = True
            break
        losses.append(value)
        with np.errstate(over="ignore"):  # overflow here is the divergence signal
            w_next = adam.step(w, grad_w) if adam is not None \
                else w - cfg.learning_rate * grad_w
        if not np.all(np.isfinite(w_next)):
            diverged = True
            break
        w = w_next
    model = ToyModel(weights=w)
    reports = []
    for case in (eval_cases if eval_cases is not None else cases):
        reports.append(full_report(case.new_lesion_mask, predict(model, case),
                                   threshold=0.5, case_id=case.case_id))
    return TrainHistory(losses=losses, model=model, reports=reports,
                        diverged=diverged)
