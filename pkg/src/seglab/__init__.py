"""Desk-scale laboratory for binary segmentation loss functions.

Exact forward/gradient implementations of thirteen losses built around a
hybrid Tversky/cross-entropy loss, surface-distance and detection metrics,
synthetic longitudinal lesion phantoms, a toy differentiable trainer, and
stability statistics.
"""

from .volume import (
    VoxelGrid, BinaryMask, ProbGrid,
    new_grid, new_mask, new_prob, binarize, read_volume, write_volume,
)
from .losses import (
    LossKind, MceVariant, LossSpec, LossEval, ALL_KINDS,
    tversky_index, loss_mce, loss_hytver, loss_comparator, loss_eval,
)
from .metrics import (
    SurfacePointSet, LabelGrid, MetricReport,
    overlap_metrics, surface_extract, hausdorff, asd,
    hausdorff_bruteforce, asd_bruteforce,
    connected_components, lesion_detection_metrics, full_report,
)
from .gradcheck import GradCheckReport, finite_diff_grad, grad_check
from .synth import (
    PhantomConfig, LongitudinalCase,
    gen_phantom, difference_map, weighted_crop, case_seed, make_suite,
)
from .trainer import (
    ToyModel, TrainConfig, TrainHistory, Optimizer,
    featurize, predict, train_toy, batch_loss_and_grad,
)
from .stats import BoxSummary, cv, box_summary, aggregate_report, summary_to_csv

__version__ = "0.1.0"
