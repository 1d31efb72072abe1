"""Batch command-line interface.

Exit codes: 0 success, 1 check failure, 2 IO/format error, 3 validation
error (bad shapes or flags). All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import gradcheck as gc
from . import metrics, stats, synth, trainer, volume
from .losses import ALL_KINDS, LossKind, LossSpec, MceVariant

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_IO = 2
EXIT_VALIDATION = 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _parse_triple(text, name):
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError(f"{name} must be three comma-separated ints, got {text!r}",
                       EXIT_VALIDATION)
    return tuple(int(p) for p in parts)


def _parse_kinds(text):
    if text == "all":
        return list(ALL_KINDS)
    try:
        return [LossKind(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise CliError(f"unknown loss kind in {text!r}: {exc}", EXIT_VALIDATION)


def _read_volume(path):
    try:
        return volume.read_volume(path)
    except OSError as exc:
        raise CliError(f"{path}: {exc}", EXIT_IO)
    except volume.VolumeError as exc:
        raise CliError(f"{path}: {exc}", EXIT_IO)


def _as_mask(grid, path):
    if isinstance(grid, volume.BinaryMask):
        return grid
    try:
        return volume.BinaryMask(grid.dims, grid.spacing, grid.data)
    except volume.VolumeError:
        raise CliError(f"{path}: ground truth must contain only 0/1 labels",
                       EXIT_VALIDATION)


def _as_prob(grid, path):
    try:
        return volume.ProbGrid(grid.dims, grid.spacing, grid.data)
    except volume.VolumeError:
        raise CliError(f"{path}: prediction values must lie in [0, 1]",
                       EXIT_VALIDATION)


def _loss_spec_from_args(args, kind=None):
    kwargs = {"kind": kind if kind is not None else LossKind(args.kind)}
    for name in ("alpha", "beta", "gamma", "pos_weight", "smooth"):
        val = getattr(args, name, None)
        if val is not None:
            kwargs[name] = val
    if getattr(args, "focal_exp", None) is not None:
        kwargs["focal_exp"] = args.focal_exp
    if getattr(args, "mce_variant", None) is not None:
        kwargs["mce_variant"] = MceVariant(args.mce_variant.replace("-", "_"))
    try:
        return LossSpec(**kwargs)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION)


def cmd_eval(args) -> int:
    gt = _as_mask(_read_volume(args.gt), args.gt)
    pred = _as_prob(_read_volume(args.pred), args.pred)
    if gt.dims != pred.dims:
        raise CliError(
            f"shape mismatch: {args.gt} has dims {gt.dims}, "
            f"{args.pred} has dims {pred.dims}", EXIT_VALIDATION)
    if not (0.0 < args.threshold < 1.0):
        raise CliError(f"--threshold must be in (0,1), got {args.threshold}",
                       EXIT_VALIDATION)
    report = metrics.full_report(gt, pred, threshold=args.threshold,
                                 min_overlap=args.min_overlap,
                                 case_id=Path(args.pred).stem)
    out = Path(args.out)
    if out.suffix == ".json":
        text = json.dumps(report.to_dict(), indent=2) + "\n"
    else:
        text = ",".join(metrics.CSV_COLUMNS) + "\n" + report.to_csv_row() + "\n"
    _write_text(out, text)
    return EXIT_OK


def cmd_loss(args) -> int:
    spec = _loss_spec_from_args(args)
    gt = _as_mask(_read_volume(args.gt), args.gt)
    pred = _as_prob(_read_volume(args.pred), args.pred)
    if gt.dims != pred.dims:
        raise CliError(
            f"shape mismatch: {args.gt} has dims {gt.dims}, "
            f"{args.pred} has dims {pred.dims}", EXIT_VALIDATION)
    from .losses import loss_eval
    ev = loss_eval(spec, gt, pred)
    import numpy as np
    print(f"{spec.to_kv()} value={ev.value!r} grad_l2={float(np.linalg.norm(ev.grad))!r}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    kinds = _parse_kinds(args.kinds)
    all_pass = True
    for kind in kinds:
        spec = LossSpec(kind=kind)
        report = gc.grad_check(spec, trials=args.trials, seed=args.seed,
                               rel_tol=args.rel_tol, abs_tol=args.abs_tol,
                               step=args.step, corrupt=args.corrupt)
        print(report.line())
        all_pass &= report.passed
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED


def cmd_synth(args) -> int:
    cfg = synth.PhantomConfig(
        dims=_parse_triple(args.dims, "--dims"),
        n_new_lesions=args.new_lesions,
        noise_sigma=args.noise,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.cases):
        seed = synth.case_seed(args.seed, i)
        case = synth.gen_phantom(cfg, seed)
        case_dir = out_dir / f"case_{i:03d}"
        case_dir.mkdir(exist_ok=True)
        volume.write_volume(case.baseline, case_dir / "baseline.segv")
        volume.write_volume(case.followup, case_dir / "followup.segv")
        volume.write_volume(case.new_lesion_mask, case_dir / "mask.segv")
        meta = {"case_id": case.case_id, "seed": seed, "config": cfg.to_dict()}
        _write_text(case_dir / "case.json", json.dumps(meta, indent=2) + "\n")
    return EXIT_OK


def run_bench(kinds, n_cases, seed, out_dir, iterations=250, lr=0.001,
              batch=4, patch=(32, 32, 32), noise=0.0, echo=print):
    """Train each loss on a shared phantom suite and write per-case and
    summary CSVs. Per-case rows are the held-out evaluations."""
    cfg = synth.PhantomConfig(noise_sigma=noise)
    train_cases = synth.make_suite(cfg, n_cases, seed, offset=0)
    heldout = synth.make_suite(cfg, n_cases, seed, offset=n_cases)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_case_path = out_dir / "per_case.csv"
    rows = []
    with open(per_case_path, "w") as fh:
        fh.write("loss," + ",".join(metrics.CSV_COLUMNS) + "\n")
        for kind in kinds:
            spec = LossSpec(kind=kind)
            tcfg = trainer.TrainConfig(learning_rate=lr, iterations=iterations,
                                       batch_size=batch, patch_dims=patch,
                                       seed=seed)
            history = trainer.train_toy(train_cases, spec, tcfg,
                                        eval_cases=heldout)
            for report in history.reports:
                rows.append((kind, report.case_id, report))
                fh.write(f"{kind.value},{report.to_csv_row()}\n")
            fh.flush()
            if echo:
                import numpy as np
                mean_dc = float(np.mean([r.dc for r in history.reports]))
                echo(f"bench {kind.value}: mean held-out dc={mean_dc:.4f} "
                     f"diverged={str(history.diverged).lower()}")
    summary = stats.aggregate_report(rows)
    _write_text(out_dir / "summary.csv", stats.summary_to_csv(summary))
    return rows, summary


def cmd_bench(args) -> int:
    kinds = _parse_kinds(args.losses)
    if args.cases < 1:
        raise CliError("--cases must be >= 1", EXIT_VALIDATION)
    run_bench(kinds, args.cases, args.seed, args.out,
              iterations=args.iterations, lr=args.lr, batch=args.batch,
              patch=_parse_triple(args.patch, "--patch"), noise=args.noise)
    return EXIT_OK


def cmd_report(args) -> int:
    per_case = Path(args.in_dir) / "per_case.csv"
    try:
        lines = per_case.read_text().strip().splitlines()
    except OSError as exc:
        raise CliError(f"{per_case}: {exc}", EXIT_IO)
    if not lines or not lines[0].startswith("loss,case_id"):
        raise CliError(f"{per_case}: not a bench per-case CSV", EXIT_IO)
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(metrics.CSV_COLUMNS) + 1:
            raise CliError(f"{per_case}: malformed row {line!r}", EXIT_IO)
        kind = cells[0]
        vals = dict(zip(metrics.CSV_COLUMNS, cells[1:]))
        report = metrics.MetricReport(
            case_id=vals["case_id"],
            dc=float(vals["dc"]), jc=float(vals["jc"]),
            hd=float(vals["hd"]) if vals["hd"] else None,
            asd=float(vals["asd"]) if vals["asd"] else None,
            voxel_pr=float(vals["voxel_pr"]), voxel_rc=float(vals["voxel_rc"]),
            voxel_f1=float(vals["voxel_f1"]),
            lesion_pr=float(vals["lesion_pr"]), lesion_rc=float(vals["lesion_rc"]),
            lesion_f1=float(vals["lesion_f1"]),
        )
        rows.append((kind, vals["case_id"], report))
    if not rows:
        raise CliError(f"{per_case}: no data rows", EXIT_IO)
    summary = stats.aggregate_report(rows)
    _write_text(Path(args.out), stats.summary_to_csv(summary))
    return EXIT_OK


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"{path}: {exc}", EXIT_IO)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seglab",
        description="Segmentation loss laboratory: losses, metrics, phantoms, "
                    "gradient checks, and benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="compute metrics for a prediction")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--min-overlap", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loss", help="evaluate one loss on a volume pair")
    p.add_argument("--kind", required=True,
                   choices=[k.value for k in ALL_KINDS])
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--focal-exp", type=float, dest="focal_exp")
    p.add_argument("--pos-weight", type=float, dest="pos_weight")
    p.add_argument("--smooth", type=float)
    p.add_argument("--mce-variant", choices=["canonical", "as-printed"],
                   dest="mce_variant")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--kinds", default="all")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--rel-tol", type=float, default=1e-4, dest="rel_tol")
    p.add_argument("--abs-tol", type=float, default=1e-7, dest="abs_tol")
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="write synthetic longitudinal cases")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cases", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dims", default="48,48,48")
    p.add_argument("--new-lesions", type=int, default=2, dest="new_lesions")
    p.add_argument("--noise", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="train every loss on a phantom suite")
    p.add_argument("--losses", required=True)
    p.add_argument("--cases", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=250)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--patch", default="32,32,32")
    p.add_argument("--noise", type=float, default=0.0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="re-aggregate a bench per-case CSV")
    p.add_argument("--in", required=True, dest="in_dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except metrics.ShapeMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
