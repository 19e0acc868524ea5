"""Command line interface.

Subcommands:

    synth     generate a synthetic cohort CSV
    eda       exploratory statistics (CSV tables + PNG figures)
    train     fit one pipeline on a full cohort and write a checkpoint
    evaluate  cross-validate pipelines and write a results table + figure
    predict   apply a checkpoint to a cohort

Exit codes: 0 success, 1 bad input data or IO failure, 2 usage error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as checkpoint_io
from .config import Settings, build_settings
from .eda import (
    correlation_matrix,
    gradient_map,
    histogram,
    write_correlation,
    write_gradient_maps,
    write_histograms,
)
from .errors import DataError, NumericalError, UsageError
from .evaluate import (
    compute_metrics,
    format_report_lines,
    run_experiment_matrix,
    shuffle_split_cv,
    write_results_csv,
)
from .ingest import SynthSpec, generate_synthetic, parse_cohort, write_cohort
from .pipelines import ALL_PIPELINES, VIEW_PIPELINE_SETS, fit_pipeline
from .records import FEATURES, build_view, feature_matrix, view_feature_names

VIEW_FLAGS = {"d1": "D1", "d2-mte": "D2-MTE", "d2-ete": "D2-ETE"}

EDA_BINS = 10
GRADIENT_PAIRS = (("t1", "t2"), ("mte", "ete"))


def _canonical_view(flag: str) -> str:
    if flag not in VIEW_FLAGS:
        raise UsageError(f"unknown view {flag!r}; expected one of {sorted(VIEW_FLAGS)}")
    return VIEW_FLAGS[flag]


def _load_cohort(path: str, settings: Settings):
    cohort = parse_cohort(path, maxima=settings.maxima())
    for rejection in cohort.rejections:
        print(f"note: line {rejection.line_no} rejected: {rejection.reason}",
              file=sys.stderr)
    if cohort.n_accepted == 0:
        raise DataError(f"empty cohort: no valid rows in {path}")
    return cohort


def cmd_synth(args, settings: Settings) -> int:
    targets = {
        name: float(settings.get(f"synth.corr.{name}"))
        for name in FEATURES
        if not np.isnan(float(settings.get(f"synth.corr.{name}")))
    }
    for item in args.corr or ():
        if "=" not in item:
            raise UsageError(f"--corr expects feature=r, got {item!r}")
        name, raw = item.split("=", 1)
        try:
            targets[name.strip()] = float(raw)
        except ValueError:
            raise UsageError(f"invalid correlation for {name!r}: {raw!r}") from None
    spec = SynthSpec(
        n_students=args.n if args.n is not None else int(settings.get("synth.n")),
        seed=args.seed if args.seed is not None else int(settings.get("synth.seed")),
        target_correlations=targets,
        weights=settings.weights(),
        noise_sd=(args.noise_sd if args.noise_sd is not None
                  else float(settings.get("synth.noise_sd"))),
        maxima=settings.maxima(),
        mean_fraction=float(settings.get("synth.mean_frac")),
        sd_fractions={name: float(settings.get(f"synth.sd_frac.{name}"))
                      for name in FEATURES},
        default_loading=float(settings.get("synth.default_loading")),
    )
    records = generate_synthetic(spec)
    write_cohort(records, args.out)
    print(f"wrote {len(records)} students to {args.out}")
    return 0


def cmd_eda(args, settings: Settings) -> int:
    from . import plots

    cohort = _load_cohort(args.input, settings)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem

    columns = list(FEATURES) + ["total"]
    hists = []
    for name in columns:
        values = [rec.get(name) for rec in cohort.records if rec.get(name) is not None]
        if values:
            hists.append(histogram(values, EDA_BINS, name=name))
    matrix, totals, _, _ = feature_matrix(cohort.records, FEATURES, require_total=True)
    if matrix.shape[0] < 2:
        raise DataError("need at least 2 complete rows for correlations")
    stacked = np.column_stack([matrix, totals])
    corr = correlation_matrix(stacked, tuple(columns))
    gmaps = []
    for x_name, y_name in GRADIENT_PAIRS:
        xi, yi = FEATURES.index(x_name), FEATURES.index(y_name)
        gmaps.append(gradient_map(matrix[:, xi], matrix[:, yi], totals,
                                  bins=EDA_BINS, x_name=x_name, y_name=y_name))

    write_histograms(hists, out_dir / f"{stem}.hist.csv")
    write_correlation(corr, out_dir / f"{stem}.corr.csv")
    write_gradient_maps(gmaps, out_dir / f"{stem}.gmap.csv")
    plots.render_histograms(hists, out_dir / f"{stem}.hist.png")
    plots.render_correlation(corr, out_dir / f"{stem}.corr.png")
    plots.render_gradient_maps(gmaps, out_dir / f"{stem}.gmap.png")

    print(f"rows used for correlations: {matrix.shape[0]}")
    for name in FEATURES:
        print(f"corr({name}, total) = {corr.get(name, 'total'):.4f}")
    print(f"wrote {stem}.hist.csv, {stem}.corr.csv, {stem}.gmap.csv "
          f"(+ figures) in {out_dir}")
    return 0


def cmd_train(args, settings: Settings) -> int:
    cohort = _load_cohort(args.input, settings)
    view = build_view(cohort.records, _canonical_view(args.view))
    if view.n_rows == 0:
        raise DataError(f"no complete rows for view {args.view}")
    fitted = fit_pipeline(args.pipeline, view, settings=settings, seed=args.seed)
    checkpoint_io.save_checkpoint(fitted, args.out, seed=args.seed)
    metrics = compute_metrics(view.targets, fitted.predict(view.matrix))
    r2_text = "undefined" if metrics.r2 is None else f"{metrics.r2:.4f}"
    print(f"trained {args.pipeline} on {args.view} "
          f"({view.n_rows} rows, {view.n_excluded} excluded); "
          f"train r2 {r2_text}; checkpoint {args.out}")
    return 0


def cmd_evaluate(args, settings: Settings) -> int:
    from . import plots

    if bool(args.pipeline) == bool(args.all_pipelines):
        raise UsageError("give exactly one of --pipeline or --all-pipelines")
    cohort = _load_cohort(args.input, settings)
    view_name = _canonical_view(args.view)
    pipelines = (list(VIEW_PIPELINE_SETS[view_name]) if args.all_pipelines
                 else [args.pipeline])
    reports, failures = run_experiment_matrix(
        cohort.records, view_names=[view_name],
        pipelines={view_name: pipelines},
        n_folds=int(settings.get("eval.n_folds")),
        test_fraction=float(settings.get("eval.test_fraction")),
        seed=args.seed, settings=settings)
    for failure in failures:
        print(f"warning: {failure.pipeline} on {failure.view} failed: {failure.error}",
              file=sys.stderr)
    if not reports:
        raise NumericalError("every requested pipeline failed")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(reports, out_dir / "results.csv")
    plots.render_results(reports, out_dir / "results.png")
    for line in format_report_lines(reports):
        print(line)
    print(f"wrote {out_dir / 'results.csv'} and results.png")
    return 0


def cmd_predict(args, settings: Settings) -> int:
    fitted = checkpoint_io.load_checkpoint(args.checkpoint)
    if args.view is not None:
        requested = view_feature_names(_canonical_view(args.view))
        if requested != fitted.feature_names:
            raise UsageError(
                f"checkpoint expects {len(fitted.feature_names)} features "
                f"{fitted.feature_names}, view {args.view!r} supplies "
                f"{len(requested)} {requested}")
    cohort = _load_cohort(args.input, settings)
    matrix, _, ids, n_excluded = feature_matrix(
        cohort.records, fitted.feature_names, require_total=False)
    if matrix.shape[0] == 0:
        raise DataError(
            f"no rows with all of {fitted.feature_names} present to predict on")
    if n_excluded:
        print(f"note: {n_excluded} rows lacked required features and were skipped",
              file=sys.stderr)
    predictions = fitted.predict(matrix)
    with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("student_id,predicted_total\n")
        for student_id, value in zip(ids, predictions):
            handle.write(f"{student_id},{float(value)!r}\n")
    print(f"wrote {len(ids)} predictions to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorecast",
        description="Estimate final course scores from partial assessment records.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="flat key=value settings file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                       help="override one setting (repeatable)")

    p = sub.add_parser("synth", help="generate a synthetic cohort CSV")
    p.add_argument("--out", required=True, help="cohort CSV to write")
    p.add_argument("--n", type=int, default=None, help="number of students")
    p.add_argument("--seed", type=int, default=None, help="generator seed")
    p.add_argument("--noise-sd", type=float, default=None,
                   help="sd of the noise added to the composite total")
    p.add_argument("--corr", action="append", metavar="FEATURE=R",
                   help="target correlation with the total (repeatable)")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eda", help="exploratory statistics and figures")
    p.add_argument("--input", required=True, help="cohort CSV")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_eda)

    p = sub.add_parser("train", help="fit one pipeline and write a checkpoint")
    p.add_argument("--input", required=True, help="cohort CSV")
    p.add_argument("--view", required=True, choices=sorted(VIEW_FLAGS),
                   help="feature view")
    p.add_argument("--pipeline", required=True, choices=sorted(ALL_PIPELINES),
                   help="pipeline name")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint file to write")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="cross-validate pipelines on a view")
    p.add_argument("--input", required=True, help="cohort CSV")
    p.add_argument("--view", required=True, choices=sorted(VIEW_FLAGS))
    p.add_argument("--pipeline", default=None, choices=sorted(ALL_PIPELINES))
    p.add_argument("--all-pipelines", action="store_true",
                   help="run the view's full comparison set")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="apply a checkpoint to a cohort")
    p.add_argument("--input", required=True, help="cohort CSV")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--view", default=None, choices=sorted(VIEW_FLAGS),
                   help="verify the checkpoint was trained on this view")
    p.add_argument("--out", required=True, help="predictions CSV to write")
    common(p)
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = build_settings(args.config, tuple(args.set))
        return args.func(args, settings)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
