"""Command-line entry point: ``diseasefocus <subcommand> ...``.

Reports go to stdout (or ``--out``); diagnostics go to stderr.  Exit status
is 0 only when the requested output was fully produced.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from diseasefocus import __version__
from diseasefocus.categories import default_category_table, load_category_table
from diseasefocus.errors import DiseaseFocusError, EmptyGroup, ParseError
from diseasefocus.labels import LabelMap, read_label_map, write_label_map
from diseasefocus.metrics import MetricReport, evaluate, read_predictions
from diseasefocus.mutinfo import DEFAULT_BINS, load_region_overrides, rank_features, read_feature_csv
from diseasefocus.phantom import (
    PhantomSpec,
    make_focused_saliency,
    make_phantom,
    make_uniform_saliency,
    named_regions_spec,
)
from diseasefocus.regions import MODES, CohortMember, cohort_analysis, combined_df_score, stats_from_rows
from diseasefocus.reports import (
    df_rows_csv,
    dumps,
    make_manifest,
    region_table,
    region_table_csv,
    write_text,
)
from diseasefocus.saliency import compute_saliency, export_saliency, import_saliency, min_max_normalize
from diseasefocus.scoring import load_model
from diseasefocus.transforms import augment
from diseasefocus.volume import read_volume, write_volume


class CliError(Exception):
    pass


def _categories(args):
    return load_category_table(args.categories) if args.categories else default_category_table()


def _dims(text: str) -> tuple[int, int, int]:
    try:
        dims = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y,Z integers, got {text!r}") from None
    if len(dims) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated sizes, got {text!r}")
    return dims


# ---------------------------------------------------------------------------
# saliency


def cmd_saliency(args) -> int:
    if args.out is None:
        raise CliError("saliency needs --out for the output volume")
    if args.import_path:
        smap = import_saliency(args.import_path, already_absolute=args.already_absolute)
        inputs = [args.import_path]
        if args.image:
            inputs.append(args.image)
    else:
        if not args.model or not args.image:
            raise CliError("give --model MODEL.json and an image, or --import GRADIENT.nii")
        model = load_model(args.model)
        smap = compute_saliency(model, read_volume(args.image))
        inputs = [args.model, args.image]
    if not args.raw:
        smap = min_max_normalize(smap)
    export_saliency(smap, args.out)
    manifest = make_manifest(
        "saliency",
        {
            "model": args.model,
            "import": args.import_path,
            "already_absolute": args.already_absolute,
            "normalized": not args.raw,
        },
        inputs,
        timestamp=not args.no_timestamp,
    )
    manifest["output"] = str(args.out)
    manifest["warnings"] = list(smap.warnings)
    sys.stdout.write(dumps(manifest))
    return 0


# ---------------------------------------------------------------------------
# dfscore


def _read_cohort(path, default_labels: LabelMap | None, base: Path):
    members, inputs = [], [path]
    label_cache: dict[tuple, LabelMap] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"subject_id", "saliency", "outcome"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ParseError(1, f"cohort file needs columns {sorted(need)}", path)
        for row in reader:
            line = reader.line_num
            sal_path = base / row["saliency"]
            labels = default_labels
            if row.get("labels"):
                regions = row.get("regions")
                if not regions:
                    raise ParseError(line, "per-subject labels need a 'regions' column", path)
                key = (row["labels"], regions)
                if key not in label_cache:
                    label_cache[key] = read_label_map(base / row["labels"], base / regions)
                    inputs += [base / row["labels"], base / regions]
                labels = label_cache[key]
            if labels is None:
                raise ParseError(line, "no label map for subject (use --labels/--regions)", path)
            smap = min_max_normalize(import_saliency(sal_path))
            try:
                members.append(CohortMember(smap, row["outcome"].strip(), labels, row["subject_id"]))
            except ValueError as exc:
                raise ParseError(line, str(exc), path) from None
            inputs.append(sal_path)
    return members, inputs


def _read_stats_rows(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"group", "region", "M_r"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ParseError(1, f"stats file needs columns {sorted(need)}", path)
        rows = []
        for row in reader:
            try:
                float(row["M_r"])
            except (TypeError, ValueError):
                raise ParseError(reader.line_num, f"bad M_r {row['M_r']!r}", path) from None
            rows.append(row)
    if not rows:
        raise EmptyGroup(f"{path}: no region rows")
    return rows


def cmd_dfscore(args) -> int:
    cats = _categories(args)
    inputs = [args.categories] if args.categories else []
    params = {"top_k": args.top_k, "mode": args.mode, "categories": args.categories or "default"}

    if args.stats:
        by_model = stats_from_rows(_read_stats_rows(args.stats), args.top_k, cats, args.mode)
        inputs.append(args.stats)
        reports = [r for group in by_model.values() for r in group]
        models = {m: {"groups": [r.group for r in rs], "df_score": combined_df_score(rs)} for m, rs in by_model.items()}
        groups = []
    else:
        if not args.cohort:
            raise CliError("dfscore needs --cohort COHORT.csv or --stats STATS.csv")
        default_labels = None
        if args.labels:
            if not args.regions:
                raise CliError("--labels needs --regions REGIONS.tsv")
            default_labels = read_label_map(args.labels, args.regions)
            inputs += [args.labels, args.regions]
        cohort_path = Path(args.cohort)
        members, cohort_inputs = _read_cohort(cohort_path, default_labels, cohort_path.parent)
        inputs += cohort_inputs
        result = cohort_analysis(
            members, cats, mode=args.mode, k=args.top_k, model_id=args.model_id, include_all=args.include_all
        )
        reports = list(result.reports)
        outcome_reports = [r for r in reports if r.group != "ALL"]
        models = {args.model_id: {"groups": [r.group for r in reports], "df_score": combined_df_score(outcome_reports)}}
        groups = [{"group": g.group, "n_subjects": g.n_subjects} for g in result.groups]
        params["include_all"] = args.include_all

    if not args.background_diagnostic:
        reports = [_strip_background(r) for r in reports]
    if args.table_out:
        Path(args.table_out).write_text(region_table_csv(reports))

    if args.format == "csv":
        write_text(df_rows_csv(reports), args.out)
        return 0
    payload = {
        "manifest": make_manifest("dfscore", params, inputs, timestamp=not args.no_timestamp),
        "models": models,
        "groups": groups,
        "reports": [r.to_dict() for r in reports],
        "region_table": region_table(reports),
    }
    write_text(dumps(payload), args.out)
    return 0


def _strip_background(r):
    return replace(r, background_median=None)


# ---------------------------------------------------------------------------
# metrics / mi


def cmd_metrics(args) -> int:
    records = read_predictions(args.predictions)
    report = evaluate(records, args.threshold)
    if args.format == "csv":
        cols = list(MetricReport.COLUMNS) + ["TP", "TN", "FP", "FN"]
        row = report.table_row()
        c = report.counts
        row.update(TP=c.tp, TN=c.tn, FP=c.fp, FN=c.fn)
        write_text(",".join(cols) + "\n" + ",".join(str(row[k]) for k in cols) + "\n", args.out)
        return 0
    payload = {
        "manifest": make_manifest(
            "metrics", {"threshold": args.threshold}, [args.predictions], timestamp=not args.no_timestamp
        ),
        "n_records": len(records),
        "metrics": report.to_dict(),
        "table_row": report.table_row(),
    }
    write_text(dumps(payload), args.out)
    return 0


def cmd_mi(args) -> int:
    cats = _categories(args)
    matrix = read_feature_csv(args.features, label_column=args.label_column)
    overrides = load_region_overrides(args.region_map) if args.region_map else None
    ranking = rank_features(matrix, cats, bins=args.bins, k=args.top_k, region_overrides=overrides)
    if args.format == "csv":
        cols = ("rank", "feature", "mi_bits", "region", "category", "score")
        lines = [",".join(cols)]
        for f in ranking.to_dict()["features"]:
            lines.append(",".join(str(f[c]) for c in cols))
        write_text("\n".join(lines) + "\n", args.out)
        return 0
    inputs = [args.features] + [p for p in (args.categories, args.region_map) if p]
    payload = {
        "manifest": make_manifest(
            "mi",
            {"bins": args.bins, "top_k": args.top_k, "categories": args.categories or "default"},
            inputs,
            timestamp=not args.no_timestamp,
        ),
        "ranking": ranking.to_dict(),
    }
    write_text(dumps(payload), args.out)
    return 0


# ---------------------------------------------------------------------------
# phantom / augment


def cmd_phantom(args) -> int:
    if args.named_regions:
        spec = named_regions_spec(noise_sigma=args.noise_sigma, seed=args.seed)
    elif args.spec:
        spec = PhantomSpec.load(args.spec)
    else:
        raise CliError("give a phantom spec JSON file or --named-regions")
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    image, labels = make_phantom(spec)
    prefix = out_dir / args.prefix
    written = {
        "image": f"{prefix}_image.nii",
        "labels": f"{prefix}_labels.nii",
        "regions": f"{prefix}_regions.tsv",
    }
    write_volume(image, written["image"], "float32" if args.float32 else "float64")
    write_label_map(labels, written["labels"], written["regions"])
    if args.saliency != "none":
        if args.saliency == "uniform":
            smap = make_uniform_saliency(labels, args.seed)
        else:
            cat = args.saliency.upper()
            focus = [n for n in _categories(args).names(cat) if n in labels.name_to_id()]
            smap = make_focused_saliency(labels, focus, seed=args.seed, jitter=args.jitter)
        written["saliency"] = f"{prefix}_saliency.nii"
        export_saliency(smap, written["saliency"])
    manifest = make_manifest(
        "phantom",
        {"spec": spec.to_dict() if not args.named_regions else "named-regions", "saliency": args.saliency,
         "seed": args.seed},
        [args.spec] if args.spec else [],
        timestamp=not args.no_timestamp,
    )
    manifest["outputs"] = written
    sys.stdout.write(dumps(manifest))
    return 0


def cmd_augment(args) -> int:
    if args.out is None:
        raise CliError("augment needs --out for the output volume")
    if args.dilate and args.erode:
        raise CliError("choose at most one of --dilate / --erode")
    vol = read_volume(args.input)
    out = augment(
        vol,
        dilate=args.dilate,
        erode=args.erode,
        se_size=args.se_size,
        crop=args.crop,
        rotate_max=args.rotate_max,
        seed=args.seed,
    )
    write_volume(out, args.out, "float64" if vol.scalar_kind == "float64" else "float32")
    manifest = make_manifest(
        "augment",
        {
            "dilate": args.dilate,
            "erode": args.erode,
            "se_size": args.se_size,
            "crop": list(args.crop) if args.crop else None,
            "rotate_max": args.rotate_max,
            "seed": args.seed,
        },
        [args.input],
        timestamp=not args.no_timestamp,
    )
    manifest["output"] = str(args.out)
    manifest["dims"] = list(out.dims)
    sys.stdout.write(dumps(manifest))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (reports default to stdout)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--no-timestamp", action="store_true", help="omit the manifest timestamp")
    common.add_argument("--top-k", type=int, default=10, help="regions/features in the ranking (default 10)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(prog="diseasefocus", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("saliency", parents=[common], help="gradient saliency map of a volume")
    p.add_argument("image", nargs="?", help="input image (.nii / .nii.gz)")
    p.add_argument("--model", help="model parameter JSON")
    p.add_argument("--import", dest="import_path", metavar="GRAD", help="precomputed gradient volume")
    p.add_argument("--already-absolute", action="store_true", help="imported volume is already |gradient|")
    p.add_argument("--raw", action="store_true", help="skip min-max normalization")
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("dfscore", parents=[common], help="region ranking and Disease-Focus score")
    p.add_argument("--cohort", help="CSV: subject_id,saliency,outcome[,labels,regions]")
    p.add_argument("--stats", help="CSV of precomputed stats: [model,]group,region,M_r[,voxel_count]")
    p.add_argument("--labels", help="label map shared by all subjects")
    p.add_argument("--regions", help="region table TSV for --labels")
    p.add_argument("--categories", help="category table TSV (default: shipped table)")
    p.add_argument("--mode", choices=MODES, default="pooled")
    p.add_argument("--model-id", default="model")
    p.add_argument("--include-all", action="store_true", help="also report the whole cohort as group ALL")
    p.add_argument("--background-diagnostic", action="store_true", help="report median background saliency")
    p.add_argument("--table-out", help="write the side-by-side (region, M_r) table as CSV")
    p.set_defaults(func=cmd_dfscore)

    p = sub.add_parser("metrics", parents=[common], help="classification metrics from predictions")
    p.add_argument("predictions", help="CSV: subject_id,true_label,score")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("mi", parents=[common], help="mutual-information feature ranking")
    p.add_argument("features", help="CSV with feature columns and a label column")
    p.add_argument("--categories")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--label-column", default="label")
    p.add_argument("--region-map", help="TSV feature<TAB>region overriding suffix stripping")
    p.set_defaults(func=cmd_mi)

    p = sub.add_parser("phantom", parents=[common], help="synthetic image + label map (--out is a directory)")
    p.add_argument("spec", nargs="?", help="phantom spec JSON")
    p.add_argument("--named-regions", action="store_true", help="use the built-in region-vocabulary phantom")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="noise for --named-regions")
    p.add_argument("--prefix", default="phantom")
    p.add_argument("--float32", action="store_true", help="store the image as float32")
    p.add_argument("--saliency", choices=("none", "c1", "c2", "uniform"), default="none",
                   help="also emit a saliency map focused on a category, or uniform noise")
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--categories")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("augment", parents=[common], help="morphology / crop / rotation augmentation")
    p.add_argument("input")
    p.add_argument("--dilate", action="store_true")
    p.add_argument("--erode", action="store_true")
    p.add_argument("--se-size", type=int, default=3)
    p.add_argument("--crop", type=_dims, metavar="X,Y,Z")
    p.add_argument("--rotate-max", type=float, metavar="DEG")
    p.set_defaults(func=cmd_augment)
    return parser


def _warn_to_stderr(message, category, filename, lineno, file=None, line=None):
    sys.stderr.write(f"warning: {message}\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.top_k < 1:
        parser.error("--top-k must be positive")
    saved = warnings.showwarning
    warnings.showwarning = _warn_to_stderr
    try:
        return args.func(args)
    except (DiseaseFocusError, CliError, ValueError, KeyError, OSError) as exc:
        if isinstance(exc, OSError) and exc.filename:
            msg = f"{exc.strerror}: {exc.filename}"
        else:
            msg = str(exc)
        sys.stderr.write(f"error: {type(exc).__name__}: {msg}\n")
        return 1
    finally:
        warnings.showwarning = saved


if __name__ == "__main__":
    raise SystemExit(main())
