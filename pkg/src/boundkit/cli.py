"""Single command-line entry point.

Subcommands map one-to-one onto the library layers: validate, consistency,
generate, folds, augment, evaluate, synth, synth-eval and serve. Every output
is deterministic given config + seed; all randomness flows from seeds in the
project config (overridable with --seed), never from the clock.

Exit codes: 0 success, 1 diagnostics under --strict, 2 fatal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import consistency as consistency_mod
from . import harness, io, perturb, synth
from .diagnostics import Diagnostic

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_FATAL = 2


class FatalError(Exception):
    pass


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FatalError(f"cannot read {path}: {exc}") from None


def _print_diagnostics(diagnostics: list[Diagnostic]) -> None:
    for d in diagnostics:
        print(str(d), file=sys.stderr)


def _finish(diagnostics: list[Diagnostic], strict: bool) -> int:
    _print_diagnostics(diagnostics)
    if any(d.severity.value == "fatal" for d in diagnostics):
        return EXIT_FATAL
    if strict and diagnostics:
        return EXIT_DIAGNOSTICS
    return EXIT_OK


def _load_config(args) -> io.ProjectConfig:
    if getattr(args, "config", None):
        try:
            config = io.load_config(_read(args.config))
        except io.ConfigError as exc:
            raise FatalError(str(exc)) from None
    else:
        config = io.ProjectConfig()
    if getattr(args, "seed", None) is not None:
        config = config.with_seed(args.seed)
    return config


def _parse_annotations_or_die(path: str) -> tuple[list, list[Diagnostic]]:
    result = io.parse_annotations(_read(path))
    if result.fatal is not None:
        raise FatalError(str(result.fatal))
    return result.records, result.diagnostics


def _parse_videos_maybe(path: str | None) -> tuple[dict, list[Diagnostic]]:
    if not path:
        return {}, []
    result = io.parse_videos(_read(path))
    if result.fatal is not None:
        raise FatalError(str(result.fatal))
    return {m.video_id: m for m in result.records}, result.diagnostics


def _outdir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands


def cmd_validate(args) -> int:
    records, diagnostics = _parse_annotations_or_die(args.input)
    videos, video_diags = _parse_videos_maybe(args.videos)
    diagnostics = diagnostics + video_diags + io.validate_records(records, videos if videos else None)
    print(f"{len(records)} records, {len(diagnostics)} diagnostics")
    return _finish(diagnostics, args.strict)


def cmd_consistency(args) -> int:
    records, diagnostics = _parse_annotations_or_die(args.input)
    selector = consistency_mod.SchemeSelector(args.scheme)
    summary = consistency_mod.summarize(selector, records)
    out = _outdir(args)
    if summary.class_stats:
        (out / "consistency_boxplot.csv").write_bytes(consistency_mod.export_boxplot_data(summary.class_stats))
    (out / "consistency_instances.csv").write_bytes(consistency_mod.export_instance_data(summary))
    if summary.overall is not None:
        o = summary.overall
        print(
            f"scheme={selector.value} instances={len(summary.instance_stats)} "
            f"n_pairs={o.n_pairs} mean={o.mean:.6f} std={o.std:.6f}"
        )
    else:
        print(f"scheme={selector.value} instances=0 n_pairs=0")
    return _finish(diagnostics + summary.diagnostics, args.strict)


def cmd_generate(args) -> int:
    config = _load_config(args)
    records, diagnostics = _parse_annotations_or_die(args.input)
    videos, video_diags = _parse_videos_maybe(args.videos)
    diagnostics += video_diags
    segments = []
    for rec in sorted(records, key=lambda r: r.annotation_id):
        video = videos.get(rec.video_id)
        segments.extend(
            perturb.generate(rec.span(), config.perturbation, video=video, source_id=rec.annotation_id)
        )
    out = _outdir(args)
    (out / "segments.csv").write_bytes(io.serialize_segments(segments))
    print(f"{len(records)} ground-truth segments, {len(segments)} generated segments")
    return _finish(diagnostics, args.strict)


def cmd_folds(args) -> int:
    config = _load_config(args)
    records, diagnostics = _parse_annotations_or_die(args.input)
    try:
        split = harness.make_folds(records, k=config.folds.k, seed=config.folds.seed, stratified=config.folds.stratified)
    except ValueError as exc:
        raise FatalError(str(exc)) from None
    out = _outdir(args)
    (out / "folds.csv").write_bytes(io.serialize_folds(split))
    print(f"{len(split.assignments)} annotations over {split.k} folds")
    return _finish(diagnostics, args.strict)


def _parse_folds_or_die(path: str) -> harness.FoldSplit:
    result = io.parse_folds(_read(path))
    if result.fatal is not None:
        raise FatalError(str(result.fatal))
    if not result.records:
        raise FatalError(f"{path} holds no fold assignments")
    return result.records[0]


def _parse_segments_or_die(path: str) -> tuple[list, list[Diagnostic]]:
    result = io.parse_segments(_read(path))
    if result.fatal is not None:
        raise FatalError(str(result.fatal))
    return result.records, result.diagnostics


def cmd_augment(args) -> int:
    config = _load_config(args)
    _, diagnostics = _parse_annotations_or_die(args.input)
    segments, seg_diags = _parse_segments_or_die(args.segments)
    split = _parse_folds_or_die(args.folds)
    diagnostics += seg_diags
    rows = []
    for fold in range(split.k):
        train_set = split.train_ids(fold)
        train = sorted(train_set)
        pool = [s for s in segments if s.source_annotation_id in train_set]
        try:
            augmented = harness.augment(train, pool, config.augmentation.factor, config.augmentation.seed + fold)
        except ValueError as exc:
            raise FatalError(f"fold {fold}: {exc}") from None
        rows.extend((fold, member, "gt") for member in augmented.gt_ids)
        rows.extend((fold, member, "generated") for member in augmented.generated_ids)
    out = _outdir(args)
    lines = ["fold,member_id,kind"] + [f"{f},{m},{k}" for f, m, k in rows]
    (out / "augmented.csv").write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    print(f"{len(rows)} training members over {split.k} folds")
    return _finish(diagnostics, args.strict)


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    records, diagnostics = _parse_annotations_or_die(args.annotations)
    segments, seg_diags = _parse_segments_or_die(args.segments)
    pred_result = io.parse_predictions(_read(args.input))
    if pred_result.fatal is not None:
        raise FatalError(str(pred_result.fatal))
    diagnostics += seg_diags + pred_result.diagnostics
    registry, registry_diags = harness.build_registry(records, segments)
    fold = None
    if args.folds:
        split = _parse_folds_or_die(args.folds)
        if args.fold is None:
            raise FatalError("--folds requires --fold to pick the test fold")
        fold = (split, args.fold)
    report, score_diags = harness.score(
        pred_result.records, registry, perturb.descriptor_bins(config.perturbation), fold=fold
    )
    diagnostics += registry_diags + score_diags
    out = _outdir(args)
    harness.export_report(report, out)
    gt = "n/a" if report.overall_gt_accuracy is None else f"{report.overall_gt_accuracy:.4f}"
    gen = "n/a" if report.overall_gen_accuracy is None else f"{report.overall_gen_accuracy:.4f}"
    print(f"gt_accuracy={gt} gen_accuracy={gen} classes_dropped={report.fraction_classes_dropped:.4f}")
    return _finish(diagnostics, args.strict)


def _load_spec(args) -> synth.SyntheticSpec:
    spec = synth.SyntheticSpec()
    if getattr(args, "spec", None):
        try:
            doc = json.loads(_read(args.spec).decode("utf-8"))
            if "action_duration_range" in doc:
                doc["action_duration_range"] = tuple(doc["action_duration_range"])
            spec = replace(spec, **doc)
        except (ValueError, TypeError) as exc:
            raise FatalError(f"bad synthetic spec: {exc}") from None
    if getattr(args, "seed", None) is not None:
        spec = replace(spec, seed=args.seed)
    return spec


def cmd_synth(args) -> int:
    spec = _load_spec(args)
    instances = synth.generate_dataset(spec)
    out = _outdir(args)
    (out / "annotations.csv").write_bytes(io.serialize_annotations([inst.gt for inst in instances]))
    (out / "videos.csv").write_bytes(io.serialize_videos([inst.meta for inst in instances]))
    features = out / "features"
    features.mkdir(exist_ok=True)
    for inst in instances:
        header = "frame_index," + ",".join(f"f{d}" for d in range(spec.feature_dim))
        lines = [header]
        for f in range(inst.stream.shape[0]):
            lines.append(f"{f}," + ",".join(f"{v:.6f}" for v in inst.stream[f]))
        (features / f"{inst.meta.video_id}.csv").write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    print(f"{len(instances)} instances, {spec.n_classes} classes")
    return EXIT_OK


def cmd_synth_eval(args) -> int:
    spec = _load_spec(args)
    config = _load_config(args)
    result = synth.run_benchmark(
        spec,
        perturbation=config.perturbation,
        k_folds=config.folds.k,
        fold_seed=config.folds.seed if args.config else None,
        sample_k=args.sample_k,
    )
    out = _outdir(args)
    harness.export_report(result.report, out)
    report = result.report
    gt = "n/a" if report.overall_gt_accuracy is None else f"{report.overall_gt_accuracy:.4f}"
    gen = "n/a" if report.overall_gen_accuracy is None else f"{report.overall_gen_accuracy:.4f}"
    print(f"gt_accuracy={gt} gen_accuracy={gen} n_generated={report.n_gen_predictions}")
    return _finish(result.diagnostics, args.strict)


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(args.project), host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boundkit", description="Temporal-bound annotation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output=True, config=True):
        if config:
            p.add_argument("--config", help="project config JSON")
            p.add_argument("--seed", type=int, help="override every configured seed")
        if output:
            p.add_argument("--output", required=True, help="output directory")
        p.add_argument("--strict", action="store_true", help="treat diagnostics as failures")

    p = sub.add_parser("validate", help="validate an annotation CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--videos", help="video metadata CSV for bounds checks")
    common(p, output=False, config=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("consistency", help="inter-annotator agreement statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--scheme", default="conventional", choices=[s.value for s in consistency_mod.SchemeSelector])
    common(p, config=False)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("generate", help="generate boundary-perturbed segments")
    p.add_argument("--input", required=True)
    p.add_argument("--videos", help="video metadata CSV for clipping")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("folds", help="build cross-validation folds")
    p.add_argument("--input", required=True)
    common(p)
    p.set_defaults(func=cmd_folds)

    p = sub.add_parser("augment", help="augment per-fold training sets from generated segments")
    p.add_argument("--input", required=True, help="annotation CSV")
    p.add_argument("--segments", required=True, help="generated segments CSV")
    p.add_argument("--folds", required=True, help="fold assignment CSV")
    common(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("evaluate", help="score a prediction file into an evaluation report")
    p.add_argument("--input", required=True, help="prediction CSV")
    p.add_argument("--annotations", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--folds", help="fold assignment CSV (with --fold, restrict scoring to one test fold)")
    p.add_argument("--fold", type=int, help="test fold index")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="emit a synthetic dataset (annotations, metadata, features)")
    p.add_argument("--spec", help="synthetic spec JSON")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_synth, strict=False)

    p = sub.add_parser("synth-eval", help="run the synthetic sensitivity benchmark end to end")
    p.add_argument("--spec", help="synthetic spec JSON")
    p.add_argument("--sample-k", type=int, default=20, help="frames sampled per query")
    common(p)
    p.set_defaults(func=cmd_synth_eval)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--project", required=True, help="project directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FatalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
