"""Command-line harness.

Usage:
    maskd gen-corpus --n 10000 --seed 0 --out data/corpus.jsonl
    maskd train-teacher --corpus data/corpus.jsonl --name teacher
    maskd distill --teacher <run>/model.ckpt.json --distill-set <run>/distill_set.jsonl --mask salient
    maskd self-distill --model <ckpt> --distill-set <jsonl>
    maskd ablate --teacher <ckpt> --distill-set <jsonl> --corpus <jsonl> --masks response,visual,question
    maskd analyze --what all --model <ckpt> --teacher <ckpt> --corpus <jsonl>

Run commands accept ``--config FILE`` (``key = value`` lines); explicit
flags override the file, which overrides the defaults. Exit codes: 0 on
success, 1 on a runtime failure, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections.abc import Callable, Iterable
from pathlib import Path

from pydantic import ValidationError

from maskd.ablate import AblationGrid, parse_list, parse_mask_axis, parse_rho_ranges, parse_seeds, run_ablation
from maskd.analysis import (
    answer_accuracy,
    interval_kl_decay,
    load_diagnostics,
    masked_distance_histogram,
    mean_visual_attention_map,
    salient_mass_curve,
    visual_attention_curve,
    write_accuracy_csv,
    write_curve_csv,
    write_histogram_csv,
    write_map_csv,
    write_mass_curve_csv,
    write_profile_csv,
)
from maskd.budget.thresholds import ThresholdMode
from maskd.corpus import CorpusParams, CorpusRecord, file_sha256, gen_corpus, load_corpus, write_records
from maskd.distill import (
    DistillConfig,
    DistillMaskKind,
    LossKind,
    TeacherConfig,
    TraceSource,
    build_distill_set,
    run_training,
    train_teacher,
)
from maskd.masking.selection import Strategy
from maskd.model import Model, ModelConfig, build_model, load_checkpoint, save_checkpoint
from maskd.runs import (
    SNAPSHOT_FILE,
    output_root,
    parse_config_file,
    prepare_run_dir,
    resolve_config,
    write_provenance,
)
from maskd.settings import get_settings
from maskd.types import ConfigError, DataError, MaskdError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

ANALYSES = ("curve", "kl-decay", "histogram", "map", "accuracy", "salient-mass", "all")


class UsageError(ConfigError):
    """A required value is missing from both flags and config file."""


# ─────────────────────────────────────────────────────────────────────────────
# Defaults per command (also the set of keys a config file may name)
# ─────────────────────────────────────────────────────────────────────────────

_STUDENT_MODEL = ModelConfig.student_default()
_TEACHER_MODEL = ModelConfig.teacher_default()

MODEL_KEYS = ("vocab_size", "d_model", "n_heads", "n_layers", "max_seq_len")


def _model_defaults(config: ModelConfig) -> dict[str, object]:
    return {k: getattr(config, k) for k in MODEL_KEYS}


def _distill_defaults() -> dict[str, object]:
    return dict(DistillConfig().model_dump())


RUN_DEFAULTS: dict[str, object] = {"name": None, "seed": 0, "max_new": 64}

DEFAULTS: dict[str, dict[str, object]] = {
    "train-teacher": {
        **RUN_DEFAULTS,
        "corpus": None,
        **_model_defaults(_TEACHER_MODEL),
        **{k: v for k, v in TeacherConfig().model_dump().items() if k not in ("seed", "max_new")},
    },
    "distill": {
        **RUN_DEFAULTS,
        **_distill_defaults(),
        "teacher": None,
        "student": None,
        "distill_set": None,
        "traces": TraceSource.TEACHER.value,
        "corpus": None,
        **_model_defaults(_STUDENT_MODEL),
    },
    "self-distill": {**RUN_DEFAULTS, **_distill_defaults(), "model": None, "distill_set": None, "corpus": None},
    "ablate": {
        **RUN_DEFAULTS,
        **_distill_defaults(),
        "teacher": None,
        "distill_set": None,
        "corpus": None,
        "masks": "salient",
        "strategies": "high_attention",
        "threshold_modes": "self_paced",
        "rho_ranges": "0.3:0.5",
        "seeds": "0",
        "workers": 1,
        "eval_n": 200,
        **_model_defaults(_STUDENT_MODEL),
    },
    "analyze": {
        **RUN_DEFAULTS,
        "what": "all",
        "model": None,
        "teacher": None,
        "corpus": None,
        "split": "eval",
        "run": None,
        "tau": None,
        "k": 8,
        "max_k": 8,
        "sample_index": 0,
        "limit": 200,
    },
}


# ─────────────────────────────────────────────────────────────────────────────
# Parser
# ─────────────────────────────────────────────────────────────────────────────


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value config file (flags override it)")
    p.add_argument("--seed", type=int, help="Run seed (default: 0)")
    p.add_argument("--out-dir", type=Path, help="Parent of the run directory (default: $MASKD_HOME/runs)")
    p.add_argument("--name", help="Run directory name (default: <command>-seed<seed>)")
    p.add_argument("--force", action="store_true", help="Overwrite an existing run directory")
    p.add_argument("--max-new", type=int, help="Greedy decoding budget (default: 64)")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d-model", type=int, help="Residual width")
    p.add_argument("--n-heads", type=int, help="Attention heads")
    p.add_argument("--n-layers", type=int, help="Transformer blocks")
    p.add_argument("--max-seq-len", type=int, help="Position table size")


def _add_distill_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, help="Distillation temperature (default: 2.0)")
    p.add_argument("--rho-min", type=float, help="Lowest masking budget (default: 0.3)")
    p.add_argument("--rho-max", type=float, help="Highest masking budget (default: 0.5)")
    p.add_argument("--epsilon", type=float, help="Log floor of the difficulty score (default: 1e-8)")
    p.add_argument("--loss", dest="loss_kind", choices=[k.value for k in LossKind], help="KL direction")
    p.add_argument("--mask", dest="mask_kind", choices=[k.value for k in DistillMaskKind], help="Mask kind")
    p.add_argument("--strategy", dest="selection_strategy", choices=[s.value for s in Strategy], help="Prefix order")
    p.add_argument("--threshold-mode", choices=[m.value for m in ThresholdMode], help="Budget rule")
    p.add_argument("--threshold-param", type=float, help="Static rho, attention cut-off or masking ratio")
    p.add_argument("--aux-weight-shared", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--exclude-immediate-prev", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--scale-divergence-by-tau", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--dump-masks", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--epochs", type=int, help="Passes over the distill set")
    p.add_argument("--batch-size", type=int, help="Sequences per step")
    p.add_argument("--diag-interval", type=int, help="Steps between metrics rows")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maskd", description="Salient reasoning-prefix masking distillation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="Generate a synthetic lookup corpus")
    p.add_argument("--n", type=int, default=10000, help="Number of samples (default: 10000)")
    p.add_argument("--seed", type=int, default=0, help="Corpus seed (default: 0)")
    p.add_argument("--hops", type=int, choices=[1, 2], default=2, help="Lookup depth (default: 2)")
    p.add_argument("--n-facts", type=int, default=6, help="Facts per table (default: 6)")
    p.add_argument("--out", type=Path, required=True, help="Output JSONL path")

    p = sub.add_parser("train-teacher", help="Train the teacher and build the distill set")
    _add_run_flags(p)
    _add_model_flags(p)
    p.add_argument("--corpus", type=Path, help="Corpus JSONL (train split is used)")
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--epochs", type=int, help="Passes over the train split")
    p.add_argument("--batch-size", type=int, help="Sequences per step")
    p.add_argument("--diag-interval", type=int, help="Steps per recorded loss interval")

    p = sub.add_parser("distill", help="Distill a teacher into a student")
    _add_run_flags(p)
    _add_model_flags(p)
    _add_distill_flags(p)
    p.add_argument("--teacher", type=Path, help="Teacher checkpoint")
    p.add_argument("--student", type=Path, help="Student checkpoint (default: fresh student)")
    p.add_argument("--distill-set", type=Path, help="Teacher traces JSONL")
    p.add_argument(
        "--traces",
        choices=[s.value for s in TraceSource],
        help="Distill on the teacher traces as given, or regenerate them from the student (default: teacher)",
    )
    p.add_argument("--corpus", type=Path, help="Corpus whose eval split is scored after training")

    p = sub.add_parser("self-distill", help="Self-distill a model against its own detached predictions")
    _add_run_flags(p)
    _add_distill_flags(p)
    p.add_argument("--model", type=Path, help="Model checkpoint")
    p.add_argument("--distill-set", type=Path, help="Traces JSONL")
    p.add_argument("--corpus", type=Path, help="Corpus whose eval split is scored after training")

    p = sub.add_parser("ablate", help="Sweep a grid of masking configurations")
    _add_run_flags(p)
    _add_model_flags(p)
    _add_distill_flags(p)
    p.add_argument("--teacher", type=Path, help="Teacher checkpoint")
    p.add_argument("--distill-set", type=Path, help="Teacher traces JSONL")
    p.add_argument("--corpus", type=Path, help="Corpus whose eval split scores each cell")
    p.add_argument("--masks", help="Comma list of mask kinds (aliases: response, visual, question, none)")
    p.add_argument("--strategies", help="Comma list of selection strategies")
    p.add_argument("--threshold-modes", help="Comma list of threshold modes")
    p.add_argument("--rho-ranges", help="Comma list of min:max budget ranges")
    p.add_argument("--seeds", help="Comma list of seeds")
    p.add_argument("--workers", type=int, help="Cells run in parallel threads (default: 1)")
    p.add_argument("--eval-n", type=int, help="Eval samples scored per cell (default: 200)")

    p = sub.add_parser("analyze", help="Write analysis CSVs")
    _add_run_flags(p)
    p.add_argument("--what", choices=ANALYSES, help="Analysis to run (default: all)")
    p.add_argument("--model", type=Path, help="Model checkpoint to analyze")
    p.add_argument("--teacher", type=Path, help="Teacher checkpoint (kl-decay)")
    p.add_argument("--corpus", type=Path, help="Samples JSONL")
    p.add_argument("--split", choices=["train", "eval"], help="Corpus split (default: eval)")
    p.add_argument("--run", type=Path, help="Run directory whose diagnostics feed the histogram")
    p.add_argument("--k", type=int, help="Interval count for kl-decay (default: 8)")
    p.add_argument("--tau", type=float, help="Divergence temperature for kl-decay (default: the --run tau, else 1.0)")
    p.add_argument("--max-k", type=int, help="Largest k of the salient-mass curve (default: 8)")
    p.add_argument("--sample-index", type=int, help="Sample used by the map analysis (default: 0)")
    p.add_argument("--limit", type=int, help="Samples used per analysis (default: 200)")
    return parser


# ─────────────────────────────────────────────────────────────────────────────
# Resolution helpers
# ─────────────────────────────────────────────────────────────────────────────


def resolve(args: argparse.Namespace) -> dict[str, object]:
    defaults = DEFAULTS[args.command]
    file_values = parse_config_file(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items() if k in defaults}
    values = resolve_config(defaults, file_values, flags)
    if values["name"] is None:
        values["name"] = f"{args.command}-seed{values['seed']}"
    return values


def _path(values: dict[str, object], key: str, what: str, required: bool = True) -> Path | None:
    raw = values.get(key)
    if raw is None or raw == "None":
        if required:
            raise UsageError(f"--{key.replace('_', '-')} is required ({what}; flag or config file)")
        return None
    path = Path(str(raw))
    if not path.exists():
        raise DataError(f"missing {what}: {path}")
    return path


def _int(values: dict[str, object], key: str) -> int:
    try:
        return int(str(values[key]))
    except ValueError:
        raise ConfigError(f"{key} must be an integer (got {values[key]!r})") from None


def _distill_config(values: dict[str, object]) -> DistillConfig:
    return DistillConfig(**{k: values[k] for k in DistillConfig.model_fields})


def _model_config(values: dict[str, object], seed: int) -> ModelConfig:
    return ModelConfig(**{k: values[k] for k in MODEL_KEYS}, seed=seed)


def _start_run(
    args: argparse.Namespace, values: dict[str, object], corpus: Path | None, distill_set: Path | None = None
) -> Path:
    root, from_env = output_root(args.out_dir)
    run_dir = prepare_run_dir(root, str(values["name"]), args.force)
    write_provenance(run_dir, values, root, from_env, corpus, distill_set)
    return run_dir


def _emit(paths: Iterable[Path]) -> None:
    for path in paths:
        print(path)


def _eval_split(corpus: Path | None, limit: int | None = None) -> list:
    if corpus is None:
        return []
    records = load_corpus(corpus, "eval")
    return records[:limit] if limit is not None else records


# ─────────────────────────────────────────────────────────────────────────────
# Commands
# ─────────────────────────────────────────────────────────────────────────────


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    params = CorpusParams(n_facts=args.n_facts, hops=args.hops)
    summary = gen_corpus(args.n, args.seed, params, args.out, progress=get_settings().progress)
    print(summary.line())
    return EXIT_OK


def cmd_train_teacher(args: argparse.Namespace) -> int:
    values = resolve(args)
    corpus = _path(values, "corpus", "corpus file")
    seed = _int(values, "seed")
    tcfg = TeacherConfig(**{k: values[k] for k in TeacherConfig.model_fields if k != "seed"}, seed=seed)
    model_cfg = _model_config(values, seed)
    run_dir = _start_run(args, values, corpus)
    progress = get_settings().progress

    records = load_corpus(corpus, "train")
    run = train_teacher(model_cfg, records, tcfg, progress=progress)
    checkpoint = save_checkpoint(run.model, run_dir / "model.ckpt.json")
    metrics = run_dir / "metrics.csv"
    with metrics.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("interval", "loss"))
        writer.writerows((i, repr(loss)) for i, loss in enumerate(run.interval_losses))

    distill_set = build_distill_set(run.model, records, tcfg.max_new, progress=progress)
    header = f"maskd-distill-set teacher={checkpoint}"
    set_path = write_records(distill_set.records, run_dir / "distill_set.jsonl", header)
    summary = {"total": distill_set.total, "kept": distill_set.kept, "kept_ratio": distill_set.kept_ratio}
    eval_records = _eval_split(corpus)
    if eval_records:
        summary["teacher_eval_accuracy"] = answer_accuracy(run.model, eval_records, tcfg.max_new).fraction
    summary_path = run_dir / "distill_set.summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    _emit([checkpoint, metrics, set_path, summary_path])
    return EXIT_OK


def _score(run_dir: Path, model, corpus: Path | None, max_new: int) -> list[Path]:
    eval_records = _eval_split(corpus)
    if not eval_records:
        return []
    return [write_accuracy_csv([answer_accuracy(model, eval_records, max_new)], run_dir / "accuracy.csv")]


def _trace_source(values: dict[str, object]) -> TraceSource:
    try:
        return TraceSource(str(values["traces"]))
    except ValueError:
        choices = ", ".join(s.value for s in TraceSource)
        raise UsageError(f"traces must be one of {choices} (got {values['traces']!r})") from None


def _student_distill_set(
    student: Model, records: list[CorpusRecord], max_new: int, run_dir: Path, progress: bool
) -> tuple[list[CorpusRecord], Path]:
    """Regenerate the distill set from the student's greedy traces on the same prompts."""
    student_set = build_distill_set(student, records, max_new, progress=progress, source=TraceSource.STUDENT)
    path = write_records(student_set.records, run_dir / "student_distill_set.jsonl", "maskd-distill-set source=student")
    logger.info(f"Distilling on {student_set.kept} student traces")
    return student_set.records, path


def cmd_distill(args: argparse.Namespace) -> int:
    values = resolve(args)
    teacher_path = _path(values, "teacher", "teacher checkpoint")
    set_path = _path(values, "distill_set", "distill set")
    student_path = _path(values, "student", "student checkpoint", required=False)
    corpus = _path(values, "corpus", "corpus file", required=False)
    cfg = _distill_config(values)
    student = load_checkpoint(student_path) if student_path else build_model(_model_config(values, cfg.seed))
    traces = _trace_source(values)
    run_dir = _start_run(args, values | cfg.model_dump(), corpus, set_path)
    progress = get_settings().progress

    records = load_corpus(set_path)
    extra: list[Path] = []
    if traces is TraceSource.STUDENT:
        records, student_set = _student_distill_set(student, records, _int(values, "max_new"), run_dir, progress)
        extra.append(student_set)
    result = run_training(cfg, load_checkpoint(teacher_path), student, records, run_dir, progress=progress)
    scored = _score(run_dir, result.model, corpus, _int(values, "max_new"))
    _emit([*extra, result.checkpoint, result.metrics, *scored])
    return EXIT_OK


def cmd_self_distill(args: argparse.Namespace) -> int:
    values = resolve(args)
    model_path = _path(values, "model", "model checkpoint")
    set_path = _path(values, "distill_set", "distill set")
    corpus = _path(values, "corpus", "corpus file", required=False)
    cfg = _distill_config(values)
    run_dir = _start_run(args, values | cfg.model_dump(), corpus, set_path)

    result = run_training(
        cfg, None, load_checkpoint(model_path), load_corpus(set_path), run_dir, progress=get_settings().progress
    )
    _emit([result.checkpoint, result.metrics, *_score(run_dir, result.model, corpus, _int(values, "max_new"))])
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    values = resolve(args)
    teacher_path = _path(values, "teacher", "teacher checkpoint")
    set_path = _path(values, "distill_set", "distill set")
    corpus = _path(values, "corpus", "corpus file")
    base = _distill_config(values)
    grid = AblationGrid(
        mask_kinds=parse_mask_axis(str(values["masks"])),
        strategies=parse_list(str(values["strategies"])),
        threshold_modes=parse_list(str(values["threshold_modes"])),
        rho_ranges=parse_rho_ranges(str(values["rho_ranges"])),
        seeds=parse_seeds(str(values["seeds"])),
    )
    eval_set = _eval_split(corpus, _int(values, "eval_n"))
    if not eval_set:
        raise DataError(f"{corpus} has no eval split to score cells on")
    run_dir = _start_run(args, values | base.model_dump(), corpus, set_path)

    results, summary = run_ablation(
        base,
        grid,
        load_checkpoint(teacher_path),
        _model_config(values, 0),
        load_corpus(set_path),
        eval_set,
        run_dir,
        file_sha256(corpus),
        max_new=_int(values, "max_new"),
        workers=_int(values, "workers"),
        progress=get_settings().progress,
    )
    _emit([results, summary])
    return EXIT_OK


def _analysis_tau(values: dict[str, object], run_path: Path | None) -> float:
    """Explicit --tau, else the analyzed run's snapshot tau, else 1.0."""
    raw = values["tau"]
    if raw is None or raw == "None":
        snapshot = run_path / SNAPSHOT_FILE if run_path else None
        raw = parse_config_file(snapshot).get("tau", 1.0) if snapshot and snapshot.exists() else 1.0
    try:
        tau = float(str(raw))
    except ValueError:
        raise ConfigError(f"tau must be a number (got {raw!r})") from None
    if not tau > 0:
        raise ConfigError(f"tau > 0 required (got {tau})")
    return tau


def cmd_analyze(args: argparse.Namespace) -> int:
    values = resolve(args)
    what = str(values["what"])
    if what not in ANALYSES:
        raise ConfigError(f"unknown analysis {what!r}; expected one of: {', '.join(ANALYSES)}")
    wanted = {"curve", "kl-decay", "map", "accuracy"} | ({"histogram"} if values["run"] else set())
    wanted = wanted if what == "all" else {what}

    needs_model = wanted - {"histogram"}
    model_path = _path(values, "model", "model checkpoint", required=bool(needs_model))
    corpus = _path(values, "corpus", "corpus file", required=bool(needs_model))
    teacher_path = _path(values, "teacher", "teacher checkpoint", required="kl-decay" in wanted)
    run_path = _path(values, "run", "run directory", required="histogram" in wanted)
    values["tau"] = _analysis_tau(values, run_path)
    run_dir = _start_run(args, values, corpus)

    model = load_checkpoint(model_path) if model_path else None
    samples = load_corpus(corpus, values["split"])[: _int(values, "limit")] if corpus else []
    if needs_model and not samples:
        raise DataError(f"{corpus} has no {values['split']} samples")
    max_new = _int(values, "max_new")

    outputs: list[Path] = []
    if "curve" in wanted:
        outputs.append(write_curve_csv(visual_attention_curve(model, samples), run_dir / "curve.csv"))
    if "kl-decay" in wanted:
        profile = interval_kl_decay(load_checkpoint(teacher_path), model, samples, _int(values, "k"), values["tau"])
        outputs.append(write_profile_csv(profile, run_dir / "kl_decay.csv"))
    if "map" in wanted:
        index = _int(values, "sample_index")
        if not 0 <= index < len(samples):
            raise DataError(f"sample index {index} out of range for {len(samples)} samples")
        outputs.append(write_map_csv(mean_visual_attention_map(model, samples[index]), run_dir / "map.csv"))
    if "accuracy" in wanted:
        result = answer_accuracy(model, samples, max_new, split=str(values["split"]))
        outputs.append(write_accuracy_csv([result], run_dir / "accuracy.csv"))
    if "histogram" in wanted:
        diagnostics = load_diagnostics(run_path / "diagnostics.jsonl")
        outputs.append(write_histogram_csv(masked_distance_histogram(diagnostics), run_dir / "histogram.csv"))
    if "salient-mass" in wanted:
        curve = salient_mass_curve(model, samples, _int(values, "max_k"))
        outputs.append(write_mass_curve_csv(curve, run_dir / "salient_mass.csv"))
    _emit(outputs)
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "gen-corpus": cmd_gen_corpus,
    "train-teacher": cmd_train_teacher,
    "distill": cmd_distill,
    "self-distill": cmd_self_distill,
    "ablate": cmd_ablate,
    "analyze": cmd_analyze,
}


def main(argv: Iterable[str] | None = None) -> int:
    """Parse ``argv`` and run the command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValidationError) as e:
        parser.print_usage(sys.stderr)
        print(f"maskd: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (MaskdError, OSError) as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        print(f"maskd: error: {e}", file=sys.stderr)
        return EXIT_FAILURE
