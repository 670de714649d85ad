"""
Command-line surface of the sgglab laboratory.

Subcommands:
    gen     generate a synthetic dataset directory
    train   train a classifier and write checkpoint + history
    eval    evaluate a checkpoint, stored predictions or the Freq baseline
    stats   dataset statistics table
    report  compare metric reports of several runs

Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

from .core import batch_density_profile, dataset_stats, exclude_predicates, filter_graphs
from .freq import fit_freq
from .loaders import (
    DatasetLoader,
    LoadedDataset,
    load_checkpoint,
    read_graph_file,
    read_predictions,
    save_checkpoint,
    write_predictions,
)
from .losses import LOSS_PRESETS, LossConfig, LossVariant
from .metrics import Task, freq_predictions, recall_by_graph_size, recall_suite
from .model import TrainConfig, predict_dataset, train
from .report import compare_reports
from .synth import PROFILES, WorldConfig, make_dataset, make_world
from .utils.config import get_section, load_config
from .utils.exceptions import ConfigurationError, SGGLabError
from .utils.helpers import parse_caps, parse_int_list, to_jsonable
from .utils.logger import DEFAULT_BACKUPS, DEFAULT_MAX_MB, setup_logger

logger = logging.getLogger("sgglab.cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

CHECKPOINT_FILE = "checkpoint.json"
HISTORY_FILE = "history.csv"
METRICS_CSV = "metrics.csv"
METRICS_JSON = "metrics.json"
BY_SIZE_CSV = "recall_by_size.csv"


def _pick(value: Any, section: Mapping[str, Any], key: str, default: Any = None) -> Any:
    """Flag value when given, else the config value, else the default."""
    if value is not None:
        return value
    found = section.get(key)
    return default if found is None else found


def _print_json(payload: Any) -> None:
    print(json.dumps(to_jsonable(payload), indent=2, sort_keys=True))


def _load_dataset(path: str, with_features: bool = True) -> LoadedDataset:
    data = Path(path)
    if not data.exists():
        raise ConfigurationError(f"Dataset not found: {data}")
    if data.is_file():
        return read_graph_file(data)
    return DatasetLoader(data).load(with_features=with_features)


def cmd_gen(args: argparse.Namespace, config: Mapping[str, Any]) -> int:
    """Generate a dataset directory and print its manifest."""
    gen = get_section(config, "generation")
    output = get_section(config, "output")
    world_cfg = WorldConfig.from_config(
        get_section(config, "world"),
        c_obj=args.c_obj,
        c_pred=args.c_pred,
        profile=args.profile,
        n_min=args.n_min,
        n_max=args.n_max,
        n_skew=args.n_skew,
        zipf_exponent=args.zipf,
        holdout_fraction=args.holdout,
        feature_dim=args.feature_dim,
        noise_scale=args.noise,
        seed=args.seed,
        large_graph_nodes=args.large_graph_nodes,
        large_graph_zipf=args.large_graph_zipf,
    )
    train_images = int(_pick(args.train, gen, "train_images", 200))
    test_images = int(_pick(args.test, gen, "test_images", 100))
    max_retries = int(_pick(args.max_retries, gen, "max_retries", 10))

    logger.info("=" * 60)
    logger.info(f"Dataset generation - {world_cfg.profile} profile, seed {world_cfg.seed}")
    logger.info("=" * 60)

    world = make_world(world_cfg)
    dataset = make_dataset(world, train_images, test_images, max_retries=max_retries)
    DatasetLoader(args.out).save(
        dataset.train,
        dataset.test,
        dataset.features,
        dataset.manifest,
        decimals=int(output.get("feature_decimals", 6)),
    )
    _print_json(dataset.manifest)
    return EXIT_OK


def _loss_config(args: argparse.Namespace, section: Mapping[str, Any]) -> LossConfig:
    base = LossConfig.from_config(section.get("loss", {}) or {})
    if args.loss is not None:
        name = args.loss.strip().lower()
        if name.replace("-", "_") in {v.value for v in LossVariant}:
            base = replace(base, variant=LossVariant.parse(name))
        elif name in LOSS_PRESETS:
            base = LOSS_PRESETS[name]
        else:
            raise ConfigurationError(
                f"Unknown loss {args.loss!r}; use a variant or one of the presets {sorted(LOSS_PRESETS)}"
            )
    overrides = {k: v for k, v in (
        ("gamma", args.gamma), ("alpha", args.alpha), ("beta", args.beta), ("lam", args.lam)
    ) if v is not None}
    return replace(base, **overrides) if overrides else base


def cmd_train(args: argparse.Namespace, config: Mapping[str, Any]) -> int:
    """Train a classifier; writes checkpoint.json and history.csv into --out."""
    section = get_section(config, "training")
    loss = _loss_config(args, section)
    caps = parse_caps(args.edge_sample) if args.edge_sample else section.get("edge_sampling")
    train_cfg = TrainConfig(
        loss=loss,
        learning_rate=float(_pick(args.lr, section, "learning_rate", 0.1)),
        epochs=int(_pick(args.epochs, section, "epochs", 10)),
        batch_size=int(_pick(args.batch_size, section, "batch_size", 6)),
        edge_sampling=tuple(caps) if caps else None,
        seed=int(_pick(args.seed, section, "seed", 0)),
        task=_pick(args.task, section, "task", Task.PREDCLS.value),
        skip_degenerate=bool(section.get("skip_degenerate", True)) and not args.no_skip_degenerate,
        val_ks=tuple(parse_int_list(_pick(args.val_k, section, "val_ks", [20, 50, 100]), "val K")),
    )
    use_freq = _pick(args.freq_bias, section, "freq_bias", False)
    use_freq = use_freq == "on" if isinstance(use_freq, str) else bool(use_freq)
    smoothing = float(_pick(args.freq_smoothing, section, "freq_smoothing", 1.0))

    dataset = _load_dataset(args.data)
    train_set = filter_graphs(dataset.train, args.min_nodes, args.max_nodes)
    if args.exclude_predicates:
        train_set = exclude_predicates(train_set, parse_int_list(args.exclude_predicates, "predicate"))
    if not train_set:
        raise SGGLabError("No training graphs left after filtering")

    logger.info("=" * 60)
    logger.info(f"Training - {loss.variant.value} loss, {train_cfg.task.value}, freq bias {'on' if use_freq else 'off'}")
    logger.info(f"Training graphs: {len(train_set):,} of {len(dataset.train):,}")
    logger.info("=" * 60)

    freq = fit_freq(train_set, smoothing=smoothing, num_predicates=dataset.c_pred) if use_freq else None
    model, history = train(
        train_set,
        dataset.features,
        train_cfg,
        c_obj=dataset.c_obj,
        c_pred=dataset.c_pred,
        freq_bias=freq,
        val_set=dataset.test if args.validate and dataset.test else None,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / CHECKPOINT_FILE, model, train_cfg)
    history.to_csv(out / HISTORY_FILE, index=False, lineterminator="\n")
    logger.info(f"✓ Wrote {out / CHECKPOINT_FILE} and {out / HISTORY_FILE}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, config: Mapping[str, Any]) -> int:
    """Evaluate predictions on the test split; writes metrics.csv and metrics.json into --out."""
    section = get_section(config, "evaluation")
    output = get_section(config, "output")
    ks = parse_int_list(_pick(args.k, section, "ks", [20, 50, 100]), "K")
    nshots = parse_int_list(args.nshot, "n-shot") if args.nshot else list(section.get("nshots", []) or [])
    if any(n < 0 for n in nshots):
        raise ConfigurationError(f"n-shot thresholds must be >= 0, got {nshots}")
    task = Task.parse(_pick(args.task, section, "task", Task.PREDCLS.value))
    constrained = args.constrained or bool(section.get("constrained", False))

    dataset = _load_dataset(args.data, with_features=args.predictor == "checkpoint")
    test = dataset.test
    if not test:
        raise SGGLabError(f"No test graphs in {args.data}")
    counts = dataset.train_counts()

    if args.predictor == "checkpoint":
        if not args.checkpoint:
            raise ConfigurationError("--checkpoint is required with --predictor checkpoint")
        model = load_checkpoint(args.checkpoint)
        preds = predict_dataset(model, test, dataset.features, task)
    elif args.predictor == "freq":
        if not dataset.train:
            raise SGGLabError("The freq predictor needs training graphs")
        smoothing = float(_pick(args.freq_smoothing, section, "freq_smoothing", 0.0))
        freq = fit_freq(dataset.train, smoothing=smoothing, num_predicates=dataset.c_pred)
        preds = freq_predictions(freq, test, dataset.c_obj)
    else:
        if not args.predictions:
            raise ConfigurationError("--predictions is required with --predictor file")
        preds = read_predictions(args.predictions)

    logger.info("=" * 60)
    logger.info(f"Evaluation - {args.predictor} predictor, {task.value}, K={ks}")
    logger.info("=" * 60)

    report = recall_suite(preds, test, counts, ks, task, constrained=constrained, nshots=nshots)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / METRICS_CSV)
    report.to_json(out / METRICS_JSON)

    size_bins = int(_pick(args.size_bins, section, "size_bins", 0))
    if size_bins > 0:
        k = int(section.get("size_bins_k", ks[-1]))
        by_size = recall_by_graph_size(preds, test, k, size_bins, task, constrained=False)
        by_size.to_csv(out / BY_SIZE_CSV, index=False, lineterminator="\n")

    if args.save_predictions:
        decimals = output.get("prediction_decimals")
        write_predictions(args.save_predictions, (preds[g.graph_id] for g in test), decimals)

    print(report.to_frame().to_string(index=False))
    logger.info(f"✓ Wrote {len(report.rows)} metric rows to {out}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace, config: Mapping[str, Any]) -> int:
    """Print the statistics table of a dataset split."""
    dataset = _load_dataset(args.data, with_features=False)
    graphs = dataset.select(args.split)
    if not graphs:
        raise SGGLabError(f"No {args.split} graphs in {args.data}")

    counts = dataset.train_counts() if args.split == "test" else None
    table = dataset_stats(graphs, counts).to_frame()
    print(table.to_string(index=False))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(args.out, index=False, lineterminator="\n")

    if args.batch_sizes:
        profile = batch_density_profile(graphs, parse_int_list(args.batch_sizes, "batch size"), seed=args.seed)
        print()
        print(profile.to_string(index=False))
    return EXIT_OK


def cmd_report(args: argparse.Namespace, config: Mapping[str, Any]) -> int:
    """Join metric reports and write deltas against the first run."""
    table = compare_reports(args.reports, args.labels)
    print(table.to_string(index=False))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(args.out, index=False, lineterminator="\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgglab",
        description="Scene-graph generation laboratory - synthetic data, loss study and recall metrics",
    )
    parser.add_argument("--config", help="YAML config file (default: config/config.yaml)")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-file", help="Also log to this file (rotated at 10 MB)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a synthetic dataset")
    gen.add_argument("--out", required=True, help="Output dataset directory")
    gen.add_argument("--profile", choices=PROFILES)
    gen.add_argument("--train", type=int, help="Training images")
    gen.add_argument("--test", type=int, help="Test images")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--c-obj", type=int)
    gen.add_argument("--c-pred", type=int)
    gen.add_argument("--n-min", type=int)
    gen.add_argument("--n-max", type=int)
    gen.add_argument("--n-skew", type=float)
    gen.add_argument("--zipf", type=float, help="Long-tail exponent")
    gen.add_argument("--holdout", type=float, help="Held-out composition fraction in [0, 0.5]")
    gen.add_argument("--feature-dim", type=int)
    gen.add_argument("--noise", type=float)
    gen.add_argument("--large-graph-nodes", type=int)
    gen.add_argument("--large-graph-zipf", type=float)
    gen.add_argument("--max-retries", type=int)
    gen.set_defaults(handler=cmd_gen)

    tr = sub.add_parser("train", help="Train a classifier")
    tr.add_argument("--data", required=True, help="Dataset directory")
    tr.add_argument("--out", required=True, help="Run output directory")
    tr.add_argument("--loss", help=f"Loss variant or preset ({', '.join(LOSS_PRESETS)})")
    tr.add_argument("--gamma", type=float)
    tr.add_argument("--alpha", type=float)
    tr.add_argument("--beta", type=float)
    tr.add_argument("--lambda", dest="lam", type=float)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--edge-sample", help="Per-batch caps FG:BG, e.g. 32:256")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--task", choices=[t.value for t in Task])
    tr.add_argument("--freq-bias", choices=["on", "off"])
    tr.add_argument("--freq-smoothing", type=float)
    tr.add_argument("--min-nodes", type=int, help="Train only on graphs with at least this many nodes")
    tr.add_argument("--max-nodes", type=int, help="Train only on graphs with at most this many nodes")
    tr.add_argument("--exclude-predicates", help="Comma-separated predicate ids dropped from training graphs")
    tr.add_argument("--no-skip-degenerate", action="store_true", help="Fail on batches without FG edges")
    tr.add_argument("--validate", action="store_true", help="Evaluate the test split after every epoch")
    tr.add_argument("--val-k", help="Comma-separated K values of the per-epoch metrics")
    tr.set_defaults(handler=cmd_train)

    ev = sub.add_parser("eval", help="Evaluate predictions on the test split")
    ev.add_argument("--data", required=True, help="Dataset directory")
    ev.add_argument("--out", required=True, help="Report output directory")
    ev.add_argument("--predictor", choices=["checkpoint", "freq", "file"], default="checkpoint")
    ev.add_argument("--checkpoint", help="checkpoint.json written by train")
    ev.add_argument("--predictions", help="Prediction JSONL file")
    ev.add_argument("--task", choices=[t.value for t in Task])
    ev.add_argument("--constrained", action="store_true", help="Also report graph-constrained rows")
    ev.add_argument("--k", help="Comma-separated K values")
    ev.add_argument("--nshot", help="Comma-separated n-shot thresholds")
    ev.add_argument("--freq-smoothing", type=float)
    ev.add_argument("--size-bins", type=int, help="Recall by test graph size in this many bins (0 = off)")
    ev.add_argument("--save-predictions", help="Write the evaluated predictions to this JSONL file")
    ev.set_defaults(handler=cmd_eval)

    st = sub.add_parser("stats", help="Dataset statistics")
    st.add_argument("--data", required=True, help="Dataset directory or graphs JSONL file")
    st.add_argument("--split", choices=["train", "test", "all"], default="all")
    st.add_argument("--out", help="Also write the table to this CSV")
    st.add_argument("--batch-sizes", help="Comma-separated batch sizes for the batch density profile")
    st.add_argument("--seed", type=int, default=0)
    st.set_defaults(handler=cmd_stats)

    rp = sub.add_parser("report", help="Compare metric reports")
    rp.add_argument("reports", nargs="+", help="metrics.csv files; the first is the reference")
    rp.add_argument("--labels", nargs="+", help="Run labels (default: file stems)")
    rp.add_argument("--out", help="Write the comparison to this CSV")
    rp.set_defaults(handler=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run a subcommand.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    try:
        config = load_config(args.config)
        log_cfg = get_section(config, "logging")
    except ConfigurationError as e:
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    setup_logger(
        name="sgglab",
        log_file=args.log_file or log_cfg.get("file"),
        log_level=args.log_level or log_cfg.get("level", "INFO"),
        max_mb=log_cfg.get("max_mb", DEFAULT_MAX_MB),
        backups=log_cfg.get("backups", DEFAULT_BACKUPS),
    )

    handler: Callable[[argparse.Namespace, Mapping[str, Any]], int] = args.handler
    try:
        return handler(args, config)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except (SGGLabError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
        return EXIT_FAILURE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
