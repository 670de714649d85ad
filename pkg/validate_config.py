"""
Check config/config.yaml before generating data or training.

Reports out-of-range world, training, evaluation and logging values as
errors and suspicious but legal ones (no holdout, weak long tail,
non-orthogonal embeddings) as warnings. Exits 1 when any error is found.

Usage:
    python validate_config.py
    python validate_config.py --config runs/sweep/config.yaml
"""

import argparse
import sys
from pathlib import Path
from typing import Any, List, Mapping, Optional, Tuple

from sgglab.losses import LossVariant
from sgglab.metrics import Task
from sgglab.synth import PROFILES
from sgglab.utils.config import DEFAULT_CONFIG_PATH, load_config
from sgglab.utils.exceptions import ConfigurationError

LOSS_VARIANTS = tuple(v.value for v in LossVariant)
TASKS = tuple(t.value for t in Task)


def _positive_ints(values: Any) -> bool:
    return isinstance(values, list) and bool(values) and all(
        isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in values
    )


def _validate_world(world: Mapping[str, Any], errors: List[str], warnings: List[str]) -> None:
    c_obj, c_pred = world.get("c_obj"), world.get("c_pred")
    for name, value in (("c_obj", c_obj), ("c_pred", c_pred)):
        if value is not None and (not isinstance(value, int) or value < 2):
            errors.append(f"world.{name} must be an integer >= 2, got {value}")

    profile = world.get("profile")
    if profile is not None and profile not in PROFILES:
        errors.append(f"world.profile must be one of {PROFILES}, got {profile!r}")

    n_min, n_max = world.get("n_min"), world.get("n_max")
    if n_min is not None and n_max is not None:
        if not (1 <= n_min <= n_max):
            errors.append(f"world graph sizes must satisfy 1 <= n_min <= n_max, got {n_min}..{n_max}")
        else:
            print(f"✓ Graph sizes: {n_min}-{n_max} nodes")

    holdout = world.get("holdout_fraction")
    if holdout is not None:
        if not (0 <= holdout <= 0.5):
            errors.append(f"world.holdout_fraction must be 0-0.5, got {holdout}")
        elif holdout == 0:
            warnings.append("world.holdout_fraction is 0: zero-shot recall will have no test instances")
        else:
            print(f"✓ Holdout fraction: {holdout * 100:.0f}%")

    noise = world.get("noise_scale")
    if noise is not None and noise < 0:
        errors.append(f"world.noise_scale must be >= 0, got {noise}")

    zipf = world.get("zipf_exponent")
    if zipf is not None:
        if zipf < 0:
            errors.append(f"world.zipf_exponent must be >= 0, got {zipf}")
        elif zipf < 1:
            warnings.append(f"world.zipf_exponent {zipf} < 1 gives a weak long tail")

    feature_dim = world.get("feature_dim")
    if feature_dim is not None and c_obj is not None and isinstance(feature_dim, int):
        if feature_dim < 1:
            errors.append(f"world.feature_dim must be >= 1, got {feature_dim}")
        elif feature_dim < c_obj:
            warnings.append(
                f"world.feature_dim ({feature_dim}) < c_obj ({c_obj}): class embeddings are not orthogonal"
            )


def _validate_training(training: Mapping[str, Any], errors: List[str], warnings: List[str]) -> None:
    loss = training.get("loss") or {}
    variant = str(loss.get("variant", "baseline")).replace("-", "_")
    if variant not in LOSS_VARIANTS:
        errors.append(f"training.loss.variant must be one of {LOSS_VARIANTS}, got {loss.get('variant')!r}")
    for name in ("gamma", "alpha", "beta", "lambda"):
        value = loss.get(name)
        if value is not None and (not isinstance(value, (int, float)) or value <= 0):
            errors.append(f"training.loss.{name} must be > 0, got {value}")
    if not any(e.startswith("training.loss") for e in errors):
        print(f"✓ Loss: {variant}")

    lr = training.get("learning_rate")
    if lr is not None and lr <= 0:
        errors.append(f"training.learning_rate must be > 0, got {lr}")
    epochs = training.get("epochs")
    if epochs is not None and epochs < 0:
        errors.append(f"training.epochs must be >= 0, got {epochs}")
    batch_size = training.get("batch_size")
    if batch_size is not None:
        if batch_size < 1:
            errors.append(f"training.batch_size must be >= 1, got {batch_size}")
        elif batch_size == 1 and variant == "normalized":
            warnings.append("training.batch_size 1 with the normalized loss skips every graph without FG edges")

    task = training.get("task")
    if task is not None and task not in TASKS:
        errors.append(f"training.task must be one of {TASKS}, got {task!r}")

    caps = training.get("edge_sampling")
    if caps is not None and not (_positive_ints(caps) and len(caps) == 2):
        errors.append(f"training.edge_sampling must be [max_fg, max_bg] with values >= 1, got {caps}")

    val_ks = training.get("val_ks")
    if val_ks is not None and not _positive_ints(val_ks):
        errors.append(f"training.val_ks must be a list of integers >= 1, got {val_ks}")

    if training.get("freq_bias"):
        smoothing = training.get("freq_smoothing", 1.0)
        if smoothing is None or smoothing <= 0:
            errors.append(f"training.freq_smoothing must be > 0 when freq_bias is on, got {smoothing}")


def _validate_evaluation(evaluation: Mapping[str, Any], errors: List[str], warnings: List[str]) -> None:
    ks = evaluation.get("ks")
    if ks is not None:
        if not _positive_ints(ks):
            errors.append(f"evaluation.ks must be a list of integers >= 1, got {ks}")
        else:
            print(f"✓ Evaluation K values: {ks}")

    nshots = evaluation.get("nshots")
    if nshots is not None:
        if not isinstance(nshots, list) or any(not isinstance(n, int) or n < 0 for n in nshots):
            errors.append(f"evaluation.nshots must be a list of integers >= 0, got {nshots}")

    task = evaluation.get("task")
    if task is not None and task not in TASKS:
        errors.append(f"evaluation.task must be one of {TASKS}, got {task!r}")

    smoothing = evaluation.get("freq_smoothing")
    if smoothing is not None and smoothing < 0:
        errors.append(f"evaluation.freq_smoothing must be >= 0, got {smoothing}")

    bins = evaluation.get("size_bins")
    if bins is not None and bins < 0:
        errors.append(f"evaluation.size_bins must be >= 0, got {bins}")


def validate_config(config_path: Optional[Path] = None) -> Tuple[bool, List[str], List[str]]:
    """
    Validate a config.yaml file.

    Args:
        config_path: Config file (defaults to config/config.yaml)

    Returns:
        Tuple of (is_valid, errors, warnings)
    """
    errors: List[str] = []
    warnings: List[str] = []

    config_path = Path(config_path) if config_path is not None else DEFAULT_CONFIG_PATH

    try:
        config = load_config(config_path)
    except ConfigurationError as e:
        errors.append(str(e))
        return False, errors, warnings

    print("✓ YAML syntax is valid")

    sections = {
        "world": _validate_world,
        "training": _validate_training,
        "evaluation": _validate_evaluation,
    }
    for name, check in sections.items():
        section = config.get(name)
        if section is None:
            warnings.append(f"Missing {name} section: built-in defaults apply")
        elif not isinstance(section, dict):
            errors.append(f"Section {name} must be a mapping")
        else:
            try:
                check(section, errors, warnings)
            except TypeError as e:
                errors.append(f"Section {name} has a value of the wrong type: {e}")

    log_cfg = config.get("logging") or {}
    level = log_cfg.get("level")
    if level is not None and str(level).upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        errors.append(f"logging.level must be DEBUG, INFO, WARNING, ERROR or CRITICAL, got {level!r}")
    max_mb, backups = log_cfg.get("max_mb"), log_cfg.get("backups")
    if max_mb is not None and (not isinstance(max_mb, (int, float)) or max_mb <= 0):
        errors.append(f"logging.max_mb must be > 0, got {max_mb}")
    if backups is not None and (not isinstance(backups, int) or backups < 0):
        errors.append(f"logging.backups must be an integer >= 0, got {backups}")

    is_valid = len(errors) == 0

    return is_valid, errors, warnings


def _print_findings(marker: str, title: str, findings: List[str]) -> None:
    if findings:
        print(f"\n{marker} {title} ({len(findings)}):")
        print("\n".join(f"  {i}. {text}" for i, text in enumerate(findings, 1)))


def main(argv: Optional[List[str]] = None) -> None:
    """Validate the config named by --config and exit 1 when it has errors."""
    parser = argparse.ArgumentParser(description="Validate the sgglab configuration file")
    parser.add_argument("--config", type=Path, help="Config file (default: config/config.yaml)")
    args = parser.parse_args(argv)

    print("=" * 60)
    print(f"sgglab config check: {args.config or DEFAULT_CONFIG_PATH}")
    print("=" * 60)

    is_valid, errors, warnings = validate_config(args.config)

    print("-" * 60)
    _print_findings("⚠️ ", "WARNINGS", warnings)
    _print_findings("❌", "ERRORS", errors)
    if not is_valid:
        print("\nFix the errors above before generating or training.")
        sys.exit(1)

    suffix = f"{len(warnings)} warning(s)" if warnings else "no warnings"
    print(f"\n✅ Configuration is valid ({suffix})")
    print("Next: python run_lab.py gen --out data/vg")
    sys.exit(0)


if __name__ == "__main__":
    main()
