"""Run configuration: architecture, training and preprocessing settings.

Config files are flat ``key = value`` text.  Keys follow the tuning-grid
naming convention (``perform_prune_pc``, ``ip_pc``, ``fbft_tree_num``, ...);
values outside the usual search ranges produce a warning, not an error.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field, fields


@dataclass
class ArchitectureConfig:
    n_layers: int = 2
    layer_sizes: list[int] = field(default_factory=lambda: [16, 8])
    n_selected_features_input: int = 8
    n_selected_features_internal: int = 4
    n_selected_features_output: int = 4
    normal_form: str = "dnf"
    weight_init: float = 0.2
    add_negations: bool = True

    def __post_init__(self) -> None:
        if isinstance(self.layer_sizes, int):
            self.layer_sizes = [self.layer_sizes] * self.n_layers
        self.layer_sizes = [int(s) for s in self.layer_sizes]
        if len(self.layer_sizes) != self.n_layers:
            raise ValueError(
                f"layer_sizes has {len(self.layer_sizes)} entries for n_layers={self.n_layers}"
            )
        if self.normal_form not in ("dnf", "cnf"):
            raise ValueError(f"normal_form must be 'dnf' or 'cnf', got {self.normal_form!r}")
        if self.weight_init <= 0:
            raise ValueError("weight_init must be positive")


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.01
    batch_size: int = 96
    prune_quantile: float = 0.5
    delta: float = 4.0
    kappa: float = 4
    tau: float = 15
    iota: float = 5
    prune_strategy: str = "class"
    ucb_scale: float = 1.5
    reinit_low: float = 0.002
    reinit_high: float = 0.2
    use_l1: bool = False
    l1_lambda: float = 0.001
    use_weight_decay: bool = False
    weight_decay_alpha: float = 0.001
    t_0: int = 5
    t_mult: int = 2
    early_stopping_plateau_count: int = 30
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.prune_quantile <= 1.0:
            raise ValueError("prune_quantile must lie in [0, 1]")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if min(self.kappa, self.tau, self.iota) < 0:
            raise ValueError("kappa, tau and iota must be >= 0")
        if self.prune_strategy not in ("class", "logic", "logic_class"):
            raise ValueError(f"unknown prune_strategy {self.prune_strategy!r}")
        if not self.reinit_low < self.reinit_high:
            raise ValueError("re-init bounds must satisfy a < b")


@dataclass
class PreprocessConfig:
    binarize: str = "replace"
    fbft_tree_num: int = 11
    fbft_tree_depth: int = 6
    fbft_feature_selection: float = 0.65
    fbft_thresh_round: int = 4

    def __post_init__(self) -> None:
        if self.binarize not in ("replace", "none"):
            raise ValueError(f"binarize must be 'replace' or 'none', got {self.binarize!r}")


# Search-grid ranges used only for out-of-range warnings.
_RANGES = {
    "layer_sizes": (2, 30),
    "n_layers": (1, 6),
    "n_selected_features_input": (2, 12),
    "n_selected_features_internal": (2, 10),
    "n_selected_features_output": (2, 10),
    "perform_prune_quantile": (0.05, 0.9),
    "perform_prune_pc": (1, 8),
    "ip_pc": (0, 20),
    "ip_plateau_count_pc": (10, 30),
    "ucb_scale": (1.0, 2.0),
    "delta": (1.0, 12.0),
    "weight_init": (0.01, 1.0),
    "learning_rate": (0.0001, 0.15),
    "early_stopping_plateau_count": (25, 50),
    "t_0": (2, 10),
    "t_mult": (1, 5),
    "l1_lambda": (0.00001, 0.1),
    "weight_decay_alpha": (0.00001, 0.1),
    "fbft_tree_num": (2, 20),
    "fbft_tree_depth": (2, 10),
    "fbft_feature_selection": (0.3, 1.0),
    "fbft_thresh_round": (2, 6),
}

_CHOICES = {
    "normal_form": ("cnf", "dnf"),
    "prune_strategy": ("class", "logic", "logic_class"),
    "binarize": ("replace", "none"),
}

# Accepted but not implemented; enabling them is an error, not a silent no-op.
_UNSUPPORTED_FLAGS = ("use_swa", "use_lookahead", "bootstrap")
_UNSUPPORTED_EXTRAS = ("lookahead_steps", "lookahead_steps_size")

# key in config text -> (dataclass section, attribute)
_KEY_MAP = {
    "n_layers": ("arch", "n_layers"),
    "layer_sizes": ("arch", "layer_sizes"),
    "n_selected_features_input": ("arch", "n_selected_features_input"),
    "n_selected_features_internal": ("arch", "n_selected_features_internal"),
    "n_selected_features_output": ("arch", "n_selected_features_output"),
    "normal_form": ("arch", "normal_form"),
    "weight_init": ("arch", "weight_init"),
    "add_negations": ("arch", "add_negations"),
    "epochs": ("train", "epochs"),
    "learning_rate": ("train", "learning_rate"),
    "batch_size": ("train", "batch_size"),
    "perform_prune_quantile": ("train", "prune_quantile"),
    "perform_prune_pc": ("train", "kappa"),
    "ip_pc": ("train", "iota"),
    "ip_plateau_count_pc": ("train", "tau"),
    "prune_strategy": ("train", "prune_strategy"),
    "delta": ("train", "delta"),
    "ucb_scale": ("train", "ucb_scale"),
    "reinit_low": ("train", "reinit_low"),
    "reinit_high": ("train", "reinit_high"),
    "use_l1": ("train", "use_l1"),
    "l1_lambda": ("train", "l1_lambda"),
    "use_weight_decay": ("train", "use_weight_decay"),
    "weight_decay_alpha": ("train", "weight_decay_alpha"),
    "t_0": ("train", "t_0"),
    "t_mult": ("train", "t_mult"),
    "early_stopping_plateau_count": ("train", "early_stopping_plateau_count"),
    "binarize": ("pre", "binarize"),
    "fbft_tree_num": ("pre", "fbft_tree_num"),
    "fbft_tree_depth": ("pre", "fbft_tree_depth"),
    "fbft_feature_selection": ("pre", "fbft_feature_selection"),
    "fbft_thresh_round": ("pre", "fbft_thresh_round"),
    "seed": ("run", "seed"),
}


@dataclass
class RunConfig:
    """Everything one training run needs, resolved from defaults + overrides."""

    arch: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    pre: PreprocessConfig = field(default_factory=PreprocessConfig)
    seed: int = 0

    def as_flat_dict(self) -> dict:
        out = {}
        for key, (section, attr) in _KEY_MAP.items():
            if section == "run":
                out[key] = getattr(self, attr)
            else:
                out[key] = getattr(getattr(self, section), attr)
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.as_flat_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [] if not inner else [_parse_scalar(v) for v in inner.split(",")]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = _parse_scalar(val)
    return values


def _warn_if_out_of_range(key: str, value) -> None:
    if key in _CHOICES:
        if value not in _CHOICES[key]:
            warnings.warn(f"config {key}={value!r} outside the usual choices {_CHOICES[key]}")
        return
    rng = _RANGES.get(key)
    if rng is None:
        return
    lo, hi = rng
    vals = value if isinstance(value, list) else [value]
    for v in vals:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            continue
        if math.isfinite(v) and not lo <= v <= hi:
            warnings.warn(f"config {key}={v} outside the usual range [{lo}, {hi}]")


def resolve_run_config(overrides: dict) -> RunConfig:
    """Build a RunConfig from defaults plus a dict of verbatim-named overrides."""
    arch_kw, train_kw, pre_kw = {}, {}, {}
    seed = 0
    for key, value in overrides.items():
        if key in _UNSUPPORTED_FLAGS:
            if value:
                raise ValueError(f"unsupported option: {key} is accepted but not implemented")
            continue
        if key in _UNSUPPORTED_EXTRAS:
            raise ValueError(f"unsupported option: {key} is accepted but not implemented")
        if key not in _KEY_MAP:
            raise ValueError(f"unknown config key {key!r}")
        _warn_if_out_of_range(key, value)
        section, attr = _KEY_MAP[key]
        if section == "arch":
            arch_kw[attr] = value
        elif section == "train":
            train_kw[attr] = value
        elif section == "pre":
            pre_kw[attr] = value
        else:
            seed = int(value)
    cfg = RunConfig(
        arch=ArchitectureConfig(**arch_kw),
        train=TrainConfig(**train_kw),
        pre=PreprocessConfig(**pre_kw),
        seed=seed,
    )
    cfg.train.seed = cfg.seed
    return cfg


def config_field_names() -> list[str]:
    names = list(_KEY_MAP)
    for f in fields(TrainConfig):
        if f.name not in names:
            names.append(f.name)
    return names
