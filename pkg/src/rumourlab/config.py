"""Flat key = value run configuration with a canonical digest.

Config files hold one ``key = value`` pair per line; ``#`` starts a
comment. Command-line flags override file values. The canonical text
(sorted keys, normalized values) feeds the run-directory digest, so
identical configurations land in identical directories.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .errors import ValidationError

MODEL_KINDS = ("lstm", "bigcn", "logreg", "svm", "rf")
FEATURE_MODES = ("handcrafted", "tfidf", "both")

# Fine-tuning-style preset kept for reference runs: AdamW with decoupled
# decay, small learning rate, and the usual short epoch budget. Apply by
# merging into a config, e.g. parse_config_text(FINETUNE_PRESET, base).
FINETUNE_PRESET = (
    "optimizer = adamw\n"
    "lr = 0.0001\n"
    "weight_decay = 0.01\n"
    "epsilon = 1e-07\n"
    "batch_size = 16\n"
    "max_epochs = 10\n"
)


@dataclass(frozen=True)
class RunConfig:
    dataset: str = ""
    model: str = "logreg"
    out_dir: str = "runs"
    # Splitting
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    split_seed: int = 13
    # Ensemble seeds: one training run per seed, majority-voted.
    seeds: tuple[int, ...] = (1,)
    # Gradient training
    optimizer: str = "adam"
    lr: float = 0.01
    weight_decay: float = 0.0
    epsilon: float = 1e-8
    batch_size: int = 16
    max_epochs: int = 30
    patience: int = 5
    class_weights: bool = True
    dropout: float = 0.0
    # LSTM
    vocab_cap: int = 20_000
    embed_dim: int = 64
    hidden_dim: int = 128
    perceptron_dim: int = 64
    max_len: int = 128
    # Bi-GCN / trees
    tfidf_top_k: int = 5000
    bigcn_hidden_dim: int = 64
    bigcn_out_dim: int = 64
    drop_edge_rate: float = 0.2
    # Ablation switches: store raw term counts in tree features instead
    # of tf-idf; keep reply-to-reply parent links instead of flattening.
    tree_raw_counts: bool = False
    keep_reply_links: bool = False
    # Classic models
    features: str = "both"
    smote: bool = False
    smote_k: int = 5
    rf_trees: int = 100
    rf_max_depth: Optional[int] = None
    rf_feature_subsample: str = "sqrt"
    logreg_l2: float = 0.0
    svm_l2: float = 1e-4
    classic_lr: float = 0.1
    classic_iters: int = 500
    svm_iters: int = 2000
    # Analysis
    top_n: int = 20
    exclude_keywords: tuple[str, ...] = ("covid", "corona virus")

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValidationError(f"unknown model kind {self.model!r}")
        if self.features not in FEATURE_MODES:
            raise ValidationError(f"unknown feature mode {self.features!r}")
        if len(self.ratios) != 3:
            raise ValidationError("ratios needs exactly three values")
        if not self.seeds:
            raise ValidationError("at least one seed is required")

    def canonical_text(self) -> str:
        """Sorted key = value lines covering every experiment-defining
        field; out_dir only says where artifacts land, so it is omitted
        and the digest identifies the experiment itself."""
        lines = []
        for field_info in sorted(fields(self), key=lambda f: f.name):
            if field_info.name == "out_dir":
                continue
            value = getattr(self, field_info.name)
            lines.append(f"{field_info.name} = {_format_value(value)}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()[:12]


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    kind = _FIELD_TYPES.get(name)
    if kind is None:
        raise ValidationError(f"unknown config key {name!r}")
    if name == "ratios":
        parts = [float(p) for p in raw.split(",")]
        return tuple(parts)
    if name == "seeds":
        return tuple(int(p) for p in raw.split(","))
    if name == "exclude_keywords":
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    if name == "rf_max_depth":
        return None if raw.lower() in ("none", "") else int(raw)
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValidationError(f"config key {name!r}: expected true/false, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_config_text(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    config = base or RunConfig()
    updates = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {line_no}: expected key = value")
        name, raw = line.split("=", 1)
        name = name.strip()
        try:
            updates[name] = _parse_value(name, raw)
        except ValidationError:
            raise
        except ValueError:
            raise ValidationError(
                f"config line {line_no}: bad value for {name!r}: {raw.strip()!r}"
            ) from None
    return replace(config, **updates)


def load_config(path, base: Optional[RunConfig] = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), base)
