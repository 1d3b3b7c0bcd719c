"""Run configuration: a line-oriented `key = value` file with dotted sections.

Example::

    data.source = synth
    data.length = 2000
    window.context_len = 48
    window.pred_len = 24
    model.arch = mlp1
    model.hidden = 4
    train.mode = constrained
    train.primal_lr = 0.001
    constraint.source = quantile
    constraint.q = 0.5
    constraint.erm_dir = runs/erm

Lines starting with `#` and blank lines are ignored. Every key has a
documented default except window.context_len and window.pred_len, which are
required. `resolve()` materializes all defaults into a canonical sorted
text whose sha256 prefix is the run fingerprint embedded in reports.
The output directory never enters the fingerprint: it does not affect
the computation, and reruns into a different directory must stay
byte-identical.
"""

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_BOOL = {"true": True, "false": False}


def _to_int(text):
    return int(text, 10)


def _to_float(text):
    value = float(text)
    if not np.isfinite(value):
        raise ValueError("must be finite")
    return value


def _to_bool(text):
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        raise ValueError("expected true or false") from None


def _to_str(text):
    return text.strip()


def _to_float_list(text):
    text = text.strip()
    if not text:
        return []
    return [_to_float(tok) for tok in text.split(",")]


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(repr(float(x)) for x in value)
    return str(value)


# key -> (converter, default); _REQUIRED marks keys with no default.
_REQUIRED = object()

_SCHEMA = {
    "data.source": (_to_str, "synth"),
    "data.path": (_to_str, ""),
    "data.has_header": (_to_bool, True),
    "data.timestamp_column": (_to_str, ""),
    "data.length": (_to_int, 2000),
    "data.channels": (_to_int, 1),
    "data.noise_growth": (_to_float, 0.0),
    "data.seed": (_to_int, 0),
    "data.normalize": (_to_bool, True),
    "data.target_channel": (_to_str, ""),
    "split.train": (_to_float, 0.7),
    "split.val": (_to_float, 0.1),
    "split.test": (_to_float, 0.2),
    "window.context_len": (_to_int, _REQUIRED),
    "window.pred_len": (_to_int, _REQUIRED),
    "model.arch": (_to_str, "direct_linear"),
    "model.hidden": (_to_int, 0),
    "train.mode": (_to_str, "erm"),
    "train.primal_lr": (_to_float, 1e-3),
    "train.dual_lr": (_to_float, 0.01),
    "train.slack_lr": (_to_float, 0.01),
    "train.epochs": (_to_int, 10),
    "train.batch_size": (_to_int, 64),
    "train.dual_init": (_to_float, 1.0),
    "train.optimizer": (_to_str, "adam"),
    "train.beta1": (_to_float, 0.9),
    "train.beta2": (_to_float, 0.999),
    "train.eps": (_to_float, 1e-8),
    "train.early_stopping": (_to_bool, True),
    "train.patience": (_to_int, 3),
    "train.seed": (_to_int, 0),
    "train.dual_eval": (_to_str, "batch"),
    "constraint.source": (_to_str, "none"),
    "constraint.epsilon": (_to_float_list, []),
    "constraint.q": (_to_float, 0.5),
    "constraint.split": (_to_str, "val"),
    "constraint.erm_dir": (_to_str, ""),
    "constraint.alpha": (_to_float, 1.0),
    "grid.erm_dir": (_to_str, ""),
}

_SOURCES = ("none", "explicit", "quantile", "exponential")
_ERROR_SPLITS = ("train", "val")
_CONSTRAINED_MODES = ("constrained", "resilient", "resilient_dualreg")


def parse_config_text(text):
    """Raw `key = value` pairs from config text; duplicate keys are errors."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}", "empty key")
        if key in raw:
            raise ConfigError(key, "duplicate key")
        raw[key] = value.strip()
    return raw


@dataclass
class RunConfig:
    """Fully resolved run configuration (all defaults materialized)."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def from_text(cls, text, overrides=None):
        raw = parse_config_text(text)
        if overrides:
            raw.update({k: _fmt(v) for k, v in overrides.items()})
        values = {}
        for key, value in raw.items():
            if key not in _SCHEMA:
                raise ConfigError(key, "unknown key")
            conv, _ = _SCHEMA[key]
            try:
                values[key] = conv(value)
            except ValueError as exc:
                raise ConfigError(key, f"bad value {value!r}: {exc}") from None
        for key, (_, default) in _SCHEMA.items():
            if key in values:
                continue
            if default is _REQUIRED:
                raise ConfigError(key, "required key missing")
            values[key] = default
        cfg = cls(values=values)
        cfg._validate()
        return cfg

    @classmethod
    def from_file(cls, path, overrides=None):
        if not os.path.isfile(path):
            raise ConfigError("config", f"no such file: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read(), overrides)

    def _validate(self):
        v = self.values
        if v["data.source"] not in ("synth", "csv"):
            raise ConfigError("data.source", f"unknown source {v['data.source']!r}")
        if v["data.source"] == "csv":
            if not v["data.path"]:
                raise ConfigError("data.path", "csv source needs a path")
            if not os.path.isfile(v["data.path"]):
                raise ConfigError("data.path", f"no such file: {v['data.path']}")
        else:
            if v["data.length"] < 1 or v["data.channels"] < 1:
                raise ConfigError("data.length", "synth needs length, channels >= 1")
            if v["data.noise_growth"] < 0:
                raise ConfigError("data.noise_growth", "must be >= 0")
        if v["window.context_len"] < 1:
            raise ConfigError("window.context_len", "must be >= 1")
        if v["window.pred_len"] < 1:
            raise ConfigError("window.pred_len", "must be >= 1")
        if v["model.arch"] not in ("direct_linear", "tied_linear", "mlp1"):
            raise ConfigError("model.arch", f"unknown arch {v['model.arch']!r}")
        if v["model.arch"] == "mlp1" and v["model.hidden"] < 1:
            raise ConfigError("model.hidden", "mlp1 needs hidden >= 1")
        source = v["constraint.source"]
        if source not in _SOURCES:
            raise ConfigError("constraint.source", f"unknown source {source!r}")
        mode = v["train.mode"]
        if mode in _CONSTRAINED_MODES and source == "none":
            raise ConfigError(
                "constraint.source",
                f"train.mode = {mode} needs an epsilon source "
                "(explicit, quantile, or exponential)")
        if mode == "monotonic" and source != "none":
            raise ConfigError("constraint.source",
                              "monotonic mode takes no epsilon source")
        if source == "explicit":
            eps = v["constraint.epsilon"]
            if len(eps) != v["window.pred_len"]:
                raise ConfigError(
                    "constraint.epsilon",
                    f"need {v['window.pred_len']} entries, got {len(eps)}")
            if any(e < 0 for e in eps):
                raise ConfigError("constraint.epsilon", "entries must be >= 0")
        if source in ("quantile", "exponential"):
            if v["constraint.split"] not in _ERROR_SPLITS:
                raise ConfigError("constraint.split", "must be train or val")
            if not (v["constraint.erm_dir"] or v["grid.erm_dir"]):
                raise ConfigError(
                    "constraint.erm_dir",
                    f"{source} source needs a reference run directory "
                    "(constraint.erm_dir or grid.erm_dir)")
        if source == "quantile" and not 0.0 <= v["constraint.q"] <= 1.0:
            raise ConfigError("constraint.q", "must be in [0, 1]")
        if v["constraint.alpha"] <= 0:
            raise ConfigError("constraint.alpha", "must be > 0")
        # TrainConfig re-validates learning rates etc.; run it now so a bad
        # rate fails at config load, not mid-run.
        self.train_config()

    def resolved_text(self):
        """Canonical config text: every key, sorted, defaults included."""
        lines = [f"{key} = {_fmt(self.values[key])}" for key in sorted(self.values)]
        return "\n".join(lines) + "\n"

    def fingerprint(self):
        digest = hashlib.sha256(self.resolved_text().encode("utf-8"))
        return digest.hexdigest()[:16]

    def dataset_tag(self):
        if self.values["data.source"] == "synth":
            return "synth"
        return os.path.basename(self.values["data.path"])

    def train_config(self):
        from .trainer import TrainConfig
        v = self.values
        return TrainConfig(
            mode=v["train.mode"],
            primal_lr=v["train.primal_lr"],
            dual_lr=v["train.dual_lr"],
            slack_lr=v["train.slack_lr"],
            epochs=v["train.epochs"],
            batch_size=v["train.batch_size"],
            dual_init=v["train.dual_init"],
            optimizer=v["train.optimizer"],
            adam_beta1=v["train.beta1"],
            adam_beta2=v["train.beta2"],
            adam_eps=v["train.eps"],
            early_stopping=v["train.early_stopping"],
            patience=v["train.patience"],
            seed=v["train.seed"],
            dual_eval=v["train.dual_eval"],
        )
