"""Run configuration: one JSON document per run, validated up front.

Unknown keys are rejected so typos fail before any work starts. Individual
keys can be overridden from the command line with ``--set a.b=value``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .encoders import DEFAULT_N_BINS, ENCODER_KINDS


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


_DATA_KEYS = {
    "kind", "path", "train", "valid", "test", "label", "time", "ignore",
    "fractions", "rows", "columns", "prevalence", "signal_scale",
}
_ENCODER_KEYS = {"kind", "n_bins", "categorical"}
_MODEL_KEYS = {
    "kan_layers", "gmlp_layers", "hidden_dim", "grid_size", "spline_degree",
    "dropout", "spline_range", "dropout_after_each_kan",
}
_TRAIN_KEYS = {
    "batch_size", "lr0", "lr_decay_factor", "lr_decay_every", "max_epochs",
    "patience", "adam_beta1", "adam_beta2", "adam_eps",
}
_GRID_KEYS = {"gmlp_layers", "kan_layers", "grid_size", "hidden_dim", "dropout"}
_TOP_KEYS = {"seed", "output_dir", "data", "encoder", "model", "train", "grid"}


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object, got {type(section).__name__}")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "runs/out"
    data: dict = field(default_factory=dict)
    encoder: dict = field(default_factory=lambda: {"kind": "qle", "n_bins": DEFAULT_N_BINS})
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    grid: dict | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        _check_keys(doc, _TOP_KEYS, "config")
        cfg = cls(
            seed=doc.get("seed", 0),
            output_dir=doc.get("output_dir", "runs/out"),
            data=dict(doc.get("data", {})),
            encoder={"kind": "qle", "n_bins": DEFAULT_N_BINS} | dict(doc.get("encoder", {})),
            model=dict(doc.get("model", {})),
            train=dict(doc.get("train", {})),
            grid=None if doc.get("grid") is None else dict(doc["grid"]),
        )
        cfg.validate()
        return cfg

    def validate(self):
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        _check_keys(self.data, _DATA_KEYS, "data")
        _check_keys(self.encoder, _ENCODER_KEYS, "encoder")
        _check_keys(self.model, _MODEL_KEYS, "model")
        _check_keys(self.train, _TRAIN_KEYS, "train")
        if self.grid is not None:
            _check_keys(self.grid, _GRID_KEYS, "grid")
        kind = self.data.get("kind")
        if kind not in ("csv", "synth"):
            raise ConfigError(f"data.kind must be 'csv' or 'synth', got {kind!r}")
        if kind == "csv":
            has_single = "path" in self.data
            has_triple = all(k in self.data for k in ("train", "valid", "test"))
            if not (has_single or has_triple):
                raise ConfigError("data: csv needs either 'path' (+fractions) or train/valid/test paths")
        else:
            rows = self.data.get("rows")
            if not (isinstance(rows, list) and len(rows) == 3 and all(isinstance(r, int) and r > 0 for r in rows)):
                raise ConfigError("data: synth needs rows = [n_train, n_valid, n_test]")
        if self.encoder["kind"] not in ENCODER_KINDS:
            raise ConfigError(f"encoder.kind must be one of {ENCODER_KINDS}")
        if not (isinstance(self.encoder["n_bins"], int) and self.encoder["n_bins"] >= 1):
            raise ConfigError("encoder.n_bins must be a positive integer")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "data": self.data,
            "encoder": self.encoder,
            "model": self.model,
            "train": self.train,
            "grid": self.grid,
        }


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``a.b=value`` overrides; values parse as JSON, else raw strings."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r}: {part!r} is not a section")
        node[parts[-1]] = value
    return doc
