"""Flat ``key = value`` run configuration with strict key checking.

The file format is line-oriented: blank lines and ``#`` comments are
ignored, everything else must be ``key = value`` with a known key. Command
line ``--set key=value`` overrides win over file values, which win over
defaults. This module is deliberately numpy-free so the CLI can parse
configuration before deciding on thread pools.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .exceptions import ConfigError


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _parse_float_tuple(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _parse_paths(text: str) -> tuple[str, ...]:
    return tuple(tok for tok in text.replace(",", " ").split() if tok)


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    "data.interactions": (_parse_paths, ()),
    "data.kg": (str, ""),
    "prepare.n_core": (int, 10),
    "split.ratios": (_parse_float_tuple, (0.7, 0.2, 0.1)),
    "split.seed": (int, 0),
    "graph.inverse_relations": (_parse_bool, True),
    "model.embed_dim": (int, 64),
    "model.embed_mode": (str, "transd"),
    "model.loss_order": (str, "conventional"),
    "model.fusion": (str, "multiplication"),
    "model.shared_weights": (_parse_bool, False),
    "model.fusion_context": (str, "mean"),
    "model.layer_dims": (_parse_int_tuple, (64, 32, 16, 8)),
    "model.aggregator": (str, "bi-interaction"),
    "model.node_dropout": (float, 0.1),
    "train.learning_rate": (float, 1e-4),
    "train.batch_size": (int, 1024),
    "train.l2_user": (float, 1e-5),
    "train.l2_item": (float, 1e-5),
    "train.mode": (str, "alternating"),
    "train.max_epochs": (int, 1000),
    "train.patience": (int, 50),
    "train.monitor_k": (int, 20),
    "train.seed": (int, 0),
    "eval.k": (int, 20),
    "output.dir": (str, "runs/default"),
    "threads": (int, 0),
}


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def out_dir(self) -> Path:
        return Path(self.values["output.dir"])

    @property
    def prepared_dir(self) -> Path:
        return self.out_dir / "prepared"

    def estimator_kwargs(self) -> dict:
        v = self.values
        return dict(
            embed_dim=v["model.embed_dim"],
            embed_mode=v["model.embed_mode"],
            loss_order=v["model.loss_order"],
            fusion=v["model.fusion"],
            shared_weights=v["model.shared_weights"],
            fusion_context=v["model.fusion_context"],
            layer_dims=v["model.layer_dims"],
            aggregator=v["model.aggregator"],
            node_dropout=v["model.node_dropout"],
            learning_rate=v["train.learning_rate"],
            batch_size=v["train.batch_size"],
            l2_user=v["train.l2_user"],
            l2_item=v["train.l2_item"],
            train_mode=v["train.mode"],
            max_epochs=v["train.max_epochs"],
            patience=v["train.patience"],
            monitor_k=v["train.monitor_k"],
            seed=v["train.seed"],
        )


def _set_value(values: dict, key: str, raw: str, where: str) -> None:
    if key not in SCHEMA:
        raise ConfigError(f"{where}: unknown configuration key {key!r}")
    parser, _ = SCHEMA[key]
    try:
        values[key] = parser(raw.strip())
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from None


def load_run_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    """Defaults, then file values, then ``key=value`` override strings."""
    values = {key: default for key, (_, default) in SCHEMA.items()}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"configuration file not found: {path}")
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
            key, raw = stripped.split("=", 1)
            _set_value(values, key.strip(), raw, f"{path}:{line_no}")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        _set_value(values, key.strip(), raw, "--set")
    return RunConfig(values=values)


def write_run_config(path, values: dict) -> Path:
    """Emit a config file covering every key (stable ordering)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    merged = {key: default for key, (_, default) in SCHEMA.items()}
    merged.update(values)
    lines = []
    for key in SCHEMA:
        val = merged[key]
        if isinstance(val, (tuple, list)):
            val = ",".join(str(x) for x in val)
        elif isinstance(val, bool):
            val = "true" if val else "false"
        lines.append(f"{key} = {val}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
