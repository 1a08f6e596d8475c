"""Flat ``key=value`` run configuration with a fixed schema."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Callable

from .blocks import SemNetConfig


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int_list(s: str) -> list[int]:
    return [int(p) for p in s.split(",") if p.strip()]


# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    # model
    "stages": (int, 4),
    "base_channels": (int, 16),
    "blocks_per_stage": (_int_list, None),
    "ssm_state": (int, 16),
    "expansion": (int, 2),
    "pool_factor": (int, 4),
    "use_pe": (_bool, True),
    # data / training
    "data_dir": (str, None),
    "image_size": (int, 64),
    "batch_size": (int, 1),
    "steps": (int, 1000),
    "lr": (float, 2e-4),
    "w_hole": (float, 6.0),
    "w_valid": (float, 1.0),
    "mask_kind": (str, "random-walk-strokes"),
    "mask_low": (float, 0.2),
    "mask_high": (float, 0.4),
    "checkpoint_every": (int, 500),
    "log_every": (int, 50),
    "flip": (_bool, True),
    # evaluation
    "eval_mask_kind": (str, "random-walk-strokes"),
}

MODEL_KEYS = ("stages", "base_channels", "blocks_per_stage", "ssm_state", "expansion", "pool_factor", "use_pe")


def parse_pairs(lines, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        out[key] = value.strip()
    return out


class RunConfig:
    """Validated settings; every key must appear in :data:`SCHEMA`."""

    def __init__(self, values: dict[str, str] | None = None):
        self.values = {k: default for k, (_, default) in SCHEMA.items()}
        for key, raw in (values or {}).items():
            self.set(key, raw)

    @classmethod
    def load(cls, path=None, overrides: list[str] | None = None) -> "RunConfig":
        pairs: dict[str, str] = {}
        if path is not None:
            p = Path(path)
            try:
                text = p.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config file {p}: {exc.strerror}") from None
            pairs.update(parse_pairs(text.splitlines(), str(p)))
        pairs.update(parse_pairs(overrides or [], "--set"))
        return cls(pairs)

    def set(self, key: str, raw: str) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            self.values[key] = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None

    def __getitem__(self, key: str):
        return self.values[key]

    def model_config(self) -> SemNetConfig:
        kw = {k: self.values[k] for k in MODEL_KEYS if self.values[k] is not None}
        try:
            if "blocks_per_stage" in kw:
                return SemNetConfig(**kw)
            return SemNetConfig.for_stages(kw.pop("stages"), **kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
