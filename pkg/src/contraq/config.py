"""Flat key-value configuration files for experiments.

Format: one ``key = value`` per line, ``#`` comments, blank lines allowed,
optional ``[section]`` headers ignored (keys are globally unique).  The
``regime`` key is resolved first so the remaining keys override that regime's
defaults; command-line ``key=value`` overrides are applied after the file.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Iterable, Optional, Union

from .experiments import REGIME_CHOICES, ExperimentConfig, default_config


class ParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ValidationError(ValueError):
    def __init__(self, key: str, constraint: str):
        super().__init__(f"{key}: {constraint}")
        self.key = key
        self.constraint = constraint


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    if key not in _FIELDS:
        raise ValidationError(key, "unknown key")
    raw = raw.strip()
    if key == "regime":
        if raw not in REGIME_CHOICES:
            raise ValidationError(key, f"must be one of {', '.join(REGIME_CHOICES)}")
        return raw
    if key == "n_grid":
        try:
            return tuple(int(tok) for tok in raw.replace(",", " ").split())
        except ValueError:
            raise ValidationError(key, "expected comma-separated integers") from None
    if key == "tail_c":
        if raw.lower() in ("none", ""):
            return None
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(key, "expected a real number or 'none'") from None
    if key == "log_nuisance":
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValidationError(key, "expected a boolean")
    target = _FIELDS[key].type
    try:
        if "int" in str(target):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ValidationError(key, f"could not parse {raw!r}") from None


def _read_pairs(path: Union[str, Path]) -> list[tuple[int, str, str]]:
    pairs = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            continue
        if "=" not in stripped:
            raise ParseError(line_no, f"expected 'key = value', got {stripped!r}")
        key, raw = stripped.split("=", 1)
        pairs.append((line_no, key.strip(), raw))
    return pairs


def parse_config(
    path: Optional[Union[str, Path]],
    overrides: Iterable[str] = (),
    seed: Optional[int] = None,
) -> ExperimentConfig:
    """Resolve an experiment config from a file plus command-line overrides.

    A missing or empty file yields the full mild-regime defaults.  Unknown
    keys and constraint violations raise with the offending key named.
    """
    pairs: list[tuple[int, str, str]] = []
    if path is not None:
        pairs = _read_pairs(path)
    override_pairs = []
    for item in overrides:
        if "=" not in item:
            raise ValidationError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        override_pairs.append((0, key.strip(), raw))
    merged: dict[str, object] = {}
    for line_no, key, raw in pairs + override_pairs:
        try:
            merged[key] = _parse_value(key, raw)
        except ValidationError:
            raise
        except ParseError:
            raise
    regime = merged.pop("regime", "mild_seq")
    base = default_config(str(regime))
    if seed is not None:
        merged["seed"] = int(seed)
    try:
        return dataclasses.replace(base, **merged)
    except ValueError as exc:
        # re-raise config invariant failures with the ValidationError shape
        msg = str(exc)
        if "n_grid" in msg and "increasing" in msg:
            raise ValidationError("n_grid", "strictly increasing") from exc
        if "n_grid" in msg:
            raise ValidationError("n_grid", msg) from exc
        if "replications" in msg:
            raise ValidationError("replications", msg) from exc
        raise ValidationError("config", msg) from exc


def config_items(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Flat (key, rendered value) pairs, for manifests and config echoes."""
    items = []
    for f in dataclasses.fields(ExperimentConfig):
        val = getattr(cfg, f.name)
        if f.name == "n_grid":
            rendered = ",".join(str(int(n)) for n in val)
        elif val is None:
            rendered = "none"
        else:
            rendered = str(val)
        items.append((f.name, rendered))
    return items
