"""Python access to the tdcr simulation core.

Thin wrappers over the compiled ``_core`` module that accept config paths or
dicts and return plain Python objects.
"""

from __future__ import annotations

import json
import os
from typing import Any, Mapping, Optional, Union

from . import _core
from ._core import (
    ACTUATORS,
    SEGMENTS,
    InvalidInput,
    IoError,
    SafeZone,
    arcs_to_actuators,
    disk_jacobians,
    forward_kinematics,
    straight_state,
    tip_position,
)

ConfigLike = Union[str, os.PathLike, Mapping[str, Any]]

__all__ = [
    "ACTUATORS",
    "SEGMENTS",
    "InvalidInput",
    "IoError",
    "SafeZone",
    "arcs_to_actuators",
    "disk_jacobians",
    "forward_kinematics",
    "straight_state",
    "tip_position",
    "load_config",
    "run",
    "write_run",
]


def _config_text(config: ConfigLike) -> tuple[str, str]:
    if isinstance(config, Mapping):
        return json.dumps(dict(config)), "."
    path = os.fspath(config)
    with open(path, encoding="utf-8") as f:
        return f.read(), os.path.dirname(os.path.abspath(path))


def load_config(config: ConfigLike) -> dict:
    """Validated config with every default filled in."""
    text, base = _config_text(config)
    return json.loads(_core.normalize_config(text, base))


def run(
    config: ConfigLike,
    seed: Optional[int] = None,
    controller: Optional[str] = None,
    rate_hz: Optional[float] = None,
) -> tuple[dict, dict]:
    """Runs one closed-loop scenario; returns (summary, per-tick columns)."""
    text, base = _config_text(config)
    summary, columns = _core.run(text, base, seed, controller, rate_hz)
    return json.loads(summary), columns


def write_run(config: ConfigLike, out_dir: Union[str, os.PathLike]) -> None:
    """Same files as ``tdcr run``: metrics.csv, timing.csv, summary.json."""
    text, base = _config_text(config)
    _core.write_run(text, base, os.fspath(out_dir))
