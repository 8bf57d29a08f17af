"""Swappable controller and planner interfaces.

A benchmark run needs three components, each built fresh per trial by a
factory so trials never share mutable state:

* low level: one instance per motor, ``step(omega_ref, omega_meas, terrain, dt) -> torque``
* mid level: ``step(pose, waypoints, obstacles) -> MpcResult``-like object with
  ``v``, ``omega``, ``predicted``, ``done``, ``waypoint_index`` and ``band``
* global: ``plan(grid, start_xy, goal_xy) -> Path``

Factories can be registered under a name or referenced as ``"module:attr"``.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass
from typing import Any, Callable, Protocol, runtime_checkable

from .errors import ConfigError


@runtime_checkable
class LowLevelController(Protocol):
    def step(self, omega_ref: float, omega_meas: float, terrain: Any, dt: float) -> float: ...


@runtime_checkable
class Tracker(Protocol):
    def step(self, pose, waypoints, obstacles) -> Any: ...


@runtime_checkable
class GlobalPlanner(Protocol):
    def plan(self, grid, start_xy, goal_xy) -> Any: ...


_REGISTRY: dict[str, dict[str, Callable]] = {"low_level": {}, "mid_level": {}, "global": {}}


def register(slot: str, name: str, factory: Callable) -> None:
    if slot not in _REGISTRY:
        raise ConfigError(f"unknown plugin slot '{slot}'")
    _REGISTRY[slot][name] = factory


def resolve(slot: str, ref: str | Callable) -> Callable:
    """Factory for ``ref``: a callable, a registered name or ``"module:attr"``."""
    if callable(ref):
        return ref
    if slot not in _REGISTRY:
        raise ConfigError(f"unknown plugin slot '{slot}'")
    if ref in _REGISTRY[slot]:
        return _REGISTRY[slot][ref]
    if ":" in ref:
        module, _, attr = ref.partition(":")
        try:
            obj = getattr(importlib.import_module(module), attr)
        except (ImportError, AttributeError) as exc:
            raise ConfigError(f"cannot load plugin '{ref}': {exc}") from exc
        if not callable(obj):
            raise ConfigError(f"plugin '{ref}' is not callable")
        return obj
    raise ConfigError(f"no {slot} plugin named '{ref}'")


@dataclass(frozen=True)
class PluginSet:
    """Factories for the three control layers.

    ``None`` selects the baseline for that slot; the bench fills in the
    baselines with the configured parameters.
    """

    low_level: Callable | None = None
    mid_level: Callable | None = None
    global_planner: Callable | None = None

    @classmethod
    def from_names(cls, low_level=None, mid_level=None, global_planner=None) -> PluginSet:
        return cls(
            resolve("low_level", low_level) if low_level else None,
            resolve("mid_level", mid_level) if mid_level else None,
            resolve("global", global_planner) if global_planner else None,
        )
