"""Executable benchmark models: a two-stage analytic game, automated parking,
and a two-aircraft collision avoidance scenario."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ModelError
from ..model import GlobalState, NsCsg, RewardStructure


@dataclass(frozen=True)
class BuiltModel:
    """A ready-to-solve bundle: game, initial state, rewards and horizon."""

    model: NsCsg
    initial: GlobalState
    rewards: tuple[RewardStructure, ...]
    horizon: int
    extras: dict = field(default_factory=dict)


def build(name: str, params: dict | None = None) -> BuiltModel:
    """Construct a named benchmark from a parameter mapping."""
    params = dict(params or {})
    if name == "counterexample":
        from .counterexample import CounterexampleParams, build_counterexample

        return build_counterexample(CounterexampleParams(**params))
    if name == "parking":
        from .parking import ParkingParams, build_parking

        return build_parking(ParkingParams(**params))
    if name == "vcas":
        from .vcas import VcasParams, build_vcas

        return build_vcas(VcasParams(**params))
    raise ModelError(f"unknown benchmark {name!r}")
