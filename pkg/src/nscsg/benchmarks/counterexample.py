"""Two-stage two-agent game whose locally optimal equilibrium is arbitrarily
far from the social-welfare optimum.

Agent 1 chooses between U and D, agent 2 between L and R.  Node 4 (reached by
(D, L)) is the only branching second-stage subgame; its terminal payoffs are
(0,8), (0,0), (0,0), (5,2).  The remaining stage-1 nodes continue through a
single idle joint action into absorbing leaves carrying the accumulated
payoffs (1, 1+phi), (3, phi) and (0, 0).  With phi < 0 the socially best play
at node 4 differs from the subgame-local optimum, and the gap grows without
bound as phi decreases.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ModelError
from ..model import (
    Action,
    AgentSpec,
    AgentState,
    GlobalState,
    NsCsg,
    RewardStructure,
    as_vector,
)
from . import BuiltModel

# node -> joint action -> successor node
_EDGES = {
    1: {("U", "L"): 2, ("U", "R"): 3, ("D", "L"): 4, ("D", "R"): 5},
    4: {("U", "L"): 6, ("U", "R"): 7, ("D", "L"): 8, ("D", "R"): 9},
    2: {("idle", "idle"): 10},
    3: {("idle", "idle"): 11},
    5: {("idle", "idle"): 12},
}

_BRANCHING_NODES = (1, 4)


@dataclass(frozen=True)
class CounterexampleParams:
    phi: float = -10.0
    zero_sum: bool = False  # replace agent 2's rewards with the negation of agent 1's


def _leaf_rewards(phi: float) -> dict[int, tuple[float, float]]:
    return {
        6: (0.0, 8.0),
        7: (0.0, 0.0),
        8: (0.0, 0.0),
        9: (5.0, 2.0),
        10: (1.0, 1.0 + phi),
        11: (3.0, phi),
        12: (0.0, 0.0),
    }


def build_counterexample(params: CounterexampleParams = CounterexampleParams()) -> BuiltModel:
    try:
        phi_ok = np.isfinite(float(params.phi))
    except (TypeError, ValueError):
        phi_ok = False
    if not phi_ok:
        raise ModelError(f"phi must be a finite number, got {params.phi!r}")

    dummy = (as_vector([0.0]),)
    # the percept mirrors the node id so availability can branch on it
    percepts = tuple(as_vector([k]) for k in range(1, 13))

    def observation(state):
        return state.env

    def local_transition(loc, per, joint):
        return ((loc, 1.0),)

    def make_availability(labels):
        def availability(loc, per):
            return labels if int(round(per[0])) in _BRANCHING_NODES else ()
        return availability

    agents = (
        AgentSpec(
            name="agent1",
            local_states=dummy,
            percepts=percepts,
            actions=(Action("U", as_vector([0.0])), Action("D", as_vector([1.0]))),
            availability=make_availability(("U", "D")),
            observation=observation,
            local_transition=local_transition,
        ),
        AgentSpec(
            name="agent2",
            local_states=dummy,
            percepts=percepts,
            actions=(Action("L", as_vector([0.0])), Action("R", as_vector([1.0]))),
            availability=make_availability(("L", "R")),
            observation=observation,
            local_transition=local_transition,
        ),
    )

    def env_step(env, actions):
        node = int(round(env[0]))
        joint = tuple(a.label for a in actions)
        table = _EDGES.get(node)
        if table is None:
            return env  # absorbing leaf
        if joint not in table:
            raise ModelError(f"node {node}: no edge for joint action {joint}")
        return as_vector([table[joint]])

    model = NsCsg(name="counterexample", agents=agents, env_step=env_step, env_dim=1)

    leaf = _leaf_rewards(params.phi)

    def make_state_reward(agent):
        def state_reward(state):
            pair = leaf.get(int(round(state.env[0])), (0.0, 0.0))
            if params.zero_sum:
                return pair[0] if agent == 0 else -pair[0]
            return pair[agent]
        return state_reward

    rewards = tuple(
        RewardStructure(action_reward=lambda s, a: 0.0, state_reward=make_state_reward(i))
        for i in range(2)
    )

    initial = GlobalState(
        tuple(AgentState(dummy[0], percepts[0]) for _ in range(2)), as_vector([1.0])
    )
    return BuiltModel(model=model, initial=initial, rewards=rewards, horizon=2,
                      extras={"phi": params.phi, "zero_sum": params.zero_sum})
