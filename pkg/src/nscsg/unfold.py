"""Finite unfolding of a game from an initial state over a fixed horizon.

Two structures are produced: a :class:`GameTree` whose nodes are histories
(parent links instead of explicit sequences), and a :class:`RegionGraph`
where all histories sharing the same (state, stage) pair are merged.  Both
expose the same node interface, so the solvers operate on either.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, ResourceLimitError
from .model import (
    GlobalState,
    NsCsg,
    RewardStructure,
    available_labels,
    canonical_key,
    refresh_percepts,
)

DEFAULT_NODE_CAP = 5_000_000


@dataclass
class Node:
    """One history (tree) or one merged (state, stage) class (region graph).

    ``state`` stores percepts as delivered by the previous step; ``decision``
    is the state used for availability (percepts refreshed unless the model
    opts out).  ``children`` maps each joint action to the tuple of
    (probability, child id) pairs.
    """

    id: int
    stage: int
    state: GlobalState
    decision: GlobalState
    parent: int | None = None
    in_action: tuple[str, ...] | None = None
    menus: tuple[tuple[str, ...], ...] = ()
    joints: tuple[tuple[str, ...], ...] = ()
    children: dict = field(default_factory=dict)
    parents: tuple[int, ...] = ()


class Structure:
    """Shared interface of game trees and region graphs."""

    mode = "tree"

    def __init__(self, model: NsCsg, horizon: int, nodes: list[Node], build_time: float):
        self.model = model
        self.horizon = horizon
        self.nodes = nodes
        self.build_time = build_time

    @property
    def root(self) -> Node:
        return self.nodes[0]

    def is_leaf(self, node: Node) -> bool:
        return node.stage == self.horizon

    def succ(self, node: Node) -> list[Node]:
        """Deduplicated one-stage successors; empty for a leaf."""
        if self.is_leaf(node):
            return []
        seen, out = set(), []
        for pairs in node.children.values():
            for _, cid in pairs:
                if cid not in seen:
                    seen.add(cid)
                    out.append(self.nodes[cid])
        return out

    def stage_nodes(self, stage: int) -> list[Node]:
        return [n for n in self.nodes if n.stage == stage]

    def nonleaf_ids(self) -> list[int]:
        return [n.id for n in self.nodes if not self.is_leaf(n)]

    def n_transitions(self) -> int:
        return sum(len(pairs) for n in self.nodes for pairs in n.children.values())

    def to_json(self, path=None):
        doc = {
            "mode": self.mode,
            "horizon": self.horizon,
            "nodes": [
                {
                    "id": n.id,
                    "stage": n.stage,
                    "env": n.state.env.tolist(),
                    "agents": [
                        {"loc": a.loc.tolist(), "per": a.per.tolist()} for a in n.state.agent_states
                    ],
                    "edges": [
                        {"action": list(joint), "to": [[p, c] for p, c in pairs]}
                        for joint, pairs in n.children.items()
                    ],
                }
                for n in self.nodes
            ],
        }
        if path is not None:
            with open(path, "w") as fh:
                json.dump(doc, fh)
        return doc


class GameTree(Structure):
    mode = "tree"


class RegionGraph(Structure):
    mode = "region"

    def __init__(self, model, horizon, nodes, build_time, key_index):
        super().__init__(model, horizon, nodes, build_time)
        self.key_index = key_index  # (canonical merged-state key, stage) -> node id

    def node_for(self, state: GlobalState, stage: int) -> Node:
        merged = state if self.model.availability_on_old_percept else refresh_percepts(self.model, state)
        return self.nodes[self.key_index[(canonical_key(merged), stage)]]


def _expand(model: NsCsg, node: Node):
    """Joint-action menus and the successor distribution map of one node."""
    from .model import joint_actions, successors

    decision = node.decision
    menus = tuple(available_labels(model, decision, i) for i in range(model.n_agents))
    joints = tuple(joint_actions(model, node.state))
    edges = {}
    for joint in joints:
        edges[joint] = successors(model, node.state, joint)
    return menus, joints, edges


def _decision_state(model: NsCsg, state: GlobalState) -> GlobalState:
    return state if model.availability_on_old_percept else refresh_percepts(model, state)


def unfold_tree(model: NsCsg, state: GlobalState, horizon: int, max_nodes: int = DEFAULT_NODE_CAP) -> GameTree:
    """Breadth-first unfolding into a history tree with deterministic node ids."""
    if horizon < 0:
        raise ModelError("horizon must be nonnegative")
    t0 = time.perf_counter()
    model.check_state(state)
    root = Node(0, 0, state, _decision_state(model, state))
    nodes = [root]
    frontier = [root]
    for stage in range(horizon):
        nxt = []
        for node in frontier:
            menus, joints, edges = _expand(model, node)
            node.menus, node.joints = menus, joints
            for joint in joints:
                pairs = []
                for succ_state, prob in edges[joint]:
                    child = Node(
                        len(nodes), stage + 1, succ_state,
                        _decision_state(model, succ_state) if stage + 1 < horizon else succ_state,
                        parent=node.id, in_action=joint,
                    )
                    child.parents = (node.id,)
                    nodes.append(child)
                    nxt.append(child)
                    pairs.append((prob, child.id))
                    if len(nodes) > max_nodes:
                        raise ResourceLimitError(
                            f"tree exceeded {max_nodes} nodes at stage {stage + 1}",
                            stats={"nodes": len(nodes), "stage": stage + 1},
                        )
                node.children[joint] = tuple(pairs)
        frontier = nxt
    return GameTree(model, horizon, nodes, time.perf_counter() - t0)


def unfold_regions(model: NsCsg, state: GlobalState, horizon: int, max_nodes: int = DEFAULT_NODE_CAP) -> RegionGraph:
    """Unfolding merged by (canonical state key, stage).

    States are keyed after refreshing percepts, because a stored percept is
    overwritten by the observation functions before anything can read it;
    two states with equal local states, refreshed percepts and environment
    have identical futures.  (This assumes reward functions do not read the
    stale stored percepts, which holds for observation-driven models.)
    """
    if horizon < 0:
        raise ModelError("horizon must be nonnegative")
    # with availability on the old percept the stored percept stays relevant,
    # so merging must key on the raw state
    def merge_state(s: GlobalState) -> GlobalState:
        return s if model.availability_on_old_percept else refresh_percepts(model, s)

    t0 = time.perf_counter()
    model.check_state(state)
    root = Node(0, 0, state, _decision_state(model, state))
    nodes = [root]
    key_index = {(canonical_key(merge_state(state)), 0): 0}
    frontier = [root]
    parent_sets: dict[int, set] = {0: set()}
    for stage in range(horizon):
        nxt = []
        for node in frontier:
            menus, joints, edges = _expand(model, node)
            node.menus, node.joints = menus, joints
            for joint in joints:
                pairs = []
                for succ_state, prob in edges[joint]:
                    refreshed = merge_state(succ_state)
                    key = (canonical_key(refreshed), stage + 1)
                    cid = key_index.get(key)
                    if cid is None:
                        child = Node(
                            len(nodes), stage + 1, succ_state,
                            succ_state if model.availability_on_old_percept else refreshed,
                            parent=node.id, in_action=joint,
                        )
                        nodes.append(child)
                        key_index[key] = child.id
                        parent_sets[child.id] = set()
                        nxt.append(child)
                        cid = child.id
                        if len(nodes) > max_nodes:
                            raise ResourceLimitError(
                                f"region graph exceeded {max_nodes} nodes at stage {stage + 1}",
                                stats={"nodes": len(nodes), "stage": stage + 1},
                            )
                    parent_sets[cid].add(node.id)
                    pairs.append((prob, cid))
                node.children[joint] = tuple(pairs)
        frontier = nxt
    for nid, parents in parent_sets.items():
        nodes[nid].parents = tuple(sorted(parents))
    return RegionGraph(model, horizon, nodes, time.perf_counter() - t0, key_index)


# ---------------------------------------------------------------------------
# paths and statistics


@dataclass(frozen=True)
class Path:
    """Alternating states and joint actions from some stage to the horizon."""

    start_stage: int
    states: tuple[GlobalState, ...]
    actions: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1:
            raise ModelError("path needs exactly one more state than actions")


def path_value(rewards: tuple[RewardStructure, ...], path: Path) -> np.ndarray:
    """Accumulated reward of each agent along ``path``.

    Sums action plus state rewards over all but the final state, then adds
    the final state reward.
    """
    out = np.zeros(len(rewards))
    for k, joint in enumerate(path.actions):
        s = path.states[k]
        for i, r in enumerate(rewards):
            out[i] += r.action_reward(s, joint) + r.state_reward(s)
    for i, r in enumerate(rewards):
        out[i] += r.state_reward(path.states[-1])
    return out


def stats(structure: Structure) -> dict:
    """Node/transition counts, per-stage sizes and construction wall time."""
    per_stage = {}
    for n in structure.nodes:
        per_stage[n.stage] = per_stage.get(n.stage, 0) + 1
    return {
        "mode": structure.mode,
        "nodes": len(structure.nodes),
        "transitions": structure.n_transitions(),
        "per_stage": [per_stage.get(k, 0) for k in range(structure.horizon + 1)],
        "build_time": structure.build_time,
    }
