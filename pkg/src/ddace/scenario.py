"""Scenario description and the key-value sidecar file that accompanies a corpus.

Sidecar layout, one ``key = value`` pair per line, ``#`` starts a comment::

    name = task2
    bounds = 0.0,0.0,10.0,10.0
    speed = 1.0
    max_steps = 13
    eps_goal = 0.05
    action = idle,stationary,1.0,0
    action = move,motion,0.0,0
    node = 0,robot,ugv,1.0,1.0          # id,kind,modality,x,y
    attach = 4,0                         # object id,carrier id
    goal_node = 3,5.0,5.0,0.05           # node id,x,y,tolerance
    goal_object = 4,8.0,8.0,0.05         # object id,x,y,tolerance

Repeated keys (``action``, ``node``, ...) accumulate in file order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .demo import ActionSpec, Demonstration, NodeDescriptor, EPS_GOAL
from .errors import ParseError, SchemaError


@dataclass(frozen=True)
class GoalCondition:
    node_id: int
    position: tuple
    tolerance: float = EPS_GOAL
    is_object: bool = False

    def satisfied(self, positions: dict) -> bool:
        p = positions[self.node_id]
        return float(np.hypot(p[0] - self.position[0], p[1] - self.position[1])) <= self.tolerance


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    nodes: tuple
    initial: dict
    vocab: tuple
    bounds: tuple = (0.0, 0.0, 10.0, 10.0)
    goals: tuple = ()
    attachments: dict = field(default_factory=dict)
    max_steps: int = 20
    speed: float = 1.0
    eps_goal: float = EPS_GOAL

    def __post_init__(self):
        if self.eps_goal <= 0 or self.speed <= 0 or self.max_steps < 1:
            raise SchemaError("eps_goal and speed must be positive, max_steps >= 1")
        ids = {n.id for n in self.nodes}
        if set(self.initial) != ids:
            raise SchemaError("initial positions must cover exactly the scenario nodes")

    @property
    def node_ids(self) -> tuple:
        return tuple(n.id for n in self.nodes)

    def node(self, node_id: int) -> NodeDescriptor:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def robots(self) -> list:
        return [n.id for n in self.nodes if n.kind == "robot"]


def scenario_for_demo(base: ScenarioSpec, d: Demonstration, name: str | None = None) -> ScenarioSpec:
    """Held-out scenario: initial layout from frame 0, goals from the final frame.

    Every robot or object whose final position differs from its initial one
    yields a goal condition at the final position.
    """
    initial = {n.id: tuple(map(float, d.positions[0, i])) for i, n in enumerate(d.nodes)}
    goals = []
    for i, n in enumerate(d.nodes):
        if n.kind == "goal":
            continue
        start, end = d.positions[0, i], d.positions[-1, i]
        if np.hypot(*(end - start)) > 1e-9:
            goals.append(GoalCondition(n.id, (float(end[0]), float(end[1])),
                                       base.eps_goal, n.kind == "object"))
    return replace(base, name=name or base.name, nodes=d.nodes, initial=initial,
                   goals=tuple(goals))


# ------------------------------------------------------------------------- I/O

def _num(v: float) -> str:
    return repr(float(v))


def serialize_scenario(s: ScenarioSpec) -> str:
    lines = [
        f"name = {s.name}",
        "bounds = " + ",".join(_num(b) for b in s.bounds),
        f"speed = {_num(s.speed)}",
        f"max_steps = {s.max_steps}",
        f"eps_goal = {_num(s.eps_goal)}",
    ]
    for a in s.vocab:
        lines.append(f"action = {a.name},{'motion' if a.motion else 'stationary'},"
                     f"{_num(a.duration)},{int(a.interactive)}")
    for n in s.nodes:
        x, y = s.initial[n.id]
        lines.append(f"node = {n.id},{n.kind},{n.modality},{_num(x)},{_num(y)}")
    for obj, carrier in sorted(s.attachments.items()):
        lines.append(f"attach = {obj},{carrier}")
    for g in s.goals:
        key = "goal_object" if g.is_object else "goal_node"
        lines.append(f"{key} = {g.node_id},{_num(g.position[0])},{_num(g.position[1])},"
                     f"{_num(g.tolerance)}")
    return "\n".join(lines) + "\n"


def write_scenario(s: ScenarioSpec, path) -> None:
    Path(path).write_text(serialize_scenario(s), encoding="utf-8")


def parse_scenario_text(text: str) -> ScenarioSpec:
    scalars = {}
    vocab, nodes, initial, attach, goals = [], [], {}, {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        parts = [p.strip() for p in value.split(",")]
        try:
            if key == "action":
                name, cls, dur, inter = parts
                if cls not in ("motion", "stationary"):
                    raise ValueError(f"action class must be motion|stationary, got {cls!r}")
                vocab.append(ActionSpec(name, cls == "motion", float(dur), bool(int(inter))))
            elif key == "node":
                nid, kind, modality, x, y = parts
                nodes.append(NodeDescriptor(int(nid), kind, modality))
                initial[int(nid)] = (float(x), float(y))
            elif key == "attach":
                attach[int(parts[0])] = int(parts[1])
            elif key in ("goal_node", "goal_object"):
                nid, x, y, tol = parts
                goals.append(GoalCondition(int(nid), (float(x), float(y)), float(tol),
                                           key == "goal_object"))
            elif key in ("name", "bounds", "speed", "max_steps", "eps_goal"):
                scalars[key] = value
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, SchemaError) as exc:
            raise ParseError(str(exc), line=lineno) from None
    if not vocab or not nodes:
        raise ParseError("sidecar needs at least one action and one node")
    try:
        return ScenarioSpec(
            name=scalars.get("name", "scenario"),
            nodes=tuple(nodes), initial=initial, vocab=tuple(vocab),
            bounds=tuple(float(b) for b in scalars.get("bounds", "0,0,10,10").split(",")),
            goals=tuple(goals), attachments=attach,
            max_steps=int(scalars.get("max_steps", 20)),
            speed=float(scalars.get("speed", 1.0)),
            eps_goal=float(scalars.get("eps_goal", EPS_GOAL)))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def parse_scenario(path) -> ScenarioSpec:
    return parse_scenario_text(Path(path).read_text(encoding="utf-8"))
