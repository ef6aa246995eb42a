"""Event-driven execution of the learned policy in a kinematic multi-robot world.

A decision epoch opens only when every robot is idle. The temporal network
proposes one action per robot, motion actions are turned into adapted GP
paths, and the world advances until the slowest robot finishes. Robots move
at constant speed along their path by arc length; ticks are spaced at most
``dt`` apart and also land on every robot's completion time.

The policy sees the world one epoch late: epoch 1 is planned from the
initial snapshot and epoch e > 1 from the snapshot at the start of epoch
e - 1. This mirrors training, where keyframe j (the first frame of step j,
taken before that step moves anything) predicts the labels of step j + 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AdaptationError
from .gp import adapt
from .tgn import ActionStep, attention_mask, predict_next_step, zero_state

log = logging.getLogger(__name__)

DT = 0.05


@dataclass
class WorldState:
    positions: dict                 # node id -> np.ndarray (2,)
    attachments: dict               # object id -> carrier id
    clock: float = 0.0
    targeted: dict = field(default_factory=dict)      # robot id -> targets used so far
    last_motion_target: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, spec) -> "WorldState":
        pos = {nid: np.array(p, dtype=float) for nid, p in spec.initial.items()}
        attach = dict(spec.attachments)
        for obj, carrier in attach.items():
            pos[obj] = pos[carrier].copy()
        return cls(pos, attach)

    def snapshot(self, node_ids) -> np.ndarray:
        return np.array([self.positions[n] for n in node_ids])

    def copy(self) -> "WorldState":
        return WorldState({k: v.copy() for k, v in self.positions.items()}, dict(self.attachments),
                          self.clock, {k: list(v) for k, v in self.targeted.items()},
                          dict(self.last_motion_target))


@dataclass(frozen=True)
class Fault:
    epoch: int
    robot: int
    action: int
    reason: str


@dataclass(frozen=True, eq=False)
class Epoch:
    index: int
    start: float
    end: float
    snapshot: np.ndarray            # what the policy was shown
    step: ActionStep
    assignments: dict               # robot -> (action id, target id)
    paths: dict                     # robot -> (M, 2) path for motion actions
    durations: dict                 # robot -> seconds
    remaining_at_end: dict          # robot -> path length left untravelled when the epoch closed


@dataclass(frozen=True, eq=False)
class ExecutionTrace:
    scenario: str
    node_ids: tuple
    epochs: tuple
    ticks: tuple                    # (clock, node id, x, y, action id)
    executed: dict                  # robot -> ((action id, target id), ...)
    motions: dict                   # robot -> [path, ...] in execution order
    faults: tuple
    goal_flags: tuple
    halt_reason: str

    @property
    def success(self) -> bool:
        return all(self.goal_flags) and not self.faults

    def to_csv(self) -> str:
        lines = ["clock,node_id,x,y,action_id"]
        lines += [f"{c!r},{n},{x!r},{y!r},{a}" for c, n, x, y, a in self.ticks]
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        lines = [f"scenario {self.scenario}", f"halt {self.halt_reason}",
                 f"goals {''.join('1' if g else '0' for g in self.goal_flags)}"]
        for e in self.epochs:
            acts = " ".join(f"{r}:{a}->{t}" for r, (a, t) in sorted(e.assignments.items())) or "idle"
            lines.append(f"epoch {e.index} [{e.start!r}, {e.end!r}] {acts}")
        for f in self.faults:
            lines.append(f"fault epoch {f.epoch} robot {f.robot} action {f.action}: {f.reason}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir, stem: str) -> None:
        out = Path(out_dir)
        (out / f"{stem}.csv").write_text(self.to_csv(), encoding="utf-8")
        (out / f"{stem}.txt").write_text(self.summary(), encoding="utf-8")


# -------------------------------------------------------------------- policy

def plan_step(model, mask, snapshot, s_prev):
    """Query the temporal network on a raw-coordinate snapshot."""
    return predict_next_step(model, snapshot, mask, s_prev)


def _edge_pairs(edges):
    return [(e.source, e.target) if hasattr(e, "source") else tuple(e) for e in edges]


def resolve_target(robot, action, ws: WorldState, spec, edges, tm):
    """Target node of a motion or interactive action, or None.

    Motion: the first out-neighbour of ``robot`` in the refined edge set that
    it has not targeted yet and for which a motion primitive exists; failing
    that, the nearest node with a primitive, ignoring nodes that already
    share the robot's position. Interactive: the robot's last motion target
    if it is a robot, else its first robot out-neighbour, else the nearest
    other robot.
    """
    me = spec.node(robot)
    here = ws.positions[robot]
    used = ws.targeted.get(robot, [])
    outs = [t for s, t in _edge_pairs(edges) if s == robot and t in spec.initial]

    def dist(n):
        return float(np.hypot(*(ws.positions[n] - here)))

    if action.motion:
        def ok(n):
            return n != robot and tm.get(me, spec.node(n)) is not None and dist(n) > spec.eps_goal
        for t in outs:
            if t not in used and ok(t):
                return t
        pool = [n for n in spec.node_ids if ok(n)]
    else:
        last = ws.last_motion_target.get(robot)
        if last is not None and spec.node(last).kind == "robot":
            return last
        for t in outs:
            if spec.node(t).kind == "robot":
                return t
        pool = [n for n in spec.robots if n != robot]
    return min(pool, key=lambda n: (dist(n), n)) if pool else None


# ------------------------------------------------------------------ physics

def _arclength(path):
    return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(path, axis=0).T))])


def _point_at(path, s_cum, s):
    if s >= s_cum[-1]:
        return path[-1].copy()
    j = int(np.searchsorted(s_cum, s, side="right")) - 1
    seg = s_cum[j + 1] - s_cum[j]
    w = 0.0 if seg == 0 else (s - s_cum[j]) / seg
    return path[j] + w * (path[j + 1] - path[j])


def execute_step(step: ActionStep, tm, ws: WorldState, spec, edges, epoch: int = 1,
                 dt: float = DT):
    """Carry out one epoch.

    Returns (new world, assignments, paths, durations, remaining path, faults, ticks).
    """
    ws = ws.copy()
    ids = spec.node_ids
    assignments, paths, durations, faults = {}, {}, {}, []
    for i, nid in enumerate(ids):
        if spec.node(nid).kind != "robot":
            continue
        a = int(step.actions[i])
        if a == 0:
            continue
        act = spec.vocab[a]
        target = -1
        if act.motion or act.interactive:
            target = resolve_target(nid, act, ws, spec, edges, tm)
            if target is None:
                faults.append(Fault(epoch, nid, a, "no target of a usable kind"))
                continue
        if act.motion:
            gp = tm.get(spec.node(nid), spec.node(target))
            if gp is None:
                faults.append(Fault(epoch, nid, a, "no motion primitive for this pair"))
                continue
            try:
                path = adapt(gp, ws.positions[nid], ws.positions[target])
            except AdaptationError as exc:
                faults.append(Fault(epoch, nid, a, str(exc)))
                continue
            paths[nid] = path
            durations[nid] = float(_arclength(path)[-1]) / spec.speed
        else:
            durations[nid] = float(act.duration)
        assignments[nid] = (a, target)

    span = max(durations.values(), default=0.0)
    rel = np.arange(0.0, span, dt).tolist() + sorted(set(durations.values())) + [span]
    rel = sorted(set(t for t in rel if 0.0 < t <= span))
    arcs = {r: _arclength(p) for r, p in paths.items()}
    ticks = []
    for tau in rel:
        for r, p in paths.items():
            ws.positions[r] = _point_at(p, arcs[r], spec.speed * tau)
        for obj, carrier in ws.attachments.items():
            ws.positions[obj] = ws.positions[carrier].copy()
        clock = ws.clock + tau
        for i, nid in enumerate(ids):
            active = assignments.get(nid, (0, -1))[0] if tau <= durations.get(nid, 0.0) else 0
            ticks.append((clock, nid, float(ws.positions[nid][0]), float(ws.positions[nid][1]), active))
    remaining = {r: max(float(arcs[r][-1]) - spec.speed * span, 0.0) for r in paths}
    ws.clock = ws.clock + span

    for r, (a, target) in sorted(assignments.items()):
        if target >= 0:
            ws.targeted.setdefault(r, []).append(target)
        if spec.vocab[a].motion:
            ws.last_motion_target[r] = target
        if spec.vocab[a].interactive:
            for obj, carrier in sorted(ws.attachments.items()):
                if carrier == r:
                    ws.attachments[obj] = target
                    ws.positions[obj] = ws.positions[target].copy()
    return ws, assignments, paths, durations, remaining, faults, ticks


# ------------------------------------------------------------------ episodes

def run_episode(model, edges, tm, spec, dt: float = DT) -> ExecutionTrace:
    """Plan and execute until goals hold, two all-idle epochs in a row, or max_steps."""
    ids = spec.node_ids
    mask = attention_mask(edges, ids)
    robots = [i for i, n in enumerate(ids) if spec.node(n).kind == "robot"]
    ws = WorldState.initial(spec)
    s = zero_state(model)
    prev_snapshot = ws.snapshot(ids)
    epochs, ticks, faults = [], [], []
    executed = {r: [] for r in spec.robots}
    motions = {r: [] for r in spec.robots}
    idle_run, reason = 0, "max_steps"
    for e in range(1, spec.max_steps + 1):
        if all(g.satisfied(ws.positions) for g in spec.goals):
            reason = "goals"
            break
        seen, prev_snapshot = prev_snapshot, ws.snapshot(ids)
        step, s = plan_step(model, mask, seen, s)
        if not np.any(step.actions[robots]):
            idle_run += 1
            epochs.append(Epoch(e, ws.clock, ws.clock, seen, step, {}, {}, {}, {}))
            if idle_run == 2:
                reason = "idle"
                break
            continue
        idle_run = 0
        start = ws.clock
        ws, assign, paths, durs, left, fl, tk = execute_step(step, tm, ws, spec, edges, e, dt)
        faults += fl
        ticks += tk
        for r, at in sorted(assign.items()):
            executed[r].append(at)
        for r, p in sorted(paths.items()):
            motions[r].append(p)
        epochs.append(Epoch(e, start, ws.clock, seen, step, assign, paths, durs, left))
    else:
        if all(g.satisfied(ws.positions) for g in spec.goals):
            reason = "goals"
    flags = tuple(g.satisfied(ws.positions) for g in spec.goals)
    return ExecutionTrace(spec.name, ids, tuple(epochs), tuple(ticks),
                          {r: tuple(v) for r, v in executed.items()}, motions,
                          tuple(faults), flags, reason)
