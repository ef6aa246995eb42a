"""Seeded synthetic demonstration corpora for the four task families.

Every family is a scripted list of steps; a step is a set of concurrent
actions. The script is rendered frame by frame: all movers of a step share
one frame count (each moves at constant speed along its own path), every
step is followed by one all-idle frame, and frame 0 is idle. The idle gap
makes each step start a keyframe and keeps consecutive motions of one robot
in separate segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .demo import ActionSpec, Demonstration, NodeDescriptor, reference_sequences, write_demonstration
from .errors import ParameterError
from .scenario import ScenarioSpec, scenario_for_demo, write_scenario

FAMILIES = ("transport", "relay", "screen", "curves")
BOUNDS = (0.0, 0.0, 10.0, 10.0)
FRAME_STEP = 0.2        # path length covered per frame by the longest mover
MIN_STEP_FRAMES = 5
DECIMALS = 6

RELAY_STEPS = (
    ((1, 3), (2, 3)),
    ((3, 5),),
    ((3, 4),),
    ((4, 6), (5, 6)),
    ((4, 7),),
    ((6, 8),),
    ((7, 9),),
    ((8, 9),),
    ((9, 11), (10, 11)),
)
RELAY_LAYOUT = ((1.0, 1.0), (1.0, 4.0), (2.5, 2.5), (5.0, 1.0), (4.5, 3.5), (7.0, 2.5),
                (8.5, 1.0), (6.5, 5.5), (8.5, 4.5), (9.0, 8.0), (6.5, 8.0))
RELAY_GOAL = (3.0, 8.5)


@dataclass(frozen=True)
class TaskSpec:
    family: str
    n_robots: int
    n_actions: int
    n_demos: int = 30
    sigma_pos: float = 0.1
    seed: int = 0
    spurious: int = 0       # one-off noise edges injected into demo 0

    def validate(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        fixed = {"transport": (3, 3), "relay": (None, 1), "screen": (3, None), "curves": (4, 1)}
        robots, actions = fixed[self.family]
        if robots is not None and self.n_robots != robots:
            raise ParameterError(f"{self.family} uses exactly {robots} robots")
        if actions is not None and self.n_actions != actions:
            raise ParameterError(f"{self.family} uses exactly {actions} action(s)")
        if self.family == "relay" and not 4 <= self.n_robots <= 11:
            raise ParameterError("relay supports 4 to 11 robots")
        if self.family == "screen" and not 2 <= self.n_actions <= 4:
            raise ParameterError("screen supports 2 to 4 actions")
        if self.n_demos < 1:
            raise ParameterError("n_demos must be >= 1")
        if self.sigma_pos < 0:
            raise ParameterError("sigma_pos must be >= 0")
        if self.spurious < 0:
            raise ParameterError("spurious must be >= 0")


@dataclass(frozen=True)
class _Act:
    robot: int
    action: str
    target: int = -1
    shape: tuple = ("line",)


@dataclass
class _Layout:
    nodes: tuple
    positions: dict
    attachments: dict
    vocab: tuple
    script: list


# ----------------------------------------------------------------- families

def _transport(spec: TaskSpec) -> _Layout:
    vocab = (ActionSpec("idle"), ActionSpec("move", motion=True, duration=0.0),
             ActionSpec("stop"), ActionSpec("transfer", interactive=True))
    nodes = (NodeDescriptor(0, "robot", "ugv"), NodeDescriptor(1, "robot", "uav"),
             NodeDescriptor(2, "robot", "ugv"), NodeDescriptor(3, "goal"),
             NodeDescriptor(4, "object", "cargo"))
    pos = {0: (1.5, 3.0), 1: (3.5, 5.5), 2: (7.0, 6.0), 3: (8.5, 8.5), 4: (1.5, 3.0)}
    script = [
        [_Act(0, "move", 1)],
        [_Act(0, "transfer", 1)],
        [_Act(1, "move", 2), _Act(0, "stop")],
        [_Act(1, "transfer", 2)],
        [_Act(2, "move", 3)],
    ]
    return _Layout(nodes, pos, {4: 0}, vocab, script)


def relay_steps(n: int) -> list:
    """Relay chain for ``n`` robots as lists of (mover, target) in 1-based robot numbers.

    Steps touching robots beyond ``n`` are dropped and the chain ends with
    robot ``n`` driving to the goal (target 0 denotes the goal).
    """
    steps = [list(s) for s in RELAY_STEPS if all(a <= n and b <= n for a, b in s)]
    steps.append([(n, 0)])
    return steps


def _relay(spec: TaskSpec) -> _Layout:
    n = spec.n_robots
    vocab = (ActionSpec("idle"), ActionSpec("move", motion=True, duration=0.0))
    nodes = tuple(NodeDescriptor(i, "robot") for i in range(n)) + (NodeDescriptor(n, "goal"),)
    pos = {i: RELAY_LAYOUT[i] for i in range(n)}
    pos[n] = RELAY_GOAL
    script = [[_Act(a - 1, "move", n if b == 0 else b - 1) for a, b in step]
              for step in relay_steps(n)]
    return _Layout(nodes, pos, {}, vocab, script)


def _screen(spec: TaskSpec) -> _Layout:
    k = spec.n_actions
    vocab = [ActionSpec("idle"), ActionSpec("move", motion=True, duration=0.0), ActionSpec("stop")]
    if k >= 3:
        vocab.append(ActionSpec("dribble", motion=True, duration=0.0))
    if k >= 4:
        vocab.append(ActionSpec("pass", interactive=True))
    nodes = (NodeDescriptor(0, "robot", "defender"), NodeDescriptor(1, "robot", "offense"),
             NodeDescriptor(2, "robot", "offense"), NodeDescriptor(3, "goal", "screen"),
             NodeDescriptor(4, "goal", "basket"), NodeDescriptor(5, "object", "ball"))
    pos = {0: (5.0, 7.5), 1: (2.5, 4.0), 2: (6.0, 2.5), 3: (6.5, 5.0), 4: (8.5, 8.5)}
    carrier = 1 if k >= 4 else 2
    pos[5] = pos[carrier]
    first = [_Act(0, "move", 3)]
    if k >= 4:
        first.insert(0, _Act(1, "pass", 2))
    drive = "dribble" if k >= 3 else "move"
    script = [
        first,
        [_Act(1, "move", 0)],
        [_Act(1, "stop")],
        [_Act(2, drive, 4, ("arc", -0.35))],
    ]
    return _Layout(nodes, pos, {5: carrier}, tuple(vocab), script)


def _curves(spec: TaskSpec) -> _Layout:
    vocab = (ActionSpec("idle"), ActionSpec("move", motion=True, duration=0.0))
    nodes = tuple(NodeDescriptor(i, "robot") for i in range(4)) + (NodeDescriptor(4, "goal"),)
    # point symmetric about the goal so both arcs and both spirals coincide in the canonical frame
    pos = {0: (1.0, 1.5), 1: (9.0, 8.5), 2: (2.5, 5.5), 3: (7.5, 4.5), 4: (5.0, 5.0)}
    script = [
        [_Act(0, "move", 2, ("arc", 0.3)), _Act(1, "move", 3, ("arc", 0.3))],
        [_Act(2, "move", 4, ("spiral",)), _Act(3, "move", 4, ("spiral",))],
    ]
    return _Layout(nodes, pos, {}, vocab, script)


_BUILDERS = {"transport": _transport, "relay": _relay, "screen": _screen, "curves": _curves}


# ------------------------------------------------------------------ geometry

def _arc_resample(pts: np.ndarray, n: int) -> np.ndarray:
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    q = np.linspace(0.0, s[-1], n)
    out = np.column_stack([np.interp(q, s, pts[:, 0]), np.interp(q, s, pts[:, 1])])
    out[0], out[-1] = pts[0], pts[-1]
    return out


def shape_path(start, end, shape: tuple, dense: int = 2001) -> np.ndarray:
    """Dense world-frame polyline from ``start`` to ``end`` following ``shape``.

    ``("line",)``, ``("arc", h)`` with canonical form (s, h*sin(pi*s)), or
    ``("spiral",)``: radius shrinking linearly to zero over one turn about ``end``.
    """
    start, end = np.asarray(start, float), np.asarray(end, float)
    u = np.linspace(0.0, 1.0, dense)
    if shape[0] == "spiral":
        rel = start - end
        r0, phi0 = np.hypot(*rel), math.atan2(rel[1], rel[0])
        r, phi = r0 * (1.0 - u), phi0 + 2.0 * math.pi * u
        pts = end + np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    else:
        h = shape[1] if shape[0] == "arc" else 0.0
        canon = np.column_stack([u, h * np.sin(np.pi * u)])
        chord = end - start
        c, s = chord
        rot = np.array([[c, -s], [s, c]])
        pts = start + canon @ rot.T
    pts[0], pts[-1] = start, end
    return pts


# ----------------------------------------------------------------- rendering

def _render(layout: _Layout, spec: TaskSpec, rng: np.random.Generator, extra_steps=None) -> Demonstration:
    nodes = layout.nodes
    ids = [n.id for n in nodes]
    idx = {nid: i for i, nid in enumerate(ids)}
    names = [a.name for a in layout.vocab]
    cur = np.array([layout.positions[nid] for nid in ids], dtype=float)
    if spec.sigma_pos > 0:
        cur = cur + rng.normal(0.0, spec.sigma_pos, size=cur.shape)
    attach = dict(layout.attachments)
    for obj, carrier in attach.items():
        cur[idx[obj]] = cur[idx[carrier]]

    N = len(nodes)
    P, L, G = [cur.copy()], [np.zeros(N, int)], [np.full(N, -1)]
    script = list(layout.script) + list(extra_steps or [])
    for step in script:
        paths, n_frames = {}, MIN_STEP_FRAMES
        for act in step:
            if layout.vocab[names.index(act.action)].motion:
                i = idx[act.robot]
                p = shape_path(cur[i], cur[idx[act.target]], act.shape)
                length = float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))
                paths[i] = p
                n_frames = max(n_frames, math.ceil(length / FRAME_STEP) + 1)
        sampled = {i: _arc_resample(p, n_frames) for i, p in paths.items()}
        labels, targets = np.zeros(N, int), np.full(N, -1)
        for act in step:
            labels[idx[act.robot]] = names.index(act.action)
            targets[idx[act.robot]] = act.target
        for k in range(n_frames):
            frame = cur.copy()
            for i, p in sampled.items():
                frame[i] = p[k]
            for obj, carrier in attach.items():
                frame[idx[obj]] = frame[idx[carrier]]
            P.append(frame)
            L.append(labels.copy())
            G.append(targets.copy())
        cur = P[-1].copy()
        for act in step:
            if layout.vocab[names.index(act.action)].interactive:
                for obj, carrier in list(attach.items()):
                    if carrier == act.robot:
                        attach[obj] = act.target
                        cur[idx[obj]] = cur[idx[act.target]]
        P.append(cur.copy())
        L.append(np.zeros(N, int))
        G.append(np.full(N, -1))
    positions = np.round(np.array(P), DECIMALS) + 0.0
    return Demonstration(nodes, positions, np.array(L), layout.vocab, np.array(G))


def _spurious_steps(layout: _Layout, count: int, rng: np.random.Generator) -> list:
    """``count`` one-off moves between pairs that never interact in the script."""
    robots = [n.id for n in layout.nodes if n.kind == "robot"]
    others = [n.id for n in layout.nodes if n.kind in ("robot", "goal")]
    core = {(a.robot, a.target) for step in layout.script for a in step}
    pairs = [(r, t) for r in robots for t in others if r != t and (r, t) not in core]
    picks = rng.choice(len(pairs), size=min(count, len(pairs)), replace=False)
    move = next(a.name for a in layout.vocab if a.motion)
    return [[_Act(pairs[j][0], move, pairs[j][1])] for j in sorted(picks.tolist())]


def gen_task(spec: TaskSpec):
    """Generate ``(demos, scenario, references)``.

    ``scenario`` is the nominal (jitter-free) layout with goal conditions from
    the nominal run; ``references`` maps robot id to its ground-truth
    (action id, target id) chain.
    """
    spec.validate()
    layout = _BUILDERS[spec.family](spec)
    rng = np.random.default_rng(spec.seed)
    demos = []
    for k in range(spec.n_demos):
        extra = _spurious_steps(layout, spec.spurious, rng) if k == 0 and spec.spurious else None
        demos.append(_render(layout, spec, rng, extra))
    nominal = _render(layout, replace(spec, sigma_pos=0.0), rng)
    base = ScenarioSpec(
        name=spec.family, nodes=layout.nodes, initial={n.id: layout.positions[n.id] for n in layout.nodes},
        vocab=layout.vocab, bounds=BOUNDS, attachments=dict(layout.attachments),
        max_steps=len(layout.script) + 3)
    scenario = scenario_for_demo(base, nominal)
    return demos, scenario, reference_sequences(nominal)


def n_steps(spec: TaskSpec) -> int:
    spec.validate()
    return len(_BUILDERS[spec.family](spec).script)


# ------------------------------------------------------------------- presets

def catalog() -> dict:
    """Named presets: the four base tasks followed by the case-study sweeps."""
    presets = {
        "task1": TaskSpec("transport", 3, 3),
        "task2": TaskSpec("relay", 11, 1),
        "task3": TaskSpec("screen", 3, 4),
        "task4": TaskSpec("curves", 4, 1),
    }
    for n in range(4, 12):
        presets[f"relay-r{n}"] = TaskSpec("relay", n, 1)
    for k in range(2, 5):
        presets[f"screen-a{k}"] = TaskSpec("screen", 3, k)
    return presets


BASE_PRESETS = ("task1", "task2", "task3", "task4")


def write_corpus(demos, scenario: ScenarioSpec, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, d in enumerate(demos):
        p = out / f"demo_{k:03d}.csv"
        write_demonstration(d, p)
        paths.append(p)
    write_scenario(scenario, out / "scenario.txt")
    return paths
