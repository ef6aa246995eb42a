"""Demonstration data model, CSV I/O, keyframe segmentation and segment extraction."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, SchemaError, SegmentError, SplitError

log = logging.getLogger(__name__)

NODE_KINDS = ("robot", "goal", "object")
CSV_HEADER = ("t", "node_id", "kind", "modality", "x", "y", "label", "target")
EPS_GOAL = 0.05


@dataclass(frozen=True)
class ActionSpec:
    """One entry of an action vocabulary.

    ``motion`` actions produce trajectory segments; stationary actions last
    ``duration`` seconds at execution time. ``interactive`` stationary
    actions (transfer, pass) carry an explicit target and hand over the
    actor's attached object.
    """

    name: str
    motion: bool = False
    duration: float = 1.0
    interactive: bool = False


IDLE = ActionSpec("idle")


@dataclass(frozen=True)
class NodeDescriptor:
    id: int
    kind: str
    modality: str = ""

    def __post_init__(self):
        if self.id < 0:
            raise SchemaError(f"node id must be >= 0, got {self.id}")
        if self.kind not in NODE_KINDS:
            raise SchemaError(f"unknown node kind {self.kind!r}")

    @property
    def kind_key(self) -> str:
        """Kind tag used to key motion primitives (modality-qualified for robots)."""
        return f"{self.kind}/{self.modality}" if self.modality else self.kind


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Demonstration:
    """One recorded task execution.

    ``positions`` is ``(T, N, 2)``, ``labels`` and ``targets`` are ``(T, N)``.
    Node order follows ``nodes`` (ascending id).
    """

    nodes: tuple
    positions: np.ndarray
    labels: np.ndarray
    vocab: tuple
    targets: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "vocab", tuple(_as_action(a) for a in self.vocab))
        object.__setattr__(self, "positions", _frozen(self.positions, float))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64))
        if self.targets is not None:
            object.__setattr__(self, "targets", _frozen(self.targets, np.int64))
        self.validate()

    def validate(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate node ids")
        kinds = {n.kind for n in self.nodes}
        if "robot" not in kinds or "goal" not in kinds:
            raise SchemaError("a scenario needs at least one robot and one goal node")
        T, N = self.labels.shape if self.labels.ndim == 2 else (0, 0)
        if self.positions.shape != (T, N, 2) or N != len(self.nodes):
            raise SchemaError(
                f"positions {self.positions.shape} and labels {self.labels.shape} "
                f"disagree with {len(self.nodes)} nodes")
        if T < 2:
            raise SchemaError("a demonstration needs at least 2 frames")
        if not np.all(np.isfinite(self.positions)):
            raise SchemaError("non-finite position")
        if self.labels.min() < 0 or self.labels.max() >= len(self.vocab):
            raise SchemaError(
                f"label ids must lie in [0, {len(self.vocab)}), "
                f"got range [{self.labels.min()}, {self.labels.max()}]")
        if self.targets is not None:
            if self.targets.shape != self.labels.shape:
                raise SchemaError("targets shape differs from labels shape")
            bad = set(np.unique(self.targets).tolist()) - set(ids) - {-1}
            if bad:
                raise SchemaError(f"targets reference unknown node ids {sorted(bad)}")

    @property
    def n_frames(self) -> int:
        return self.labels.shape[0]

    @property
    def node_ids(self) -> tuple:
        return tuple(n.id for n in self.nodes)

    def index_of(self, node_id: int) -> int:
        return self.node_ids.index(node_id)

    def restrict(self, frames) -> "Demonstration":
        """Sub-demonstration made of the given frame indices."""
        frames = list(frames)
        return Demonstration(
            self.nodes, self.positions[frames], self.labels[frames], self.vocab,
            None if self.targets is None else self.targets[frames])

    def __eq__(self, other):
        if not isinstance(other, Demonstration):
            return NotImplemented
        same_targets = (
            (self.targets is None and other.targets is None)
            or (self.targets is not None and other.targets is not None
                and np.array_equal(self.targets, other.targets)))
        return (self.nodes == other.nodes and self.vocab == other.vocab
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.labels, other.labels) and same_targets)

    __hash__ = None


def _as_action(a) -> ActionSpec:
    return a if isinstance(a, ActionSpec) else ActionSpec(str(a))


@dataclass(frozen=True, eq=False)
class Keyframe:
    frame: int
    positions: np.ndarray
    labels: np.ndarray
    targets: np.ndarray
    prev_labels: np.ndarray


@dataclass(frozen=True, eq=False)
class KeyframeSequence:
    """Keyframe snapshots of one demonstration.

    ``terminal_labels`` is the label row of the demonstration's last frame;
    it is the prediction target after the final keyframe.
    """

    demo_index: int
    keyframes: tuple
    node_ids: tuple
    terminal_labels: np.ndarray

    @property
    def frames(self) -> list:
        return [k.frame for k in self.keyframes]

    def __len__(self):
        return len(self.keyframes)


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    demo_index: int
    mover: int
    target: int
    t_start: int
    t_end: int
    points: np.ndarray
    action_id: int
    mover_kind: str = ""
    target_kind: str = ""

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise SchemaError(f"segment span [{self.t_start}, {self.t_end}] is empty")
        if len(self.points) != self.t_end - self.t_start + 1:
            raise SchemaError("segment point count does not match its span")


# --------------------------------------------------------------------------- I/O

def _fmt(v: float) -> str:
    return repr(float(v))


def serialize_demonstration(d: Demonstration) -> str:
    """Canonical CSV text: rows sorted by (t, node_id), floats in shortest repr."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    order = np.argsort(d.node_ids, kind="stable")
    for t in range(d.n_frames):
        for i in order:
            n = d.nodes[i]
            tgt = -1 if d.targets is None else int(d.targets[t, i])
            x, y = d.positions[t, i]
            w.writerow((t, n.id, n.kind, n.modality, _fmt(x), _fmt(y),
                        int(d.labels[t, i]), tgt))
    return buf.getvalue()


def write_demonstration(d: Demonstration, path) -> None:
    Path(path).write_text(serialize_demonstration(d), encoding="utf-8")


def parse_demonstration_text(text: str, vocab: Sequence) -> Demonstration:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file", line=1) from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ParseError(f"expected header {','.join(CSV_HEADER)}", line=1)

    frames: dict[int, list] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ParseError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", line=lineno)
        try:
            t, nid = int(row[0]), int(row[1])
            kind, modality = row[2].strip(), row[3].strip()
            x, y = float(row[4]), float(row[5])
            label, target = int(row[6]), int(row[7])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if kind not in NODE_KINDS:
            raise ParseError(f"unknown node kind {kind!r}", line=lineno)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError("non-finite coordinate", line=lineno)
        frames.setdefault(t, []).append((nid, kind, modality, x, y, label, target))

    if not frames:
        raise ParseError("no data rows", line=2)
    ts = sorted(frames)
    if ts != list(range(len(ts))):
        raise SchemaError("frame indices must be contiguous from 0")

    first = sorted(frames[0])
    nodes = tuple(NodeDescriptor(r[0], r[1], r[2]) for r in first)
    T, N = len(ts), len(nodes)
    positions = np.empty((T, N, 2))
    labels = np.empty((T, N), dtype=np.int64)
    targets = np.empty((T, N), dtype=np.int64)
    for t in ts:
        rows = sorted(frames[t])
        if len(rows) != N:
            raise SchemaError(f"frame {t} lists {len(rows)} nodes, frame 0 lists {N}")
        for i, r in enumerate(rows):
            if (r[0], r[1], r[2]) != (nodes[i].id, nodes[i].kind, nodes[i].modality):
                raise SchemaError(f"frame {t}: node set differs from frame 0")
            positions[t, i] = r[3], r[4]
            labels[t, i] = r[5]
            targets[t, i] = r[6]
    if labels.max() >= len(vocab) or labels.min() < 0:
        raise SchemaError(f"label id outside vocabulary of size {len(vocab)}")
    return Demonstration(nodes, positions, labels, tuple(vocab), targets)


def parse_demonstration(path, vocab: Sequence) -> Demonstration:
    """Read a demonstration CSV (see README for the column layout)."""
    return parse_demonstration_text(Path(path).read_text(encoding="utf-8"), vocab)


# ------------------------------------------------------------------ segmentation

def keyframe_indices(labels: np.ndarray) -> list:
    """Frame 0 plus every t >= 1 whose label row is nonzero and differs from row t-1."""
    labels = np.asarray(labels)
    nonzero = np.any(labels[1:] != 0, axis=1)
    changed = np.any(labels[1:] != labels[:-1], axis=1)
    return [0] + (np.flatnonzero(nonzero & changed) + 1).tolist()


def segment_keyframes(d: Demonstration, demo_index: int = 0) -> KeyframeSequence:
    targets = d.targets if d.targets is not None else np.full(d.labels.shape, -1)
    kfs = []
    for t in keyframe_indices(d.labels):
        prev = d.labels[t - 1] if t > 0 else np.zeros_like(d.labels[0])
        kfs.append(Keyframe(t, d.positions[t], d.labels[t], targets[t], prev))
    return KeyframeSequence(demo_index, tuple(kfs), d.node_ids, d.labels[-1])


def _label_runs(col: np.ndarray):
    """Yield (label, start, end) for maximal runs of identical nonzero labels."""
    start = None
    for t, v in enumerate(col):
        if start is not None and v != col[start]:
            yield int(col[start]), start, t - 1
            start = None
        if start is None and v != 0:
            start = t
    if start is not None:
        yield int(col[start]), start, len(col) - 1


def _resolve_target(d: Demonstration, i: int, start: int, end: int, eps_goal: float) -> int:
    if d.targets is not None:
        tgt = int(d.targets[start, i])
        if tgt >= 0:
            return tgt
    final = d.positions[end, i]
    dist = np.linalg.norm(d.positions[end] - final, axis=1)
    dist[i] = np.inf
    j = int(np.argmin(dist))
    if dist[j] > eps_goal:
        raise SegmentError(
            f"robot {d.nodes[i].id}: no target within {eps_goal} of the final point "
            f"of span [{start}, {end}]")
    return d.nodes[j].id


def extract_segments(d: Demonstration, ks: KeyframeSequence | None = None,
                     eps_goal: float = EPS_GOAL) -> list:
    """One segment per robot per maximal run of a single motion-class action."""
    demo_index = ks.demo_index if ks is not None else 0
    segs = []
    for i, node in enumerate(d.nodes):
        if node.kind != "robot":
            continue
        for label, start, end in _label_runs(d.labels[:, i]):
            if not d.vocab[label].motion:
                continue
            if start == end:
                log.warning("robot %d: one-frame motion at t=%d ignored", node.id, start)
                continue
            tgt = _resolve_target(d, i, start, end, eps_goal)
            tnode = d.nodes[d.index_of(tgt)]
            segs.append(TrajectorySegment(
                demo_index, node.id, tgt, start, end,
                d.positions[start:end + 1, i].copy(), label,
                node.kind_key, tnode.kind_key))
    segs.sort(key=lambda s: (s.t_start, s.mover))
    return segs


def reference_sequences(d: Demonstration) -> dict:
    """Per-robot ordered (action id, target id) chain; target is -1 when absent."""
    refs = {}
    for i, node in enumerate(d.nodes):
        if node.kind != "robot":
            continue
        chain = []
        for label, start, _ in _label_runs(d.labels[:, i]):
            spec = d.vocab[label]
            tgt = -1
            if (spec.motion or spec.interactive) and d.targets is not None:
                tgt = int(d.targets[start, i])
            chain.append((label, tgt))
        refs[node.id] = tuple(chain)
    return refs


# ------------------------------------------------------------------------ split

def split_dataset(demos: Sequence, ratio: float, seed: int):
    """Seeded shuffle then split; both partitions are guaranteed non-empty."""
    n = len(demos)
    if n < 2:
        raise SplitError(f"need at least 2 demonstrations to split, got {n}")
    if not 0.0 < ratio < 1.0:
        raise SplitError(f"ratio must lie in (0, 1), got {ratio}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(math.floor(ratio * n + 1e-9)), 1), n - 1)
    return ([demos[i] for i in order[:n_train]], [demos[i] for i in order[n_train:]])
