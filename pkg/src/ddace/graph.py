"""Directed edge extraction, frequency accumulation and spectral edge refinement."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GraphError, ParameterError, ParseError

ZERO_EIG_RTOL = 1e-9
KMEANS_MAX_ITER = 100


@dataclass(frozen=True, order=True)
class DirectedEdge:
    source: int
    target: int

    def __post_init__(self):
        if self.source == self.target:
            raise GraphError(f"self edge on node {self.source}")


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Unique edges in order of first appearance, with total and per-demo counts."""

    edges: tuple
    counts: np.ndarray
    per_demo: np.ndarray

    @property
    def m(self) -> int:
        return len(self.edges)

    def frequency(self, edge) -> int:
        return int(self.counts[self.edges.index(DirectedEdge(*edge))])


@dataclass(frozen=True)
class RefinedEdgeSet:
    edges: tuple
    cluster_assignment: dict = field(default_factory=dict)
    K: int = 1
    threshold: float = 0.0
    flags: dict = field(default_factory=dict)

    def pairs(self) -> list:
        return [(e.source, e.target) for e in self.edges]


def extract_edges(ks, segs, vocab) -> list:
    """Edges of one demonstration: one per motion segment, one per interactive action start.

    Duplicates are kept so per-demo counts reflect repetitions.
    """
    found = [(s.t_start, s.mover, DirectedEdge(s.mover, s.target)) for s in segs]
    for kf in ks.keyframes:
        for i, label in enumerate(kf.labels):
            spec = vocab[int(label)]
            if (label != 0 and spec.interactive and not spec.motion
                    and label != kf.prev_labels[i] and kf.targets[i] >= 0):
                mover = ks.node_ids[i]
                found.append((kf.frame, mover, DirectedEdge(mover, int(kf.targets[i]))))
    found.sort(key=lambda f: (f[0], f[1]))
    return [f[2] for f in found]


def edge_frequencies(all_edges) -> FrequencyTable:
    order, seen = [], set()
    for demo_edges in all_edges:
        for e in demo_edges:
            if e not in seen:
                seen.add(e)
                order.append(e)
    if not order:
        raise GraphError("no demonstration contributes an edge")
    per_demo = np.zeros((len(all_edges), len(order)), dtype=np.int64)
    index = {e: j for j, e in enumerate(order)}
    for i, demo_edges in enumerate(all_edges):
        for e, c in Counter(demo_edges).items():
            per_demo[i, index[e]] = c
    return FrequencyTable(tuple(order), per_demo.sum(axis=0), per_demo)


def build_edge_graph(ft: FrequencyTable, laplacian: str = "similarity") -> np.ndarray:
    """Edge-similarity matrix: frequencies on the diagonal, co-occurrence off it.

    Off-diagonal entries count demonstrations in which both edges occur and
    are doubled when the edges share an endpoint. ``laplacian="literal"``
    keeps only the diagonal.
    """
    A = np.diag(ft.counts.astype(float))
    if laplacian == "literal":
        return A
    if laplacian != "similarity":
        raise ParameterError(f"unknown laplacian mode {laplacian!r}")
    present = (ft.per_demo > 0).astype(float)
    co = present.T @ present
    ends = [{e.source, e.target} for e in ft.edges]
    share = np.array([[bool(a & b) for b in ends] for a in ends], dtype=float)
    off = co * (1.0 + share)
    np.fill_diagonal(off, 0.0)
    return A + off


def laplacian_matrix(A: np.ndarray) -> np.ndarray:
    return np.diag(A.sum(axis=1)) - A


def spectral_embedding(A: np.ndarray, K: int):
    """Rows of the Laplacian eigenvectors for the K smallest eigenvalues.

    Zero eigenvalues are included, so disconnected components map to their
    indicator directions. Returns ``(embedding, eigenvalues)``.
    """
    lam, vec = np.linalg.eigh(laplacian_matrix(A))
    return vec[:, :K], lam


def zero_eigenvalue_count(lam: np.ndarray) -> int:
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    if scale == 0:
        return int(lam.size)
    return int(np.sum(np.abs(lam) <= ZERO_EIG_RTOL * scale))


def kmeans(X: np.ndarray, K: int, max_iter: int = KMEANS_MAX_ITER) -> np.ndarray:
    """Deterministic Lloyd iterations with farthest-point seeding from row 0."""
    n = X.shape[0]
    centers = [X[0]]
    dmin = np.sum((X - X[0]) ** 2, axis=1)
    for _ in range(1, K):
        j = int(np.argmax(dmin))          # argmax returns the lowest index on ties
        centers.append(X[j])
        dmin = np.minimum(dmin, np.sum((X - X[j]) ** 2, axis=1))
    C = np.array(centers)
    assign = None
    for _ in range(max_iter):
        d = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
        new = np.argmin(d, axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for k in range(K):
            members = X[assign == k]
            if len(members):
                C[k] = members.mean(axis=0)
    return assign


def spectral_cluster(A: np.ndarray, K: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    if not 1 <= K <= m:
        raise ParameterError(f"K must lie in [1, {m}], got {K}")
    if K == 1:
        return np.zeros(m, dtype=np.int64)
    emb, _ = spectral_embedding(A, K)
    return kmeans(emb, K).astype(np.int64)


def refine(ft: FrequencyTable, assignment, K: int | None = None, flags=None) -> RefinedEdgeSet:
    """Keep every cluster whose mean edge frequency reaches the global mean.

    Falls back to the single best cluster when none qualifies.
    """
    assignment = np.asarray(assignment)
    counts = ft.counts.astype(float)
    global_mean = counts.mean()
    clusters = sorted(set(assignment.tolist()))
    means = {c: counts[assignment == c].mean() for c in clusters}
    keep = {c for c in clusters if means[c] >= global_mean * (1 - 1e-12)}
    if not keep:
        keep = {max(clusters, key=lambda c: (means[c], -c))}
    edges = tuple(e for e, c in zip(ft.edges, assignment) if c in keep)
    return RefinedEdgeSet(
        edges, {e: int(c) for e, c in zip(ft.edges, assignment)},
        K if K is not None else len(clusters), float(global_mean), dict(flags or {}))


def refine_edges(per_demo_edges, K: int = 2, laplacian: str = "similarity") -> tuple:
    """Full refinement: frequencies, similarity graph, clustering, retention."""
    ft = edge_frequencies(per_demo_edges)
    K_eff = min(K, ft.m)
    A = build_edge_graph(ft, laplacian)
    assign = spectral_cluster(A, K_eff)
    return ft, refine(ft, assign, K_eff, {"laplacian": laplacian, "spectral": 1})


def fully_connected(node_ids) -> RefinedEdgeSet:
    """Edge set used when spectral refinement is disabled."""
    edges = tuple(DirectedEdge(a, b) for a in node_ids for b in node_ids if a != b)
    return RefinedEdgeSet(edges, {e: 0 for e in edges}, 1, 0.0, {"spectral": 0})


# ------------------------------------------------------------------------ I/O

def serialize_edge_set(r: RefinedEdgeSet) -> str:
    flags = " ".join(f"{k}={v}" for k, v in sorted(r.flags.items()))
    lines = [f"# K={r.K} threshold={r.threshold!r} {flags}".rstrip(), "source,target,cluster"]
    for e in r.edges:
        lines.append(f"{e.source},{e.target},{r.cluster_assignment.get(e, 0)}")
    return "\n".join(lines) + "\n"


def write_edge_set(r: RefinedEdgeSet, path) -> None:
    Path(path).write_text(serialize_edge_set(r), encoding="utf-8")


def parse_edge_set(path) -> RefinedEdgeSet:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("#"):
        raise ParseError("missing header comment", line=1)
    meta = dict(tok.split("=", 1) for tok in text[0][1:].split() if "=" in tok)
    edges, assign = [], {}
    for lineno, line in enumerate(text[2:], start=3):
        if not line.strip():
            continue
        try:
            s, t, c = (int(v) for v in line.split(","))
        except ValueError:
            raise ParseError("expected source,target,cluster", line=lineno) from None
        e = DirectedEdge(s, t)
        edges.append(e)
        assign[e] = c
    flags = {k: (int(v) if v.isdigit() else v) for k, v in meta.items() if k not in ("K", "threshold")}
    return RefinedEdgeSet(tuple(edges), assign, int(meta.get("K", 1)),
                          float(meta.get("threshold", 0.0)), flags)
