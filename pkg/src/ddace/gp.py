"""Gaussian-process motion primitives in a canonical frame.

A segment is mapped to the canonical frame (start at the origin, chord on
+x, unit chord) and resampled to 100 points. All canonical trajectories of a
(mover, target) pair are pooled and two independent GPs, one per coordinate,
are fit against normalized time. Adaptation maps the canonical mean back
onto any new start/goal pair by scaling, rotation and translation.

Pooled trajectories share one time grid, so the exact GP is evaluated on the
unique inputs with replicate means; the likelihood carries the within-replicate
terms so it equals the likelihood of the full pooled data set.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .errors import AdaptationError, CanonicalizationError, GPFitError, ParameterError, ResampleError

log = logging.getLogger(__name__)

M_POINTS = 100
EPS_CHORD = 1e-6
SNAP_FRACTION = 0.02
LENGTH_STARTS = (0.05, 0.1, 0.3)
NOISE_START = 1e-4
LENGTH_BOUNDS = (1e-3, 1.0)
NOISE_BOUNDS = (1e-8, 1e-1)
SIGNAL_BOUNDS = (1e-8, 1e3)
JITTERS = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)
CHECKPOINT_VERSION = 1


# ----------------------------------------------------------------- geometry

def chord_frame(start, end):
    """Return (chord length, angle) of the start->end chord."""
    d = np.asarray(end, float) - np.asarray(start, float)
    return float(math.hypot(d[0], d[1])), float(math.atan2(d[1], d[0]))


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def to_canonical(points) -> np.ndarray:
    """Translate, rotate by -theta and scale by 1/chord, without resampling."""
    P = np.asarray(points, dtype=float)
    if len(P) < 2:
        raise CanonicalizationError("need at least 2 points")
    length, theta = chord_frame(P[0], P[-1])
    if length <= EPS_CHORD:
        raise CanonicalizationError(f"degenerate chord of length {length:.3g}")
    C = (P - P[0]) @ _rot(-theta).T / length
    C[0] = 0.0, 0.0
    C[-1] = 1.0, 0.0
    return C


def resample(points, M: int = M_POINTS) -> np.ndarray:
    """Linear interpolation at M positions uniform in the point index."""
    P = np.asarray(points, dtype=float)
    if len(P) < 2:
        raise ResampleError(f"need at least 2 points, got {len(P)}")
    if M < 2:
        raise ResampleError(f"M must be >= 2, got {M}")
    u = np.arange(len(P), dtype=float)
    q = np.linspace(0.0, len(P) - 1.0, M)
    out = np.column_stack([np.interp(q, u, P[:, 0]), np.interp(q, u, P[:, 1])])
    out[0], out[-1] = P[0], P[-1]
    return out


def resample_arclength(points, M: int = M_POINTS) -> np.ndarray:
    """Linear interpolation at M positions uniform in arc length."""
    P = np.asarray(points, dtype=float)
    if len(P) < 2:
        raise ResampleError(f"need at least 2 points, got {len(P)}")
    if M < 2:
        raise ResampleError(f"M must be >= 2, got {M}")
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(P, axis=0).T))])
    if s[-1] == 0:
        raise ResampleError("zero-length polyline")
    q = np.linspace(0.0, s[-1], M)
    out = np.column_stack([np.interp(q, s, P[:, 0]), np.interp(q, s, P[:, 1])])
    out[0], out[-1] = P[0], P[-1]
    return out


RESAMPLERS = {"time": resample, "arclength": resample_arclength}


@dataclass(frozen=True, eq=False)
class CanonicalTrajectory:
    points: np.ndarray
    source_kind: str = ""
    target_kind: str = ""


def canonicalize(seg, M: int = M_POINTS, mode: str = "time") -> CanonicalTrajectory:
    """Canonical-frame, M-point version of a TrajectorySegment (or a raw polyline)."""
    pts = getattr(seg, "points", seg)
    if mode not in RESAMPLERS:
        raise ParameterError(f"unknown resampling mode {mode!r}")
    C = RESAMPLERS[mode](to_canonical(pts), M)
    return CanonicalTrajectory(C, getattr(seg, "mover_kind", ""), getattr(seg, "target_kind", ""))


# ------------------------------------------------------------------- the GP

def rbf(a, b, sf2: float, ell: float) -> np.ndarray:
    d = np.subtract.outer(np.asarray(a, float), np.asarray(b, float))
    return sf2 * np.exp(-0.5 * d * d / (ell * ell))


@dataclass(frozen=True, eq=False)
class Gp1D:
    """Exact GP on unique inputs ``u`` with replicate means ``ybar`` and counts ``k``.

    Hyperparameters: signal variance ``sf2``, length-scale ``ell``, noise ``sn2``.
    """

    u: np.ndarray
    ybar: np.ndarray
    k: np.ndarray
    ss_within: float
    sf2: float
    ell: float
    sn2: float
    jitter: float = 0.0
    _chol: tuple = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return int(self.k.sum())

    def predict(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        Ks = rbf(t, self.u, self.sf2, self.ell)
        mean = Ks @ self._alpha
        v = cho_solve(self._chol, Ks.T)
        var = self.sf2 - np.sum(Ks * v.T, axis=1)
        if np.any(var < -1e-9):
            log.warning("negative predictive variance %.3g clamped", var.min())
        return mean, np.maximum(var, 0.0)


def _collapse(T, Y):
    """Unique inputs, replicate means, counts and within-replicate sum of squares."""
    u, inv, k = np.unique(T, return_inverse=True, return_counts=True)
    ybar = np.bincount(inv, weights=Y) / k
    ss = float(np.sum((Y - ybar[inv]) ** 2))
    return u, ybar, k, ss


def _factor(C):
    for j in JITTERS:
        try:
            Cj = C + j * np.eye(len(C)) if j else C
            return cho_factor(Cj, lower=True), j
        except np.linalg.LinAlgError:
            continue
    raise GPFitError("kernel matrix not positive definite after jitter escalation")


def log_marginal_likelihood(u, ybar, k, ss, sf2, ell, sn2, grad=False):
    """Log marginal likelihood of the pooled data and, optionally, its gradient
    with respect to (log sf2, log ell, log sn2)."""
    n, Mu = float(np.sum(k)), len(u)
    D2 = np.subtract.outer(u, u) ** 2
    Kf = sf2 * np.exp(-0.5 * D2 / ell ** 2)
    C = Kf + np.diag(sn2 / k)
    cf, _ = _factor(C)
    a = cho_solve(cf, ybar)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    lml = (-0.5 * ybar @ a - 0.5 * logdet - 0.5 * Mu * math.log(2 * math.pi)
           - 0.5 * np.sum(np.log(k)) - ss / (2 * sn2)
           - 0.5 * (n - Mu) * math.log(2 * math.pi * sn2))
    if not grad:
        return lml
    W = np.outer(a, a) - cho_solve(cf, np.eye(Mu))
    g_sf = 0.5 * np.sum(W * Kf)
    g_ell = 0.5 * np.sum(W * Kf * D2 / ell ** 2)
    g_sn = 0.5 * np.sum(np.diag(W) * sn2 / k) + ss / (2 * sn2) - 0.5 * (n - Mu)
    return lml, np.array([g_sf, g_ell, g_sn])


def fit_gp_1d(T, Y, starts=None) -> Gp1D:
    """Multi-start L-BFGS-B on the log marginal likelihood in log-parameter space."""
    T, Y = np.asarray(T, float).ravel(), np.asarray(Y, float).ravel()
    if T.size == 0 or T.size != Y.size:
        raise GPFitError("need matching, non-empty inputs and outputs")
    u, ybar, k, ss = _collapse(T, Y)
    var0 = min(max(float(np.var(Y)), SIGNAL_BOUNDS[0]), SIGNAL_BOUNDS[1])
    if starts is None:
        starts = [(var0, ell, NOISE_START) for ell in LENGTH_STARTS]
    bounds = [tuple(np.log(SIGNAL_BOUNDS)), tuple(np.log(LENGTH_BOUNDS)), tuple(np.log(NOISE_BOUNDS))]

    def objective(z):
        try:
            lml, g = log_marginal_likelihood(u, ybar, k, ss, *np.exp(z), grad=True)
        except GPFitError:
            return 1e25, np.zeros(3)
        return -lml, -g

    best = None
    for s in starts:
        z0 = np.log(np.asarray(s, float))
        z0 = np.clip(z0, [b[0] for b in bounds], [b[1] for b in bounds])
        start_val = -objective(z0)[0]
        res = minimize(objective, z0, jac=True, method="L-BFGS-B", bounds=bounds)
        z, val = (res.x, -res.fun) if -res.fun >= start_val else (z0, start_val)
        if best is None or val > best[1]:
            best = (z, val)
    sf2, ell, sn2 = (float(v) for v in np.exp(best[0]))
    return _build(u, ybar, k, ss, sf2, ell, sn2)


def _build(u, ybar, k, ss, sf2, ell, sn2) -> Gp1D:
    C = rbf(u, u, sf2, ell) + np.diag(sn2 / k)
    cf, jitter = _factor(C)
    if jitter:
        log.warning("kernel matrix needed jitter %.0e", jitter)
    return Gp1D(u, ybar, k, ss, sf2, ell, sn2, jitter, cf, cho_solve(cf, ybar))


@dataclass(frozen=True, eq=False)
class GpPair:
    xgp: Gp1D
    ygp: Gp1D
    trajectories: np.ndarray      # (n_traj, M, 2) canonical training data

    @property
    def M(self) -> int:
        return self.trajectories.shape[1]


def fit_gp(trajs) -> GpPair:
    """Fit the x and y coordinate GPs on pooled canonical trajectories of one pair."""
    trajs = [getattr(t, "points", t) for t in trajs]
    if not trajs:
        raise GPFitError("no trajectories to fit")
    data = np.stack([np.asarray(t, float) for t in trajs])
    M = data.shape[1]
    tp = np.tile(np.linspace(0.0, 1.0, M), len(data))
    return GpPair(fit_gp_1d(tp, data[:, :, 0].ravel()),
                  fit_gp_1d(tp, data[:, :, 1].ravel()), data)


def gp_predict(gp: GpPair, t):
    """Posterior (x mean, y mean, x variance, y variance) at normalized times ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        log.warning("query times outside [0, 1] clamped")
        t = np.clip(t, 0.0, 1.0)
    mx, vx = gp.xgp.predict(t)
    my, vy = gp.ygp.predict(t)
    if t.ndim == 0:
        return float(mx[0]), float(my[0]), float(vx[0]), float(vy[0])
    return mx, my, vx, vy


def canonical_mean(gp: GpPair, M: int = M_POINTS) -> np.ndarray:
    t = np.linspace(0.0, 1.0, M)
    mx, my, _, _ = gp_predict(gp, t)
    return np.column_stack([mx, my])


def adapt(gp: GpPair, start, end, M: int = M_POINTS) -> np.ndarray:
    """Map the canonical mean onto a new start/goal pair.

    Points are scaled by the chord, rotated by +theta_new and translated by
    ``start``. Point 0 is ``start``; the last point snaps to ``end`` when it
    lies within 2% of the chord.
    """
    start, end = np.asarray(start, float), np.asarray(end, float)
    length, theta = chord_frame(start, end)
    if length <= EPS_CHORD:
        raise AdaptationError(f"degenerate chord of length {length:.3g}")
    P = start + length * (canonical_mean(gp, M) @ _rot(theta).T)
    P[0] = start
    miss = float(np.hypot(*(P[-1] - end)))
    if miss <= SNAP_FRACTION * length:
        P[-1] = end
    else:
        log.warning("adapted end misses the goal by %.3g (chord %.3g); not snapped", miss, length)
    return P


# --------------------------------------------------------- trajectory model

@dataclass(frozen=True, eq=False)
class TrajectoryModel:
    pairs: dict                   # (source key, target key) -> GpPair
    counts: dict
    keying: str = "kind"
    mode: str = "time"

    def key_for(self, mover, target) -> tuple:
        return _key(mover, target, self.keying)

    def get(self, mover, target) -> GpPair | None:
        return self.pairs.get(self.key_for(mover, target))


def _key(mover, target, keying):
    """Pair key from two NodeDescriptors (kind keys, or ids when ``keying='id'``)."""
    if keying == "id":
        return (str(mover.id), str(target.id))
    if keying == "kind":
        return (mover.kind_key, target.kind_key)
    raise ParameterError(f"unknown pair keying {keying!r}")


def fit_trajectory_model(segments, nodes, keying: str = "kind", mode: str = "time",
                         M: int = M_POINTS) -> TrajectoryModel:
    """Group segments by pair key, canonicalize, and fit one GpPair per group.

    ``nodes`` maps node id to NodeDescriptor.
    """
    groups: dict = {}
    for seg in segments:
        key = _key(nodes[seg.mover], nodes[seg.target], keying)
        try:
            groups.setdefault(key, []).append(canonicalize(seg, M, mode))
        except CanonicalizationError as exc:
            log.warning("segment %d->%d of demo %d excluded: %s",
                        seg.mover, seg.target, seg.demo_index, exc)
    if not groups:
        raise GPFitError("no usable trajectory segment")
    pairs = {key: fit_gp(groups[key]) for key in sorted(groups)}
    return TrajectoryModel(pairs, {k: len(v) for k, v in sorted(groups.items())}, keying, mode)


def _gp_record(g: Gp1D) -> dict:
    return {"sf2": g.sf2, "ell": g.ell, "sn2": g.sn2}


def save_trajectory_model(tm: TrajectoryModel, path) -> None:
    """JSON: keying, resampling mode, then per pair its hyperparameters and training data."""
    doc = {"format": "ddace-gp", "version": CHECKPOINT_VERSION, "keying": tm.keying, "mode": tm.mode,
           "pairs": [{"source": k[0], "target": k[1], "count": tm.counts[k],
                      "x": _gp_record(p.xgp), "y": _gp_record(p.ygp),
                      "trajectories": p.trajectories.tolist()}
                     for k, p in tm.pairs.items()]}
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_trajectory_model(path) -> TrajectoryModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "ddace-gp" or doc.get("version") != CHECKPOINT_VERSION:
        raise ParameterError(f"{path}: not a version-{CHECKPOINT_VERSION} trajectory model")
    pairs, counts = {}, {}
    for rec in doc["pairs"]:
        data = np.array(rec["trajectories"], dtype=float)
        M = data.shape[1]
        tp = np.tile(np.linspace(0.0, 1.0, M), len(data))
        gps = []
        for dim, name in ((0, "x"), (1, "y")):
            u, ybar, k, ss = _collapse(tp, data[:, :, dim].ravel())
            h = rec[name]
            gps.append(_build(u, ybar, k, ss, h["sf2"], h["ell"], h["sn2"]))
        key = (rec["source"], rec["target"])
        pairs[key] = GpPair(gps[0], gps[1], data)
        counts[key] = rec["count"]
    return TrajectoryModel(pairs, counts, doc["keying"], doc["mode"])


def write_trajectory_csv(points, path) -> None:
    P = np.asarray(points, float)
    tp = np.linspace(0.0, 1.0, len(P))
    lines = ["idx,t_prime,x,y"] + [f"{i},{tp[i]!r},{P[i, 0]!r},{P[i, 1]!r}" for i in range(len(P))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
