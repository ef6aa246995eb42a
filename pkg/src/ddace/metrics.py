"""Success metrics and trajectory similarity for evaluated episodes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AlignmentError, CanonicalizationError
from .gp import M_POINTS, resample, to_canonical


def discrete_frechet(P, Q) -> float:
    """Discrete Frechet distance between two polylines (dynamic programming)."""
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    if len(P) == 0 or len(Q) == 0:
        raise ValueError("polylines must be non-empty")
    dx = P[:, None, 0] - Q[None, :, 0]
    dy = P[:, None, 1] - Q[None, :, 1]
    d = (dx * dx + dy * dy).tolist()
    n, m = len(P), len(Q)
    ca = [[0.0] * m for _ in range(n)]
    for i in range(n):
        row, di = ca[i], d[i]
        for j in range(m):
            if i == 0 and j == 0:
                best = 0.0
            elif i == 0:
                best = row[j - 1]
            elif j == 0:
                best = ca[i - 1][j]
            else:
                best = min(ca[i - 1][j], ca[i - 1][j - 1], row[j - 1])
            row[j] = max(di[j], best)
    return math.sqrt(ca[-1][-1])


def normalize_for_fd(curve, M: int | None = M_POINTS) -> np.ndarray:
    """Canonical frame (start at origin, unit chord on +x), optionally resampled to M points."""
    C = to_canonical(curve)
    return resample(C, M) if M else C


@dataclass(frozen=True)
class EpisodeReference:
    """Ground truth for one held-out scenario.

    ``chains`` maps robot id to its (action id, target id) sequence;
    ``trajectories`` maps robot id to its demonstrated motion polylines in order.
    """

    scenario: str
    chains: dict
    trajectories: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EpisodeScore:
    scenario: str
    success: bool
    robots_ok: int
    robots: int
    goals_met: int
    goals: int
    fd: tuple


@dataclass(frozen=True)
class MetricsReport:
    osr: float
    ssr: float
    gcr: float
    fd: float
    episodes: tuple
    n_fd_pairs: int

    def to_table(self) -> str:
        lines = [f"{'OSR':>6} {'SSR':>6} {'GCR':>6} {'FD':>8}",
                 f"{self.osr:6.3f} {self.ssr:6.3f} {self.gcr:6.3f} {self.fd:8.4f}", "",
                 f"{'episode':<16} {'ok':>3} {'robots':>7} {'goals':>7} {'fd_mean':>8}"]
        for e in self.episodes:
            fdm = f"{np.mean(e.fd):8.4f}" if e.fd else f"{'-':>8}"
            lines.append(f"{e.scenario:<16} {int(e.success):>3} {e.robots_ok:>3}/{e.robots:<3} "
                         f"{e.goals_met:>3}/{e.goals:<3} {fdm}")
        return "\n".join(lines) + "\n"

    def to_keyvalue(self) -> str:
        lines = [f"osr = {self.osr!r}", f"ssr = {self.ssr!r}", f"gcr = {self.gcr!r}",
                 f"fd = {self.fd!r}", f"episodes = {len(self.episodes)}",
                 f"fd_pairs = {self.n_fd_pairs}"]
        for e in self.episodes:
            lines.append(f"episode.{e.scenario} = success={int(e.success)} "
                         f"robots={e.robots_ok}/{e.robots} goals={e.goals_met}/{e.goals}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir, stem: str = "metrics") -> None:
        out = Path(out_dir)
        (out / f"{stem}.txt").write_text(self.to_table(), encoding="utf-8")
        (out / f"{stem}.kv").write_text(self.to_keyvalue(), encoding="utf-8")


def score_episode(trace, ref: EpisodeReference) -> EpisodeScore:
    faulted = {f.robot for f in trace.faults}
    robots = sorted(ref.chains)
    ok = sum(1 for r in robots
             if tuple(trace.executed.get(r, ())) == tuple(ref.chains[r]) and r not in faulted)
    chains_match = all(tuple(trace.executed.get(r, ())) == tuple(ref.chains[r]) for r in robots)
    goals = len(trace.goal_flags)
    met = sum(bool(v) for v in trace.goal_flags)
    fds = []
    for r in robots:
        gen = trace.motions.get(r, [])
        for g, q in zip(gen, ref.trajectories.get(r, [])):
            try:
                fds.append(discrete_frechet(normalize_for_fd(g), normalize_for_fd(q)))
            except CanonicalizationError:
                continue
    return EpisodeScore(ref.scenario, chains_match and met == goals, ok, len(robots),
                        met, goals, tuple(fds))


def compute_metrics(traces, refs) -> MetricsReport:
    """Aggregate OSR, SSR, GCR and mean normalized FD over aligned episodes.

    Generated and demonstrated motions are paired per robot in execution order.
    """
    by_name = {r.scenario: r for r in refs}
    if len(by_name) != len(refs):
        raise AlignmentError("duplicate scenario ids among references")
    names = [t.scenario for t in traces]
    if sorted(names) != sorted(by_name):
        raise AlignmentError(f"traces {sorted(names)} do not match references {sorted(by_name)}")
    scores = tuple(score_episode(t, by_name[t.scenario]) for t in sorted(traces, key=lambda t: t.scenario))
    if not scores:
        raise AlignmentError("no episodes to score")
    robots = sum(s.robots for s in scores)
    fds = [f for s in scores for f in s.fd]
    gcr = [s.goals_met / s.goals if s.goals else 1.0 for s in scores]
    return MetricsReport(
        osr=sum(s.success for s in scores) / len(scores),
        ssr=sum(s.robots_ok for s in scores) / robots if robots else 1.0,
        gcr=float(np.mean(gcr)),
        fd=float(np.mean(fds)) if fds else float("nan"),
        episodes=scores, n_fd_pairs=len(fds))
