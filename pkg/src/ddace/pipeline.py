"""End-to-end training and evaluation on a demonstration corpus."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .demo import extract_segments, parse_demonstration, reference_sequences, segment_keyframes, split_dataset
from .errors import ParameterError, ParseError
from .executor import run_episode
from .gp import fit_trajectory_model, load_trajectory_model, save_trajectory_model
from .graph import extract_edges, fully_connected, parse_edge_set, refine_edges, write_edge_set
from .metrics import EpisodeReference, compute_metrics
from .scenario import parse_scenario, scenario_for_demo
from .taskgen import catalog, gen_task
from .tgn import TgnConfig, attention_mask, load_model, read_loss_csv, save_model, train, write_loss_csv

log = logging.getLogger(__name__)

TGN_FILE = "tgn.json"
GP_FILE = "gp.json"
EDGE_FILE = "edges.txt"
LOSS_FILE = "loss.csv"
SPLIT_FILE = "split.txt"


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a train/eval run; flat so it maps onto a key-value file."""

    seed: int = 0
    split: float = 0.9
    K: int = 2
    laplacian: str = "similarity"
    spectral: bool = True
    keying: str = "kind"
    resample: str = "time"
    gat_hidden: int = 32
    gru_hidden: int = 128
    dropout_rate: float = 0.2
    learning_rate: float = 1e-3
    max_epochs: int = 300

    def __post_init__(self):
        if not 0.0 < self.split < 1.0:
            raise ParameterError(f"split must lie in (0, 1), got {self.split}")
        if self.K < 1:
            raise ParameterError("K must be >= 1")
        if self.laplacian not in ("similarity", "literal"):
            raise ParameterError(f"unknown laplacian mode {self.laplacian!r}")
        if self.keying not in ("kind", "id"):
            raise ParameterError(f"unknown pair keying {self.keying!r}")
        if self.resample not in ("time", "arclength"):
            raise ParameterError(f"unknown resampling mode {self.resample!r}")

    def tgn_config(self, num_nodes, num_actions, bounds) -> TgnConfig:
        return TgnConfig(num_nodes, num_actions, gat_hidden=self.gat_hidden,
                         gru_hidden=self.gru_hidden, dropout_rate=self.dropout_rate,
                         learning_rate=self.learning_rate, max_epochs=self.max_epochs,
                         seed=self.seed, bounds=bounds)

    def with_overrides(self, values: dict) -> "RunConfig":
        """Apply string or typed overrides, converting by field type."""
        kinds = {f.name: f.type for f in fields(self)}
        out = {}
        for key, raw in values.items():
            if raw is None:
                continue
            if key not in kinds:
                raise ParameterError(f"unknown config key {key!r}")
            t = kinds[key]
            if isinstance(raw, str):
                if t in ("bool", bool):
                    raw = raw.strip().lower() in ("1", "true", "yes", "on")
                elif t in ("int", int):
                    raw = int(raw)
                elif t in ("float", float):
                    raw = float(raw)
                else:
                    raw = raw.strip()
            out[key] = raw
        return replace(self, **out)


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno)
        k, v = (p.strip() for p in line.split("=", 1))
        values[k] = v
    return values


@dataclass(eq=False)
class Corpus:
    demos: list
    scenario: object
    paths: list = field(default_factory=list)


def load_corpus(data_dir) -> Corpus:
    d = Path(data_dir)
    sidecar = d / "scenario.txt"
    if not sidecar.is_file():
        raise FileNotFoundError(f"{sidecar} not found")
    scenario = parse_scenario(sidecar)
    paths = sorted(d.glob("demo_*.csv"))
    return Corpus([parse_demonstration(p, scenario.vocab) for p in paths], scenario, paths)


@dataclass(eq=False)
class TrainedPipeline:
    model: object
    tm: object
    edges: object
    history: list
    train_idx: list
    test_idx: list

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_model(self.model, out / TGN_FILE)
        save_trajectory_model(self.tm, out / GP_FILE)
        write_edge_set(self.edges, out / EDGE_FILE)
        write_loss_csv(self.history, out / LOSS_FILE)
        (out / SPLIT_FILE).write_text(
            f"train = {','.join(map(str, self.train_idx))}\n"
            f"test = {','.join(map(str, self.test_idx))}\n", encoding="utf-8")

    @classmethod
    def load(cls, model_dir) -> "TrainedPipeline":
        d = Path(model_dir)
        for name in (TGN_FILE, GP_FILE, EDGE_FILE):
            if not (d / name).is_file():
                raise FileNotFoundError(f"{d / name} not found")
        split = {}
        if (d / SPLIT_FILE).is_file():
            split = parse_config_text((d / SPLIT_FILE).read_text(encoding="utf-8"))
        idx = {k: [int(v) for v in split.get(k, "").split(",") if v] for k in ("train", "test")}
        history = read_loss_csv(d / LOSS_FILE) if (d / LOSS_FILE).is_file() else []
        return cls(load_model(d / TGN_FILE), load_trajectory_model(d / GP_FILE),
                   parse_edge_set(d / EDGE_FILE), history, idx["train"], idx["test"])


def split_indices(n: int, ratio: float, seed: int):
    train_idx, test_idx = split_dataset(list(range(n)), ratio, seed)
    return sorted(train_idx), sorted(test_idx)


def train_pipeline(demos, scenario, cfg: RunConfig, train_idx=None) -> TrainedPipeline:
    """Refine the edge set, train the temporal network and fit the motion primitives.

    ``train_idx`` selects the training demonstrations; by default the seeded
    split of ``cfg`` is used.
    """
    if train_idx is None:
        train_idx, test_idx = split_indices(len(demos), cfg.split, cfg.seed)
    else:
        test_idx = sorted(set(range(len(demos))) - set(train_idx))
    log.info("split: %d train / %d test", len(train_idx), len(test_idx))
    seqs, segs, per_demo = [], [], []
    for k in train_idx:
        d = demos[k]
        ks = segment_keyframes(d, k)
        ss = extract_segments(d, ks, scenario.eps_goal)
        seqs.append(ks)
        segs.extend(ss)
        per_demo.append(extract_edges(ks, ss, d.vocab))
    if cfg.spectral:
        _, edges = refine_edges(per_demo, cfg.K, cfg.laplacian)
    else:
        edges = fully_connected(scenario.node_ids)
    mask = attention_mask(edges.edges, scenario.node_ids)
    tcfg = cfg.tgn_config(len(scenario.nodes), len(scenario.vocab), scenario.bounds)
    model, history = train(seqs, mask, tcfg)
    nodes = {n.id: n for n in scenario.nodes}
    tm = fit_trajectory_model(segs, nodes, cfg.keying, cfg.resample)
    return TrainedPipeline(model, tm, edges, history, list(train_idx), list(test_idx))


def episode_reference(d, name: str, eps_goal: float) -> EpisodeReference:
    segs = extract_segments(d, None, eps_goal)
    trajs: dict = {}
    for s in segs:
        trajs.setdefault(s.mover, []).append(s.points)
    return EpisodeReference(name, reference_sequences(d), trajs)


def evaluate(pipe: TrainedPipeline, demos, scenario, indices=None):
    """Run one episode per held-out demonstration. Returns (traces, report)."""
    indices = pipe.test_idx if indices is None else indices
    traces, refs = [], []
    for k in indices:
        name = f"{scenario.name}-{k:03d}"
        spec = scenario_for_demo(scenario, demos[k], name)
        traces.append(run_episode(pipe.model, pipe.edges.edges, pipe.tm, spec))
        refs.append(episode_reference(demos[k], name, scenario.eps_goal))
    return traces, compute_metrics(traces, refs)


SWEEP_DEMOS = (5, 10, 20, 30)


def sweep_plan(study: str, lo=None, hi=None, preset: str = "task4") -> list:
    """(series label, preset name, demo count override) for one case study."""
    if study == "robots":
        lo, hi = lo or 4, hi or 11
        if not 4 <= lo <= hi <= 11:
            raise ParameterError("robot sweep range must lie within 4..11")
        return [(f"robots={n}", f"relay-r{n}", None) for n in range(lo, hi + 1)]
    if study == "actions":
        lo, hi = lo or 2, hi or 4
        if not 2 <= lo <= hi <= 4:
            raise ParameterError("action sweep range must lie within 2..4")
        return [(f"actions={k}", f"screen-a{k}", None) for k in range(lo, hi + 1)]
    if study == "demos":
        grid = [n for n in SWEEP_DEMOS if (lo is None or n >= lo) and (hi is None or n <= hi)]
        if not grid:
            raise ParameterError("demo sweep range excludes every grid point")
        return [(f"demos={n}", preset, n) for n in grid]
    raise ParameterError(f"unknown study {study!r}; expected robots, actions or demos")


def run_sweep(plan, cfg: RunConfig, n_demos: int = 30, gen_seed: int = 0) -> dict:
    """Train one pipeline per sweep leg and return label -> loss history."""
    presets = catalog()
    out = {}
    for label, preset, demos_override in plan:
        spec = replace(presets[preset], n_demos=demos_override or n_demos, seed=gen_seed)
        demos, scenario, _ = gen_task(spec)
        out[label] = train_pipeline(demos, scenario, cfg).history
    return out


def write_sweep_csv(series: dict, path) -> None:
    lines = ["series,epoch,loss"]
    for label, hist in series.items():
        lines += [f"{label},{i},{v!r}" for i, v in enumerate(hist, start=1)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
