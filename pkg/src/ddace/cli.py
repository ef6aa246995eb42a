"""Command-line entry point: gen, train, eval, sweep, render.

Exit codes: 0 success, 2 usage or input error, 3 numeric or training failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .errors import DdaceError, GPFitError, NumericError, TrainingError
from .render import render_episode, render_losses, render_trace_csv
from .scenario import scenario_for_demo
from .taskgen import TaskSpec, catalog, gen_task, write_corpus
from .tgn import read_loss_csv

log = logging.getLogger("ddace")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _run_config(args) -> pipeline.RunConfig:
    cfg = pipeline.RunConfig()
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = cfg.with_overrides(pipeline.parse_config_text(text))
    overrides = {
        "seed": args.seed,
        "split": getattr(args, "split", None),
        "K": getattr(args, "K", None),
        "laplacian": getattr(args, "laplacian", None),
        "keying": getattr(args, "keying", None),
        "resample": getattr(args, "resample", None),
        "max_epochs": getattr(args, "epochs", None),
    }
    if getattr(args, "no_spectral", False):
        overrides["spectral"] = False
    return cfg.with_overrides(overrides)


def cmd_gen(args) -> int:
    presets = catalog()
    if args.preset:
        if args.preset not in presets:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {', '.join(presets)}")
        spec = presets[args.preset]
    elif args.family:
        spec = TaskSpec(args.family, args.robots or 0, args.actions or 0)
    else:
        raise UsageError("gen needs --preset or --family")
    changes = {"n_demos": args.demos, "sigma_pos": args.sigma, "spurious": args.spurious,
               "n_robots": args.robots, "n_actions": args.actions}
    spec = replace(spec, seed=args.seed or 0, **{k: v for k, v in changes.items() if v is not None})
    demos, scenario, _ = gen_task(spec)
    out = Path(args.out or f"data/{args.preset or spec.family}")
    paths = write_corpus(demos, scenario, out)
    print(f"wrote {len(paths)} demonstrations and scenario.txt to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _run_config(args)
    corpus = pipeline.load_corpus(args.data)
    if len(corpus.demos) < 2:
        raise UsageError(f"{args.data} holds {len(corpus.demos)} demonstrations; need at least 2")
    pipe = pipeline.train_pipeline(corpus.demos, corpus.scenario, cfg)
    out = Path(args.out or "model")
    pipe.save(out)
    print(f"split: {len(pipe.train_idx)} train / {len(pipe.test_idx)} test")
    print(f"edges: {len(pipe.edges.edges)} retained")
    print(f"epochs: {len(pipe.history)} final loss {pipe.history[-1]:.6g}")
    print(f"saved model to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    corpus = pipeline.load_corpus(args.data)
    pipe = pipeline.TrainedPipeline.load(args.model)
    indices = pipe.test_idx
    if args.all or not indices:
        indices = list(range(len(corpus.demos)))
    if max(indices) >= len(corpus.demos):
        raise UsageError("split record refers to demonstrations missing from the data directory")
    traces, report = pipeline.evaluate(pipe, corpus.demos, corpus.scenario, indices)
    out = Path(args.out or "eval")
    (out / "traces").mkdir(parents=True, exist_ok=True)
    report.write(out)
    for t in traces:
        t.write(out / "traces", t.scenario)
    if args.render:
        rdir = out / "render"
        rdir.mkdir(exist_ok=True)
        for k, t in zip(indices, traces):
            spec = scenario_for_demo(corpus.scenario, corpus.demos[k], t.scenario)
            render_episode(t, spec, rdir / f"{t.scenario}.svg", corpus.demos[k])
        if pipe.history:
            render_losses({"train": pipe.history}, rdir / "loss.svg")
    print(report.to_table(), end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    plan = pipeline.sweep_plan(args.study, args.min, args.max, args.preset)
    series = pipeline.run_sweep(plan, cfg, args.demos, args.seed or 0)
    out = Path(args.out or f"sweep-{args.study}")
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_sweep_csv(series, out / "sweep.csv")
    render_losses(series, out / "sweep.svg", f"training loss by {args.study}")
    for label, hist in series.items():
        print(f"{label}: {len(hist)} epochs, final loss {hist[-1]:.6g}")
    return EXIT_OK


def cmd_render(args) -> int:
    out = Path(args.out or "render.svg")
    if args.loss:
        render_losses({Path(args.loss).stem: read_loss_csv(args.loss)}, out)
    elif args.trace:
        with open(args.trace, newline="", encoding="utf-8") as fh:
            rows = [(float(r["clock"]), int(r["node_id"]), float(r["x"]), float(r["y"]),
                     int(r["action_id"])) for r in csv.DictReader(fh)]
        render_trace_csv(rows, out)
    else:
        raise UsageError("render needs --loss or --trace")
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    def global_flags(default):
        q = argparse.ArgumentParser(add_help=False, argument_default=default)
        q.add_argument("--config", help="flat key = value run configuration")
        q.add_argument("--seed", type=int, help="seed for generation, splitting and training")
        q.add_argument("--out", help="output file or directory")
        q.add_argument("-v", "--verbose", action="store_true", default=default or False)
        return q

    # flags may come before or after the subcommand; the subcommand copy must
    # not clobber a value given before it
    common = global_flags(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="ddace", parents=[global_flags(None)],
                                description="Few-shot multi-robot coordination from demonstrations.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a demonstration corpus")
    g.add_argument("--preset")
    g.add_argument("--family", choices=("transport", "relay", "screen", "curves"))
    g.add_argument("--robots", type=int)
    g.add_argument("--actions", type=int)
    g.add_argument("--demos", type=int)
    g.add_argument("--sigma", type=float, help="initial position jitter")
    g.add_argument("--spurious", type=int, help="one-off noise edges in the first demonstration")
    g.set_defaults(func=cmd_gen)

    def model_flags(q):
        q.add_argument("--split", type=float)
        q.add_argument("--K", type=int, help="spectral cluster count")
        q.add_argument("--laplacian", choices=("similarity", "literal"))
        q.add_argument("--no-spectral", action="store_true", help="fully connected edge index")
        q.add_argument("--keying", choices=("kind", "id"))
        q.add_argument("--resample", choices=("time", "arclength"))
        q.add_argument("--epochs", type=int)

    t = sub.add_parser("train", parents=[common], help="train on a corpus directory")
    t.add_argument("--data", required=True)
    model_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="execute held-out scenarios and score them")
    e.add_argument("--data", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--all", action="store_true", help="evaluate every demonstration, not only the test split")
    e.add_argument("--render", action="store_true")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", parents=[common], help="loss trends across a case study")
    s.add_argument("--study", required=True, choices=("robots", "actions", "demos"))
    s.add_argument("--min", type=int)
    s.add_argument("--max", type=int)
    s.add_argument("--preset", default="task4", help="preset for the demos study")
    s.add_argument("--demos", type=int, default=30)
    model_flags(s)
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("render", parents=[common], help="SVG of a loss CSV or trace CSV")
    r.add_argument("--loss")
    r.add_argument("--trace")
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TrainingError, NumericError, GPFitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DdaceError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
