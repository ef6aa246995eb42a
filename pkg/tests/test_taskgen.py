from dataclasses import replace

import numpy as np
import pytest

from ddace.demo import extract_segments, segment_keyframes
from ddace.errors import ParameterError
from ddace.gp import canonicalize
from ddace.pipeline import load_corpus
from ddace.scenario import parse_scenario_text, serialize_scenario
from ddace.taskgen import BASE_PRESETS, TaskSpec, catalog, gen_task, n_steps, relay_steps, write_corpus


def test_relay_eleven_has_ten_steps():
    demos, _, _ = gen_task(TaskSpec("relay", 11, 1, n_demos=30, seed=7))
    assert len(demos) == 30
    for d in demos:
        ks = segment_keyframes(d)
        assert len(ks) - 1 == 10
        assert all(any(d.vocab[a].motion for a in kf.labels) for kf in ks.keyframes[1:])


def test_generation_is_byte_deterministic(tmp_path):
    spec = TaskSpec("screen", 3, 4, n_demos=4, seed=3)
    write_corpus(*gen_task(spec)[:2], tmp_path / "a")
    write_corpus(*gen_task(spec)[:2], tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_spirals_and_arcs_are_congruent():
    demos, _, _ = gen_task(TaskSpec("curves", 4, 1, n_demos=1, sigma_pos=0.0))
    segs = extract_segments(demos[0])
    assert len(segs) == 4
    canon = {s.mover: canonicalize(s).points for s in segs}
    for P in canon.values():
        assert tuple(P[0]) == (0, 0) and tuple(P[-1]) == (1, 0)
    assert np.max(np.abs(canon[0] - canon[1])) < 1e-5
    assert np.max(np.abs(canon[2] - canon[3])) < 1e-5


def test_catalog():
    presets = catalog()
    assert BASE_PRESETS == ("task1", "task2", "task3", "task4")
    assert presets["task3"].n_actions == 4 and presets["task3"].n_robots == 3
    assert presets["task2"].n_robots == 11
    assert [k for k in presets if k.startswith("relay-")] == [f"relay-r{n}" for n in range(4, 12)]


@pytest.mark.parametrize("n", range(4, 12))
def test_relay_chain_ends_at_goal(n):
    steps = relay_steps(n)
    assert steps[-1] == [(n, 0)]
    touched = {v for s in steps for pair in s for v in pair}
    assert touched <= set(range(n + 1)) and n in touched
    assert n_steps(TaskSpec("relay", n, 1)) == len(steps)


@pytest.mark.parametrize("spec", [TaskSpec("transport", 4, 3), TaskSpec("relay", 12, 1),
                                  TaskSpec("screen", 3, 5), TaskSpec("walk", 1, 1),
                                  TaskSpec("curves", 4, 1, sigma_pos=-1)])
def test_invalid_specs(spec):
    with pytest.raises(ParameterError):
        gen_task(spec)


@pytest.mark.parametrize("preset", BASE_PRESETS)
def test_nominal_scenario_goals_match_demonstrations(preset):
    demos, scenario, refs = gen_task(replace(catalog()[preset], n_demos=3, sigma_pos=0.0))
    d = demos[0]
    final = {n.id: d.positions[-1, i] for i, n in enumerate(d.nodes)}
    assert scenario.goals and all(g.satisfied(final) for g in scenario.goals)
    assert set(refs) == set(scenario.robots)
    assert scenario.max_steps == n_steps(catalog()[preset]) + 3


def test_scenario_sidecar_round_trip(tmp_path):
    demos, scenario, _ = gen_task(replace(catalog()["task1"], n_demos=2))
    assert parse_scenario_text(serialize_scenario(scenario)) == scenario
    write_corpus(demos, scenario, tmp_path)
    corpus = load_corpus(tmp_path)
    assert corpus.scenario == scenario and len(corpus.demos) == 2
    assert all(a == b for a, b in zip(corpus.demos, demos))


def test_spurious_edges_only_in_first_demo():
    base = gen_task(TaskSpec("relay", 6, 1, n_demos=3, seed=1))[0]
    noisy = gen_task(TaskSpec("relay", 6, 1, n_demos=3, seed=1, spurious=2))[0]
    assert len(segment_keyframes(noisy[0])) == len(segment_keyframes(base[0])) + 2
    assert len(segment_keyframes(noisy[1])) == len(segment_keyframes(base[1]))
