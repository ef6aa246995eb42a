from dataclasses import replace

import numpy as np
import pytest

from ddace.demo import ActionSpec, NodeDescriptor, extract_segments
from ddace.executor import WorldState, execute_step, resolve_target, run_episode
from ddace.gp import TrajectoryModel, fit_gp, fit_trajectory_model
from ddace.graph import DirectedEdge, fully_connected
from ddace.scenario import GoalCondition, ScenarioSpec
from ddace.taskgen import catalog, gen_task
from ddace.tgn import ActionStep, TgnConfig, TgnModel, attention_mask, predict_next_step, zero_state

VOCAB = (ActionSpec("idle"), ActionSpec("move", motion=True, duration=0.0),
         ActionSpec("pass", duration=1.0, interactive=True))


def straight_model():
    t = np.linspace(0, 1, 100)
    line = fit_gp([np.column_stack([t, np.zeros_like(t)])] * 3)
    keys = [("robot", "goal"), ("robot", "robot")]
    return TrajectoryModel({k: line for k in keys}, {k: 3 for k in keys})


def world(initial, goals=(), attachments=None, max_steps=6):
    nodes = (NodeDescriptor(0, "robot"), NodeDescriptor(1, "robot"), NodeDescriptor(2, "goal"),
             NodeDescriptor(3, "goal"), NodeDescriptor(4, "object", "ball"))
    return ScenarioSpec("toy", nodes, initial, VOCAB, goals=tuple(goals),
                        attachments=attachments or {4: 0}, max_steps=max_steps)


INITIAL = {0: (0.0, 0.0), 1: (0.0, 3.0), 2: (2.0, 0.0), 3: (4.0, 3.0), 4: (0.0, 0.0)}
EDGES = [DirectedEdge(0, 2), DirectedEdge(1, 3), DirectedEdge(0, 1)]


def step(actions):
    return ActionStep(np.array(actions), np.zeros((len(actions), 3)))


def test_single_move_takes_distance_over_speed():
    spec = world(INITIAL)
    ws = WorldState.initial(spec)
    ws2, assign, paths, durs, left, faults, ticks = execute_step(step([1, 0, 0, 0, 0]), straight_model(),
                                                                 ws, spec, EDGES)
    assert assign == {0: (1, 2)} and not faults
    assert ws2.clock == pytest.approx(2.0, abs=1e-6)
    assert np.allclose(ws2.positions[0], (2, 0)) and np.allclose(ws2.positions[4], (2, 0))
    assert left == {0: 0.0}
    clocks = sorted({t[0] for t in ticks})
    assert np.max(np.diff(clocks)) <= 0.05 + 1e-12 and clocks[-1] == ws2.clock


def test_pass_switches_carrier_after_duration():
    spec = world(INITIAL)
    ws = WorldState.initial(spec)
    ws2, assign, _, durs, _, _, _ = execute_step(step([2, 0, 0, 0, 0]), straight_model(), ws, spec, EDGES)
    assert assign == {0: (2, 1)} and durs == {0: 1.0}
    assert ws2.clock == 1.0 and ws2.attachments == {4: 1}
    assert np.array_equal(ws2.positions[0], ws.positions[0])
    assert np.array_equal(ws2.positions[4], ws.positions[1])


def test_slowest_robot_sets_epoch_length():
    spec = world(INITIAL)
    ws2, _, _, durs, _, _, ticks = execute_step(step([1, 1, 0, 0, 0]), straight_model(),
                                                WorldState.initial(spec), spec, EDGES)
    assert durs[0] == pytest.approx(2.0, abs=1e-6) and durs[1] == pytest.approx(4.0, abs=1e-6)
    assert ws2.clock == max(durs.values())
    late = [a for c, n, _, _, a in ticks if n == 0 and c > durs[0] + 1e-12]
    assert late and set(late) == {0}


def test_targets_follow_refined_edges():
    spec = world(INITIAL)
    ws = WorldState.initial(spec)
    tm = straight_model()
    assert resolve_target(0, VOCAB[1], ws, spec, EDGES, tm) == 2
    ws.targeted[0] = [2]
    assert resolve_target(0, VOCAB[1], ws, spec, EDGES, tm) == 1
    assert resolve_target(0, VOCAB[2], ws, spec, EDGES, tm) == 1
    assert resolve_target(1, VOCAB[2], ws, spec, [], tm) == 0


def test_goals_met_before_planning():
    spec = world(INITIAL, [GoalCondition(0, (0.0, 0.0))])
    model = TgnModel.initialize(TgnConfig(5, 3, gat_hidden=3, gru_hidden=4, bounds=spec.bounds))
    trace = run_episode(model, EDGES, straight_model(), spec)
    assert trace.epochs == () and trace.halt_reason == "goals" and trace.success


@pytest.fixture(scope="module")
def curves():
    demos, scenario, _ = gen_task(replace(catalog()["task4"], n_demos=3))
    segs = [s for d in demos for s in extract_segments(d)]
    return scenario, fit_trajectory_model(segs, {n.id: n for n in scenario.nodes})


def test_untrained_policy_runs_out_of_steps(curves):
    scenario, tm = curves
    model = TgnModel.initialize(TgnConfig(len(scenario.nodes), len(scenario.vocab), bounds=scenario.bounds))
    trace = run_episode(model, fully_connected(scenario.node_ids).edges, tm, scenario)
    assert trace.halt_reason == "max_steps" and not trace.success
    assert len(trace.epochs) == scenario.max_steps


def test_hidden_state_threads_across_epochs(curves):
    scenario, tm = curves
    model = TgnModel.initialize(TgnConfig(len(scenario.nodes), len(scenario.vocab), seed=3,
                                          bounds=scenario.bounds))
    edges = fully_connected(scenario.node_ids).edges
    trace = run_episode(model, edges, tm, scenario)
    mask = attention_mask(edges, scenario.node_ids)
    s = zero_state(model)
    for e in trace.epochs:
        got, s = predict_next_step(model, e.snapshot, mask, s)
        assert np.array_equal(got.actions, e.step.actions)
    assert np.array_equal(trace.epochs[0].snapshot, WorldState.initial(scenario).snapshot(scenario.node_ids))


def test_trace_exports(tmp_path, curves):
    scenario, tm = curves
    model = TgnModel.initialize(TgnConfig(len(scenario.nodes), len(scenario.vocab), bounds=scenario.bounds))
    trace = run_episode(model, fully_connected(scenario.node_ids).edges, tm, scenario)
    trace.write(tmp_path, "ep")
    rows = (tmp_path / "ep.csv").read_text().splitlines()
    assert rows[0] == "clock,node_id,x,y,action_id" and len(rows) == len(trace.ticks) + 1
    assert (tmp_path / "ep.txt").read_text().startswith("scenario curves")
