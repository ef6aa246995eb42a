import time
from dataclasses import replace

import pytest

from ddace import pipeline
from ddace.taskgen import catalog, gen_task

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def record(request):
    """Record one criterion verdict; the terminal summary prints them in order."""
    def _record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        request.config.stash[_ACCEPTANCE].append((number, line))
        print(line)
        return passed
    return _record


class _Runs:
    """Memoized corpora, trained pipelines and evaluations shared across tests."""

    def __init__(self):
        self._corpora, self._pipes, self._evals = {}, {}, {}
        self.seconds = {}               # (preset, n_demos, spectral) -> train + eval wall time

    def corpus(self, preset, n_demos=30):
        key = (preset, n_demos)
        if key not in self._corpora:
            self._corpora[key] = gen_task(replace(catalog()[preset], n_demos=n_demos, seed=0))
        return self._corpora[key]

    def pipe(self, preset, n_demos=30, spectral=True):
        key = (preset, n_demos, spectral)
        if key not in self._pipes:
            demos, scenario, _ = self.corpus(preset, n_demos)
            cfg = pipeline.RunConfig(spectral=spectral)
            t0 = time.perf_counter()
            self._pipes[key] = pipeline.train_pipeline(demos, scenario, cfg)
            self.seconds[key] = self.seconds.get(key, 0.0) + time.perf_counter() - t0
        return self._pipes[key]

    def evaluation(self, preset, n_demos=30, spectral=True):
        key = (preset, n_demos, spectral)
        if key not in self._evals:
            demos, scenario, _ = self.corpus(preset, n_demos)
            pipe = self.pipe(preset, n_demos, spectral)
            t0 = time.perf_counter()
            self._evals[key] = pipeline.evaluate(pipe, demos, scenario)
            self.seconds[key] += time.perf_counter() - t0
        return self._evals[key]

    def all_traces(self):
        return [(k, t) for k, (traces, _) in self._evals.items() for t in traces]


@pytest.fixture(scope="session")
def runs():
    return _Runs()

