import numpy as np
import pytest

from freqnadir import fixture_path
from freqnadir.netmodel import NetworkModel, load_network
from freqnadir.spectral import DefectiveMatrixError, stability_margin
from freqnadir.trajectory import analyze


@pytest.fixture(scope="session")
def model3():
    return load_network(fixture_path("fixture3"))


@pytest.fixture(scope="session")
def model10():
    return load_network(fixture_path("fixture10"))


@pytest.fixture(scope="session")
def analysis3(model3):
    return analyze(model3, model3.default_gains())


@pytest.fixture(scope="session")
def analysis10(model10):
    return analyze(model10, model10.default_gains())


def single_bus(pd=-1.0, d=1.0, m=2.0, tg=0.5, tb=0.2, r=1.0):
    return NetworkModel((m,), (d,), (tg,), (tb,), (pd,), r0=(r,))


def random_network(rng, n):
    """Connected random network: a random spanning tree plus a few chords."""
    order = rng.permutation(n) + 1
    lines = [(int(order[k]), int(order[rng.integers(k)])) for k in range(1, n)]
    seen = {frozenset(l) for l in lines}
    for _ in range(rng.integers(0, n)):
        i, j = (int(v) for v in rng.choice(n, size=2, replace=False) + 1)
        if frozenset((i, j)) not in seen:
            seen.add(frozenset((i, j)))
            lines.append((i, j))
    return NetworkModel(
        m=tuple(rng.uniform(2.0, 10.0, n)),
        d=tuple(rng.uniform(0.5, 2.0, n)),
        tg=tuple(rng.uniform(0.2, 0.6, n)),
        tb=tuple(rng.uniform(0.05, 0.3, n)),
        pd=tuple(rng.uniform(-2.0, 1.0, n)),
        lines=tuple(lines),
        b=tuple(rng.uniform(2.0, 12.0, len(lines))),
        r0=tuple(rng.uniform(0.0, 10.0, n)),
    )


def random_stable_instances(count, seed=0, n_max=10):
    """Yield ``(model, analysis)`` pairs that are stable and diagonalizable."""
    rng = np.random.default_rng(seed)
    produced = 0
    while produced < count:
        model = random_network(rng, int(rng.integers(1, n_max + 1)))
        try:
            an = analyze(model, model.default_gains())
        except DefectiveMatrixError:
            continue
        if stability_margin(an.spectrum) > -1e-6:
            continue
        produced += 1
        yield model, an


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record and print one pass/fail line for an acceptance criterion."""

    def report(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
