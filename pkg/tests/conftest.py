import numpy as np
import pytest

from cfeval import Context, EnvironmentSpec, RandomizationScheme, generate_scenario


@pytest.fixture
def two_by_two():
    """Two equiprobable contexts, two actions, deterministic rewards."""
    contexts = [Context("x1", (1.0,)), Context("x2", (2.0,))]
    means = [[0.2, 0.7], [0.9, 0.4]]
    return EnvironmentSpec(contexts, [0.5, 0.5], means, noise="fixed")


@pytest.fixture
def ten_context_env():
    rng = np.random.default_rng(2024)
    contexts = [Context(i, tuple(rng.uniform(-1, 1, 3))) for i in range(10)]
    probs = np.full(10, 0.1)
    means = rng.uniform(0.05, 0.6, size=(10, 4))
    return EnvironmentSpec(contexts, probs, means)


@pytest.fixture
def speller():
    return generate_scenario(40, 4, seed=11, violation_rate=0.3)


@pytest.fixture
def sigmoid():
    return RandomizationScheme("sigmoid-subset", lambda1=4.0, lambda2=-0.5)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def report(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
