import pytest

from semirandom.process import Rng

ACCEPTANCE_LINES: list[str] = []


class ScriptedRng(Rng):
    """Rng whose ``randbelow`` replays a fixed list of values first."""

    def __init__(self, values, seed=0):
        super().__init__(seed)
        self.values = list(values)

    def randbelow(self, k):
        if self.values:
            v = self.values.pop(0)
            assert 0 <= v < k, (v, k)
            return v
        return super().randbelow(k)


@pytest.fixture
def scripted():
    return ScriptedRng


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
