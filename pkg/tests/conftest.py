import numpy as np
import pytest

ACCEPTANCE = pytest.StashKey[list]()

from uavmarl.env import ScenarioConfig, preset


@pytest.fixture
def cfg():
    return ScenarioConfig()


@pytest.fixture
def desk():
    return preset("2x4")


def make_actions(cfg, rng, power=2, bandwidth=2, vel=None, intents=None):
    from uavmarl.env import HybridAction
    M, N = cfg.num_uavs, cfg.num_gus
    out = []
    for m in range(M):
        out.append(HybridAction(
            velocity_cmd=np.zeros(3) if vel is None else np.asarray(vel[m], float),
            pairing_intent=rng.normal(size=N) if intents is None else np.asarray(intents[m], float),
            power_scheme=power,
            bandwidth_scheme=bandwidth,
            random_proportions_p=rng.random(N),
            random_proportions_b=rng.random(N),
        ))
    return out


@pytest.fixture
def verdict(request):
    """Record one acceptance line; all lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        lines.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
