import pytest

from degselect.evidence import default_bank
from degselect.model_space import default_case_sets
from degselect.simulate import SimKind, default_params, generate, truncate_at_progress


@pytest.fixture(scope="session")
def case_sets():
    return default_case_sets()


@pytest.fixture(scope="session")
def case1_set(case_sets):
    return case_sets[0]


@pytest.fixture(scope="session")
def case2_set(case_sets):
    return case_sets[1]


@pytest.fixture(scope="session")
def bank():
    return default_bank()


def make_path(kind: SimKind, seed: int = 7, n_percent: int | None = None, **kw):
    """Run-to-failure trajectory with shipped defaults, optionally truncated."""
    result = generate(default_params(kind, seed=seed, **kw), unit_id=f"{kind.value}-{seed}")
    assert not result.censored
    traj = result.trajectory
    if n_percent is not None:
        traj = truncate_at_progress(traj, n_percent)
    return traj


@pytest.fixture(scope="session")
def gamma_path():
    return make_path(SimKind.HOMOG_GAMMA, seed=11)


@pytest.fixture(scope="session")
def wiener_path():
    return make_path(SimKind.LINEAR_WIENER, seed=11)
