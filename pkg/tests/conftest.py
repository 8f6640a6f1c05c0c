import numpy as np
import pytest

from flexlink import BeamParams, Environment, ModalBasis
from flexlink.config import load_bundled

# 10 mm aluminium rod; EI given literally as in the bundled scenario
ROD = dict(length=1.0, density=2700.0, joint_inertia=1.3254e-6)


@pytest.fixture(scope="session")
def beam():
    return BeamParams.circular(0.01, flexural_rigidity=34.3612, **ROD)


@pytest.fixture(scope="session")
def basis(beam):
    return ModalBasis().fit(beam)


@pytest.fixture(scope="session")
def consts(basis):
    return basis.constants_


@pytest.fixture(scope="session")
def scenario():
    return load_bundled()


@pytest.fixture(scope="session")
def ref_config(scenario):
    return scenario.build()


@pytest.fixture(scope="session")
def ref_run(ref_config):
    from flexlink import run_scenario

    return run_scenario(ref_config)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def far_wall():
    """An environment the link can never reach."""
    return Environment([5.0, 5.0], [-1.0, 0.0], 1.0)


def random_states(rng, n, n_modes=2, q_scale=0.05):
    x = np.empty((n, 2 + 2 * n_modes))
    x[:, 0] = rng.uniform(-np.pi, np.pi, n)
    x[:, 1] = rng.uniform(-3.0, 3.0, n)
    x[:, 2::2] = rng.uniform(-q_scale, q_scale, (n, n_modes))
    x[:, 3::2] = rng.uniform(-1.0, 1.0, (n, n_modes))
    return x


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def ref_outputs(tmp_path_factory):
    """Bundled reference scenario run through the command line once."""
    from flexlink.cli import main
    from flexlink.config import bundled_scenario_path

    out = tmp_path_factory.mktemp("run_a")
    assert main(["run", str(bundled_scenario_path()), "--out", str(out)]) == 0
    return out
