import numpy as np
import pytest

from attnmv.lattice import GridSpec, build_grid
from attnmv.market import example_model
from attnmv.solver import ControlGrid, solve


@pytest.fixture(scope="session")
def default_model():
    return example_model()


@pytest.fixture(scope="session")
def default_spec():
    return GridSpec(h1=0.2, h2=0.001, x_min=0.0, x_max=4.0, n_steps=2000)


@pytest.fixture(scope="session")
def default_controls(default_model):
    return ControlGrid.regular(d=1, u_max=2.0, du=0.5,
                               pi_min=default_model.attention_min,
                               pi_max=default_model.attention_max, n_pi=5)


@pytest.fixture(scope="session")
def default_lattice(default_spec):
    return build_grid(default_spec, 2)


@pytest.fixture(scope="session")
def short_fields(default_model, default_controls):
    """Solved run on a shortened horizon (same coefficients, 200 slices)."""
    model = example_model(T=0.2)
    spec = GridSpec(h1=0.2, h2=0.001, x_min=0.0, x_max=4.0, n_steps=200)
    return model, spec, solve(model, spec, default_controls)


# worked node used across kernel/solver/oracle tests: m=2, d=1, x=1, phi=0.2,
# u=2, pi=1 gives bbar=0.1, sbar^2=0.04, filter drift 1.4
@pytest.fixture(scope="session")
def worked_model():
    return example_model(generator=[[-1.0, 1.0], [2.0, -2.0]], riskfree=0.0,
                         drift=[[0.05], [0.05]], vol=[[[0.1]], [[0.1]]],
                         cost_coeff=0.0)


@pytest.fixture(scope="session")
def worked_setup(worked_model, default_spec):
    lat = build_grid(default_spec, 2)
    node = int(lat.index_of(5, np.array([1])))      # x=1.0, phi=0.2
    return worked_model, lat, node
