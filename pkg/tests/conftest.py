import numpy as np
import pytest

from offgrid.dictionaries import make_dictionary
from offgrid.kernels import KernelModel, limit_for
from offgrid.measures import DiscreteMeasure


@pytest.fixture(scope="session")
def gauss_dic():
    return make_dictionary("gaussian_location", (-1.0, 1.0), T=256, sigma=0.3)


@pytest.fixture(scope="session")
def gauss_model(gauss_dic):
    return KernelModel(gauss_dic)


@pytest.fixture(scope="session")
def gauss_limit(gauss_dic):
    return limit_for(gauss_dic)


@pytest.fixture(scope="session")
def wide_dic():
    # small width + wide interval: room for several separated anchors
    return make_dictionary("gaussian_location", (-3.0, 3.0), T=512, sigma=0.1)


@pytest.fixture(scope="session")
def wide_model(wide_dic):
    return KernelModel(wide_dic)


@pytest.fixture(scope="session")
def wide_limit(wide_dic):
    return limit_for(wide_dic)


@pytest.fixture(scope="session")
def fourier_dic():
    return make_dictionary("fourier_lowpass", (0.05, 0.95), f_c=20)


@pytest.fixture(scope="session")
def expdecay_dic():
    return make_dictionary("exponential_decay", (0.5, 2.0), T=400)


@pytest.fixture(scope="session")
def all_dics(gauss_dic, fourier_dic, expdecay_dic):
    return [gauss_dic, fourier_dic, expdecay_dic]


@pytest.fixture
def nu4():
    return DiscreteMeasure.from_weights([1.0, 0.5, 2.0, 1.0])


@pytest.fixture
def nu3():
    return DiscreteMeasure.counting(3)


def fd_derivative(f, x, k, h):
    """Order-4 central finite differences of a vector-valued f, k = 1..3."""
    if k == 1:
        return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)
    if k == 2:
        return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h)
                - f(x - 2 * h)) / (12 * h**2)
    if k == 3:
        return (-f(x + 3 * h) + 8 * f(x + 2 * h) - 13 * f(x + h) + 13 * f(x - h)
                - 8 * f(x - 2 * h) + f(x - 3 * h)) / (8 * h**3)
    raise ValueError(k)


@pytest.fixture(scope="session")
def fd():
    return fd_derivative


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(float(np.max(np.abs(b))), 1e-12)
    return float(np.max(np.abs(a - b))) / scale
