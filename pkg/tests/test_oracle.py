import math

import numpy as np
import pytest

from specwave.errors import DomainError
from specwave.oracle import relative_hnorm_discrepancy, relative_sup_error, rk4_modes


def test_rk4_fourth_order():
    lam = np.array([3.0])
    t = np.array([0.0, 2.0])
    exact_u = None
    errs = []
    for h in (0.1, 0.05, 0.025):
        U, _ = rk4_modes(lam, 1.0, 0.0, [1.0], [0.0], t, h)
        # closed form written out here, independent of the package propagator
        w = math.sqrt(3 - 0.25)
        exact_u = math.exp(-1.0) * (math.cos(2 * w) + 0.5 / w * math.sin(2 * w))
        errs.append(abs(U[-1, 0] - exact_u))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.8)


def test_rk4_forcing_constant():
    # u'' + u' + u = 1 tends to 1
    U, _ = rk4_modes(np.array([1.0]), 1.0, 0.0, [0.0], [0.0], [0.0, 40.0], 1e-2,
                     forcing=lambda u, v: np.ones_like(u))
    assert U[-1, 0] == pytest.approx(1.0, abs=1e-8)


def test_rk4_times_contract():
    with pytest.raises(DomainError):
        rk4_modes([1.0], 1.0, 0.0, [1.0], [0.0], [0.5, 1.0], 1e-2)
    U, V = rk4_modes([1.0], 1.0, 0.0, [1.0], [0.0], [0.0, 0.0, 1.0], 1e-2)
    assert U[1, 0] == 1.0


def test_discrepancies():
    ref = np.array([[3.0, 4.0], [0.0, 0.0]])
    assert relative_hnorm_discrepancy(ref, ref) == 0.0
    assert relative_hnorm_discrepancy(ref + [[0.0, 5e-3], [0, 0]], ref) == pytest.approx(1e-3)
    assert relative_hnorm_discrepancy(ref + [[0, 0], [0, 1e-9]], ref) == math.inf
    assert relative_hnorm_discrepancy(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0
    assert relative_sup_error(np.array([1.0, 2.0]), np.array([1.0, 2.5])) == pytest.approx(0.2)
