import json

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from specwave import HermiteSpec, build_harmonic_oscillator
from specwave.errors import ShapeError, SingularNormError, ValidationError
from specwave.spectral import (
    SpectralBasis,
    apply_l_power,
    basis_from_dict,
    basis_to_dict,
    forward_transform,
    grid_norm,
    h_norm,
    inverse_transform,
    l_convolution,
    load_basis,
    save_basis,
    sobolev_norm,
    spectral_tail,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_forward_of_eigenfunction_is_unit_vector(hermite16):
    c = forward_transform(hermite16, hermite16.table[3])
    expected = np.zeros(16)
    expected[3] = 1.0
    assert np.max(np.abs(c - expected)) <= 1e-12


def test_forward_inverse_of_zero(hermite16):
    assert np.all(forward_transform(hermite16, np.zeros(hermite16.n_nodes)) == 0)
    assert np.all(inverse_transform(hermite16, np.zeros(16)) == 0)


def test_inverse_of_unit_vector_samples_eigenfunction(hermite16):
    c = np.zeros(16)
    c[5] = 1.0
    assert np.array_equal(inverse_transform(hermite16, c), hermite16.table[5])


def _phi_mp(k, x):
    return mp.hermite(k, x) * mp.exp(-x**2 / 2) / mp.sqrt(2**k * mp.factorial(k) * mp.sqrt(mp.pi))


def test_gaussian_coefficients_match_adaptive_quadrature():
    # 16 modes; the Gaussian is not in the span, so the node count (not the mode count) sets accuracy
    basis = build_harmonic_oscillator(HermiteSpec(max_degree=15, quadrature=32))
    with mp.workdps(30):
        ref = np.array([float(mp.quad(lambda x: mp.exp(-x**2) * _phi_mp(k, x), [-mp.inf, 0, mp.inf]))
                        for k in range(16)])
    c = forward_transform(basis, np.exp(-basis.nodes[:, 0] ** 2))
    assert np.max(np.abs(c - ref)) <= 1e-10
    # closed form for the ground coefficient
    assert c[0] == pytest.approx(np.pi**-0.25 * np.sqrt(2 * np.pi / 3), abs=1e-13)


def test_round_trip_identity(hermite32, rng):
    c = rng.standard_normal((20, 32))
    assert np.max(np.abs(forward_transform(hermite32, inverse_transform(hermite32, c)) - c)) <= 1e-10


def test_h_norm_examples(hermite16):
    c = np.zeros(16)
    c[2] = 1.0
    assert h_norm(hermite16, c) == 1.0
    c[:2] = (3.0, 4.0)
    c[2] = 0
    assert h_norm(hermite16, c) == 5.0


def test_plancherel_cross_check(hermite32, torus1d, rng):
    for basis in (hermite32, torus1d):
        c = rng.standard_normal((10, basis.size))
        gn = grid_norm(basis, inverse_transform(basis, c))
        assert np.max(np.abs(gn - h_norm(basis, c))) <= 1e-10 * np.max(gn)


def test_sobolev_zero_is_h_norm_exactly(hermite32, rng):
    c = rng.standard_normal((5, 32))
    assert np.array_equal(sobolev_norm(hermite32, c, 0), h_norm(hermite32, c))
    assert np.array_equal(sobolev_norm(hermite32, c, 0.0), h_norm(hermite32, c))


def test_sobolev_single_mode(hermite16):
    c = np.zeros(16)
    c[4] = 1.0
    lam = hermite16.eigenvalues[4]
    assert sobolev_norm(hermite16, c, 2) == pytest.approx(lam, rel=1e-15)


def test_sobolev_extended_precision(hermite32, rng):
    c = rng.standard_normal(32) * np.exp(-0.1 * np.arange(32))
    with mp.workdps(50):
        ref = mp.sqrt(mp.fsum(mp.mpf(float(l)) * mp.mpf(float(x)) ** 2
                              for l, x in zip(hermite32.eigenvalues, c)))
    assert abs(sobolev_norm(hermite32, c, 1) - float(ref)) <= 1e-12 * float(ref)


def test_sobolev_negative_on_zero_mode(torus1d):
    c = np.zeros(torus1d.size)
    c[1] = 1.0
    # zero coefficient on the constant mode is fine
    assert sobolev_norm(torus1d, c, -1) == pytest.approx(1.0)
    c[0] = 1.0
    with pytest.raises(SingularNormError):
        sobolev_norm(torus1d, c, -1)


def test_convolution_deltas(hermite16):
    e = np.eye(16)
    assert np.array_equal(l_convolution(hermite16, e[3], e[3]), e[3])
    assert np.all(l_convolution(hermite16, e[3], e[4]) == 0)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 16), elements=finite), st.floats(-10, 10))
def test_convolution_algebra(hermite16, abc, s):
    f, g, h = abc
    conv = lambda x, y: l_convolution(hermite16, x, y)
    assert np.allclose(conv(f, g), conv(g, f), rtol=1e-12, atol=0)
    assert np.allclose(conv(conv(f, g), h), conv(f, conv(g, h)), rtol=1e-12, atol=1e-300)
    assert np.allclose(conv(f + s * g, h), conv(f, h) + s * conv(g, h), rtol=1e-12, atol=1e-9)


def test_apply_l_power(hermite16, torus1d, rng):
    c = rng.standard_normal(16)
    assert np.array_equal(apply_l_power(hermite16, c, 0), c)
    e = np.zeros(16)
    e[6] = 1.0
    assert apply_l_power(hermite16, e, 1)[6] == hermite16.eigenvalues[6]
    twice = apply_l_power(hermite16, apply_l_power(hermite16, c, 0.5), 0.5)
    assert np.allclose(twice, apply_l_power(hermite16, c, 1), rtol=1e-12, atol=0)
    with pytest.raises(SingularNormError):
        apply_l_power(torus1d, np.zeros(torus1d.size), -0.5)


def test_shape_errors(hermite16):
    with pytest.raises(ShapeError):
        forward_transform(hermite16, np.zeros(hermite16.n_nodes + 1))
    with pytest.raises(ShapeError):
        inverse_transform(hermite16, np.zeros(15))
    with pytest.raises(ShapeError):
        l_convolution(hermite16, np.zeros(16), np.zeros(17))


def test_real_bases_stay_real(hermite16, torus1d, rng):
    for basis in (hermite16, torus1d):
        c = forward_transform(basis, rng.standard_normal(basis.n_nodes))
        assert not np.iscomplexobj(c)


def test_complex_basis_transform(rng):
    # complex exponentials on 4 equispaced nodes of the circle
    M = 4
    x = 2 * np.pi * np.arange(M) / M
    ks = [0, 1, -1]
    table = np.array([np.exp(1j * k * x) / np.sqrt(2 * np.pi) for k in ks])
    basis = SpectralBasis(1, [0.0, 1.0, 1.0], table, x, np.full(M, 2 * np.pi / M), name="fourier")
    basis.validate()
    c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    back = forward_transform(basis, inverse_transform(basis, c))
    assert np.max(np.abs(back - c)) <= 1e-12


def test_spectral_tail(hermite16):
    # with as many nodes as modes every grid function lies in the span
    x = hermite16.nodes[:, 0]
    assert spectral_tail(hermite16, np.sign(x) * np.exp(-x**2 / 8)) <= 1e-7
    over = build_harmonic_oscillator(HermiteSpec(max_degree=15, quadrature=64))
    x = over.nodes[:, 0]
    assert spectral_tail(over, over.table[2]) <= 1e-7
    assert spectral_tail(over, np.sign(x) * np.exp(-x**2 / 8)) > 1e-3


def test_json_round_trip(tmp_path, hermite2d):
    path = tmp_path / "b.json"
    save_basis(hermite2d, path)
    back = load_basis(path)
    assert np.array_equal(back.table, hermite2d.table)
    assert np.array_equal(back.nodes, hermite2d.nodes)
    assert np.array_equal(back.eigenvalues, hermite2d.eigenvalues)
    doc = json.loads(path.read_text())
    assert {"dimension", "eigenvalues", "nodes", "weights", "eigenfunction_table"} <= set(doc)


def test_json_rejects_bad_document(hermite16):
    doc = basis_to_dict(hermite16)
    del doc["weights"]
    with pytest.raises(ValidationError):
        basis_from_dict(doc)


def test_validate_lists_every_issue():
    table = np.eye(3)
    with pytest.raises(ValidationError) as info:
        SpectralBasis(1, [2.0, -1.0, 0.5], table, [0.0, 1.0, 2.0], [1.0, 1.0, 1.0]).validate()
    msg = str(info.value)
    assert "positivity" in msg and "not sorted" in msg


def test_basis_read_only(hermite16):
    with pytest.raises(ValueError):
        hermite16.eigenvalues[0] = 3.0
