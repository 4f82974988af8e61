import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fchc import TimeField, TimeGrid, discrete_gronwall_bound, interp_eval, interp_identity_residuals
from fchc.timegrid import difference_energy


def unit_field():
    return TimeField(TimeGrid(1.0, 1), np.array([0.0, 1.0]))


def test_grid_nodes_and_weights():
    grid = TimeGrid(2.0, 4)
    np.testing.assert_allclose(grid.nodes, [0, 0.5, 1, 1.5, 2])
    np.testing.assert_allclose(grid.weights, [0, 0.5, 0.5, 0.5, 0.5])
    with pytest.raises(ValueError):
        TimeGrid(0.0, 3)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


@pytest.mark.parametrize("kind,value", [("linear", 0.5), ("forward_constant", 1.0), ("backward_constant", 0.0)])
def test_interp_examples(kind, value):
    assert interp_eval(unit_field(), 0.5, kind) == pytest.approx(value)


def test_interp_on_many_steps():
    grid = TimeGrid(1.0, 4)
    tf = TimeField(grid, np.array([0.0, 1.0, 4.0, 9.0, 16.0]))
    assert interp_eval(tf, 0.3, "forward_constant") == 4.0
    assert interp_eval(tf, 0.3, "backward_constant") == 1.0
    assert interp_eval(tf, 0.3, "linear") == pytest.approx(1.0 + 3.0 * 0.2)
    assert interp_eval(tf, 0.25, "forward_constant") == 1.0
    assert interp_eval(tf, 0.0, "linear") == 0.0
    assert interp_eval(tf, 1.0, "linear") == 16.0
    with pytest.raises(ValueError):
        interp_eval(tf, 1.5)
    with pytest.raises(ValueError):
        interp_eval(tf, -0.1)


def test_identities_zero_field():
    rep = interp_identity_residuals(TimeField(TimeGrid(1.0, 5), np.zeros(6)))
    assert rep["max_residual"] == 0.0
    assert rep["inequalities_hold"]


def test_identity_hand_example():
    rep = interp_identity_residuals(unit_field())
    assert rep["equalities"]["upper_minus_hat_linf"] == 0.0
    assert rep["equalities"]["upper_minus_hat_linf_dt"] == 0.0


def _quadrature_oracle(z, h, samples=2001):
    """Brute-force L2 norms by fine composite Simpson sampling of each interval."""
    s = np.linspace(0.0, 1.0, samples)
    wts = np.ones(samples)
    wts[1:-1:2], wts[2:-1:2] = 4.0, 2.0
    wts *= 1.0 / (3 * (samples - 1))
    hat_minus_upper = 0.0
    for a, b in zip(z[:-1], z[1:]):
        hat = a + s * (b - a)
        hat_minus_upper += h * np.sum(wts * (hat - b) ** 2)
    return hat_minus_upper


def test_random_scalar_sequence():
    rng = np.random.default_rng(7)
    z = rng.standard_normal(8)
    grid = TimeGrid(1.3, 7)
    rep = interp_identity_residuals(TimeField(grid, z))
    assert rep["max_residual"] <= 1e-12
    assert rep["inequalities_hold"]
    oracle = _quadrature_oracle(z, grid.h)
    assert oracle == pytest.approx(grid.h / 3 * np.sum(np.diff(z) ** 2), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 20))
def test_identities_random_fields(seed, steps):
    rng = np.random.default_rng(seed)
    tf = TimeField(TimeGrid(rng.uniform(0.1, 3.0), steps), rng.standard_normal((steps + 1, 5)))
    rep = interp_identity_residuals(tf)
    assert rep["max_residual"] <= 1e-12
    assert rep["inequalities_hold"]


@pytest.mark.parametrize("coeffs", [(0.0, 1.0), (1.0, -2.0, 3.0), (0.5, 0.0, 0.0, 1.0)])
def test_difference_energy_below_derivative_norm(coeffs):
    poly = np.polynomial.Polynomial(coeffs)
    grid = TimeGrid(1.0, 10)
    tf = TimeField(grid, poly(grid.nodes))
    d = poly.deriv()
    exact = (d * d).integ()(1.0) - (d * d).integ()(0.0)
    assert difference_energy(tf) <= exact + 1e-12


def test_gronwall_examples():
    np.testing.assert_allclose(discrete_gronwall_bound(2.0, np.zeros(4)), [2.0] * 5)
    np.testing.assert_allclose(discrete_gronwall_bound(1.0, [np.log(2)] * 2), [1, 2, 4])
    with pytest.raises(ValueError):
        discrete_gronwall_bound(-1.0, [0.1])
    with pytest.raises(ValueError):
        discrete_gronwall_bound(1.0, [0.1, -0.1])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), length=st.integers(1, 40))
def test_gronwall_dominates_recursion(seed, length):
    rng = np.random.default_rng(seed)
    M = rng.uniform(0, 5)
    b = rng.uniform(0, 0.5, length)
    a = [M]
    for k in range(1, length + 1):
        a.append(M + np.sum(b[:k] * np.array(a[:k])))
    bound = discrete_gronwall_bound(M, b)
    assert np.all(np.array(a) <= bound * (1 + 1e-12))
