import numpy as np
import pytest

from fchc import (
    CostSpec,
    Logarithmic,
    Regular,
    SchemeMismatch,
    adjoint_identity_residual,
    solve_adjoint,
    solve_adjoint_direct,
    solve_linearized,
    solve_state,
)
from fchc.acceptance import desk_model, frechet_remainder
from fchc.potentials import zero_potential
from fchc.sensitivity import STABILIZED, mean_split_residual
from fchc.state import stability_norms


def setup(model, seed=0, amp=0.3):
    rng = np.random.default_rng(seed)
    x = model.domain.nodes[:, 0]
    t = model.grid.nodes[:, None]
    y0 = amp * np.cos(x) + 0.1 * np.sin(2 * x) * (model.basis_a.boundary_condition == "neumann")
    u = amp * np.sin(np.pi * t) * np.cos(2 * x)[None, :]
    state = solve_state(model, u, y0)
    cost = CostSpec(1.0, 0.7, 0.1, y_omega=0.2 * np.cos(x), y_q=rng.standard_normal(state.y.shape) * 0.1)
    return y0, u, state, cost, rng


@pytest.mark.parametrize("scheme", ["plain", STABILIZED])
def test_zero_direction(small_regular, scheme):
    _, _, state, _, _ = setup(small_regular)
    lin = solve_linearized(small_regular, state, 0.0, scheme)
    assert np.all(lin.xi == 0) and np.all(lin.eta == 0)


def test_linear_case_per_mode(small_linear):
    model = small_linear
    _, _, state, _, rng = setup(model)
    k = np.zeros((33, 32))
    k[1:] = model.basis_a.mode(1)
    lin = solve_linearized(model, state, k)
    cfg = model.config
    h, tau = cfg.grid.h, cfg.tau
    lam = model.basis_a.eigenvalues[1]
    la, lb = lam ** (2 * cfg.r), lam ** (2 * cfg.sigma)
    xi = [0.0]
    eta = [None]
    for n in range(32):
        new = ((1 + tau * la) * xi[-1] + h * la) / (1 + tau * la + h * la * lb)
        eta.append(tau * (new - xi[-1]) / h + lb * new - 1.0)
        xi.append(new)
    np.testing.assert_allclose(model.domain.inner(lin.xi, model.basis_a.mode(1)), xi, atol=1e-13)
    np.testing.assert_allclose(model.domain.inner(lin.eta[1:], model.basis_a.mode(1)), eta[1:], atol=1e-11)


@pytest.mark.parametrize("scheme", ["plain", STABILIZED])
def test_linearity(small_regular, scheme):
    _, _, state, _, rng = setup(small_regular)
    k1, k2 = rng.standard_normal((2, 33, 32))
    a, b = 0.7, -1.9
    comb = solve_linearized(small_regular, state, a * k1 + b * k2, scheme)
    l1 = solve_linearized(small_regular, state, k1, scheme)
    l2 = solve_linearized(small_regular, state, k2, scheme)
    scale = np.abs(comb.xi).max()
    assert np.max(np.abs(comb.xi - a * l1.xi - b * l2.xi)) <= 1e-10 * max(scale, 1)
    assert np.max(np.abs(comb.eta - a * l1.eta - b * l2.eta)) <= 1e-10 * max(np.abs(comb.eta).max(), 1)


def test_stabilized_scheme_approaches_plain():
    gaps = []
    for steps in (16, 32, 64):
        model = desk_model(potential=Regular(), n=32, steps=steps)
        _, _, state, _, _ = setup(model)
        t = model.grid.nodes[:, None]
        k = np.cos(np.pi * t) * np.cos(model.domain.nodes[:, 0])[None, :]
        plain = solve_linearized(model, state, k)
        stab = solve_linearized(model, state, k, STABILIZED)
        assert stab.c_hat >= np.max(np.abs(Regular().eval("f", 2, state.y))) - 1e-12
        gaps.append(np.max(model.domain.norm(plain.xi - stab.xi)))
    assert 1.7 <= gaps[0] / gaps[1] <= 2.3
    assert 1.7 <= gaps[1] / gaps[2] <= 2.3


def test_linearized_estimate_bounded(small_regular):
    _, _, state, _, rng = setup(small_regular)
    ratios = []
    for _ in range(20):
        k = rng.standard_normal((33, 32))
        lin = solve_linearized(small_regular, state, k)
        parts = stability_norms(small_regular, lin.eta, lin.xi)
        ratios.append(sum(parts.values()) / np.abs(k).max())
    assert max(ratios) <= 1.0


def test_frechet_order(small_regular):
    y0, u, state, _, rng = setup(small_regular)
    k = rng.standard_normal((33, 32))
    lin = solve_linearized(small_regular, state, k)
    r1 = frechet_remainder(small_regular, y0, u, k, 1e-2, state, lin)
    r2 = frechet_remainder(small_regular, y0, u, k, 5e-3, state, lin)
    assert r1 / r2 == pytest.approx(4.0, abs=0.5)


@pytest.mark.parametrize(
    "bc_a,bc_b,pot,sigma",
    [
        ("neumann", "neumann", Regular(), 0.8),
        ("dirichlet", "dirichlet", Regular(), 0.8),
        ("neumann", "dirichlet", Regular(), 0.55),
        ("dirichlet", "neumann", Regular(), 0.7),
        ("neumann", "neumann", Logarithmic(1.5), 0.5),
    ],
)
def test_duality_identity(bc_a, bc_b, pot, sigma):
    model = desk_model(bc_a, bc_b, pot, n=32, steps=32, sigma=sigma, r=0.6, tau=0.7)
    _, _, state, cost, rng = setup(model)
    adj = solve_adjoint(model, state, cost)
    k = rng.standard_normal((33, 32))
    lin = solve_linearized(model, state, k)
    assert adjoint_identity_residual(model, lin, adj, k) <= 1e-10
    assert np.max(model.domain.norm(adj.p_terminal + model.config.tau * adj.q_terminal - adj.g1)) <= 1e-12
    if model.mass_conserving:
        assert np.max(np.abs(model.domain.mean(adj.q))) <= 1e-12
        assert mean_split_residual(model, adj) <= 1e-10
    else:
        assert adj.p_mean is None


def test_stabilized_duality_guarded(small_regular):
    _, _, state, cost, rng = setup(small_regular)
    adj = solve_adjoint(small_regular, state, cost)
    lin = solve_linearized(small_regular, state, 1.0, STABILIZED)
    with pytest.raises(SchemeMismatch):
        adjoint_identity_residual(small_regular, lin, adj, 1.0)


def test_zero_tracking_weights(small_regular):
    _, _, state, _, rng = setup(small_regular)
    adj = solve_adjoint(small_regular, state, CostSpec(0.0, 0.0, 1.0))
    assert np.all(adj.p == 0) and np.all(adj.q == 0)
    k = rng.standard_normal((33, 32))
    lin = solve_linearized(small_regular, state, k)
    assert adjoint_identity_residual(small_regular, lin, adj, k) == 0.0


def test_adjoint_single_mode_closed_form(small_linear):
    model = small_linear
    state = solve_state(model, 0.0, 0.0)
    e2 = model.basis_a.mode(1)
    adj = solve_adjoint(model, state, CostSpec(1.0, 0.0, 0.0, y_omega=-e2))
    cfg = model.config
    h, tau = cfg.grid.h, cfg.tau
    lam = model.basis_a.eigenvalues[1]
    la, lb = lam ** (2 * cfg.r), lam ** (2 * cfg.sigma)
    den = 1 + tau * la + h * la * lb
    a, b = (1 + tau * la) / den, h * la / den
    # (g1, xi^N) = sum_m a^(N-m) b k^m  and  int (q, k) = sum_m h (q^m, k^m)
    m = np.arange(1, 33)
    expected = a ** (32 - m) * b / h
    np.testing.assert_allclose(model.domain.inner(adj.q[1:], e2), expected, rtol=1e-12)
    rest = adj.q[1:] - np.outer(expected, e2)
    assert np.max(np.abs(rest)) <= 1e-12


def test_direct_adjoint_converges():
    errs = []
    for steps in (32, 64, 128):
        model = desk_model(potential=Regular(), n=32, steps=steps)
        _, _, state, cost, _ = setup(model)
        cost = CostSpec(1.0, 1.0, 0.1, y_omega=cost.y_omega, y_q=0.1)
        q = solve_adjoint(model, state, cost).q
        qd = solve_adjoint_direct(model, state, cost)
        errs.append(np.sqrt(np.sum(model.grid.weights * model.domain.inner(q - qd, q - qd))))
    assert errs[0] > errs[1] > errs[2]
    assert np.log2(errs[1] / errs[2]) >= 0.7
