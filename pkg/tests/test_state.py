import numpy as np
import pytest

from fchc import (
    DomainSpec,
    DomainViolation,
    IdenticalControls,
    Logarithmic,
    Regular,
    StateConfig,
    StateModel,
    TimeGrid,
    build_basis,
    dissipation_report,
    energy,
    solve_state,
    stability_probe,
)
from fchc.acceptance import desk_model
from fchc.potentials import zero_potential
from fchc.spectral import random_smooth
from fchc.state import mass_drift


def per_mode(model, c0, uc):
    """Scalar implicit Euler per shared mode for f = 0: returns (c, mu) coefficient histories."""
    cfg = model.config
    h, tau = cfg.grid.h, cfg.tau
    lam = model.basis_a.eigenvalues
    la = np.where(lam > 0, lam, 0.0) ** (2 * cfg.r)
    lb = np.where(lam > 0, lam, 0.0) ** (2 * cfg.sigma)
    cs, mus = [c0], [lb * c0 - uc[0]]
    c = c0
    for n in range(cfg.grid.steps):
        new = ((1 + tau * la) * c + h * la * uc[n + 1]) / (1 + tau * la + h * la * lb)
        mus.append(tau * (new - c) / h + lb * new - uc[n + 1])
        cs.append(new)
        c = new
    return np.array(cs), np.array(mus)


def test_constant_steady_state(small_regular):
    traj = solve_state(small_regular, 0.0, 0.3)
    assert np.max(np.abs(traj.y - 0.3)) <= 1e-12
    assert np.max(np.abs(traj.mu - (0.3**3 - 0.3))) <= 1e-9
    assert np.all(traj.newton_iterations <= 2)


@pytest.mark.parametrize("m", [-1.0, 0.0, 1.0])
def test_wells_are_fixed_points(small_regular, m):
    traj = solve_state(small_regular, 0.0, m)
    assert np.max(np.abs(traj.y - m)) <= 1e-11
    assert np.max(np.abs(dissipation_report(small_regular, traj))) <= 1e-12


@pytest.mark.parametrize("sigma,r,tau", [(0.8, 0.5, 1.0), (0.55, 0.7, 0.3)])
def test_single_mode_decay_factor(sigma, r, tau):
    model = desk_model(potential=zero_potential(), n=32, steps=16, sigma=sigma, r=r, tau=tau)
    e2 = model.basis_a.mode(1)
    traj = solve_state(model, 0.0, e2)
    lam = model.basis_a.eigenvalues[1]
    h = model.grid.h
    factor = 1.0 / (1 + h * lam ** (2 * r) * lam ** (2 * sigma) / (1 + tau * lam ** (2 * r)))
    amps = model.domain.inner(traj.y, e2)
    np.testing.assert_allclose(amps, factor ** np.arange(17), rtol=1e-12)


@pytest.mark.parametrize("bc", ["neumann", "dirichlet"])
def test_linear_regime_matches_per_mode_recursion(bc, rng):
    model = desk_model(bc, bc, zero_potential(), n=32, steps=32)
    y0 = random_smooth(model.basis_a, rng, (), 1.0)
    u = rng.standard_normal((33, 32)) * 0.5
    traj = solve_state(model, u, y0)
    c, mu = per_mode(model, model.basis_a.analyze(y0), model.basis_a.analyze(u))
    assert np.max(model.domain.norm(traj.y - model.basis_a.synthesize(c))) <= 1e-10
    assert np.max(model.domain.norm(traj.mu[1:] - model.basis_a.synthesize(mu)[1:])) <= 1e-9


def test_mass_conservation_nonlinear(small_regular, rng):
    y0 = random_smooth(small_regular.basis_a, rng, (), 0.8) + 0.2
    u = rng.standard_normal((33, 32))
    traj = solve_state(small_regular, u, y0)
    assert mass_drift(small_regular, traj) <= 1e-10


def test_energy_examples():
    model = desk_model("neumann", "neumann", Regular(), n=16, steps=4)
    vol = model.domain.volume
    assert energy(model, np.full(16, 0.5)) == pytest.approx(vol * 0.25 * (0.25 - 1) ** 2, rel=1e-13)
    assert energy(model, np.ones(16)) == pytest.approx(0.0, abs=1e-14)
    lin = desk_model("neumann", "neumann", zero_potential(), n=16, steps=4, sigma=0.6)
    lam = lin.basis_b.eigenvalues[1]
    assert energy(lin, 1.7 * lin.basis_b.mode(1)) == pytest.approx(0.5 * 1.7**2 * lam**1.2, rel=1e-12)


@pytest.mark.parametrize("bc_b,sigma", [("neumann", 0.8), ("dirichlet", 0.55)])
def test_energy_dissipation_without_control(bc_b, sigma, rng):
    model = desk_model("neumann", bc_b, Regular(), n=32, steps=32, sigma=sigma)
    for _ in range(3):
        y0 = rng.uniform(-0.8, 0.8, 32)
        traj = solve_state(model, 0.0, y0)
        assert np.max(dissipation_report(model, traj)) <= 1e-10


def test_linear_increments_match_per_mode_energy(rng):
    model = desk_model(potential=zero_potential(), n=32, steps=32)
    y0 = random_smooth(model.basis_a, rng, (), 1.0)
    traj = solve_state(model, 0.0, y0)
    c, _ = per_mode(model, model.basis_a.analyze(y0), np.zeros((33, 32)))
    lb = np.where(model.basis_a.eigenvalues > 0, model.basis_a.eigenvalues, 0.0) ** (2 * model.config.sigma)
    exact = 0.5 * np.sum(lb * c**2, axis=1)
    np.testing.assert_allclose(dissipation_report(model, traj), np.diff(exact), atol=1e-9)


def test_two_dimensional_run(rng):
    dom = DomainSpec((2.0, 3.0), (8, 8))
    basis = build_basis(dom, "neumann")
    model = StateModel(basis, basis, Regular(), StateConfig(1.0, 0.5, 0.8, TimeGrid(0.5, 16)))
    y0 = random_smooth(basis, rng, (), 0.6)
    traj = solve_state(model, 0.0, y0)
    assert mass_drift(model, traj) <= 1e-10
    assert np.max(dissipation_report(model, traj)) <= 1e-10


def test_log_excursion_aborts():
    model = desk_model("neumann", "neumann", Logarithmic(1.5, 0.3), n=32, steps=32, sigma=0.5)
    x = model.domain.nodes[:, 0]
    u = 20.0 * np.ones((33, 1)) * np.cos(x)[None, :]
    with pytest.raises(DomainViolation) as info:
        solve_state(model, u, 0.2 * np.cos(x))
    assert abs(info.value.value) > 0.7
    step, _ = info.value.location
    assert 1 <= step <= 32


def test_log_initial_datum_checked():
    model = desk_model("neumann", "neumann", Logarithmic(1.5), n=16, steps=4, sigma=0.5)
    with pytest.raises(DomainViolation):
        solve_state(model, 0.0, np.full(16, 0.99999))


def test_incomplete_basis_rejected():
    dom = DomainSpec((1.0,), (16,))
    full = build_basis(dom, "neumann")
    part = build_basis(dom, "neumann", mode_count=8)
    with pytest.raises(ValueError):
        StateModel(part, full, Regular(), StateConfig(1.0, 0.5, 0.8, TimeGrid(1.0, 4)))


def test_config_requires_positive_parameters():
    with pytest.raises(ValueError):
        StateConfig(0.0, 0.5, 0.8, TimeGrid(1.0, 4))


def test_control_shape_checked(small_regular):
    with pytest.raises(ValueError):
        solve_state(small_regular, np.zeros((3, 32)), 0.1)


def test_stability_identical_controls(small_regular):
    u = np.ones((33, 32))
    with pytest.raises(IdenticalControls):
        stability_probe(small_regular, 0.1, u, u + 0.0)


def test_stability_linear_transfer(rng):
    model = desk_model(potential=zero_potential(), n=32, steps=32)
    y0 = random_smooth(model.basis_a, rng, (), 0.5)
    u1 = rng.standard_normal((33, 32)) * 0.2
    du = np.zeros((33, 32))
    du[1:] = 1e-3 * model.basis_a.mode(1)
    rep = stability_probe(model, y0, u1, u1 + du)

    c, mu = per_mode(model, np.zeros(32), model.basis_a.analyze(-du))
    lam = model.basis_a.eigenvalues
    cfg, grid = model.config, model.grid
    w, h = grid.weights, grid.h
    la = np.where(lam > 0, lam, 0.0) ** (2 * cfg.r)
    mu_norm2 = np.sum(la[None, :] ** 2 * mu**2, axis=1) + mu[:, 0] ** 2
    mu_part = np.sqrt(np.sum(w * mu_norm2))
    dc = np.diff(c, axis=0) / h
    y_h1 = np.sqrt(np.sum(w * np.sum(c**2, axis=1)) + h * np.sum(dc**2))
    ls = np.where(lam > 0, lam, 0.0) ** cfg.sigma
    y_linf = np.max(np.sqrt(np.sum(c**2 + (ls * c) ** 2, axis=1)))
    den = np.sqrt(np.sum(w * np.sum(model.basis_a.analyze(du) ** 2, axis=1)))
    assert rep["ratio"] == pytest.approx((mu_part + y_h1 + y_linf) / den, rel=1e-6)
