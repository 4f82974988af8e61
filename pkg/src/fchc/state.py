"""Implicit solver for the viscous fractional Cahn-Hilliard state system.

Each time step solves

    (y' - y)/h + A^{2r} mu' = 0
    tau (y' - y)/h + B^{2 sigma} y' + f1'(y') + f2'(y) = mu' + u'

(backward Euler, convex part implicit, concave part explicit). ``mu'`` is
eliminated through the second equation, leaving a nonlinear system for
``y'`` that is solved by Newton's method. The unknowns are the coefficients
of ``y'`` in the eigenbasis of A; the potential is evaluated at the
collocation nodes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import DomainViolation, IdenticalControls, NewtonDivergence, SingularStep
from .potentials import GBReport, PotentialSpec, check_admissible
from .spectral import SpectralBasis, norm_Ar
from .timegrid import TimeGrid

log = logging.getLogger(__name__)

#: reciprocal condition number below which a step matrix counts as singular
RCOND_MIN = 1e-14


@dataclass(frozen=True)
class StateConfig:
    """Parameters of the state system and of its time discretisation.

    ``newton_tol`` bounds the H-norm of the final Newton correction
    (relative to ``max(1, ||y||)``), and ``linear_tol`` the norm of the
    step-scaled residual ``y' - y + h A^{2r} mu'`` below which no correction
    is attempted at all.
    """

    tau: float
    r: float
    sigma: float
    grid: TimeGrid
    newton_tol: float = 1e-11
    newton_max_iter: int = 50
    linear_tol: float = 1e-12
    gb_interval: tuple | None = None

    def __post_init__(self):
        for name in ("tau", "r", "sigma"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive real, got {value}")


def lu_checked(mat):
    """LU factorisation that raises :class:`SingularStep` when ill-conditioned."""
    lu, piv = sla.lu_factor(mat, check_finite=False)
    anorm = np.linalg.norm(mat, 1)
    rcond, info = sla.lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or not rcond > RCOND_MIN:
        raise SingularStep(f"step matrix is numerically singular (rcond={rcond:.2e})")
    return lu, piv


def lu_solve(factor, rhs, trans=0):
    return sla.lu_solve(factor, rhs, trans=trans, check_finite=False)


class StateModel:
    """Operators, potential and time grid of one state system.

    The bases for A and B must live on the same domain and be complete
    (one mode per grid node). Linear algebra is carried out in the
    eigen-coordinates of A, where ``A^{2r}`` is diagonal; grid values are
    only used to evaluate the potential pointwise. Step matrices are
    row-scaled by ``1 / (1 + tau lam + h lam b)`` (``lam`` the eigenvalues of
    ``A^{2r}``, ``b`` the diagonal of ``B^{2 sigma}`` in the same coordinates),
    which keeps them well conditioned however stiff the operators are.
    """

    def __init__(self, basis_a: SpectralBasis, basis_b: SpectralBasis, potential: PotentialSpec, config: StateConfig):
        if basis_a.domain != basis_b.domain:
            raise ValueError("A and B must be built on the same domain")
        for basis in (basis_a, basis_b):
            if not basis.is_complete:
                raise ValueError(
                    f"basis {basis.tag} has {basis.mode_count} modes on {basis.domain.n_nodes} nodes; "
                    "the state solver needs complete bases"
                )
        self.basis_a = basis_a
        self.basis_b = basis_b
        self.potential = potential
        self.config = config

    def with_config(self, **changes) -> "StateModel":
        model = StateModel(self.basis_a, self.basis_b, self.potential, replace(self.config, **changes))
        if model.config.r == self.config.r and model.config.sigma == self.config.sigma:
            for name in ("A", "B", "lam", "b_hat", "b_is_diagonal"):
                if name in self.__dict__:
                    model.__dict__[name] = self.__dict__[name]
        return model

    @property
    def domain(self):
        return self.basis_a.domain

    @property
    def grid(self) -> TimeGrid:
        return self.config.grid

    @property
    def n(self) -> int:
        return self.domain.n_nodes

    @property
    def mass_conserving(self) -> bool:
        return self.basis_a.has_zero_mode

    # -- operators -------------------------------------------------------
    @cached_property
    def A(self) -> np.ndarray:
        """Grid matrix of ``A^{2r}``."""
        return self.basis_a.power(2 * self.config.r).matrix

    @cached_property
    def B(self) -> np.ndarray:
        """Grid matrix of ``B^{2 sigma}``."""
        return self.basis_b.power(2 * self.config.sigma).matrix

    @cached_property
    def lam(self) -> np.ndarray:
        """Eigenvalues of ``A^{2r}``."""
        return self.basis_a.power(2 * self.config.r).multipliers

    @cached_property
    def b_is_diagonal(self) -> bool:
        return np.array_equal(self.basis_a.synthesis, self.basis_b.synthesis)

    @cached_property
    def b_hat(self) -> np.ndarray:
        """``B^{2 sigma}`` in A-coordinates: a vector if diagonal, else a matrix."""
        mult = self.basis_b.power(2 * self.config.sigma).multipliers
        if self.b_is_diagonal:
            return mult.copy()
        T = self.to_coef(self.basis_b.synthesis.T).T  # T[i, j] = (e_i, e'_j)
        mat = (T * mult) @ T.T
        return 0.5 * (mat + mat.T)

    def to_coef(self, v) -> np.ndarray:
        return self.basis_a.analyze(v)

    def to_grid(self, c) -> np.ndarray:
        return self.basis_a.synthesize(c)

    def apply_b(self, c) -> np.ndarray:
        """``B^{2 sigma}`` acting on A-coefficients (broadcasts over leading axes)."""
        if self.b_is_diagonal:
            return self.b_hat * c
        return c @ self.b_hat

    def b_dense(self) -> np.ndarray:
        return np.diag(self.b_hat) if self.b_is_diagonal else self.b_hat

    def multiplier(self, d) -> np.ndarray:
        """Pointwise multiplication by grid values ``d`` in A-coordinates."""
        E = self.basis_a.synthesis
        mat = (E.T * (self.domain.cell_volume * d)) @ E
        return 0.5 * (mat + mat.T)

    def row_scale(self) -> np.ndarray:
        cfg = self.config
        h = cfg.grid.h
        b_diag = self.b_hat if self.b_is_diagonal else np.diag(self.b_hat)
        return 1.0 / (1.0 + cfg.tau * self.lam + h * self.lam * b_diag)

    def scaled_step_matrix(self, d1) -> np.ndarray:
        """``S (I + tau Lam + h Lam (B + D1))`` with row scaling ``S``."""
        cfg = self.config
        h = cfg.grid.h
        s = self.row_scale()
        mat = (s * h * self.lam)[:, None] * (self.b_dense() + self.multiplier(d1))
        mat[np.diag_indices_from(mat)] += s * (1.0 + cfg.tau * self.lam)
        return mat

    # -- single step -----------------------------------------------------
    def chemical_potential(self, a_new, a_old, u_new):
        """A-coefficients of ``mu'`` given A-coefficients of ``y'`` and ``y``."""
        cfg = self.config
        h = cfg.grid.h
        pot = self.potential
        y_new, y_old = self.to_grid(a_new), self.to_grid(a_old)
        nonlinear = self.to_coef(pot.eval("f1", 1, y_new, check=False) + pot.eval("f2", 1, y_old) - u_new)
        return cfg.tau / h * (a_new - a_old) + self.apply_b(a_new) + nonlinear

    def step(self, a_old, u_new):
        """Advance one step in A-coefficients.

        Returns ``(a_new, mu_coef, newton_iterations)``. Newton stops once the
        correction has H-norm below ``newton_tol * max(1, ||y||)`` or the
        residual ``a' - a + h Lam mu'`` falls below ``linear_tol``. Corrections
        are halved while they leave the open domain of ``f1``; the converged
        state must then lie in the potential's safe range, otherwise
        :class:`DomainViolation` is raised.
        """
        cfg = self.config
        h = cfg.grid.h
        pot = self.potential
        s = self.row_scale()

        def residual(a):
            mu = self.chemical_potential(a, a_old, u_new)
            return a - a_old + h * self.lam * mu, mu

        def finish(a, mu, iterations):
            pot.check_domain(self.to_grid(a))
            return a, mu, iterations

        a = a_old.copy()
        res, mu = residual(a)
        if np.linalg.norm(res) <= cfg.linear_tol:
            return finish(a, mu, 0)
        size = np.inf
        for iterations in range(1, cfg.newton_max_iter + 1):
            jac = self.scaled_step_matrix(pot.eval("f1", 2, self.to_grid(a), check=False))
            delta = lu_solve(lu_checked(jac), s * res)
            size = np.linalg.norm(delta)
            t = 1.0
            trial = a - delta
            while not pot.in_open_domain(self.to_grid(trial)):
                t *= 0.5
                if t < 1e-12:
                    y = self.to_grid(trial)
                    worst = int(np.argmax(np.abs(y)))
                    raise DomainViolation(
                        y[worst], location=worst, message="Newton iterate cannot stay inside the potential domain"
                    )
                trial = a - t * delta
            a = trial
            res, mu = residual(a)
            if t == 1.0 and size <= cfg.newton_tol * max(1.0, np.linalg.norm(a)):
                return finish(a, mu, iterations)
            if np.linalg.norm(res) <= cfg.linear_tol:
                return finish(a, mu, iterations)
        raise NewtonDivergence(
            f"Newton did not converge in {cfg.newton_max_iter} iterations "
            f"(last correction {size:.3e}, residual {np.linalg.norm(res):.3e})"
        )


@dataclass
class StateTrajectory:
    """Discrete solution ``(y^n, mu^n)``, ``n = 0..N``.

    ``mu[0]`` is not produced by the scheme; it is set to
    ``B^{2 sigma} y0 + f'(y0) - u^0``.
    """

    grid: TimeGrid
    y: np.ndarray
    mu: np.ndarray
    newton_iterations: np.ndarray
    gb: GBReport
    u: np.ndarray = field(repr=False, default=None)


def _as_control(model: StateModel, u) -> np.ndarray:
    shape = (model.grid.steps + 1, model.n)
    if u is None:
        return np.zeros(shape)
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        return np.full(shape, float(u))
    if u.shape != shape:
        raise ValueError(f"control must have shape {shape}, got {u.shape}")
    return u


def solve_state(model: StateModel, u, y0) -> StateTrajectory:
    """March the state system over the time grid for control ``u``.

    ``u`` has shape ``(N+1, n_nodes)`` (or is a scalar); ``u[n+1]`` drives the
    step from ``t_n`` to ``t_{n+1}``.
    """
    pot = model.potential
    grid = model.grid
    u = _as_control(model, u)
    y0 = np.asarray(y0, dtype=float) * np.ones(model.n)
    pot.check_domain(y0)
    N = grid.steps
    a = np.empty((N + 1, model.n))
    mu = np.empty((N + 1, model.n))
    counts = np.zeros(N, dtype=int)
    a[0] = model.to_coef(y0)
    mu[0] = model.apply_b(a[0]) + model.to_coef(pot.eval("f", 1, y0) - u[0])
    for n in range(N):
        try:
            a[n + 1], mu[n + 1], counts[n] = model.step(a[n], u[n + 1])
        except DomainViolation as exc:
            raise DomainViolation(exc.value, location=(n + 1, exc.location)) from exc
    y = model.to_grid(a)
    y[0] = y0
    gb = check_admissible(pot, y, model.config.gb_interval)
    log.debug("state solve: %d steps, max Newton iterations %d", N, counts.max(initial=0))
    return StateTrajectory(grid, y, model.to_grid(mu), counts, gb, u)


def energy(model: StateModel, y) -> float:
    """``0.5 ||B^sigma y||^2 + int f(y)`` (quadrature)."""
    basis = model.basis_b
    y = np.asarray(y, dtype=float)
    mult = basis.power(model.config.sigma).multipliers
    c = basis.analyze(y)
    bulk = model.domain.inner(model.potential.eval("f", 0, y), 1.0)
    return 0.5 * np.sum((mult * c) ** 2, axis=-1) + bulk


def dissipation_report(model: StateModel, traj: StateTrajectory) -> np.ndarray:
    """Energy increments ``E(y^{n+1}) - E(y^n)``."""
    return np.diff(energy(model, traj.y))


def mass_drift(model: StateModel, traj: StateTrajectory) -> float:
    m = model.domain.mean(traj.y)
    return float(np.max(np.abs(m - m[0])))


# -- norms used by the stability probe ------------------------------------
def l2_time(model: StateModel, z) -> float:
    """Right-endpoint ``L2(0,T;H)`` norm of a time field."""
    w = model.grid.weights
    return float(np.sqrt(np.sum(w * model.domain.inner(z, z))))


def h1_time(model: StateModel, z) -> float:
    """Discrete ``H1(0,T;H)`` norm: node values plus difference quotients."""
    h = model.grid.h
    dz = np.diff(z, axis=0) / h
    return float(np.sqrt(l2_time(model, z) ** 2 + h * np.sum(model.domain.inner(dz, dz))))


def stability_norms(model: StateModel, dmu, dy) -> dict:
    w = model.grid.weights
    cfg = model.config
    mu_part = float(np.sqrt(np.sum(w * norm_Ar(model.basis_a, 2 * cfg.r, dmu) ** 2)))
    y_h1 = h1_time(model, dy)
    y_linf = float(np.max(norm_Ar(model.basis_b, cfg.sigma, dy, graph=True)))
    return {"mu_L2_VA2r": mu_part, "y_H1_H": y_h1, "y_Linf_VBs": y_linf}


def stability_probe(model: StateModel, y0, u1, u2, traj1=None, traj2=None) -> dict:
    """Ratio of state differences to control differences over ``[0, T]``.

    Numerator: ``||mu1-mu2||_{L2(V_A^{2r})} + ||y1-y2||_{H1(H)} +
    ||y1-y2||_{Linf(V_B^sigma)}``; denominator ``||u1-u2||_{L2(H)}``.
    """
    u1 = _as_control(model, u1)
    u2 = _as_control(model, u2)
    den = l2_time(model, u1 - u2)
    scale = l2_time(model, u1) + l2_time(model, u2)
    if den == 0.0 or den <= 1e-14 * scale:
        raise IdenticalControls("controls coincide; the stability ratio is undefined")
    traj1 = traj1 or solve_state(model, u1, y0)
    traj2 = traj2 or solve_state(model, u2, y0)
    parts = stability_norms(model, traj1.mu - traj2.mu, traj1.y - traj2.y)
    num = parts["mu_L2_VA2r"] + parts["y_H1_H"] + parts["y_Linf_VBs"]
    return {"ratio": num / den, "numerator": num, "denominator": den, **parts}
