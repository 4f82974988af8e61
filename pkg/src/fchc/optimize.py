"""Reduced cost, adjoint gradient, projections and a projected-gradient loop.

Controls are arrays of shape ``(N+1, n_nodes)``. The L2(Q) inner product
uses the right-endpoint time weights of the stepper, so the node ``t_0`` is
invisible to the cost; its gradient entry is carried along but has no effect.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.optimize import brentq

from .cost import CostSpec
from .errors import LineSearchFailure, NoConvergence
from .sensitivity import solve_adjoint
from .state import StateModel, StateTrajectory, _as_control, solve_state

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdmissibleSet:
    """``|u| <= rho1`` pointwise and ``||u||_{H1(0,T;H)} <= rho2``."""

    rho1: float
    rho2: float = np.inf

    def __post_init__(self):
        for name in ("rho1", "rho2"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")

    @property
    def has_ball(self) -> bool:
        return bool(np.isfinite(self.rho2))


@dataclass
class ControlProblem:
    model: StateModel
    y0: np.ndarray
    cost: CostSpec
    admissible: AdmissibleSet

    @property
    def shape(self):
        return (self.model.grid.steps + 1, self.model.n)


def l2q_inner(problem: ControlProblem, a, b) -> float:
    w = problem.model.grid.weights
    return float(np.sum(w * problem.model.domain.inner(a, b)))


def l2q_norm(problem: ControlProblem, a) -> float:
    return float(np.sqrt(max(l2q_inner(problem, a, a), 0.0)))


def h1_time_norm(grid, domain, u) -> float:
    """Node values with right-endpoint weights plus forward difference quotients."""
    u = np.asarray(u, dtype=float)
    values = np.sum(grid.weights * domain.inner(u, u))
    du = np.diff(u, axis=0) / grid.h
    return float(np.sqrt(values + grid.h * np.sum(domain.inner(du, du))))


# -- cost and gradient ----------------------------------------------------
def reduced_cost(problem: ControlProblem, u, state: StateTrajectory | None = None) -> float:
    u = _as_control(problem.model, u)
    state = state or solve_state(problem.model, u, problem.y0)
    return problem.cost.evaluate(problem.model.domain, problem.model.grid, state.y, u)


def reduced_gradient(problem: ControlProblem, u, state: StateTrajectory | None = None, return_adjoint: bool = False):
    """``g^n = q^n + alpha3 u^n``; the L2(Q) Riesz representative of the derivative."""
    u = _as_control(problem.model, u)
    state = state or solve_state(problem.model, u, problem.y0)
    adj = solve_adjoint(problem.model, state, problem.cost)
    g = adj.q + problem.cost.alpha3 * u
    return (g, adj) if return_adjoint else g


# -- projections ----------------------------------------------------------
def project_box(u, rho1: float) -> np.ndarray:
    if not rho1 > 0:
        raise ValueError(f"rho1 must be positive, got {rho1}")
    return np.clip(u, -rho1, rho1)


class _H1Ball:
    """Euclidean projection onto ``{v : ||v||_{H1(0,T;H)} <= rho2}``.

    The time part of the quadratic form is diagonalised once; the Lagrange
    multiplier then solves a monotone scalar equation.
    """

    def __init__(self, grid, domain, rho2):
        steps = grid.steps
        h = grid.h
        diff = (np.eye(steps + 1, k=1) - np.eye(steps + 1))[:-1] / h
        form = np.diag(grid.weights) + h * diff.T @ diff
        self.theta, self.vectors = sla.eigh(form)
        self.theta = np.clip(self.theta, 0.0, None)
        self.cell = domain.cell_volume
        self.rho2 = rho2

    def __call__(self, u):
        c = self.vectors.T @ u
        energy = self.cell * np.sum(c * c, axis=1)

        def excess(nu):
            return float(np.sum(self.theta * energy / (1.0 + nu * self.theta) ** 2) - self.rho2**2)

        if excess(0.0) <= 0.0:
            return u.copy()
        hi = 1.0
        while excess(hi) > 0.0:
            hi *= 4.0
        nu = brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return self.vectors @ (c / (1.0 + nu * self.theta)[:, None])


def project_uad(u, admissible: AdmissibleSet, grid=None, domain=None, tol: float = 1e-12, max_iter: int = 10_000):
    """Projection onto the admissible set.

    With ``rho2`` infinite this is the pointwise clamp. Otherwise Dykstra's
    alternating scheme between box and H1-ball, stopped when successive
    iterates differ by at most ``tol``.
    """
    u = np.asarray(u, dtype=float)
    box = project_box(u, admissible.rho1)
    if not admissible.has_ball:
        return box
    if grid is None or domain is None:
        raise ValueError("the H1 constraint needs the time grid and domain")
    ball = _H1Ball(grid, domain, admissible.rho2)
    x = u.copy()
    p = np.zeros_like(u)
    q = np.zeros_like(u)
    for it in range(max_iter):
        yb = project_box(x + p, admissible.rho1)
        p = x + p - yb
        x_new = ball(yb + q)
        q = yb + q - x_new
        change = np.sqrt(domain.cell_volume * grid.h * np.sum((x_new - x) ** 2))
        x = x_new
        if change <= tol:
            return x
    raise NoConvergence(f"Dykstra projection did not settle in {max_iter} iterations")


# -- optimisation ---------------------------------------------------------
@dataclass
class OptimizeReport:
    costs: list
    control: np.ndarray
    stationarity: float
    step_sizes: list
    iterations: int
    reason: str
    stationarity_history: list = field(default_factory=list)
    fixed_point_residual: float | None = None

    def as_dict(self) -> dict:
        return {
            "costs": [float(c) for c in self.costs],
            "stationarity": float(self.stationarity),
            "step_sizes": [float(s) for s in self.step_sizes],
            "iterations": int(self.iterations),
            "reason": self.reason,
            "stationarity_history": [float(s) for s in self.stationarity_history],
            "fixed_point_residual": self.fixed_point_residual,
        }


def _projector(problem: ControlProblem, tol: float):
    grid, dom = problem.model.grid, problem.model.domain
    return lambda v: project_uad(v, problem.admissible, grid, dom, tol=tol)


def stationarity(problem: ControlProblem, u, g, probe_step: float = 1.0, proj_tol: float = 1e-12) -> float:
    """``||u - P(u - s0 g)||_{L2(Q)}``."""
    proj = _projector(problem, proj_tol)
    return l2q_norm(problem, u - proj(u - probe_step * g))


def optimize(
    problem: ControlProblem,
    u0,
    max_iter: int = 200,
    stat_tol: float = 1e-6,
    armijo_c: float = 1e-4,
    shrink: float = 0.5,
    max_halvings: int = 60,
    proj_tol: float = 1e-12,
) -> OptimizeReport:
    """Projected gradient with Armijo backtracking.

    The trial point is ``P(u - t g / a)`` with ``a = alpha1 + alpha2 + alpha3``
    and ``t = 1, 1/2, ...``; dividing by ``a`` makes the iterates invariant
    under a common rescaling of the weights. A step is accepted when
    ``J(u_t) <= J(u) + c <g, u_t - u>``. Stationarity is measured with the
    unit probe step, ``||u - P(u - g)||``.
    """
    proj = _projector(problem, proj_tol)
    model = problem.model
    scale = problem.cost.weight_scale
    u = proj(_as_control(model, u0))
    state = solve_state(model, u, problem.y0)
    cost = reduced_cost(problem, u, state)
    g, adj = reduced_gradient(problem, u, state, return_adjoint=True)
    costs, steps, stats = [cost], [], []
    reason = "max_iter"
    it = 0
    while True:
        stats.append(stationarity(problem, u, g, 1.0, proj_tol))
        if stats[-1] <= stat_tol:
            reason = "stationary"
            break
        if it == max_iter:
            break
        it += 1
        t = 1.0
        for _ in range(max_halvings + 1):
            trial = proj(u - (t / scale) * g)
            trial_state = solve_state(model, trial, problem.y0)
            trial_cost = reduced_cost(problem, trial, trial_state)
            if trial_cost <= cost + armijo_c * l2q_inner(problem, g, trial - u):
                break
            t *= shrink
        else:
            raise LineSearchFailure(f"Armijo search failed after {max_halvings} halvings at iteration {it}")
        u, state, cost = trial, trial_state, trial_cost
        g, adj = reduced_gradient(problem, u, state, return_adjoint=True)
        costs.append(cost)
        steps.append(t)
        log.debug("iteration %d: cost %.12e step %.3g stationarity %.3e", it, cost, t, stats[-1])
    fixed = None
    if problem.cost.alpha3 > 0:
        fixed = l2q_norm(problem, u + adj.q / problem.cost.alpha3)
    return OptimizeReport(costs, u, stats[-1], steps, it, reason, stats, fixed)


def variational_inequality_residual(
    problem: ControlProblem, u, g, probes: int = 16, rng=None, proj_tol: float = 1e-12
) -> float:
    """Most negative ``<g, v - u>`` over a probe set of admissible ``v``.

    Probes: ``probes`` random admissible controls, the constants ``+-rho1``
    and the pointwise minimiser ``-rho1 sign(g)`` of ``<g, v>`` over the box,
    all projected onto the admissible set.
    """
    rng = np.random.default_rng(rng)
    proj = _projector(problem, proj_tol)
    rho1 = problem.admissible.rho1
    u = np.asarray(u, dtype=float)
    candidates = [np.full_like(u, rho1), np.full_like(u, -rho1), -rho1 * np.sign(g)]
    candidates += [rng.uniform(-rho1, rho1, size=u.shape) for _ in range(probes)]
    values = [l2q_inner(problem, g, proj(v) - u) for v in candidates]
    return float(min(values))
