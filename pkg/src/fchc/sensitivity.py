"""Linearised and adjoint systems along a computed state trajectory.

Two linearised schemes are available:

``plain``
    the exact directional derivative of the state stepper in
    :mod:`fchc.state`. Its algebraic transpose is the discrete adjoint, so
    the duality pairing holds to round-off.
``paper_stabilized``
    the stabilised scheme used in the existence argument for the
    linearised system: an extra ``eta^{n+1}`` term in the first equation and
    a shift by the constant ``C_hat = sup |f''(y)|``.

As in the state solver, all linear algebra happens in the eigen-coordinates
of A with row (or column) scaled step matrices. Results are returned as
grid values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import CostSpec
from .errors import SchemeMismatch
from .spectral import FracOperator
from .state import StateModel, StateTrajectory, lu_checked, lu_solve

PLAIN = "plain"
STABILIZED = "paper_stabilized"


@dataclass
class LinearizedTrajectory:
    xi: np.ndarray
    eta: np.ndarray
    scheme: str
    c_hat: float | None = None


@dataclass
class AdjointTrajectory:
    """Discrete adjoint state.

    ``p[n]``, ``q[n]`` (``n = 1..N``) are the multipliers of the step that
    produces ``y^n``; ``q[n]`` pairs with the control value ``u^n``. Node 0
    continues the backward recursion by one step. The exact terminal pair
    ``p_T + tau q_T = g1`` is stored separately in ``p_terminal``,
    ``q_terminal``. ``p_mean`` is filled only when A has a zero eigenvalue.
    """

    p: np.ndarray
    q: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    p_terminal: np.ndarray
    q_terminal: np.ndarray
    p_mean: np.ndarray | None = None

    @property
    def psi(self) -> np.ndarray:
        """``f''(y)`` at the nodes (convex plus concave part)."""
        return self.psi1 + self.psi2


def _control_array(model: StateModel, k) -> np.ndarray:
    shape = (model.grid.steps + 1, model.n)
    k = np.asarray(k, dtype=float)
    if k.ndim == 0:
        return np.full(shape, float(k))
    if k.shape != shape:
        raise ValueError(f"direction must have shape {shape}, got {k.shape}")
    return k


def observed_c_hat(model: StateModel, state: StateTrajectory) -> float:
    """``sup |f''(y)|`` over the trajectory."""
    return float(np.max(np.abs(model.potential.eval("f", 2, state.y))))


def solve_linearized(model: StateModel, state: StateTrajectory, k, scheme: str = PLAIN) -> LinearizedTrajectory:
    """Response ``(xi, eta)`` of the state to the control direction ``k``."""
    k = _control_array(model, k)
    if scheme == PLAIN:
        return _linearized_plain(model, state, k)
    if scheme == STABILIZED:
        return _linearized_stabilized(model, state, k)
    raise ValueError(f"unknown scheme {scheme!r}")


def _linearized_plain(model, state, k):
    cfg = model.config
    h, tau = cfg.grid.h, cfg.tau
    lam = model.lam
    s = model.row_scale()
    pot = model.potential
    N = cfg.grid.steps
    kc = model.to_coef(k)
    c = np.zeros((N + 1, model.n))
    e = np.zeros((N + 1, model.n))
    for n in range(N):
        d1 = pot.eval("f1", 2, state.y[n + 1])
        D2c = model.multiplier(pot.eval("f2", 2, state.y[n])) @ c[n]
        rhs = s * (1.0 + tau * lam) * c[n] - s * h * lam * (D2c - kc[n + 1])
        c[n + 1] = lu_solve(lu_checked(model.scaled_step_matrix(d1)), rhs)
        e[n + 1] = (
            tau / h * (c[n + 1] - c[n])
            + model.apply_b(c[n + 1])
            + model.multiplier(d1) @ c[n + 1]
            + D2c
            - kc[n + 1]
        )
    return LinearizedTrajectory(model.to_grid(c), model.to_grid(e), PLAIN)


def _linearized_stabilized(model, state, k):
    cfg = model.config
    h, tau = cfg.grid.h, cfg.tau
    lam = model.lam
    m = model.n
    eye = np.eye(m)
    c_hat = observed_c_hat(model, state)
    N = cfg.grid.steps
    kc = model.to_coef(k)
    xi = np.zeros((N + 1, m))
    eta = np.zeros((N + 1, m))
    # first block row (times h):  xi' + h (I + A) eta' = xi + h eta
    # second block row (times h): ((tau + h C) I + h B + h P) xi' - h eta' = (tau + h C) xi + h k'
    shift = tau + h * c_hat
    top = np.hstack([eye, h * np.diag(1.0 + lam)])
    b = model.b_dense()
    for n in range(N):
        P = model.multiplier(model.potential.eval("f", 2, state.y[n + 1]))
        bottom = np.hstack([shift * eye + h * b + h * P, -h * eye])
        system = np.vstack([top, bottom])
        rhs = np.concatenate([xi[n] + h * eta[n], shift * xi[n] + h * kc[n + 1]])
        rows = 1.0 / np.max(np.abs(system), axis=1)
        sol = lu_solve(lu_checked(rows[:, None] * system), rows * rhs)
        xi[n + 1], eta[n + 1] = sol[:m], sol[m:]
    return LinearizedTrajectory(model.to_grid(xi), model.to_grid(eta), STABILIZED, c_hat)


def solve_adjoint(model: StateModel, state: StateTrajectory, cost: CostSpec) -> AdjointTrajectory:
    """Transpose of the plain linearised stepper, driven by the cost.

    Backward recursion, ``n = N..0`` (with ``(p + tau q)^{N+1} = g1`` and
    ``q^{N+1} = 0``)::

        (p + tau q)^n - (p + tau q)^{n+1}
            + h [(B^{2 sigma} + f1''(y^n)) q^n + f2''(y^{n-1}) q^{n+1}] = h g2^n,
        q^n = A^{2r} p^n.
    """
    cfg = model.config
    h, tau = cfg.grid.h, cfg.tau
    lam = model.lam
    s = model.row_scale()
    pot = model.potential
    dom = model.domain
    N = cfg.grid.steps
    y = state.y

    psi1 = pot.eval("f1", 2, y)
    psi2 = pot.eval("f2", 2, y)
    g1 = cost.terminal_source(y) * np.ones(model.n)
    g2 = cost.distributed_source(y) * np.ones_like(y)
    g1c, g2c = model.to_coef(g1), model.to_coef(g2)

    pc = np.zeros((N + 1, model.n))
    carry = g1c.copy()  # (I + tau A) p^{n+1} - h f2''(y^n) q^{n+1}, before g2
    for n in range(N, -1, -1):
        # (S J)^T x = rhs with J = I + tau A + h A (B + D1), p = S x
        x = lu_solve(lu_checked(model.scaled_step_matrix(psi1[n])), carry + h * g2c[n], trans=1)
        pc[n] = s * x
        if n > 0:
            qn = lam * s * x
            carry = (1.0 + tau * lam) * s * x - h * (model.multiplier(psi2[n - 1]) @ qn)
    qc = lam * pc
    p, q = model.to_grid(pc), model.to_grid(qc)

    p_tc = g1c / (1.0 + tau * lam)
    p_t, q_t = model.to_grid(p_tc), model.to_grid(lam * p_tc)

    p_mean = None
    if model.basis_a.has_zero_mode:
        # backward quadrature for the mean of p (q has zero mean)
        q_next = np.vstack([q[1:], np.zeros((1, model.n))])
        integrand = (
            dom.inner(g2, 1.0)
            - dom.inner(model.to_grid(model.apply_b(qc)), 1.0)
            - dom.inner(psi1 * q + psi2 * q_next, 1.0)
        )
        p_mean = dom.mean(g1) + h / dom.volume * np.cumsum(integrand[::-1])[::-1]
    return AdjointTrajectory(p, q, psi1, psi2, g1, g2, p_t, q_t, p_mean)


def mean_split_residual(model: StateModel, adj: AdjointTrajectory) -> float:
    """``max_n ||p^n - p_mean^n - A0^{-2r} q^n||`` (zero-eigenvalue case only)."""
    if adj.p_mean is None:
        raise ValueError("mean split only applies when A has a zero eigenvalue")
    dom = model.domain
    inv = FracOperator(model.basis_a, -2 * model.config.r, zero_mean_restricted=True)
    rest = adj.p - adj.p_mean[:, None] - inv(adj.q)
    return float(np.max(dom.norm(rest)))


def adjoint_identity_residual(model: StateModel, lin: LinearizedTrajectory, adj: AdjointTrajectory, k) -> float:
    """Relative defect of ``(g1, xi^N) + int (g2, xi) = int (q, k)``."""
    if lin.scheme != PLAIN:
        raise SchemeMismatch(f"duality pairing holds exactly only for the plain scheme, got {lin.scheme!r}")
    k = _control_array(model, k)
    dom = model.domain
    w = model.grid.weights
    lhs = dom.inner(adj.g1, lin.xi[-1]) + np.sum(w * dom.inner(adj.g2, lin.xi))
    rhs = np.sum(w * dom.inner(adj.q, k))
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-30))


def solve_adjoint_direct(model: StateModel, state: StateTrajectory, cost: CostSpec) -> np.ndarray:
    """Backward Euler discretisation of the continuous adjoint system.

    Independent of the transposition route: ``(I + tau A) p^N = g1`` and, for
    ``n = N-1..0``,
    ``(I + tau A)(p^n - p^{n+1}) + h (B + f''(y^n)) A p^n = h g2^n``.
    Returns ``q = A p`` at all nodes.
    """
    cfg = model.config
    h, tau = cfg.grid.h, cfg.tau
    lam = model.lam
    s = model.row_scale()
    y = state.y
    N = cfg.grid.steps
    psi = model.potential.eval("f", 2, y)
    g1c = model.to_coef(cost.terminal_source(y) * np.ones(model.n))
    g2c = model.to_coef(cost.distributed_source(y) * np.ones_like(y))
    m = 1.0 + tau * lam
    qc = np.zeros((N + 1, model.n))
    p = g1c / m
    qc[N] = lam * p
    b = model.b_dense()
    for n in range(N - 1, -1, -1):
        # column scaled: [M + h (B + Psi) A] S x = rhs, p = S x
        lhs = h * (b + model.multiplier(psi[n])) * (lam * s)[None, :]
        lhs[np.diag_indices_from(lhs)] += m * s
        x = lu_solve(lu_checked(lhs), m * p + h * g2c[n])
        p = s * x
        qc[n] = lam * p
    return model.to_grid(qc)
