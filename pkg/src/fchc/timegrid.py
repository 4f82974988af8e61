"""Uniform time grids, piecewise interpolants and the discrete Gronwall bound."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# two-point Gauss-Legendre rule on [0, 1]; exact for quadratics
_GAUSS_S = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)
_GAUSS_W = np.array([0.5, 0.5])


@dataclass(frozen=True)
class TimeGrid:
    """Nodes ``t_n = n h`` on ``[0, T]`` with ``h = T / N``."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"step count must be a positive integer, got {self.steps}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def h(self) -> float:
        return self.horizon / self.steps

    @cached_property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.steps + 1) * self.h
        t[-1] = self.horizon
        return t

    @cached_property
    def weights(self) -> np.ndarray:
        """Right-endpoint quadrature weights (node 0 carries no weight)."""
        w = np.full(self.steps + 1, self.h)
        w[0] = 0.0
        return w

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * factor)


@dataclass(frozen=True, eq=False)
class TimeField:
    """Values ``z^0, ..., z^N`` (scalars or grid fields) on a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape[0] != self.grid.steps + 1:
            raise ValueError(f"expected {self.grid.steps + 1} time levels, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("time field contains non-finite entries")
        object.__setattr__(self, "values", values)


def _default_norm(z):
    z = np.asarray(z, dtype=float)
    if z.ndim <= 1:
        return np.abs(z)
    return np.sqrt(np.sum(z.reshape(z.shape[0], -1) ** 2, axis=-1))


def interp_eval(tf: TimeField, t: float, kind: str = "linear"):
    """Evaluate an interpolant of ``tf`` at time ``t``.

    ``forward_constant`` returns ``z^n`` on ``((n-1)h, nh]``,
    ``backward_constant`` returns ``z^{n-1}`` there and ``linear`` the
    continuous piecewise affine interpolant. At ``t = 0`` all three return
    ``z^0``.
    """
    grid = tf.grid
    if not 0.0 <= t <= grid.horizon:
        raise ValueError(f"t={t} outside [0, {grid.horizon}]")
    z = tf.values
    if t == 0.0:
        return z[0].copy()
    n = min(max(int(np.ceil(t / grid.h - 1e-12)), 1), grid.steps)
    if kind == "forward_constant":
        return z[n].copy()
    if kind == "backward_constant":
        return z[n - 1].copy()
    if kind == "linear":
        s = (t - (n - 1) * grid.h) / grid.h
        return (1.0 - s) * z[n - 1] + s * z[n]
    raise ValueError(f"unknown interpolant kind {kind!r}")


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def interp_identity_residuals(tf: TimeField, norm=None) -> dict:
    """Check the norm identities linking node values and interpolants.

    Left-hand sides are computed from the interpolants themselves, interval
    by interval (L-infinity from endpoint samples, since the norm of an
    affine function is convex; L2 by two-point Gauss quadrature, exact for
    the quadratic integrands involved). Right-hand sides use the closed
    forms in terms of the node values. ``norm`` maps an array of shape
    ``(k, ...)`` to ``k`` spatial norms; defaults to the Euclidean norm.

    Returns a dict with per-identity relative residuals under
    ``"equalities"``, booleans under ``"inequalities"``, and the summary
    entries ``"max_residual"`` and ``"inequalities_hold"``.
    """
    norm = _default_norm if norm is None else norm
    z = tf.values
    N, h = tf.grid.steps, tf.grid.h
    left, right = z[:-1], z[1:]
    diff = right - left

    def nrm(a):
        return np.asarray(norm(a), dtype=float)

    # interval-local samples: s in {0, 1} for sup norms, Gauss points for L2
    def lin(s):
        return left + s * diff

    sup = {}
    l2 = {}
    for name, f in {
        "upper": lambda s: right,
        "lower": lambda s: left,
        "hat": lin,
        "dt": lambda s: diff / h,
        "upper_minus_hat": lambda s: right - lin(s),
        "lower_minus_hat": lambda s: left - lin(s),
        "upper_minus_lower": lambda s: diff,
    }.items():
        sup[name] = float(max(np.max(nrm(f(0.0))), np.max(nrm(f(1.0)))))
        l2[name] = float(h * sum(w * np.sum(nrm(f(s)) ** 2) for s, w in zip(_GAUSS_S, _GAUSS_W)))

    node = nrm(z)
    step = nrm(diff)
    eq = {
        "upper_linf": _rel(sup["upper"], node[1:].max()),
        "lower_linf": _rel(sup["lower"], node[:-1].max()),
        "dt_linf": _rel(sup["dt"], (step / h).max()),
        "upper_l2": _rel(l2["upper"], h * np.sum(node[1:] ** 2)),
        "lower_l2": _rel(l2["lower"], h * np.sum(node[:-1] ** 2)),
        "dt_l2": _rel(l2["dt"], h * np.sum((step / h) ** 2)),
        "hat_linf": _rel(sup["hat"], max(node[0], node[1:].max())),
        "upper_minus_hat_linf": _rel(sup["upper_minus_hat"], step.max()),
        "upper_minus_hat_linf_dt": _rel(step.max(), h * sup["dt"]),
        "upper_minus_hat_l2": _rel(l2["upper_minus_hat"], h / 3.0 * np.sum(step**2)),
        "upper_minus_hat_l2_dt": _rel(h / 3.0 * np.sum(step**2), h**2 / 3.0 * l2["dt"]),
        "lower_minus_hat_linf": _rel(sup["lower_minus_hat"], step.max()),
        "lower_minus_hat_l2": _rel(l2["lower_minus_hat"], h / 3.0 * np.sum(step**2)),
    }
    slack = 1e-12
    ineq = {
        "hat_l2": bool(
            l2["hat"] <= h * np.sum(node[:-1] ** 2 + node[1:] ** 2) * (1 + slack) + 1e-300
            and h * np.sum(node[:-1] ** 2 + node[1:] ** 2) <= (h * node[0] ** 2 + 2 * l2["upper"]) * (1 + slack) + 1e-300
        ),
        "upper_minus_lower_linf": bool(sup["upper_minus_lower"] <= 2 * h * sup["dt"] * (1 + slack) + 1e-300),
        "upper_minus_lower_l2": bool(l2["upper_minus_lower"] <= 4 * h**2 / 3 * l2["dt"] * (1 + slack) + 1e-300),
    }
    return {
        "equalities": eq,
        "inequalities": ineq,
        "max_residual": float(max(eq.values())),
        "inequalities_hold": all(ineq.values()),
        "N": N,
    }


def difference_energy(tf: TimeField, norm=None) -> float:
    """``h * sum_n ||(z^{n+1} - z^n) / h||^2``."""
    norm = _default_norm if norm is None else norm
    h = tf.grid.h
    step = np.asarray(norm(np.diff(tf.values, axis=0)), dtype=float) / h
    return float(h * np.sum(step**2))


def discrete_gronwall_bound(M: float, b) -> np.ndarray:
    """Bounds ``M exp(sum_{n<k} b_n)`` for ``k = 0, ..., len(b)``.

    Any nonnegative sequence with ``a_k <= M + sum_{n<k} b_n a_n`` stays
    below the returned values.
    """
    b = np.asarray(b, dtype=float)
    if M < 0 or np.any(b < 0):
        raise ValueError("discrete Gronwall bound needs M >= 0 and b_n >= 0")
    return M * np.exp(np.concatenate([[0.0], np.cumsum(b)]))
