"""Tracking-type cost functional."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Weights and targets of

        J = a1/2 ||y(T) - y_Omega||^2 + a2/2 int ||y - y_Q||^2 + a3/2 int ||u||^2.

    Time integrals use the right-endpoint rule of the stepper. ``y_q`` is an
    array of shape ``(N+1, n_nodes)`` (or anything broadcasting to it).
    """

    alpha1: float
    alpha2: float
    alpha3: float
    y_omega: np.ndarray | float = 0.0
    y_q: np.ndarray | float = 0.0

    def __post_init__(self):
        weights = (self.alpha1, self.alpha2, self.alpha3)
        if any(not np.isfinite(a) or a < 0 for a in weights):
            raise ValueError(f"cost weights must be nonnegative, got {weights}")
        if sum(weights) <= 0:
            raise ValueError("cost weights must not all vanish")

    @property
    def weight_scale(self) -> float:
        return float(self.alpha1 + self.alpha2 + self.alpha3)

    def scaled(self, factor: float) -> "CostSpec":
        return CostSpec(factor * self.alpha1, factor * self.alpha2, factor * self.alpha3, self.y_omega, self.y_q)

    def terminal_source(self, y):
        """``g1 = alpha1 (y^N - y_Omega)``."""
        return self.alpha1 * (y[-1] - self.y_omega)

    def distributed_source(self, y):
        """``g2^n = alpha2 (y^n - y_Q^n)`` for all nodes."""
        return self.alpha2 * (y - self.y_q)

    def evaluate(self, domain, grid, y, u) -> float:
        w = grid.weights
        term1 = 0.5 * self.alpha1 * domain.inner(y[-1] - self.y_omega, y[-1] - self.y_omega)
        dy = y - self.y_q
        term2 = 0.5 * self.alpha2 * np.sum(w * domain.inner(dy, dy))
        term3 = 0.5 * self.alpha3 * np.sum(w * domain.inner(u, u))
        return float(term1 + term2 + term3)
