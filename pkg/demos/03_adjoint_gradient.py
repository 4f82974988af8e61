"""Adjoint-based gradients and their consistency checks.

The adjoint is the exact transpose of the linearised stepper, so the
duality pairing holds to round-off. The reduced gradient then agrees with
central finite differences of the cost.
"""

import numpy as np

from fchc import adjoint_identity_residual, reduced_cost, reduced_gradient, solve_adjoint, solve_linearized, solve_state
from fchc.optimize import l2q_inner
from fchc.presets import load_preset

cfg = load_preset("example2_regular")
problem = cfg.problem()
model, u = problem.model, cfg.control()
state = solve_state(model, u, problem.y0)
adj = solve_adjoint(model, state, problem.cost)

rng = np.random.default_rng(0)
k = rng.standard_normal(u.shape)
lin = solve_linearized(model, state, k)
print(f"duality residual: {adjoint_identity_residual(model, lin, adj, k):.2e}")

g = reduced_gradient(problem, u, state)
t = model.grid.nodes[:, None]
x = model.domain.nodes[:, 0]
direction = np.cos(np.pi * t) * np.cos(2 * x)[None, :]
exact = l2q_inner(problem, g, direction)
print(" eps      finite difference     adjoint           relative error")
for eps in (1e-2, 1e-3, 1e-4):
    fd = (reduced_cost(problem, u + eps * direction) - reduced_cost(problem, u - eps * direction)) / (2 * eps)
    print(f"{eps:.0e}  {fd: .12e}  {exact: .12e}  {abs(fd - exact) / abs(exact):.2e}")
