"""Recovering a control from tracking data.

Targets are generated by a known smooth control. Projected gradient
descent with Armijo steps then drives the stationarity measure down. At
the optimum the control satisfies the projection formula
u = P(-q / alpha3); the box is inactive here, so u = -q / alpha3.
"""

import numpy as np

from fchc import optimize
from fchc.acceptance import desk_model, tracking_problem
from fchc.optimize import l2q_norm
from fchc.potentials import Regular

model = desk_model(potential=Regular())
problem = tracking_problem(model)
report = optimize(problem, np.zeros(problem.shape), max_iter=200, stat_tol=1e-8)

for it in (0, 1, 2, 5, 10, 20, report.iterations):
    if it <= report.iterations:
        print(f"iteration {it:3d}: cost {report.costs[it]:.10e}  stationarity {report.stationarity_history[it]:.2e}")
print(f"stopped: {report.reason} after {report.iterations} iterations")
print(f"||u + q/alpha3|| = {report.fixed_point_residual:.2e} (||u|| = {l2q_norm(problem, report.control):.3f})")
