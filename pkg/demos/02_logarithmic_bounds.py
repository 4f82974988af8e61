"""The logarithmic potential keeps the state strictly inside (-1, 1).

With a moderate control the trajectory stays separated from the singular
points and the observed separation is reported. A control twenty times
stronger drives the state against the safeguard and the solver aborts
with a DomainViolation instead of extrapolating.
"""

import numpy as np

from fchc import DomainViolation, solve_state
from fchc.presets import load_preset

cfg = load_preset("example1_log")
model = cfg.model()
traj = solve_state(model, cfg.control(), cfg.y0())
print(f"range of y: [{traj.gb.min_y:.4f}, {traj.gb.max_y:.4f}]")
print(f"observed separation from +-1: {traj.gb.separation:.4f}")
print(f"sup |f1'''| on the range: {traj.gb.f1_sup[3]:.3f}")

strong = load_preset("example1_log", overrides=["potential.delta=0.3"])
try:
    solve_state(strong.model(), 20 * strong.control(), strong.y0())
except DomainViolation as exc:
    print(f"strong control aborted: {exc}")
