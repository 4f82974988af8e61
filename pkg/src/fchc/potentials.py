"""Double-well potentials split as ``f = f1 + f2``.

``f1`` is convex (treated implicitly in time), ``f2`` has a Lipschitz
derivative (treated explicitly). Derivatives up to third order are
available for both parts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainViolation


class PotentialSpec:
    """Common interface; subclasses provide ``_f1`` and ``_f2``."""

    name = "potential"
    #: open interval where f1 is finite; ``None`` means the whole line
    domain: tuple | None = None

    @property
    def working_interval(self) -> tuple:
        raise NotImplementedError

    def _f1(self, x, order):
        raise NotImplementedError

    def _f2(self, x, order):
        raise NotImplementedError

    def check_domain(self, x) -> None:
        """Raise :class:`DomainViolation` on the first value outside the safe range."""

    def in_open_domain(self, x) -> bool:
        """True when ``f1`` is finite at every value (looser than the safe range)."""
        if self.domain is None:
            return bool(np.all(np.isfinite(x)))
        x = np.asarray(x)
        return bool(np.all((x > self.domain[0]) & (x < self.domain[1])))

    def eval(self, part: str, order: int, x, check: bool = True):
        if order not in (0, 1, 2, 3):
            raise ValueError(f"derivative order must be 0..3, got {order}")
        x = np.asarray(x, dtype=float)
        if part == "f2":
            return self._f2(x, order)
        if check:
            self.check_domain(x)
        if part == "f1":
            return self._f1(x, order)
        if part == "f":
            return self._f1(x, order) + self._f2(x, order)
        raise ValueError(f"part must be 'f1', 'f2' or 'f', got {part!r}")

    def validate(self, samples: int = 1001) -> None:
        """Check convexity of f1 and boundedness of f2'' on the working interval."""
        a, b = self.working_interval
        x = np.linspace(a, b, samples)
        d2 = self._f1(x, 2)
        if np.any(d2 < -1e-12 * max(1.0, np.max(np.abs(d2)))):
            raise ValueError(f"{self.name}: f1 is not convex on [{a}, {b}]")
        if not np.all(np.isfinite(self._f2(x, 2))):
            raise ValueError(f"{self.name}: f2'' is unbounded on [{a}, {b}]")


def eval_potential(spec: PotentialSpec, part: str, order: int, x):
    """Pointwise ``part^{(order)}(x)`` with ``part`` one of ``f1``, ``f2``, ``f``."""
    return spec.eval(part, order, x)


@dataclass(frozen=True)
class Regular(PotentialSpec):
    """``f(x) = (x**2 - 1)**2 / 4`` split as ``x**4/4 + 1/4`` and ``-x**2/2``."""

    interval: tuple = (-2.0, 2.0)
    name = "regular"

    @property
    def working_interval(self):
        return tuple(self.interval)

    def _f1(self, x, order):
        return (0.25 * x**4 + 0.25, x**3, 3.0 * x**2, 6.0 * x)[order]

    def _f2(self, x, order):
        return (-0.5 * x**2, -x, -np.ones_like(x), np.zeros_like(x))[order]


@dataclass(frozen=True)
class Logarithmic(PotentialSpec):
    """``(1+x) ln(1+x) + (1-x) ln(1-x) - c1 x**2`` on ``(-1, 1)``.

    Evaluations of ``f1`` (and hence ``f``) closer than ``delta`` to
    ``+-1`` raise :class:`DomainViolation`; ``f1`` extends to ``2 ln 2`` at
    the endpoints but that extension is never evaluated.
    """

    c1: float = 1.5
    delta: float = 1e-4
    name = "logarithmic"
    domain = (-1.0, 1.0)

    def __post_init__(self):
        if not self.c1 > 1:
            raise ValueError(f"c1 must exceed 1 for a double well, got {self.c1}")
        if not 0 < self.delta < 0.5:
            raise ValueError(f"delta must lie in (0, 0.5), got {self.delta}")

    @property
    def working_interval(self):
        return (-1.0 + self.delta, 1.0 - self.delta)

    def check_domain(self, x):
        x = np.asarray(x)
        bad = ~(np.abs(x) <= 1.0 - self.delta)
        if np.any(bad):
            idx = tuple(int(i) for i in np.unravel_index(np.argmax(bad), x.shape)) if x.ndim else None
            raise DomainViolation(x[idx] if idx is not None else x, location=idx)

    def _f1(self, x, order):
        if order == 0:
            return (1 + x) * np.log1p(x) + (1 - x) * np.log1p(-x)
        if order == 1:
            return np.log1p(x) - np.log1p(-x)
        if order == 2:
            return 2.0 / (1.0 - x * x)
        return 4.0 * x / (1.0 - x * x) ** 2

    def _f2(self, x, order):
        c = self.c1
        return (-c * x**2, -2 * c * x, -2 * c * np.ones_like(x), np.zeros_like(x))[order]


@dataclass(frozen=True)
class SplitPolynomial(PotentialSpec):
    """Polynomial parts given by coefficients in increasing degree.

    ``SplitPolynomial((0,), (0,))`` is the zero potential.
    """

    f1_coefficients: tuple = (0.0,)
    f2_coefficients: tuple = (0.0,)
    interval: tuple = (-2.0, 2.0)
    name = "split_polynomial"
    _p1: list = field(init=False, repr=False, compare=False)
    _p2: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p1 = Polynomial(np.asarray(self.f1_coefficients, dtype=float))
        p2 = Polynomial(np.asarray(self.f2_coefficients, dtype=float))
        object.__setattr__(self, "_p1", [p1.deriv(k) for k in range(4)])
        object.__setattr__(self, "_p2", [p2.deriv(k) for k in range(4)])
        self.validate()

    @property
    def working_interval(self):
        return tuple(self.interval)

    @property
    def is_zero(self) -> bool:
        return not np.any(self._p1[0].coef) and not np.any(self._p2[0].coef)

    def _f1(self, x, order):
        return self._p1[order](x) * np.ones_like(x)

    def _f2(self, x, order):
        return self._p2[order](x) * np.ones_like(x)


def zero_potential() -> SplitPolynomial:
    return SplitPolynomial((0.0,), (0.0,))


@dataclass
class GBReport:
    """Outcome of the global-boundedness scan of a state."""

    min_y: float
    max_y: float
    interval: tuple
    violated: bool
    f1_sup: tuple  # sup |f1^{(i)}| on [min_y, max_y], i = 0..3
    separation: float  # distance of the observed range to the potential's singular points

    def as_dict(self) -> dict:
        return {
            "min_y": self.min_y,
            "max_y": self.max_y,
            "interval": list(self.interval),
            "violated": self.violated,
            "f1_sup": list(self.f1_sup),
            "separation": self.separation,
        }


def check_admissible(spec: PotentialSpec, y, interval=None, samples: int = 1001) -> GBReport:
    """Scan all values of ``y`` against the compact interval ``[a, b]``.

    Violations are reported, not raised. The sup of ``|f1^{(i)}|`` is taken
    over a uniform sample of ``[min y, max y]`` (endpoints included).
    """
    a, b = spec.working_interval if interval is None else interval
    if not a < b:
        raise ValueError(f"empty interval [{a}, {b}]")
    y = np.asarray(y, dtype=float)
    lo, hi = float(y.min()), float(y.max())
    violated = lo < a or hi > b
    if spec.domain is not None:
        separation = float(min(lo - spec.domain[0], spec.domain[1] - hi))
    else:
        separation = float("inf")
    xs = np.linspace(lo, hi, samples)
    inside = spec.domain is None or (lo > spec.domain[0] and hi < spec.domain[1])
    if inside:
        sups = tuple(float(np.max(np.abs(spec._f1(xs, k)))) for k in range(4))
    else:
        sups = (float("inf"),) * 4
    return GBReport(lo, hi, (float(a), float(b)), bool(violated), sups, separation)
