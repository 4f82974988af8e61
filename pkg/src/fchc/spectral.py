"""Spectral realisation of the operators A and B on boxes.

Both operators are negative Laplacians with homogeneous Dirichlet or Neumann
conditions on a box in one or two dimensions. Eigenfunctions are tensor
products of sines (Dirichlet) or cosines (Neumann), sampled on a cell-centred
(midpoint) grid. With uniform cell weights these samples are orthogonal in
the discrete inner product, so a Dirichlet basis and a Neumann basis can
share the same grid.

Fields are plain ``numpy`` arrays of grid values, flattened in C order
(``indexing="ij"``). Time-dependent fields are arrays whose *last* axis runs
over the grid nodes; every operation here broadcasts over leading axes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NonZeroMeanRhs, ZeroField

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

#: relative tolerance on the mean used to accept data for inverse powers
MEAN_TOL = 1e-10


@dataclass(frozen=True)
class DomainSpec:
    """Box ``(0, L_1) x ... x (0, L_d)`` with ``n_i`` midpoint nodes per axis."""

    side_lengths: tuple
    grid_points: tuple

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.side_lengths))
        points = tuple(int(v) for v in np.atleast_1d(self.grid_points))
        if len(lengths) not in (1, 2):
            raise ValueError(f"unsupported dimension {len(lengths)}; only 1 and 2 are supported")
        if len(points) != len(lengths):
            raise ValueError("side_lengths and grid_points must have the same length")
        if any(not np.isfinite(v) or v <= 0 for v in lengths):
            raise ValueError(f"side lengths must be positive, got {lengths}")
        if any(n < 4 for n in points):
            raise ValueError(f"need at least 4 grid points per axis, got {points}")
        object.__setattr__(self, "side_lengths", lengths)
        object.__setattr__(self, "grid_points", points)

    @property
    def dimension(self) -> int:
        return len(self.side_lengths)

    @property
    def shape(self) -> tuple:
        return self.grid_points

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.grid_points))

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_lengths))

    @property
    def cell_volume(self) -> float:
        return float(np.prod([L / n for L, n in zip(self.side_lengths, self.grid_points)]))

    @property
    def axes(self) -> list:
        return [(np.arange(n) + 0.5) * (L / n) for L, n in zip(self.side_lengths, self.grid_points)]

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(n_nodes, dimension)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.n_nodes, self.cell_volume)

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(x)`` (1D) or ``func(x, y)`` (2D) at the nodes."""
        return np.asarray(func(*self.nodes.T), dtype=float) * np.ones(self.n_nodes)

    # quadrature ---------------------------------------------------------
    def inner(self, v, w):
        """L2 inner product; broadcasts over leading axes."""
        return self.cell_volume * np.sum(np.asarray(v) * np.asarray(w), axis=-1)

    def norm(self, v):
        return np.sqrt(self.inner(v, v))

    def mean(self, v):
        return self.inner(v, 1.0) / self.volume


def _axis_modes(bc: str, n: int, length: float):
    """1D wavenumbers and discretely normalised samples on the midpoint grid."""
    x = (np.arange(n) + 0.5) * (length / n)
    if bc == NEUMANN:
        k = np.arange(n)
        table = np.cos(np.outer(x, k) * (np.pi / length))
    elif bc == DIRICHLET:
        k = np.arange(1, n + 1)
        table = np.sin(np.outer(x, k) * (np.pi / length))
    else:
        raise ValueError(f"unsupported boundary condition {bc!r}")
    table /= np.sqrt((length / n) * np.sum(table * table, axis=0))
    return k, table


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Truncated eigenbasis of one operator on a :class:`DomainSpec`.

    ``synthesis[:, j]`` holds the grid samples of the eigenfunction with
    eigenvalue ``eigenvalues[j]``; ``indices[j]`` is its per-axis wavenumber.
    Index 0 is the first eigenfunction (the constant one for Neumann).
    """

    tag: str
    boundary_condition: str
    domain: DomainSpec
    eigenvalues: np.ndarray
    indices: np.ndarray
    synthesis: np.ndarray = field(repr=False)

    @property
    def mode_count(self) -> int:
        return len(self.eigenvalues)

    @property
    def weights(self) -> np.ndarray:
        return self.domain.weights

    @property
    def has_zero_mode(self) -> bool:
        return bool(self.eigenvalues[0] == 0.0)

    @property
    def is_complete(self) -> bool:
        """True when the modes span every grid function."""
        return self.mode_count == self.domain.n_nodes

    def analyze(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.domain.n_nodes:
            raise ValueError(f"field has {v.shape[-1]} nodes, basis expects {self.domain.n_nodes}")
        return self.domain.cell_volume * (v @ self.synthesis)

    def synthesize(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if c.shape[-1] != self.mode_count:
            raise ValueError(f"got {c.shape[-1]} coefficients, basis has {self.mode_count} modes")
        return c @ self.synthesis.T

    def mode(self, j: int) -> np.ndarray:
        """Grid samples of the ``j``-th eigenfunction (0-based)."""
        return self.synthesis[:, j].copy()

    def power(self, exponent: float, zero_mean_restricted: bool = False) -> "FracOperator":
        return FracOperator(self, exponent, zero_mean_restricted)


def build_basis(domain: DomainSpec, bc: str, tag: str = "A", mode_count: int | None = None) -> SpectralBasis:
    """Eigenbasis of ``-Laplacian`` with boundary condition ``bc`` on ``domain``.

    Eigenvalues are sums of ``(k pi / L)**2`` over the axes, sorted in
    nondecreasing order (ties broken by wavenumber). ``mode_count`` defaults
    to the number of grid nodes, i.e. a complete basis.
    """
    if tag not in ("A", "B"):
        raise ValueError(f"operator tag must be 'A' or 'B', got {tag!r}")
    n_total = domain.n_nodes
    if mode_count is None:
        mode_count = n_total
    mode_count = int(mode_count)
    if not 1 <= mode_count <= n_total:
        raise ValueError(f"mode_count={mode_count} must lie in [1, {n_total}] for this grid")

    per_axis = [_axis_modes(bc, n, L) for n, L in zip(domain.grid_points, domain.side_lengths)]
    candidates = []
    for pos in itertools.product(*[range(n) for n in domain.grid_points]):
        ks = tuple(int(per_axis[a][0][p]) for a, p in enumerate(pos))
        lam = sum((k * np.pi / L) ** 2 for k, L in zip(ks, domain.side_lengths))
        candidates.append((lam, ks, pos))
    candidates.sort(key=lambda item: (item[0], item[1]))
    chosen = candidates[:mode_count]

    synthesis = np.empty((n_total, mode_count))
    for j, (_, _, pos) in enumerate(chosen):
        col = per_axis[0][1][:, pos[0]]
        for a in range(1, domain.dimension):
            col = np.kron(col, per_axis[a][1][:, pos[a]])
        synthesis[:, j] = col
    synthesis.setflags(write=False)
    eigenvalues = np.array([c[0] for c in chosen])
    eigenvalues.setflags(write=False)
    indices = np.array([c[1] for c in chosen], dtype=int)
    return SpectralBasis(tag, bc, domain, eigenvalues, indices, synthesis)


def transform(basis: SpectralBasis, data, direction: str) -> np.ndarray:
    """``direction="analyze"``: grid values to coefficients; ``"synthesize"``: back."""
    if direction == "analyze":
        return basis.analyze(data)
    if direction == "synthesize":
        return basis.synthesize(data)
    raise ValueError(f"direction must be 'analyze' or 'synthesize', got {direction!r}")


@dataclass(frozen=True, eq=False)
class FracOperator:
    """Spectral power ``basis**exponent``.

    For a basis with a zero eigenvalue, negative exponents are only allowed
    on the zero-mean subspace (``zero_mean_restricted=True``); there the
    constant mode is mapped to zero.
    """

    basis: SpectralBasis
    exponent: float
    zero_mean_restricted: bool = False

    def __post_init__(self):
        if self.exponent < 0 and self.basis.has_zero_mode and not self.zero_mean_restricted:
            raise ValueError("negative power of an operator with a zero eigenvalue needs zero_mean_restricted=True")

    @cached_property
    def multipliers(self) -> np.ndarray:
        lam = self.basis.eigenvalues
        out = np.zeros_like(lam)
        nz = lam > 0
        out[nz] = lam[nz] ** self.exponent
        if self.exponent == 0:
            out[~nz] = 1.0
        return out

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense grid-space matrix of the operator (symmetric)."""
        E = self.basis.synthesis
        mat = (E * self.multipliers) @ E.T * self.basis.domain.cell_volume
        if self.basis.has_zero_mode and self.multipliers[0] == 0.0:
            # annihilate constants on both sides to round-off; the raw
            # product leaves O(eps * lambda_max**s) residues
            mat = mat - mat.mean(axis=1, keepdims=True)
            mat = mat - mat.mean(axis=0, keepdims=True)
        mat = 0.5 * (mat + mat.T)
        mat.setflags(write=False)
        return mat

    def __call__(self, v) -> np.ndarray:
        return self.basis.synthesize(self.multipliers * self.basis.analyze(v))


def _check_zero_mean(basis: SpectralBasis, v) -> None:
    dom = basis.domain
    m = np.abs(np.atleast_1d(dom.mean(v)))
    scale = np.atleast_1d(dom.norm(v))
    bad = m > MEAN_TOL * scale
    if np.any(bad):
        raise NonZeroMeanRhs(f"data has mean {m.max():.3e} but the operator has a zero eigenvalue")


def apply_power(op: FracOperator, v) -> np.ndarray:
    """``sum_j lambda_j**s (v, e_j) e_j`` for ``s = op.exponent``."""
    if op.exponent < 0 and op.basis.has_zero_mode:
        _check_zero_mean(op.basis, v)
    return op(v)


def solve_power(op: FracOperator, rhs) -> np.ndarray:
    """Solve ``op(w) = rhs``; on a zero eigenvalue return the zero-mean solution."""
    if op.exponent <= 0:
        raise ValueError("solve_power expects a positive exponent")
    basis = op.basis
    if basis.has_zero_mode:
        _check_zero_mean(basis, rhs)
    inverse = FracOperator(basis, -op.exponent, zero_mean_restricted=basis.has_zero_mode)
    return inverse(rhs)


def mean(v, domain) -> float:
    """Mean value over the box; ``domain`` may also be a basis."""
    domain = getattr(domain, "domain", domain)
    return domain.mean(v)


def inner_product_Ar(basis: SpectralBasis, r: float, v, w, graph: bool = False) -> float:
    """Inner product of ``V^r`` for ``basis``.

    Default form: ``(A^r v, A^r w)``, plus ``(v, e_1)(w, e_1)`` when the
    first eigenvalue is zero. With ``graph=True`` the graph product
    ``(v, w) + (B^r v, B^r w)`` is returned instead (used for B).
    """
    dom = basis.domain
    cv = basis.analyze(v)
    cw = basis.analyze(w)
    mult = FracOperator(basis, r).multipliers
    value = np.sum((mult * cv) * (mult * cw), axis=-1)
    if graph:
        return value + dom.inner(v, w)
    if basis.has_zero_mode:
        value = value + cv[..., 0] * cw[..., 0]
    return value


def norm_Ar(basis: SpectralBasis, r: float, v, graph: bool = False):
    return np.sqrt(inner_product_Ar(basis, r, v, v, graph=graph))


def poincare_residual(basis: SpectralBasis, r: float, v) -> float:
    """``||v0|| / ||A^r v0||`` with ``v0 = v - mean(v)``."""
    dom = basis.domain
    v0 = np.asarray(v, dtype=float) - dom.mean(v)
    num = dom.norm(v0)
    if num <= 1e-14 * max(1.0, dom.norm(v)):
        raise ZeroField("field is constant; the Poincare ratio is undefined")
    den = dom.norm(FracOperator(basis, r)(v0))
    if den == 0:
        raise ZeroField("field lies in the kernel of the operator")
    return float(num / den)


def random_smooth(basis: SpectralBasis, rng, shape=(), amplitude: float = 1.0, decay: float = 0.3) -> np.ndarray:
    """Random field with exponentially decaying mode amplitudes.

    The result is rescaled so that its largest absolute value over all
    entries equals ``amplitude``.
    """
    rng = np.random.default_rng(rng)
    shape = tuple(np.atleast_1d(shape).astype(int)) if shape != () else ()
    coef = rng.standard_normal(shape + (basis.mode_count,)) * np.exp(-decay * np.arange(basis.mode_count))
    field = basis.synthesize(coef)
    peak = np.max(np.abs(field))
    return field * (amplitude / peak) if peak > 0 else field
