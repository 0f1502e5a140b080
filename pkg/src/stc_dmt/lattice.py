"""Matrix lattices, ball enumeration and SNR-indexed finite codes.

A lattice of rank ``k`` in ``M_{n x T}(C)`` is stored through its ``k``
basis matrices. Enumeration works on the realified basis (each matrix
flattened to ``2 n T`` reals) with Fincke-Pohst pruning on the Cholesky
factor of the Gram matrix; see :mod:`stc_dmt.kernels`.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .exceptions import (
    DegenerateLatticeError,
    EnumerationBudgetExceeded,
    FitError,
    ValidationError,
)

DEFAULT_BUDGET = 10**7
BOUNDARY_SLACK = 1e-9
# smallest Gram eigenvalue, relative to the largest, still counted as independent
_RANK_TOL = 1e-10


def enumeration_budget(budget: int | None = None) -> int:
    """Resolve the point cap: explicit value, then ``STC_DMT_BUDGET``, then default."""
    if budget is not None:
        return int(budget)
    env = os.environ.get("STC_DMT_BUDGET")
    if env:
        return int(float(env))
    return DEFAULT_BUDGET


def frobenius_norm(matrix) -> float:
    return float(np.sqrt(np.sum(np.abs(np.asarray(matrix)) ** 2)))


def realify(matrices) -> np.ndarray:
    """Flatten complex matrices of shape (..., n, T) to real vectors (..., 2nT)."""
    a = np.asarray(matrices, dtype=complex)
    flat = a.reshape(a.shape[:-2] + (-1,))
    return np.concatenate([flat.real, flat.imag], axis=-1)


def _as_basis(basis) -> np.ndarray:
    b = np.asarray(basis, dtype=complex)
    if b.ndim == 2:
        b = b[None]
    if b.ndim != 3 or b.shape[0] == 0:
        raise ValidationError(f"basis must be a nonempty stack of matrices, got shape {b.shape}")
    return b


def _checked_gram(basis: np.ndarray) -> np.ndarray:
    real = realify(basis)
    gram = real @ real.T
    gram = 0.5 * (gram + gram.T)
    eig = np.linalg.eigvalsh(gram)
    if eig[-1] <= 0 or eig[0] <= _RANK_TOL * eig[-1]:
        raise DegenerateLatticeError(
            f"degenerate lattice: Gram matrix of the {basis.shape[0]} basis matrices is singular"
        )
    return gram


@dataclass(frozen=True, eq=False)
class MatrixLattice:
    """Integer span of ``k`` real-independent complex ``n x T`` matrices."""

    basis: np.ndarray

    def __post_init__(self):
        b = _as_basis(self.basis)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        gram = _checked_gram(b)
        gram.setflags(write=False)
        object.__setattr__(self, "_gram", gram)

    @property
    def rank(self) -> int:
        return self.basis.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.basis.shape[1], self.basis.shape[2]

    @property
    def gram(self) -> np.ndarray:
        return self._gram

    @cached_property
    def cholesky_upper(self) -> np.ndarray:
        return np.ascontiguousarray(np.linalg.cholesky(self._gram).T)

    def points(self, coords) -> np.ndarray:
        """Lattice points for integer coordinate rows, shape (N, n, T)."""
        c = np.asarray(coords)
        return np.tensordot(c.astype(float), self.basis, axes=([-1], [0]))

    def point(self, coords) -> np.ndarray:
        return self.points(np.asarray(coords)[None])[0]


def gram_matrix(lattice) -> np.ndarray:
    """Real Gram matrix ``Re <B_i, B_j>_F`` of a lattice or a raw list of basis matrices.

    Raises
    ------
    DegenerateLatticeError
        If the basis is rank deficient over the reals.
    """
    if isinstance(lattice, MatrixLattice):
        return lattice.gram.copy()
    return _checked_gram(_as_basis(lattice))


@dataclass(frozen=True, eq=False)
class BallPoints:
    """Points of ``L(R)`` in lexicographic coordinate order.

    Iterating yields ``(coords, point)`` pairs; the arrays ``coords``,
    ``points`` and ``norms`` give vectorised access.
    """

    lattice: MatrixLattice
    radius: float
    coords: np.ndarray

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __iter__(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        pts = self.points
        for c, p in zip(self.coords, pts):
            yield c, p

    @cached_property
    def points(self) -> np.ndarray:
        return self.lattice.points(self.coords)

    @cached_property
    def norms(self) -> np.ndarray:
        c = self.coords.astype(float)
        sq = np.einsum("ni,ij,nj->n", c, self.lattice.gram, c)
        return np.sqrt(np.maximum(sq, 0.0))


def _lex_sort(coords: np.ndarray) -> np.ndarray:
    if coords.shape[0] == 0:
        return coords
    order = np.lexsort(coords.T[::-1])
    return coords[order]


def _run_enumeration(chol_upper: np.ndarray, radius: float, budget, collect: bool):
    if radius < 0:
        raise ValidationError(f"radius must be nonnegative, got {radius}")
    cap = enumeration_budget(budget)
    radius_sq = (float(radius) + BOUNDARY_SLACK) ** 2
    count, coords = kernels.fp_enumerate(chol_upper, radius_sq, cap, collect)
    if count > cap:
        raise EnumerationBudgetExceeded(radius, cap)
    return count, coords


def enumerate_quadratic_form(gram, radius: float, budget: int | None = None) -> np.ndarray:
    """Integer vectors ``c`` with ``c^T G c <= (radius + 1e-9)^2``, lexicographically sorted.

    Works on a bare positive-definite Gram matrix, however badly scaled.
    """
    chol = np.ascontiguousarray(np.linalg.cholesky(np.asarray(gram, dtype=float)).T)
    _, coords = _run_enumeration(chol, radius, budget, True)
    return _lex_sort(coords)


def enumerate_ball(lattice: MatrixLattice, radius: float, budget: int | None = None) -> BallPoints:
    """All lattice points with Frobenius norm at most ``radius`` (+1e-9), zero included."""
    _, coords = _run_enumeration(lattice.cholesky_upper, radius, budget, True)
    return BallPoints(lattice, float(radius), _lex_sort(coords))


def count_ball(lattice: MatrixLattice, radius: float, budget: int | None = None) -> int:
    """``|L(radius)|`` without materialising the points."""
    count, _ = _run_enumeration(lattice.cholesky_upper, radius, budget, False)
    return int(count)


def brute_force_ball(lattice: MatrixLattice, radius: float) -> np.ndarray:
    """Box-search oracle for :func:`enumerate_ball` (lexicographic coordinates).

    Coordinate ``i`` of a point of norm ``<= R`` is bounded by ``R`` times the
    norm of the ``i``-th dual basis vector, ``sqrt((G^-1)_ii)``.
    """
    gram = lattice.gram
    dual = np.sqrt(np.diag(np.linalg.inv(gram)))
    r = float(radius) + BOUNDARY_SLACK
    bounds = np.floor(r * dual + 1e-9).astype(int)
    axes = [range(-b, b + 1) for b in bounds]
    cand = np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, lattice.rank)
    pts = lattice.points(cand)
    sq = np.sum(np.abs(pts) ** 2, axis=(1, 2))
    return cand[sq <= r * r]


@dataclass(frozen=True)
class ScalingFit:
    c_hat: float
    k_hat: float
    radii: np.ndarray
    counts: np.ndarray
    residuals: np.ndarray


def count_scaling_fit(lattice: MatrixLattice, radii: Sequence[float], budget: int | None = None) -> ScalingFit:
    """Fit ``|L(R)| ~ c R^k`` by least squares in log-log coordinates.

    Raises
    ------
    FitError
        Fewer than four radii, radii not increasing, or some ``|L(R)| < 2``.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 4:
        raise FitError("count_scaling_fit needs at least 4 radii")
    if np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise FitError("radii must be positive and increasing")
    counts = np.array([count_ball(lattice, r, budget) for r in radii], dtype=float)
    small = radii[counts < 2]
    if small.size:
        raise FitError(f"radius too small for fit: {small.tolist()}")
    x, y = np.log(radii), np.log(counts)
    k_hat, log_c = np.polyfit(x, y, 1)
    residuals = y - (log_c + k_hat * x)
    return ScalingFit(float(np.exp(log_c)), float(k_hat), radii, counts, residuals)


@dataclass(frozen=True, eq=False)
class FiniteCode:
    """A finite set of codeword matrices ``scale * P`` for the current SNR.

    ``coords`` holds the integer lattice coordinates of each codeword when
    the code was cut from a lattice.
    """

    codewords: np.ndarray
    scale: float
    source_radius: float
    scheme: str
    rho: float
    r: float
    coords: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=complex)
        if cw.ndim != 3 or cw.shape[0] == 0:
            raise ValidationError(f"codewords must be a nonempty (N, n, T) stack, got {cw.shape}")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    def __len__(self) -> int:
        return self.codewords.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.codewords.shape[1], self.codewords.shape[2]

    def energies(self) -> np.ndarray:
        return np.sum(np.abs(self.codewords) ** 2, axis=(1, 2))


def spherical_code(
    lattice: MatrixLattice,
    rho: float,
    r: float,
    T: int | None = None,
    k: int | None = None,
    *,
    base_radius: float = 1.0,
    budget: int | None = None,
) -> FiniteCode:
    """``rho^{-rT/k} L(b rho^{rT/k})``, the spherically shaped code at SNR ``rho``.

    ``b = base_radius`` enlarges the ball without changing the scale, so
    that ``r = 0`` still gives a nontrivial fixed code ``L(b)``. Every
    codeword has ``||X||_F <= b``; ``b = sqrt(n T)`` meets the power
    constraint. The default 1 reproduces the plain scheme.
    """
    n, t_len = lattice.shape
    T = t_len if T is None else int(T)
    k = lattice.rank if k is None else int(k)
    if k != lattice.rank:
        raise ValidationError(f"k={k} does not match lattice rank {lattice.rank}")
    if T != t_len:
        raise ValidationError(f"T={T} does not match lattice shape {lattice.shape}")
    if rho <= 0 or r < 0 or base_radius <= 0:
        raise ValidationError("rho and base_radius must be positive and r nonnegative")
    source_radius = base_radius * rho ** (r * T / k)
    try:
        ball = enumerate_ball(lattice, source_radius, budget)
    except EnumerationBudgetExceeded as exc:
        raise EnumerationBudgetExceeded(source_radius, exc.cap, "code too large") from None
    scale = rho ** (-r * T / k)
    return FiniteCode(ball.points * scale, scale, source_radius, "spherical", float(rho), float(r), ball.coords)


def alamouti_matrix(x) -> np.ndarray:
    """``A(x1, x2, x3, x4) = [[a, -conj(b)], [b, conj(a)]]`` with ``a = x1 + i x2``, ``b = x3 + i x4``."""
    x = np.asarray(x, dtype=float)
    a = x[..., 0] + 1j * x[..., 1]
    b = x[..., 2] + 1j * x[..., 3]
    out = np.empty(x.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = -np.conj(b)
    out[..., 1, 0] = b
    out[..., 1, 1] = np.conj(a)
    return out


def alamouti_lattice() -> MatrixLattice:
    return MatrixLattice(alamouti_matrix(np.eye(4)))


def box_code_alamouti(rho: float, r: float, budget: int | None = None) -> FiniteCode:
    """Box-shaped Alamouti code: ``rho^{-r/2} A(x)`` over integers ``|x_i| <= rho^{r/2}``."""
    if rho <= 0 or r < 0:
        raise ValidationError("rho must be positive and r nonnegative")
    bound = rho ** (r / 2.0)
    m = int(np.floor(bound + BOUNDARY_SLACK))
    size = (2 * m + 1) ** 4
    cap = enumeration_budget(budget)
    if size > cap:
        raise EnumerationBudgetExceeded(bound, cap, "box code too large")
    axis = np.arange(-m, m + 1)
    coords = np.array(np.meshgrid(axis, axis, axis, axis, indexing="ij")).reshape(4, -1).T
    scale = rho ** (-r / 2.0)
    return FiniteCode(alamouti_matrix(coords) * scale, scale, bound, "box", float(rho), float(r), coords)


def min_frobenius_element(lattice: MatrixLattice, budget: int | None = None):
    """Nonzero lattice point of least Frobenius norm.

    Among equal-norm minima the lexicographically largest coordinate vector
    wins, which picks the representative whose first nonzero coordinate is
    positive (``A(1,0,0,0)`` for Alamouti, ``I`` for ``Z I``).

    Returns
    -------
    point : (n, T) complex array
    M : float
    coords : int array
    """
    radius = float(np.sqrt(np.min(np.diag(lattice.gram))))
    ball = enumerate_ball(lattice, radius, budget)
    nonzero = np.any(ball.coords != 0, axis=1)
    coords = ball.coords[nonzero]
    norms = ball.norms[nonzero]
    best = norms.min()
    ties = coords[norms <= best * (1 + 1e-12) + 1e-12]
    chosen = ties[-1]  # coords are lexicographically sorted
    point = lattice.point(chosen)
    return point, frobenius_norm(point), chosen


def verify_power_constraint(code: FiniteCode, n_t: int, T: int) -> tuple[bool, float]:
    """Check ``mean ||X||_F^2 <= T n_t`` (1e-9 slack)."""
    avg = float(np.mean(code.energies()))
    return avg <= T * n_t + 1e-9, avg
