"""Closed-form DMT curves and the determinant sums behind the union bounds.

Constants that the underlying bounds only assert to exist are never
hard-coded here. They are fitted with :func:`polylog_fit` or the checks
compare ratios. The one explicit constant is the Chernoff factor
``4^(n n_r)`` in :func:`alamouti_union_bound`, which makes that bound an
honest upper bound for the simulated channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .exceptions import FitError, SingularTermError, ValidationError
from .lattice import BOUNDARY_SLACK, alamouti_matrix
from .numfield import (
    NumberFieldSpec,
    enumerate_integers_ball,
    frobenius_norms,
    embed_values,
    norms_abs,
    partition_associates,
)


@dataclass(frozen=True)
class DmtCurve:
    """Piecewise-linear trade-off curve through ``points`` (r ascending)."""

    points: tuple
    label: str = ""

    def __post_init__(self):
        pts = tuple((float(r), float(d)) for r, d in self.points)
        object.__setattr__(self, "points", pts)

    @property
    def r_max(self) -> float:
        return self.points[-1][0]

    def d(self, r):
        rs, ds = zip(*self.points)
        return np.interp(r, rs, ds, right=0.0)

    def sample(self, num: int = 11) -> list[tuple[float, float]]:
        rs = np.linspace(0.0, self.r_max, num)
        return [(float(r), float(self.d(r))) for r in rs]


def dmt_upper_bound_curve(n: int, n_r: int) -> DmtCurve:
    """Best trade-off available to any 2n-dimensional lattice code in M_n(C): (r, n n_r (1-r))."""
    return DmtCurve(((0, n * n_r), (1, 0)), f"2n-dim lattice bound n={n} n_r={n_r}")


def alamouti_dmt_curve(n_r: int) -> DmtCurve:
    return DmtCurve(((0, 2 * n_r), (1, 0)), f"Alamouti n_r={n_r}")


def mac_dmt_curves(n: int, n_r: int, K: int) -> tuple[DmtCurve, DmtCurve]:
    """Joint ``(r, n n_r (1 - r/K))`` and per-user ``(r, n n_r (1 - r))`` curves.

    Raises
    ------
    ValidationError
        If ``n_r < K``; the curves are only established with at least as
        many receive antennas as users.
    """
    if n_r < K:
        raise ValidationError(f"MAC curves need n_r >= K (receiver antennas at least the user count); got n_r={n_r}, K={K}")
    joint = DmtCurve(((0, n * n_r), (K, 0)), f"MAC joint n={n} n_r={n_r} K={K}")
    per_user = DmtCurve(((0, n * n_r), (1, 0)), f"MAC per-user n={n} n_r={n_r} K={K}")
    return joint, per_user


def pep_lower_bound_exponent(n: int, n_r: int, det_abs: float, rho: float) -> float:
    """``rho^(-n n_r) |det(X - X')|^(-2 n_r)`` with the unspecified constant set to 1.

    Only the SNR exponent and the determinant dependence are meaningful.
    """
    if det_abs <= 0:
        raise ValidationError("bound inapplicable: singular difference")
    return float(rho ** (-n * n_r) * det_abs ** (-2 * n_r))


@dataclass(frozen=True)
class SumReport:
    radius: float
    value: float
    term_count: int
    bound_value: float
    bound_kind: str
    details: dict = field(default_factory=dict)

    @property
    def within_bound(self) -> bool:
        return self.value <= self.bound_value * (1 + 1e-12)


def _alamouti_coords(points: np.ndarray):
    """Recover x from A(x) stacks; None if some point is not of Alamouti form."""
    if points.shape[1:] != (2, 2):
        return None
    x = np.stack([points[:, 0, 0].real, points[:, 0, 0].imag, points[:, 1, 0].real, points[:, 1, 0].imag], axis=1)
    if not np.allclose(alamouti_matrix(x), points, atol=1e-9):
        return None
    return x


def _dotted_factor(x, n_r):
    xs = np.abs(np.asarray(x, dtype=float))
    xs = np.where(xs < 0.5, 1.0, xs)
    return xs ** n_r


def union_bound_sum(points, n_r: int, dotted: bool = False, radius: float = float("nan")) -> SumReport:
    """Sum of ``1/|det P|^(2 n_r)`` over nonzero difference matrices.

    With ``dotted=True`` the points must be Alamouti matrices ``A(x)`` and
    the value is the AM-GM majorant ``sum 1/|x1' x2' x3' x4'|^n_r`` where a
    zero coordinate counts as 1. Its comparator is the factored box form
    ``(sum_{|x|<=B} 1/|x'|^n_r)^4`` with ``B`` the largest coordinate seen.
    For raw sums over Alamouti points the comparator is that majorant.
    """
    pts = np.asarray(points, dtype=complex)
    if pts.ndim == 2:
        pts = pts[None]
    if pts.shape[0] == 0:
        return SumReport(radius, 0.0, 0, 0.0, "empty")
    if np.any(np.all(np.abs(pts) < 1e-15, axis=(1, 2))):
        raise ValidationError("union_bound_sum needs nonzero difference matrices")
    x = _alamouti_coords(pts)
    majorant = factored = None
    if x is not None:
        terms = 1.0 / np.prod(_dotted_factor(x, n_r), axis=1)
        majorant = math.fsum(terms)
        b = int(round(np.max(np.abs(x))))
        axis = np.arange(-b, b + 1)
        factored = math.fsum(1.0 / _dotted_factor(axis, n_r)) ** 4
    if dotted:
        if x is None:
            raise ValidationError("dotted majorant applies only to Alamouti matrices A(x)")
        return SumReport(radius, majorant, pts.shape[0], factored, "factored box majorant",
                         {"box_bound": b})
    if pts.shape[1] != pts.shape[2]:
        raise ValidationError("determinant sums need square matrices")
    dets = np.abs(np.linalg.det(pts))
    scale = np.max(np.abs(pts), axis=(1, 2)) ** pts.shape[1]
    bad = np.flatnonzero(dets <= 1e-12 * scale)
    if bad.size:
        raise SingularTermError(f"singular term: point {bad[0]} has zero determinant")
    value = math.fsum(dets ** (-2.0 * n_r))
    if majorant is not None:
        return SumReport(radius, value, pts.shape[0], majorant, "dotted AM-GM majorant")
    return SumReport(radius, value, pts.shape[0], float("inf"), "none")


def alamouti_box_differences(bound: int) -> np.ndarray:
    """All nonzero ``A(x)`` with integer ``|x_i| <= bound``."""
    axis = np.arange(-bound, bound + 1)
    x = np.array(np.meshgrid(axis, axis, axis, axis, indexing="ij")).reshape(4, -1).T
    x = x[np.any(x != 0, axis=1)]
    return alamouti_matrix(x)


@lru_cache(maxsize=64)
def _box_det_sum(bound: int, n_r: int) -> float:
    axis = np.arange(-bound, bound + 1)
    sq = axis.astype(float) ** 2
    tot = sq[:, None, None, None] + sq[None, :, None, None] + sq[None, None, :, None] + sq[None, None, None, :]
    tot = tot[tot > 0]
    return math.fsum(tot ** (-2.0 * n_r))


def alamouti_union_bound(rho: float, r: float, n_r: int) -> float:
    """Union bound on the box-code block error rate at SNR ``rho``.

    Each pairwise error obeys the Chernoff bound
    ``prod_i (1 + rho lambda_i / 4)^(-n_r) <= 4^(2 n_r) rho^(-2 n_r (1-r)) / det^(2 n_r)``
    and the differences of the box code of half-width ``B = rho^(r/2)`` have
    integer coordinates within ``2B``.
    """
    bound = int(math.floor(rho ** (r / 2.0) + BOUNDARY_SLACK))
    s = _box_det_sum(2 * bound, n_r)
    return float(4.0 ** (2 * n_r) * rho ** (-2 * n_r * (1 - r)) * s)


def alamouti_determinant_exact(x) -> tuple[int, int]:
    """``det A(x)`` in exact Gaussian-integer arithmetic, as (real, imag)."""
    x1, x2, x3, x4 = (int(v) for v in x)
    # det [[a, -conj(b)], [b, conj(a)]] = a conj(a) + conj(b) b
    a_re, a_im, b_re, b_im = x1, x2, x3, x4
    re = (a_re * a_re + a_im * a_im) + (b_re * b_re + b_im * b_im)
    im = (a_im * a_re - a_re * a_im) + (b_re * b_im - b_im * b_re)
    return re, im


# --------------------------------------------------------------------------
# number-field sums

@dataclass(frozen=True)
class BallClasses:
    """Nonzero elements of a ball with their exact norms and associate classes."""

    radius: float
    elements: np.ndarray
    norms: np.ndarray
    labels: np.ndarray
    class_norms: np.ndarray
    class_sizes: np.ndarray
    reps: np.ndarray


@lru_cache(maxsize=16)
def ball_classes(field: NumberFieldSpec, radius: float, budget: int | None = None) -> BallClasses:
    coords = enumerate_integers_ball(field, radius, budget)
    coords = coords[np.any(coords != 0, axis=1)]
    norms = norms_abs(field, coords)
    part = partition_associates(field, coords, norms)
    return BallClasses(float(radius), coords, norms, part.labels, part.norms, part.sizes, part.reps)


def _require_pid(field: NumberFieldSpec):
    if not field.pid:
        raise ValidationError("ideal-class correspondence unavailable: field is not declared a PID")


def _inv_powers(norms, s: float) -> np.ndarray:
    return np.asarray([float(v) for v in norms], dtype=float) ** (-float(s))


def restricted_zeta_sum(field: NumberFieldSpec, radius: float, s: float, budget: int | None = None) -> SumReport:
    """Sum of ``N(x)^-s`` over associate classes of nonzero elements in the ball.

    In a PID each class is one principal ideal, so this is a partial sum of
    the Dedekind zeta function. The comparator is
    ``(sum_{1 <= i < R^n} i^-s)^(2n)``.
    """
    _require_pid(field)
    if s < 1:
        raise ValidationError("s must be at least 1")
    bc = ball_classes(field, float(radius), budget)
    value = math.fsum(_inv_powers(bc.class_norms, s))
    top = radius ** field.n
    last = math.ceil(top) - 1 if top > 1 else 0
    partial = math.fsum(np.arange(1, last + 1, dtype=float) ** (-float(s))) if last >= 1 else 0.0
    bound = partial ** (2 * field.n)
    return SumReport(float(radius), value, int(bc.class_sizes.size), bound, "(sum_{i<R^n} i^-s)^(2n)",
                     {"class_count": int(bc.class_sizes.size)})


def full_element_sum(field: NumberFieldSpec, radius: float, n_r: int, M: float | None = None,
                     budget: int | None = None) -> SumReport:
    """Sum of ``N(x)^-n_r`` over every nonzero element in the ball.

    ``details`` carries the class decomposition ``sum_i A_i / N(x_i)^n_r``
    and ``max_class_size`` (the largest ``A_i``). ``bound_value`` is
    ``M log(R)^(3n-1)`` when a fitted ``M`` is supplied, else NaN.
    """
    _require_pid(field)
    bc = ball_classes(field, float(radius), budget)
    value = math.fsum(_inv_powers(bc.norms, n_r))
    decomposition = math.fsum(bc.class_sizes * _inv_powers(bc.class_norms, n_r))
    power = 3 * field.n - 1
    bound = M * math.log(radius) ** power if M is not None else float("nan")
    return SumReport(
        float(radius), value, int(bc.norms.size), bound, f"fitted M*log(R)^{power}",
        {
            "decomposition": decomposition,
            "max_class_size": int(bc.class_sizes.max()) if bc.class_sizes.size else 0,
            "class_count": int(bc.class_sizes.size),
            "unweighted": math.fsum(_inv_powers(bc.class_norms, n_r)),
        },
    )


@dataclass(frozen=True)
class PolylogFit:
    M_hat: float
    residual: float
    power: float


def polylog_fit(values: Sequence[float], radii: Sequence[float], power: float) -> PolylogFit:
    """Fit ``values ~ M log(R)^power`` by least squares on the log scale.

    ``residual`` is the largest relative deviation ``|v / (M log^p R) - 1|``.
    """
    v = np.asarray(values, dtype=float)
    r = np.asarray(radii, dtype=float)
    if v.shape != r.shape or v.size < 3:
        raise FitError("polylog_fit needs equal-length inputs with at least 3 points")
    if np.any(r <= 1):
        raise FitError("polylog_fit needs radii > 1")
    if np.any(v <= 0):
        raise FitError("polylog_fit needs positive values")
    model = np.log(r) ** power
    log_m = float(np.mean(np.log(v) - np.log(model)))
    m_hat = math.exp(log_m)
    residual = float(np.max(np.abs(v / (m_hat * model) - 1.0)))
    return PolylogFit(m_hat, residual, float(power))


def power_law_exponent(values: Sequence[float], radii: Sequence[float]) -> float:
    """Slope of ``log values`` against ``log radii``."""
    return float(np.polyfit(np.log(radii), np.log(values), 1)[0])


def am_gm_chain_check(field: NumberFieldSpec, radius: float, budget: int | None = None) -> dict:
    """Check ``|det psi(x)|^2 = N(x) <= ||psi(x)||_F^(2n)`` on every nonzero ball element.

    Returns counts of violations of the norm identity (1e-8 relative) and
    of the inequality, plus the number of elements examined.
    """
    bc = ball_classes(field, float(radius), budget)
    norms = np.asarray([float(v) for v in bc.norms])
    det_sq = np.prod(np.abs(embed_values(field, bc.elements)) ** 2, axis=1)
    fro = frobenius_norms(field, bc.elements)
    identity_bad = int(np.sum(np.abs(det_sq - norms) > 1e-8 * norms))
    ineq_bad = int(np.sum(norms > fro ** (2 * field.n) * (1 + 1e-12)))
    min_det_bad = int(np.sum(norms < 1))
    return {"elements": int(norms.size), "identity_violations": identity_bad,
            "inequality_violations": ineq_bad, "min_det_violations": min_det_bad}


# --------------------------------------------------------------------------
# matrix inequalities

def det_sum_inequality_check(blocks) -> tuple[float, float, bool]:
    """``det(X^H X) >= sum_i det(X_i X_i^H)`` for the vertical stack X of square blocks.

    ``X X^H`` itself is singular once there are two or more blocks, so the
    n x n product ``X^H X`` carries the comparison (same nonzero spectrum).
    """
    bl = np.asarray(blocks, dtype=complex)
    if bl.ndim != 3 or bl.shape[1] != bl.shape[2]:
        raise ValidationError(f"blocks must be a stack of square matrices, got shape {bl.shape}")
    X = bl.reshape(-1, bl.shape[2])
    lhs = float(np.linalg.det(X.conj().T @ X).real)
    rhs = float(sum(np.linalg.det(b @ b.conj().T).real for b in bl))
    return lhs, rhs, lhs >= rhs - 1e-9 * max(1.0, abs(rhs))


def singular_value_match(A, rtol: float = 1e-8) -> bool:
    """Nonzero eigenvalues of ``A A^H`` and ``A^H A`` agree as multisets."""
    a = np.asarray(A, dtype=complex)
    left = np.linalg.eigvalsh(a @ a.conj().T)
    right = np.linalg.eigvalsh(a.conj().T @ a)
    scale = max(float(np.max(np.abs(left), initial=0.0)), float(np.max(np.abs(right), initial=0.0)))
    if scale == 0.0:
        return True
    cut = 1e-10 * scale
    lnz = np.sort(left[left > cut])
    rnz = np.sort(right[right > cut])
    if lnz.size != rnz.size:
        return False
    return bool(np.all(np.abs(lnz - rnz) <= rtol * np.maximum(np.abs(lnz), cut)))
