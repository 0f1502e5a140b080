"""Exact arithmetic in rings of integers of cyclic extensions K/Q(i).

Elements are integer coordinate vectors over a fixed integral basis
``w_1..w_2n``; multiplication goes through integer structure constants and
norms are exact determinants of the regular representation. Floating point
only enters through the embedding table used by :func:`embed`, and is never
used to decide equality.

Bulk routines take ``(N, 2n)`` integer arrays (one element per row) and
switch from int64 to Python integers whenever a bound on the intermediate
values passes ``2**62``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import InconsistentFieldSpec, ValidationError
from .exceptions import EnumerationBudgetExceeded
from .lattice import (
    BOUNDARY_SLACK,
    MatrixLattice,
    count_ball,
    enumerate_ball,
    enumerate_quadratic_form,
    realify,
)

RingElement = tuple  # tuple of Python ints, length 2n

_INT64_SAFE = 2**62
_EMBED_TOL = 1e-10


def as_element(x) -> tuple:
    return tuple(int(v) for v in np.asarray(x).ravel())


@dataclass(frozen=True, eq=False)
class NumberFieldSpec:
    """A degree-``n`` cyclic extension of Q(i) given by an integral basis.

    Attributes
    ----------
    n : int
        Relative degree over Q(i); the basis has ``2n`` elements.
    mul_tensor : (2n, 2n, 2n) int array
        ``w_a * w_b = sum_c mul_tensor[a, b, c] * w_c``.
    embeddings : (n, 2n) complex array
        ``embeddings[j, m] = sigma_j(w_m)``.
    unit_generators : tuple of RingElement
        Declared torsion generator and fundamental units (checked, not used
        for enumeration).
    """

    id: str
    n: int
    mul_tensor: np.ndarray
    embeddings: np.ndarray
    unit_generators: tuple
    pid: bool = True

    def __post_init__(self):
        d = 2 * self.n
        t = np.asarray(self.mul_tensor)
        if t.shape != (d, d, d):
            raise InconsistentFieldSpec(f"inconsistent field spec: mul_tensor shape {t.shape} != {(d, d, d)}")
        if not np.all(np.equal(np.mod(t, 1), 0)):
            raise InconsistentFieldSpec("inconsistent field spec: mul_tensor entries must be integers")
        t = t.astype(np.int64)
        e = np.asarray(self.embeddings, dtype=complex)
        if e.shape != (self.n, d):
            raise InconsistentFieldSpec(f"inconsistent field spec: embeddings shape {e.shape} != {(self.n, d)}")
        t.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "mul_tensor", t)
        object.__setattr__(self, "embeddings", e)
        object.__setattr__(self, "unit_generators", tuple(as_element(u) for u in self.unit_generators))
        self._validate()

    @property
    def degree(self) -> int:
        """Absolute degree ``[K:Q] = 2n``."""
        return 2 * self.n

    def _validate(self):
        t = self.mul_tensor
        d = self.degree
        for a in range(d):
            for b in range(d):
                if not np.array_equal(t[a, b], t[b, a]):
                    raise InconsistentFieldSpec(f"inconsistent field spec: not commutative at {(a, b)}")
        # (w_a w_b) w_c == w_a (w_b w_c)
        left = np.einsum("abk,kcm->abcm", t, t)
        right = np.einsum("bck,akm->abcm", t, t)
        bad = np.argwhere(np.any(left != right, axis=-1))
        if bad.size:
            raise InconsistentFieldSpec(f"inconsistent field spec: not associative at {tuple(bad[0])}")
        e = self.embeddings
        lhs = e[:, :, None] * e[:, None, :]
        rhs = np.einsum("abc,jc->jab", t, e)
        err = np.abs(lhs - rhs) / (1.0 + np.abs(lhs))
        if np.max(err) > _EMBED_TOL:
            j, a, b = np.unravel_index(np.argmax(err), err.shape)
            raise InconsistentFieldSpec(
                f"inconsistent field spec: embedding {j} does not respect w_{a} * w_{b}"
            )
        if self.one is None:
            raise InconsistentFieldSpec("inconsistent field spec: no multiplicative identity in the basis span")
        for u in self.unit_generators:
            if len(u) != d or norm_abs(self, u) != 1:
                raise InconsistentFieldSpec(f"inconsistent field spec: declared unit {u} has norm != 1")

    @cached_property
    def one(self):
        """Coordinates of 1, solved exactly from the structure constants."""
        d = self.degree
        # sum_a e_a T[a, b, c] = delta_bc  -> d*d equations in d unknowns
        rows = [[Fraction(int(self.mul_tensor[a, b, c])) for a in range(d)] for b in range(d) for c in range(d)]
        rhs = [Fraction(int(b == c)) for b in range(d) for c in range(d)]
        sol = _solve_least_exact(rows, rhs, d)
        if sol is None or any(s.denominator != 1 for s in sol):
            return None
        return tuple(int(s) for s in sol)

    @cached_property
    def lattice(self) -> MatrixLattice:
        """``psi(O_K)`` as a rank-2n lattice of diagonal ``n x n`` matrices."""
        basis = np.zeros((self.degree, self.n, self.n), dtype=complex)
        idx = np.arange(self.n)
        basis[:, idx, idx] = self.embeddings.T
        return MatrixLattice(basis)

    def to_json(self) -> str:
        doc = {
            "id": self.id,
            "n": self.n,
            "pid": bool(self.pid),
            "mul_tensor": self.mul_tensor.tolist(),
            "embeddings": [[[float(z.real), float(z.imag)] for z in row] for row in self.embeddings],
            "unit_generators": [list(u) for u in self.unit_generators],
        }
        return json.dumps(doc, indent=1)


def _solve_least_exact(rows, rhs, d):
    """Solve an overdetermined but consistent rational system; None if inconsistent."""
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    piv_cols = []
    r = 0
    for col in range(d):
        p = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][col]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        piv_cols.append(col)
        r += 1
    if any(row[-1] != 0 for row in m[r:]):
        return None
    if len(piv_cols) < d:
        return None
    sol = [Fraction(0)] * d
    for i, col in enumerate(piv_cols):
        sol[col] = m[i][-1]
    return sol


# --------------------------------------------------------------------------
# catalog

def _zeta8() -> NumberFieldSpec:
    d = 4
    t = np.zeros((d, d, d), dtype=np.int64)
    for a in range(d):
        for b in range(d):
            s = a + b
            if s < 4:
                t[a, b, s] = 1
            else:
                t[a, b, s - 4] = -1  # zeta^4 = -1
    w = np.exp(1j * np.pi / 4)
    emb = np.array([[w**m for m in range(d)], [(-w) ** m for m in range(d)]])
    return NumberFieldSpec("Q(zeta8)", 2, t, emb, ((0, 1, 0, 0), (1, 1, 0, -1)), True)


def _i_sqrt5() -> NumberFieldSpec:
    # basis index 2e + f  <->  i^e * theta^f, theta^2 = theta + 1, i^2 = -1
    d = 4
    t = np.zeros((d, d, d), dtype=np.int64)
    for a in range(d):
        for b in range(d):
            e, f = divmod(a, 2)[0] + divmod(b, 2)[0], a % 2 + b % 2
            isign = 1
            if e == 2:
                e, isign = 0, -1
            theta_part = {0: {0: 1}, 1: {1: 1}, 2: {0: 1, 1: 1}}[f]
            for ff, coef in theta_part.items():
                t[a, b, 2 * e + ff] += isign * coef
    phi = (1 + math.sqrt(5)) / 2
    roots = [phi, 1 - phi]
    emb = np.array([[(1j) ** (m // 2) * r ** (m % 2) for m in range(d)] for r in roots])
    return NumberFieldSpec("Q(i,sqrt5)", 2, t, emb, ((0, 0, 1, 0), (0, 1, 0, 0)), True)


_CATALOG = {"Q(zeta8)": _zeta8, "Q(i,sqrt5)": _i_sqrt5}
CATALOG_IDS = tuple(_CATALOG)


def catalog_field(id: str) -> NumberFieldSpec:
    """Look up a built-in field: ``"Q(zeta8)"`` or ``"Q(i,sqrt5)"``."""
    try:
        return _CATALOG[id]()
    except KeyError:
        raise ValidationError(f"unknown field id {id!r}; known: {', '.join(CATALOG_IDS)}") from None


def load_field_spec(path) -> NumberFieldSpec:
    """Read a JSON field description (keys n, mul_tensor, embeddings, unit_generators, pid, id)."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read field spec {path}: {exc}") from None
    missing = {"n", "mul_tensor", "embeddings", "unit_generators"} - set(doc)
    if missing:
        raise InconsistentFieldSpec(f"inconsistent field spec: missing keys {sorted(missing)}")
    emb = np.asarray(doc["embeddings"], dtype=float)
    if emb.ndim != 3 or emb.shape[-1] != 2:
        raise InconsistentFieldSpec("inconsistent field spec: embeddings must be [re, im] pairs")
    return NumberFieldSpec(
        id=str(doc.get("id", Path(path).stem)),
        n=int(doc["n"]),
        mul_tensor=np.asarray(doc["mul_tensor"]),
        embeddings=emb[..., 0] + 1j * emb[..., 1],
        unit_generators=tuple(doc["unit_generators"]),
        pid=bool(doc.get("pid", False)),
    )


def resolve_field(name_or_path) -> NumberFieldSpec:
    if name_or_path in _CATALOG:
        return catalog_field(name_or_path)
    if Path(str(name_or_path)).exists():
        return load_field_spec(name_or_path)
    raise ValidationError(f"unknown field id or missing spec file: {name_or_path!r}")


# --------------------------------------------------------------------------
# arithmetic

def _int_array(x):
    """int64 view of an integer array; object arrays pass through."""
    a = np.asarray(x)
    if a.dtype == object:
        return a
    return a.astype(np.int64)


def _to_object(a: np.ndarray) -> np.ndarray:
    flat = np.empty(a.size, dtype=object)
    flat[:] = [int(v) for v in np.asarray(a).ravel()]
    return flat.reshape(a.shape)


def _maxabs(a) -> int:
    if a.size == 0:
        return 0
    if a.dtype == object:
        return max(abs(int(v)) for v in a.ravel())
    return int(np.max(np.abs(a)))


def mult_matrices(field: NumberFieldSpec, elements) -> np.ndarray:
    """Regular representation: ``M[i] @ coords(y) = coords(x_i * y)``, shape (N, 2n, 2n)."""
    x = _int_array(np.atleast_2d(elements))
    t = field.mul_tensor
    bound = _maxabs(x) * int(np.max(np.abs(t))) * field.degree
    if x.dtype == object or bound >= _INT64_SAFE:
        x = x if x.dtype == object else _to_object(x)
        return np.einsum("na,abc->ncb", x, t.astype(object))
    return np.einsum("na,abc->ncb", x, t)


def ring_mul(field: NumberFieldSpec, x, y) -> RingElement:
    """Exact product of two ring elements (Python integers, no wraparound)."""
    xs, ys = as_element(x), as_element(y)
    d = field.degree
    t = field.mul_tensor
    out = [0] * d
    for a in range(d):
        if xs[a] == 0:
            continue
        for b in range(d):
            if ys[b] == 0:
                continue
            p = xs[a] * ys[b]
            for c in range(d):
                tc = int(t[a, b, c])
                if tc:
                    out[c] += p * tc
    return tuple(out)


def ring_mul_many(field: NumberFieldSpec, xs, ys) -> np.ndarray:
    """Row-wise products of two (N, 2n) integer arrays."""
    m = mult_matrices(field, xs)
    y = _int_array(np.atleast_2d(ys))
    if m.dtype == object or y.dtype == object:
        return np.einsum("ncb,nb->nc", m.astype(object), y.astype(object))
    if _maxabs(m) * max(_maxabs(y), 1) * field.degree >= _INT64_SAFE:
        return np.einsum("ncb,nb->nc", m.astype(object), _to_object(y))
    return np.einsum("ncb,nb->nc", m, y)


def _bareiss_det(mats: np.ndarray) -> np.ndarray:
    """Exact determinants of a stack of integer matrices (fraction-free elimination)."""
    m = mats.copy()
    num, d, _ = m.shape
    if num == 0:
        return np.zeros(0, dtype=m.dtype)
    one = 1
    sign = np.ones(num, dtype=np.int64)
    singular = np.zeros(num, dtype=bool)
    prev = np.full(num, one, dtype=m.dtype)
    rows = np.arange(num)
    for k in range(d - 1):
        nz = m[:, k:, k] != 0
        has = nz.any(axis=1)
        singular |= ~has
        piv = k + np.argmax(nz, axis=1)
        swap = has & (piv != k)
        if swap.any():
            idx = rows[swap]
            tmp = m[idx, k].copy()
            m[idx, k] = m[idx, piv[idx]]
            m[idx, piv[idx]] = tmp
            sign[idx] *= -1
        p = m[:, k, k].copy()
        p[~has] = 1
        block = m[:, k + 1:, k + 1:] * p[:, None, None] - m[:, k + 1:, k:k + 1] * m[:, k:k + 1, k + 1:]
        m[:, k + 1:, k + 1:] = block // prev[:, None, None]
        prev = p
    det = m[:, d - 1, d - 1] * sign
    det[singular] = 0
    return det


def _hadamard(d: int, maxabs: int) -> int:
    """Upper bound on any minor of a d x d matrix with entries bounded by maxabs."""
    return (math.isqrt(d * maxabs * maxabs) + 1) ** d


def _det_exact(mats: np.ndarray) -> np.ndarray:
    d = mats.shape[-1]
    # Bareiss intermediates are products of two minors
    hadamard = _hadamard(d, max(_maxabs(mats), 1))
    if mats.dtype == object or hadamard * hadamard >= _INT64_SAFE:
        obj = mats if mats.dtype == object else _to_object(mats)
        return _bareiss_det(obj)
    return _bareiss_det(mats.astype(np.int64))


def norms_abs(field: NumberFieldSpec, elements) -> np.ndarray:
    """``|N_{K/Q}(x)|`` for each row, as exact integers (int64 or object)."""
    elems = np.atleast_2d(elements)
    if elems.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.abs(_det_exact(mult_matrices(field, elems)))


def norm_abs(field: NumberFieldSpec, x) -> int:
    """Absolute algebraic norm: ``|det|`` of multiplication-by-x on the integral basis."""
    row = np.empty((1, field.degree), dtype=object)
    row[0, :] = as_element(x)
    return int(abs(_bareiss_det(mult_matrices(field, row))[0]))


def is_unit(field: NumberFieldSpec, x) -> bool:
    return norm_abs(field, x) == 1


def embed(field: NumberFieldSpec, x) -> np.ndarray:
    """``psi(x) = diag(sigma_1(x), ..., sigma_n(x))``."""
    vals = field.embeddings @ np.asarray(as_element(x), dtype=float)
    return np.diag(vals)


def embed_values(field: NumberFieldSpec, elements) -> np.ndarray:
    """Embedding values ``sigma_j(x_i)`` for each row, shape (N, n)."""
    return np.asarray(elements, dtype=float) @ field.embeddings.T


def frobenius_norms(field: NumberFieldSpec, elements) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(embed_values(field, np.atleast_2d(elements))) ** 2, axis=1))


def _adjugate_det(field: NumberFieldSpec, x):
    """Integer adjugate and determinant of multiplication-by-x, computed with fractions."""
    m = [[Fraction(int(v)) for v in row] for row in mult_matrices(field, [as_element(x)])[0]]
    d = len(m)
    aug = [row + [Fraction(int(i == j)) for j in range(d)] for i, row in enumerate(m)]
    det = Fraction(1)
    for col in range(d):
        p = next((i for i in range(col, d) if aug[i][col] != 0), None)
        if p is None:
            raise ValidationError("zero element has no associates")
        if p != col:
            aug[col], aug[p] = aug[p], aug[col]
            det = -det
        pv = aug[col][col]
        det *= pv
        aug[col] = [v / pv for v in aug[col]]
        for i in range(d):
            if i != col and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[col])]
    inv = [row[d:] for row in aug]
    adj = [[int(v * det) for v in row] for row in inv]
    return adj, int(det)


def _adjugates(field: NumberFieldSpec, elems: np.ndarray):
    """Exact adjugates and determinants of multiplication-by-x for each row."""
    m = mult_matrices(field, elems)
    num, d, _ = m.shape
    det = _det_exact(m)
    adj = np.empty((num, d, d), dtype=det.dtype if m.dtype != object else object)
    idx = np.arange(d)
    for i in range(d):
        rows = idx[idx != i]
        for j in range(d):
            cols = idx[idx != j]
            minor = m[:, rows][:, :, cols]
            cof = _det_exact(minor) if d > 1 else np.ones(num, dtype=m.dtype)
            if adj.dtype != object and cof.dtype == object:
                adj = adj.astype(object)
            adj[:, j, i] = cof if (i + j) % 2 == 0 else -cof
    return adj, det


def associates(field: NumberFieldSpec, x, y) -> bool:
    """True iff ``y = u x`` for a unit ``u``.

    Solves ``y = x z`` over the rationals and accepts when ``z`` is integral
    with norm 1.
    """
    xs, ys = as_element(x), as_element(y)
    if not any(xs) or not any(ys):
        raise ValidationError("associates() needs nonzero elements")
    adj, det = _adjugate_det(field, xs)
    num = [sum(a * b for a, b in zip(row, ys)) for row in adj]
    if any(v % det for v in num):
        return False
    z = tuple(v // det for v in num)
    return norm_abs(field, z) == 1


@dataclass(frozen=True)
class ClassPartition:
    """Associate classes of a set of elements.

    ``labels[i]`` is the class of row ``i``; class ``c`` has representative
    ``elements[reps[c]]`` (its lexicographically smallest member) and norm
    ``norms[c]``.
    """

    labels: np.ndarray
    reps: np.ndarray
    norms: np.ndarray
    sizes: np.ndarray

    def __len__(self) -> int:
        return self.reps.size


def partition_associates(field: NumberFieldSpec, elements, norms=None) -> ClassPartition:
    """Vectorised associate-class partition of the rows of ``elements``.

    Rows are grouped by norm first; within a group the lexicographically
    smallest unassigned element seeds a class and every remaining element
    ``y`` with ``adj(M_x) y = 0 mod N(x)`` joins it (equal norms make the
    quotient a unit).
    """
    elems = np.atleast_2d(np.asarray(elements))
    if elems.shape[0] == 0:
        z = np.zeros(0, dtype=np.int64)
        return ClassPartition(z, z, z, z)
    if np.any(np.all(elems == 0, axis=1)):
        raise ValidationError("associate classes are defined for nonzero elements only")
    if norms is None:
        norms = norms_abs(field, elems)
    norms = np.asarray(norms)
    # sort by (norm, lexicographic coordinates); a group is one norm value
    order = np.lexsort(elems.T[::-1])
    order = order[np.argsort(norms[order], kind="stable")]
    sorted_norms = norms[order]
    group = np.concatenate([[0], np.cumsum(sorted_norms[1:] != sorted_norms[:-1])]).astype(np.int64)
    labels_sorted = np.full(order.size, -1, dtype=np.int64)
    reps, rep_norms = [], []
    # each round seeds one new class per group (its first unassigned element)
    # and tests all open elements of all groups at once
    while True:
        open_pos = np.flatnonzero(labels_sorted < 0)
        if open_pos.size == 0:
            break
        grp_open = group[open_pos]
        first = np.concatenate([[True], grp_open[1:] != grp_open[:-1]])
        seed_pos = open_pos[first]
        counts = np.diff(np.append(np.flatnonzero(first), open_pos.size))
        new_ids = len(reps) + np.arange(seed_pos.size)
        reps.extend(order[seed_pos].tolist())
        rep_norms.extend(sorted_norms[seed_pos].tolist())
        adj, det = _adjugates(field, elems[order[seed_pos]])
        y = elems[order[open_pos]]
        if adj.dtype == object or y.dtype == object or (
            _maxabs(adj) * max(_maxabs(y), 1) * field.degree >= _INT64_SAFE
        ):
            adj = adj if adj.dtype == object else _to_object(adj)
            y = y if y.dtype == object else _to_object(y)
        prod = np.einsum("nij,nj->ni", np.repeat(adj, counts, axis=0), y)
        member = np.all(prod % np.repeat(det, counts)[:, None] == 0, axis=1)
        labels_sorted[open_pos[member]] = np.repeat(new_ids, counts)[member]
    labels = np.empty(order.size, dtype=np.int64)
    labels[order] = labels_sorted
    reps = np.asarray(reps, dtype=np.int64)
    # renumber classes by lexicographic order of representatives
    rank = np.argsort(np.lexsort(elems[reps].T[::-1]))
    labels = rank[labels]
    new_reps = np.empty_like(reps)
    new_reps[rank] = reps
    rep_norms = np.asarray(rep_norms)
    new_norms = np.empty_like(rep_norms)
    new_norms[rank] = rep_norms
    sizes = np.bincount(labels, minlength=reps.size)
    return ClassPartition(labels, new_reps, new_norms, sizes)


def associate_classes(field: NumberFieldSpec, elements: Sequence) -> list[list[RingElement]]:
    """Partition nonzero elements into associate classes.

    Classes are listed by representative (the lexicographically smallest
    member), members in lexicographic order.
    """
    elems = [as_element(e) for e in elements]
    if not elems:
        return []
    arr = np.asarray(elems, dtype=object if any(abs(v) >= _INT64_SAFE for e in elems for v in e) else np.int64)
    part = partition_associates(field, arr)
    out = []
    for c in range(len(part)):
        members = sorted(elems[i] for i in np.flatnonzero(part.labels == c))
        out.append(members)
    return out


# --------------------------------------------------------------------------
# enumeration

def enumerate_integers_ball(field: NumberFieldSpec, radius: float, budget: int | None = None) -> np.ndarray:
    """Elements with ``||psi(x)||_F <= radius``, as lexicographically sorted coordinate rows."""
    return enumerate_ball(field.lattice, radius, budget).coords


def _units_direct(field, radius, budget):
    coords = enumerate_integers_ball(field, radius, budget)
    coords = coords[np.any(coords != 0, axis=1)]
    return coords[norms_abs(field, coords) == 1]


def _units_log_cover(field, radius, budget):
    """Units in the ball via ellipsoids covering the norm-one surface.

    A unit with ``|sigma_j(u)| <= R`` has ``log2|sigma_j| = l_j`` with
    ``sum l_j = 0``. Setting ``t_j = floor(l_j)`` for ``j < n`` puts it in
    the polydisc ``|sigma_j| <= 2^(t_j+1)``, ``|sigma_n| <= 2^(-sum t_j)``,
    which sits inside an ellipsoid of bounded volume. Each ellipsoid is
    enumerated exactly and filtered by the exact unit test.
    """
    n = field.n
    log_r = math.log2(radius)
    lo = math.floor(-(n - 1) * log_r) - 1
    hi = math.floor(log_r) + 1
    base = field.lattice.basis
    found = []
    for t in np.ndindex(*([hi - lo + 1] * (n - 1))):
        ts = [lo + v for v in t]
        bounds = [2.0 ** (tj + 1) for tj in ts] + [2.0 ** (-sum(ts))]
        lower = [b / 2.0 for b in bounds[:-1]] + [bounds[-1] * 2.0 ** (1 - n)]
        if max(lower) > radius + BOUNDARY_SLACK:
            continue
        bounds = np.minimum(np.asarray(bounds), radius + BOUNDARY_SLACK)
        real = realify(base / bounds[None, :, None])
        coords = enumerate_quadratic_form(real @ real.T, math.sqrt(n), budget)
        if coords.size:
            found.append(coords)
    if not found:
        return np.zeros((0, field.degree), dtype=np.int64)
    cand = np.unique(np.concatenate(found), axis=0)
    cand = cand[np.any(cand != 0, axis=1)]
    cand = cand[frobenius_norms(field, cand) <= radius + BOUNDARY_SLACK]
    return cand[norms_abs(field, cand) == 1]


def enumerate_units_ball(field: NumberFieldSpec, radius: float, budget: int | None = None, method: str = "auto") -> np.ndarray:
    """Units ``u`` with ``||psi(u)||_F <= radius``, lexicographically sorted.

    ``method`` is ``"direct"`` (filter the whole ball), ``"cover"`` (see
    :func:`_units_log_cover`) or ``"auto"``, which uses the cover when the
    ball holds more than 10**5 points.
    """
    if radius < 0:
        raise ValidationError("radius must be nonnegative")
    if radius + BOUNDARY_SLACK < math.sqrt(field.n):
        return np.zeros((0, field.degree), dtype=np.int64)
    if method == "auto":
        try:
            count_ball(field.lattice, radius, 10**5)
            method = "direct"
        except EnumerationBudgetExceeded:
            method = "cover"
    if method == "direct":
        units = _units_direct(field, radius, budget)
    elif method == "cover":
        units = _units_log_cover(field, radius, budget)
    else:
        raise ValidationError(f"unknown method {method!r}")
    if units.shape[0] == 0:
        return units
    return units[np.lexsort(units.T[::-1])]


@dataclass(frozen=True)
class OrbitCount:
    count: int
    min_abs_embedding: float
    coordinate_bound: float  # R^-(n-1)

    @property
    def bound_holds(self) -> bool:
        return self.min_abs_embedding >= self.coordinate_bound * (1 - 1e-12)


def unit_orbit_count(field: NumberFieldSpec, x, radius: float, budget: int | None = None) -> OrbitCount:
    """Number of units ``u`` with ``||psi(u x)||_F <= radius``.

    Every such ``u`` has ``||psi(u)||_F <= sqrt(n) R^n`` because each
    ``|sigma_j(x)| >= R^-(n-1)``; that ball is searched and filtered.
    """
    xs = as_element(x)
    if not any(xs):
        raise ValidationError("unit_orbit_count needs a nonzero element")
    n = field.n
    vals = np.abs(embed_values(field, [xs])[0])
    if math.sqrt(float(np.sum(vals**2))) > radius + BOUNDARY_SLACK:
        raise ValidationError("element lies outside the ball of the given radius")
    search = math.sqrt(n) * radius**n
    units = enumerate_units_ball(field, search, budget)
    if units.shape[0] == 0:
        count = 0
    else:
        prods = ring_mul_many(field, units, np.tile(np.asarray(xs, dtype=np.int64), (units.shape[0], 1)))
        count = int(np.sum(frobenius_norms(field, prods.astype(float)) <= radius + BOUNDARY_SLACK))
    return OrbitCount(count, float(vals.min()), float(radius ** (-(n - 1))))
