import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stc_dmt.exceptions import InconsistentFieldSpec, ValidationError
from stc_dmt.numfield import (
    CATALOG_IDS,
    NumberFieldSpec,
    associate_classes,
    associates,
    catalog_field,
    embed,
    enumerate_integers_ball,
    enumerate_units_ball,
    frobenius_norms,
    is_unit,
    load_field_spec,
    norm_abs,
    norms_abs,
    partition_associates,
    resolve_field,
    ring_mul,
    unit_orbit_count,
)

Z8 = "Q(zeta8)"
G5 = "Q(i,sqrt5)"
ZETA = (0, 1, 0, 0)
THETA = (0, 1, 0, 0)


@pytest.fixture(scope="module")
def z8():
    return catalog_field(Z8)


@pytest.fixture(scope="module")
def g5():
    return catalog_field(G5)


def _fraction_det(m):
    """Exact Gaussian elimination over Fractions; independent oracle for norms."""
    a = [[Fraction(int(v)) for v in row] for row in m]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            for k in range(c, n):
                a[r][k] -= f * a[c][k]
    return det


def _mult_matrix(field, x):
    t = field.mul_tensor
    d = field.degree
    return [[sum(int(x[a]) * int(t[a, b, c]) for a in range(d)) for b in range(d)] for c in range(d)]


# catalog

def test_catalog_ids():
    assert set(CATALOG_IDS) == {Z8, G5}


def test_unknown_field():
    with pytest.raises(ValidationError):
        catalog_field("Q(sqrt2)")


def test_zeta8_zeta_squared_fixed(z8):
    zeta2 = ring_mul(z8, ZETA, ZETA)
    assert zeta2 == (0, 0, 1, 0)
    vals = np.diag(embed(z8, zeta2))
    assert np.allclose(vals, [1j, 1j])


def test_golden_theta_squared(g5):
    assert ring_mul(g5, THETA, THETA) == (1, 1, 0, 0)


def test_embed_examples(z8, g5):
    assert np.allclose(embed(z8, (1, 0, 0, 0)), np.eye(2))
    w = np.exp(1j * np.pi / 4)
    assert np.allclose(embed(z8, ZETA), np.diag([w, -w]))
    phi = (1 + math.sqrt(5)) / 2
    assert np.allclose(embed(g5, THETA), np.diag([phi, 1 - phi]))


def test_ring_mul_examples(z8, g5):
    x = (3, -1, 4, 1)
    assert ring_mul(z8, x, (1, 0, 0, 0)) == x
    assert ring_mul(z8, ZETA, (0, 0, 0, 1)) == (-1, 0, 0, 0)
    assert ring_mul(g5, THETA, (1, -1, 0, 0)) == (-1, 0, 0, 0)


def test_ring_mul_no_overflow(z8):
    big = (10**30, 0, 0, 0)
    assert ring_mul(z8, big, big) == (10**60, 0, 0, 0)
    assert norm_abs(z8, big) == 10**120


def test_norm_examples(z8):
    assert norm_abs(z8, (0, 0, 0, 0)) == 0
    assert norm_abs(z8, (1, 0, 0, 0)) == 1
    assert norm_abs(z8, (2, 0, 0, 0)) == 16
    assert norm_abs(z8, (1, 1, 0, -1)) == 1


def test_is_unit_examples(z8):
    assert is_unit(z8, (1, 0, 0, 0))
    assert is_unit(z8, ZETA)
    assert not is_unit(z8, (1, 1, 0, 0))
    assert norm_abs(z8, (1, 1, 0, 0)) == 2


def test_associates_examples(z8):
    x = (1, 1, 0, 0)
    assert associates(z8, x, x)
    assert associates(z8, x, ring_mul(z8, ZETA, x))
    assert not associates(z8, x, (2, 0, 0, 0))


def test_associates_rejects_zero(z8):
    with pytest.raises(ValidationError):
        associates(z8, (0, 0, 0, 0), (1, 0, 0, 0))


# field-spec validation

def _spec_kwargs(field):
    return dict(id="copy", n=field.n, mul_tensor=field.mul_tensor.copy(), embeddings=field.embeddings.copy(),
                unit_generators=field.unit_generators, pid=True)


def test_spec_rejects_broken_tensor(z8):
    kw = _spec_kwargs(z8)
    kw["mul_tensor"][1, 1] = [0, 0, 0, 1]
    with pytest.raises(InconsistentFieldSpec, match="inconsistent field spec"):
        NumberFieldSpec(**kw)


def test_spec_rejects_bad_embedding(z8):
    kw = _spec_kwargs(z8)
    kw["embeddings"][1, 1] *= 1.001
    with pytest.raises(InconsistentFieldSpec):
        NumberFieldSpec(**kw)


def test_spec_rejects_fake_unit(z8):
    kw = _spec_kwargs(z8)
    kw["unit_generators"] = ((1, 1, 0, 0),)
    with pytest.raises(InconsistentFieldSpec):
        NumberFieldSpec(**kw)


def test_spec_roundtrip_file(tmp_path, g5):
    path = tmp_path / "golden.json"
    path.write_text(g5.to_json())
    loaded = load_field_spec(path)
    assert loaded.n == 2 and loaded.pid
    assert np.array_equal(loaded.mul_tensor, g5.mul_tensor)
    assert resolve_field(str(path)).id == g5.id


def test_spec_file_missing_keys(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n": 2}))
    with pytest.raises(InconsistentFieldSpec):
        load_field_spec(path)


def test_spec_file_missing(tmp_path):
    with pytest.raises(ValidationError):
        resolve_field(str(tmp_path / "nope.json"))


# fuzzed algebraic invariants

@pytest.mark.parametrize("fid", [Z8, G5])
def test_homomorphism_and_multiplicativity(fid):
    field = catalog_field(fid)
    rng = np.random.default_rng(7)
    xs = rng.integers(-20, 21, size=(1000, 4))
    ys = rng.integers(-20, 21, size=(1000, 4))
    for x, y in zip(xs, ys):
        xy = ring_mul(field, x, y)
        lhs = embed(field, xy)
        rhs = embed(field, x) @ embed(field, y)
        assert np.allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))
        assert norm_abs(field, xy) == norm_abs(field, x) * norm_abs(field, y)


@pytest.mark.parametrize("fid", [Z8, G5])
def test_norm_matches_fraction_oracle(fid):
    field = catalog_field(fid)
    rng = np.random.default_rng(11)
    for x in rng.integers(-50, 51, size=(200, 4)):
        assert norm_abs(field, x) == abs(_fraction_det(_mult_matrix(field, x)))
        det_sq = abs(np.prod(np.diag(embed(field, x)))) ** 2
        assert det_sq == pytest.approx(norm_abs(field, x), rel=1e-8, abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-10**6, 10**6), min_size=4, max_size=4))
def test_batched_norms_match_scalar(x):
    field = catalog_field(Z8)
    assert norms_abs(field, [x])[0] == norm_abs(field, x)


@pytest.mark.parametrize("fid", [Z8, G5])
def test_unit_orbit_norm_invariance(fid):
    field = catalog_field(fid)
    units = enumerate_units_ball(field, 8.0)
    rng = np.random.default_rng(5)
    for x in rng.integers(-9, 10, size=(50, 4)):
        for u in units[:10]:
            assert norm_abs(field, ring_mul(field, u, x)) == norm_abs(field, x)


@pytest.mark.parametrize("fid", [Z8, G5])
def test_associates_is_equivalence(fid):
    field = catalog_field(fid)
    rng = np.random.default_rng(2)
    units = enumerate_units_ball(field, 5.0)
    base = [tuple(v) for v in rng.integers(-3, 4, size=(10, 4)) if np.any(v)]
    elems = base + [ring_mul(field, units[i % len(units)], base[i % len(base)]) for i in range(40)]
    elems = elems[:50]
    rel = [[associates(field, a, b) for b in elems] for a in elems]
    n = len(elems)
    for i in range(n):
        assert rel[i][i]
        for j in range(n):
            assert rel[i][j] == rel[j][i]
            if rel[i][j]:
                for k in range(n):
                    if rel[j][k]:
                        assert rel[i][k]
    # partition agrees with the pairwise relation
    part = partition_associates(field, np.array(elems))
    for i in range(n):
        for j in range(n):
            assert (part.labels[i] == part.labels[j]) == rel[i][j]


# enumeration

@pytest.mark.parametrize("fid", [Z8, G5])
def test_small_radius_only_zero(fid):
    field = catalog_field(fid)
    coords = enumerate_integers_ball(field, 0.5)
    assert coords.shape[0] == 1 and not coords.any()


def test_zeta8_radius_sqrt2_torsion(z8):
    coords = enumerate_integers_ball(z8, math.sqrt(2) + 0.01)
    nonzero = {tuple(c) for c in coords if any(c)}
    torsion = set()
    x = (1, 0, 0, 0)
    for _ in range(8):
        torsion.add(x)
        x = ring_mul(z8, x, ZETA)
    assert nonzero == torsion and len(torsion) == 8
    # oracle: exhaustive box search
    box = [c for c in itertools.product(range(-2, 3), repeat=4)
           if any(c) and frobenius_norms(z8, np.array([c]))[0] <= math.sqrt(2) + 0.01]
    assert set(box) == torsion


def test_ball_growth_factor(z8):
    ratio = enumerate_integers_ball(z8, 20).shape[0] / enumerate_integers_ball(z8, 10).shape[0]
    assert 14 <= ratio <= 18


@pytest.mark.parametrize("fid", [Z8, G5])
def test_min_determinant_at_radius_10(fid):
    field = catalog_field(fid)
    coords = enumerate_integers_ball(field, 10)
    coords = coords[np.any(coords != 0, axis=1)]
    norms = norms_abs(field, coords)
    assert np.all(norms >= 1)
    units = {tuple(u) for u in enumerate_units_ball(field, 10, method="direct")}
    assert {tuple(c) for c, v in zip(coords, norms) if v == 1} == units


def test_units_below_sqrt2_empty(z8, g5):
    assert enumerate_units_ball(z8, 1.4).shape[0] == 0
    assert enumerate_units_ball(g5, 1.4).shape[0] == 0


def test_units_at_sqrt2(z8):
    assert enumerate_units_ball(z8, math.sqrt(2)).shape[0] == 8


@pytest.mark.parametrize("fid,radius", [(Z8, 16), (Z8, 40), (G5, 16), (G5, 40)])
def test_unit_cover_matches_direct(fid, radius):
    field = catalog_field(fid)
    a = enumerate_units_ball(field, radius, method="direct")
    b = enumerate_units_ball(field, radius, method="cover")
    assert np.array_equal(a, b)
    assert np.all(norms_abs(field, b) == 1)


def test_unit_counts_zeta8(z8):
    counts = [enumerate_units_ball(z8, r).shape[0] for r in (4, 8, 16, 32, 64, 128, 256)]
    assert counts == [24, 40, 56, 56, 72, 88, 104]


def test_units_bad_method(z8):
    with pytest.raises(ValidationError):
        enumerate_units_ball(z8, 4.0, method="magic")


# classes

def test_torsion_is_one_class(z8):
    x, elems = (1, 0, 0, 0), []
    for _ in range(8):
        elems.append(x)
        x = ring_mul(z8, x, ZETA)
    classes = associate_classes(z8, elems)
    assert len(classes) == 1 and classes[0][0] == min(elems)


def test_distinct_norms_two_classes(z8):
    classes = associate_classes(z8, [(1, 1, 0, 0), (2, 0, 0, 0)])
    assert len(classes) == 2


def test_singleton_class(z8):
    assert associate_classes(z8, [(3, 1, 0, 0)]) == [[(3, 1, 0, 0)]]


def test_classes_share_norm(z8):
    coords = enumerate_integers_ball(z8, 6)
    coords = coords[np.any(coords != 0, axis=1)]
    part = partition_associates(z8, coords)
    norms = norms_abs(z8, coords)
    for c in range(len(part)):
        members = np.flatnonzero(part.labels == c)
        assert len(set(norms[members].tolist())) == 1
        rep = tuple(coords[part.reps[c]])
        assert rep == min(tuple(coords[m]) for m in members)


def test_partition_rejects_zero(z8):
    with pytest.raises(ValidationError):
        partition_associates(z8, np.array([[0, 0, 0, 0], [1, 0, 0, 0]]))


# unit orbits

def test_orbit_of_one(z8):
    assert unit_orbit_count(z8, (1, 0, 0, 0), math.sqrt(2)).count == 8


def test_orbit_errors(z8):
    with pytest.raises(ValidationError):
        unit_orbit_count(z8, (0, 0, 0, 0), 3.0)
    with pytest.raises(ValidationError):
        unit_orbit_count(z8, (5, 0, 0, 0), 3.0)


def test_orbit_counts_polylog(z8):
    radii = [4, 8, 16, 32]
    counts = [unit_orbit_count(z8, (1, 0, 0, 0), r).count for r in radii]
    units = [enumerate_units_ball(z8, r).shape[0] for r in radii]
    assert counts == units
    per_log = [c / math.log(r) for c, r in zip(counts, radii)]
    assert max(per_log) / min(per_log) < 2


@pytest.mark.parametrize("fid", [Z8, G5])
def test_coordinate_size_bound(fid):
    field = catalog_field(fid)
    R = 10.0
    coords = enumerate_integers_ball(field, R)
    coords = coords[np.any(coords != 0, axis=1)]
    vals = np.abs(np.stack([np.diag(embed(field, c)) for c in coords]))
    assert np.all(vals.min(axis=1) >= R ** (-(field.n - 1)) * (1 - 1e-12))
    rep = unit_orbit_count(field, coords[len(coords) // 2], R)
    assert rep.bound_holds
