import numpy as np
import pytest
from hypothesis import given, strategies as st

from herglotzsim.constraints import (ConstraintSet, PointKind, TransitionCase, UnilateralConstraint,
                                     active_matrix, classify_point, distribution_rank, rank_at,
                                     transition_case)
from herglotzsim.errors import InvalidTriple
from herglotzsim.scenarios import CylinderParams, SphereParams, build_cylinder, build_sphere


@pytest.fixture
def sphere_cs():
    return build_sphere(SphereParams(r=1.0)).cs


def test_sphere_active_matrix(sphere_cs):
    a, idx = active_matrix(sphere_cs, [-1.0, 0.0])
    assert a.shape == (0, 5) and idx.size == 0
    a, idx = active_matrix(sphere_cs, [1.0, 0.0])
    np.testing.assert_array_equal(a, [[1, 0, 0, -1, 0], [0, 1, 1, 0, 0]])
    np.testing.assert_array_equal(idx, [0, 1])


def test_cylinder_stance_rows():
    p = CylinderParams(r=0.5, gamma=0.2)
    cs = build_cylinder(p).cs
    phi = 0.7
    q = [0.0, 0.5 + 0.2 * np.cos(phi), phi, 0.0]
    a, idx = active_matrix(cs, q)
    np.testing.assert_allclose(a, [[1, 0, -(0.5 + 0.2 * np.cos(phi)), 0], [0, 1, 0.2 * np.sin(phi), -1]])
    assert rank_at(cs, [0.0, 3.0, phi, 0.0]) == 0


def test_rank_examples(sphere_cs):
    assert rank_at(sphere_cs, [-1.0, 0.0]) == 0
    assert distribution_rank(sphere_cs, [-1.0, 0.0]) == 5
    assert rank_at(sphere_cs, [1.0, 0.0]) == 2
    assert distribution_rank(sphere_cs, [1.0, 0.0]) == 3
    dup = ConstraintSet(rows=2, dim=2, psi=lambda q: np.array([[1.0, 0.0], [1.0, 0.0]]), rank_tol=1e-10)
    assert rank_at(dup, [0.0, 0.0]) == 1


def test_classify_examples(sphere_cs):
    assert classify_point(sphere_cs, [-1.0, 0.0], 0.01) is PointKind.REGULAR
    assert classify_point(sphere_cs, [0.0, 0.0], 0.01) is PointKind.SINGULAR
    const = ConstraintSet(rows=1, dim=2, psi=lambda q: np.array([[1.0, q[0]]]))
    assert classify_point(const, [0.3, -2.0], 0.1) is PointKind.REGULAR
    with pytest.raises(ValueError):
        classify_point(const, [0.0, 0.0], 0.0)


def test_classify_regular_away_from_edge(sphere_cs, rng):
    for _ in range(200):
        q = rng.uniform(-5, 5, size=2)
        if abs(q[0]) > 0.02:
            assert classify_point(sphere_cs, q, 0.01) is PointKind.REGULAR


def test_transition_cases():
    assert transition_case(0, 0, 2).case is TransitionCase.CASE1
    assert transition_case(0, 2, 2).jump
    assert transition_case(2, 2, 0).case is TransitionCase.CASE2
    assert not transition_case(2, 2, 0).jump
    assert transition_case(2, 0, 0).case is TransitionCase.CASE2
    t = transition_case(1, 1, 1)
    assert t.case is TransitionCase.NONE and not t.jump
    assert transition_case(2, 0, 1).case is TransitionCase.CASE3
    assert transition_case(2, 0, 1).jump


def test_transition_invalid():
    with pytest.raises(InvalidTriple):
        transition_case(0, 2, 1)
    with pytest.raises(InvalidTriple):
        transition_case(-1, 0, 0)


@given(seed=st.integers(0, 2**32 - 1), r=st.integers(1, 4), extra=st.integers(0, 3))
def test_rank_invariant_under_row_mixing(seed, r, extra):
    rng = np.random.default_rng(seed)
    n = r + extra
    a = rng.normal(size=(r, n))
    if rng.random() < 0.5 and r > 1:
        a[-1] = a[0] * rng.uniform(0.5, 2.0)
    mix = rng.normal(size=(r, r)) + 3.0 * np.eye(r)
    scale = np.diag(rng.uniform(0.1, 10.0, size=r))
    base = ConstraintSet(rows=r, dim=n, psi=lambda q: a)
    mixed = ConstraintSet(rows=r, dim=n, psi=lambda q: scale @ mix @ a)
    assert rank_at(base, np.zeros(1)) == rank_at(mixed, np.zeros(1))


def test_unilateral_validation():
    with pytest.raises(ValueError):
        UnilateralConstraint(gap=lambda q: q[0], gap_dq=lambda q: np.array([1.0]), restitution=1.5)
    uc = UnilateralConstraint(gap=lambda q: q[0] ** 2, gap_dq=lambda q: np.array([1.0]), restitution=0.5)
    with pytest.raises(ValueError):
        uc.check_gradient([2.0])


def test_matrix_rate_fd_matches_analytic():
    p = CylinderParams()
    cs = build_cylinder(p).cs
    fd = ConstraintSet(rows=2, dim=4, psi=cs.psi)
    q, qd = np.array([0.1, 0.2, 0.8, -0.3]), np.array([0.4, -0.2, 1.7, 0.3])
    np.testing.assert_allclose(fd.matrix_rate(q, qd), cs.matrix_rate(q, qd), atol=1e-8)
