import math

import numpy as np
import pytest

from heisenmix.core.errors import DomainError
from heisenmix.core.hgroup import (
    GaugeBall,
    GroupPoint,
    HomogeneousDim,
    ball_contains,
    compose,
    compose_coords,
    dilate,
    gauge_ball_volume,
    gauge_distance,
    gauge_norm,
    gauge_norm_coords,
    gauge_sphere_constant,
    inverse,
    inverse_coords,
    random_points,
)


def P(x, y, t):
    return GroupPoint((x,), (y,), t)


def test_compose_examples():
    xi = P(0.3, -1.2, 2.5)
    assert compose(xi, GroupPoint.origin()) == xi
    assert compose(xi, inverse(xi)) == GroupPoint.origin()
    assert compose(P(1, 0, 0), P(0, 1, 0)) == P(1, 1, -2)


def test_group_is_not_commutative():
    assert compose(P(0, 1, 0), P(1, 0, 0)) == P(1, 1, 2)
    assert compose(P(0, 1, 0), P(1, 0, 0)) != compose(P(1, 0, 0), P(0, 1, 0))


def test_inverse_examples():
    assert inverse(GroupPoint.origin()) == GroupPoint.origin()
    assert inverse(P(1, 2, 3)) == P(-1, -2, -3)
    xi = P(0.7, 0.1, -4.0)
    assert inverse(inverse(xi)) == xi


def test_non_finite_points_rejected():
    with pytest.raises(DomainError):
        P(math.nan, 0, 0)
    with pytest.raises(DomainError):
        GroupPoint((0.0,), (0.0,), math.inf)
    with pytest.raises(DomainError):
        GroupPoint((0.0, 1.0), (0.0,), 0.0)


def test_dilate_examples():
    xi = P(0.4, -0.3, 1.7)
    assert dilate(1.0, xi) == xi
    assert dilate(2.0, P(1, 1, 1)) == P(2, 2, 4)
    for lam in (0.5, 1.0, 2.0, 10.0):
        assert gauge_norm(dilate(lam, xi)) == pytest.approx(lam * gauge_norm(xi), rel=1e-14)
    with pytest.raises(DomainError):
        dilate(0.0, xi)
    with pytest.raises(DomainError):
        dilate(-1.0, xi)


def test_gauge_norm_examples():
    assert gauge_norm(GroupPoint.origin()) == 0.0
    assert gauge_norm(P(1, 0, 0)) == pytest.approx(1.0)
    assert gauge_norm(P(0, 0, 4)) == pytest.approx(2.0)
    assert gauge_norm(P(1, 1, 0)) == pytest.approx(math.sqrt(2.0))


def test_gauge_norm_large_inputs_do_not_overflow():
    # |z|^4 + t^2 would overflow; the norm itself is ~1e150
    big = np.array([1e100, 0.0, 1e300])
    assert gauge_norm_coords(big) == pytest.approx(1e150, rel=1e-12)


def test_gauge_distance():
    xi = P(0.2, 0.9, -0.4)
    assert gauge_distance(xi, xi) == 0.0
    assert gauge_distance(xi, GroupPoint.origin()) == pytest.approx(gauge_norm(xi))
    a, b = P(1, 0, 0), P(0, 1, 0)
    # b^-1 o a = (1, -1, 0 + 2*(-1)*1 - 0) = (1, -1, -2)
    assert gauge_distance(a, b) == pytest.approx((4.0 + 4.0) ** 0.25)


def test_ball_contains_is_strict():
    ball = GaugeBall(P(0.5, 0.5, 0.0), 1.0)
    assert ball_contains(ball, ball.center)
    edge = compose(ball.center, P(1.0, 0.0, 0.0))
    assert gauge_distance(edge, ball.center) == 1.0
    assert not ball_contains(ball, edge)


def test_dilation_maps_balls():
    rng = np.random.default_rng(3)
    pts = random_points(rng, 500, 1, 1.0)
    small = GaugeBall(GroupPoint.origin(), 0.6)
    big = GaugeBall(GroupPoint.origin(), 1.2)
    scaled = 2.0 * pts
    scaled[:, -1] = 4.0 * pts[:, -1]
    np.testing.assert_array_equal(small.contains_coords(pts), big.contains_coords(scaled))


def test_ball_rejects_bad_radius():
    with pytest.raises(DomainError):
        GaugeBall(GroupPoint.origin(), 0.0)


def test_homogeneous_dimension():
    assert HomogeneousDim(1).Q == 4
    assert HomogeneousDim(3).Q == 8
    with pytest.raises(DomainError):
        HomogeneousDim(0)


def test_coordinate_extent_covers_ball():
    rng = np.random.default_rng(11)
    ball = GaugeBall(P(0.8, -0.5, 0.3), 0.7)
    lo, hi = ball.coordinate_extent()
    pts = compose_coords(ball.center.to_array(), random_points(rng, 4000, 1, 0.7))
    inside = pts[ball.contains_coords(pts)]
    assert inside.shape[0] > 100
    assert np.all(inside >= lo) and np.all(inside <= hi)


def test_group_identities_in_bulk():
    rng = np.random.default_rng(5)
    a, b, c = (random_points(rng, 10_000, 2, 10.0) for _ in range(3))
    scale = 1.0 + np.max(np.abs(np.concatenate([a, b, c], axis=-1)), axis=-1, keepdims=True) ** 2
    assoc = compose_coords(compose_coords(a, b), c) - compose_coords(a, compose_coords(b, c))
    assert np.max(np.abs(assoc) / scale) < 1e-12
    target = compose_coords(a, inverse_coords(b))
    lhs = compose_coords(compose_coords(a, c), inverse_coords(compose_coords(b, c)))
    assert np.max(np.abs(lhs - target) / scale) < 1e-12
    norms = gauge_norm_coords(a)
    np.testing.assert_allclose(gauge_norm_coords(inverse_coords(a)), norms, rtol=0, atol=0)


def test_gauge_ball_volume_against_lattice_count():
    # |B_1| for N = 1 is pi^2 / 2
    assert gauge_ball_volume(1) == pytest.approx(math.pi ** 2 / 2.0, rel=1e-12)
    n = 81
    axis_xy = np.linspace(-1.0, 1.0, n)
    axis_t = np.linspace(-1.0, 1.0, n)
    X, Y, T = np.meshgrid(axis_xy, axis_xy, axis_t, indexing='ij')
    pts = np.stack([X.ravel(), Y.ravel(), T.ravel()], axis=-1)
    cell = (axis_xy[1] - axis_xy[0]) ** 2 * (axis_t[1] - axis_t[0])
    estimate = np.count_nonzero(gauge_norm_coords(pts) < 1.0) * cell
    assert estimate == pytest.approx(gauge_ball_volume(1), rel=0.03)
    assert gauge_sphere_constant(1) == pytest.approx(2.0 * math.pi ** 2, rel=1e-12)
