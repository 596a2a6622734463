import numpy as np
import pytest

from heisenmix.core.errors import DomainError
from heisenmix.core.functions import parse_function
from heisenmix.core.hcalculus import (
    HorizontalHessian,
    SmoothFn,
    commutator_defect,
    degeneracy_matrix,
    dilated,
    fd_gradient,
    fd_hessian,
    horizontal_gradient,
    horizontal_hessian,
    linear_combination,
    nested_vector_field_derivative,
    sigma_at,
    sublaplacian,
    translate,
)
from heisenmix.core.hgroup import GroupPoint, compose, random_points


def P(x, y, t):
    return GroupPoint((x,), (y,), t)


def fn(expr, name="u"):
    return SmoothFn(expr, name=name)


x1 = fn(lambda c: c[..., 0], "x")
t_fn = fn(lambda c: c[..., 2], "t")


def test_sigma_frame():
    np.testing.assert_array_equal(sigma_at(GroupPoint.origin()).matrix, [[1, 0, 0], [0, 1, 0]])
    np.testing.assert_array_equal(sigma_at(P(1, 2, 0)).matrix, [[1, 0, 4], [0, 1, -2]])
    s = sigma_at(GroupPoint.origin()).matrix
    np.testing.assert_array_equal(s @ s.T, np.eye(2))


def test_sigma_frame_general_N():
    xi = GroupPoint((1.0, 2.0), (3.0, 4.0), 5.0)
    frame = sigma_at(xi)
    assert frame.N == 2
    expected = np.array([
        [1, 0, 0, 0, 6],
        [0, 1, 0, 0, 8],
        [0, 0, 1, 0, -2],
        [0, 0, 0, 1, -4],
    ], dtype=float)
    np.testing.assert_array_equal(frame.matrix, expected)


def test_horizontal_gradient_examples():
    xi = P(0.3, -0.7, 1.1)
    np.testing.assert_allclose(horizontal_gradient(x1, xi), [1.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(horizontal_gradient(t_fn, xi), [2 * -0.7, -2 * 0.3], atol=1e-9)
    const = parse_function("const:5")
    np.testing.assert_array_equal(horizontal_gradient(const, xi), [0.0, 0.0])


def test_horizontal_hessian_examples():
    xi = P(0.4, 0.2, -0.3)
    square = fn(lambda c: c[..., 0] ** 2)
    np.testing.assert_allclose(horizontal_hessian(square, xi).matrix, np.diag([2.0, 0.0]), atol=1e-6)
    np.testing.assert_allclose(horizontal_hessian(t_fn, xi).matrix, np.zeros((2, 2)), atol=1e-6)


def test_horizontal_hessian_is_symmetrized():
    h = HorizontalHessian(np.array([[1.0, 2.0], [0.0, 3.0]]))
    np.testing.assert_array_equal(h.matrix, [[1.0, 1.0], [1.0, 3.0]])
    with pytest.raises(DomainError):
        HorizontalHessian(np.zeros((3, 3)))


@pytest.mark.parametrize("point", [(0.0, 0.0, 0.0), (0.5, -0.25, 0.75), (-1.0, 0.6, -0.2)])
def test_sublaplacian_examples(point):
    xi = P(*point)
    x, y, _ = point
    assert sublaplacian(parse_function("quadratic"), xi) == pytest.approx(4.0, abs=1e-12)
    assert sublaplacian(parse_function("affine:3"), xi) == pytest.approx(0.0, abs=1e-12)
    t_squared = fn(lambda c: c[..., 2] ** 2)
    assert sublaplacian(t_squared, xi) == pytest.approx(8.0 * (x * x + y * y), abs=1e-5)


@pytest.mark.parametrize("u", [
    t_fn,
    fn(lambda c: c[..., 0] * c[..., 1]),
    parse_function("const:2"),
    fn(lambda c: c[..., 0] ** 2 * c[..., 2] - c[..., 1] ** 3 + c[..., 2] ** 2),
])
def test_commutator_defect_vanishes(u):
    rng = np.random.default_rng(1)
    for coords in random_points(rng, 20, 1, 1.0):
        assert abs(commutator_defect(u, GroupPoint.from_array(coords))) < 1e-4


def test_degeneracy_matrix():
    np.testing.assert_array_equal(degeneracy_matrix(GroupPoint.origin()), np.diag([1.0, 1.0, 0.0]))
    rng = np.random.default_rng(2)
    for coords in random_points(rng, 200, 1, 1.0):
        A = degeneracy_matrix(GroupPoint.from_array(coords))
        assert abs(np.linalg.det(A)) < 1e-10
        assert np.linalg.eigvalsh(A)[0] > -1e-10


def test_hessian_frame_matches_nested_vector_fields():
    u = fn(lambda c: c[..., 0] ** 2 * c[..., 1] + c[..., 2] ** 2 - c[..., 0] * c[..., 2] + c[..., 1] ** 4)
    rng = np.random.default_rng(4)
    for coords in random_points(rng, 10, 1, 0.5):
        H = horizontal_hessian(u, GroupPoint.from_array(coords)).matrix
        nested = np.array([[nested_vector_field_derivative(u, coords, i, j) for j in range(2)] for i in range(2)])
        np.testing.assert_allclose(H, 0.5 * (nested + nested.T), atol=1e-5)


def test_exact_derivatives_agree_with_differences():
    u = parse_function("gaussian_gauge")
    rng = np.random.default_rng(6)
    coords = random_points(rng, 50, 1, 0.8)
    np.testing.assert_allclose(u.gradient_at(coords), fd_gradient(u.values, coords), atol=1e-8)
    np.testing.assert_allclose(u.hessian_at(coords), fd_hessian(u.values, coords), atol=1e-6)


def test_left_invariance_of_horizontal_gradient():
    u = parse_function("gaussian_gauge")
    a = P(0.3, -0.2, 0.5)
    for xi in (P(0.1, 0.4, -0.3), P(-0.6, 0.2, 0.1)):
        np.testing.assert_allclose(
            horizontal_gradient(translate(u, a), xi),
            horizontal_gradient(u, compose(a, xi)),
            atol=1e-12,
        )


def test_translate_and_dilate_values():
    u = parse_function("gaussian_gauge")
    a = P(1.0, 0.5, -0.25)
    xi = P(0.2, 0.1, 0.3)
    assert translate(u, a)(xi) == pytest.approx(u(compose(a, xi)), rel=1e-14)
    v = dilated(u, 2.0)
    assert v(xi) == pytest.approx(u(P(0.4, 0.2, 1.2)), rel=1e-14)
    coords = xi.to_array()
    np.testing.assert_allclose(v.hessian_at(coords), fd_hessian(v.values, coords), atol=1e-5)
    with pytest.raises(DomainError):
        dilated(u, 0.0)


def test_linear_combination_bound_and_values():
    combo = linear_combination([(2.0, parse_function("const:3")), (-1.0, parse_function("gaussian_gauge"))])
    assert combo.sup_abs == pytest.approx(7.0)
    assert combo(GroupPoint.origin()) == pytest.approx(5.0)
    unbounded = linear_combination([(1.0, parse_function("quadratic"))])
    assert unbounded.sup_abs is None
