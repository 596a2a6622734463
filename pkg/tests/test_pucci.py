import numpy as np
import pytest

from heisenmix.core.errors import DomainError
from heisenmix.core.hcalculus import HorizontalHessian
from heisenmix.core.pucci import (
    Ellipticity,
    linear_L_gamma,
    optimizer_matrix,
    pucci_minus,
    pucci_plus,
    random_admissible,
    random_symmetric,
)


E = Ellipticity(0.5, 3.0)


@pytest.mark.parametrize("n", [2, 4])
def test_identity_examples(n):
    I = np.eye(n)
    assert pucci_plus(I, E) == pytest.approx(n * E.Lam)
    assert pucci_plus(-I, E) == pytest.approx(-n * E.lam)
    assert pucci_minus(I, E) == pytest.approx(n * E.lam)
    assert pucci_minus(np.zeros((n, n)), E) == 0.0
    np.testing.assert_allclose(optimizer_matrix(I, E), E.Lam * I, atol=1e-14)


def test_mixed_sign_examples():
    M = np.diag([1.0, -1.0])
    assert pucci_plus(M, E) == pytest.approx(E.Lam - E.lam)
    np.testing.assert_allclose(optimizer_matrix(M, E), np.diag([E.Lam, E.lam]), atol=1e-14)


def test_accepts_horizontal_hessian():
    H = HorizontalHessian(np.array([[2.0, 1.0], [1.0, 2.0]]))
    # eigenvalues 1 and 3
    assert pucci_plus(H, E) == pytest.approx(4.0 * E.Lam)


def test_ellipticity_validation():
    with pytest.raises(DomainError):
        Ellipticity(2.0, 1.0)
    with pytest.raises(DomainError):
        Ellipticity(0.0, 1.0)


def test_rejects_non_symmetric():
    with pytest.raises(DomainError):
        pucci_plus(np.array([[0.0, 1.0], [0.0, 0.0]]), E)
    with pytest.raises(DomainError):
        pucci_plus(np.array([[np.nan, 0.0], [0.0, 1.0]]), E)


def test_duality_and_collapse(rng):
    A = random_symmetric(rng, 4, 10_000)
    np.testing.assert_allclose(pucci_plus(-A, E), -pucci_minus(A, E), atol=1e-12)
    unit = Ellipticity(1.0, 1.0)
    trace = np.trace(A, axis1=-2, axis2=-1)
    np.testing.assert_allclose(pucci_plus(A, unit), trace, atol=1e-12)
    np.testing.assert_allclose(pucci_minus(A, unit), trace, atol=1e-12)


def test_subadditivity_monotonicity_homogeneity(rng):
    A = random_symmetric(rng, 2, 10_000)
    B = random_symmetric(rng, 2, 10_000)
    assert np.all(pucci_plus(A + B, E) <= pucci_plus(A, E) + pucci_plus(B, E) + 1e-12)
    assert np.all(pucci_plus(A, E) <= pucci_plus(A + B @ B, E) + 1e-12)
    np.testing.assert_allclose(pucci_plus(3.5 * A, E), 3.5 * pucci_plus(A, E), rtol=1e-12, atol=1e-12)


def test_optimizer_matrix_properties(rng):
    for M in random_symmetric(rng, 2, 20):
        A = optimizer_matrix(M, E)
        assert np.sum(A * M) == pytest.approx(pucci_plus(M, E), abs=1e-10)
        spectrum = np.linalg.eigvalsh(A)
        assert spectrum[0] >= E.lam - 1e-12 and spectrum[-1] <= E.Lam + 1e-12
        others = np.einsum('kij,ij->k', random_admissible(rng, 2, E, 1000), M)
        assert np.max(others) <= np.sum(A * M) + 1e-10


def test_linear_L_gamma(rng):
    M = random_symmetric(rng, 2, 1)[0]
    unit = Ellipticity(1.0, 1.0)
    assert linear_L_gamma(np.eye(2), M, unit) == pytest.approx(np.trace(M))
    assert linear_L_gamma(np.sqrt(E.Lam) * np.eye(2), M, E) == pytest.approx(E.Lam * np.trace(M))
    for A in random_admissible(rng, 2, E, 50):
        gamma = np.linalg.cholesky(A)
        assert linear_L_gamma(gamma, M, E) <= pucci_plus(M, E) + 1e-10
    with pytest.raises(DomainError):
        linear_L_gamma(np.eye(2) * 10.0, M, E)
