import numpy as np
import pytest

from diracbie.algebra import (
    ALPHA,
    BETA,
    ID4,
    SIGMA,
    DiracMatrices,
    TransmissionParams,
    alpha_dot,
    mit_matrix,
    mit_projectors,
    p_tau,
    r_tau,
    shell_block_matrix,
    shell_sigma_min,
    upper_lower_blocks,
)

from conftest import random_normals


def test_clifford_relations():
    for j in range(3):
        for k in range(3):
            anti = ALPHA[j] @ ALPHA[k] + ALPHA[k] @ ALPHA[j]
            assert np.abs(anti - 2.0 * (j == k) * ID4).max() <= 1e-15
        assert np.abs(ALPHA[j] @ BETA + BETA @ ALPHA[j]).max() == 0.0
    assert np.array_equal(BETA @ BETA, ID4)


def test_matrices_are_hermitian_and_read_only():
    d = DiracMatrices.standard()
    for m in (*d.alphas, d.beta):
        assert np.allclose(m, m.conj().T)
    with pytest.raises(ValueError):
        ALPHA[0, 0, 0] = 1.0


def test_alpha_dot_matches_explicit_sum(rng):
    v = rng.standard_normal(3)
    explicit = sum(v[j] * ALPHA[j] for j in range(3))
    assert np.abs(alpha_dot(v) - explicit).max() <= 1e-15
    stack = rng.standard_normal((5, 2, 3))
    assert alpha_dot(stack).shape == (5, 2, 4, 4)


def test_alpha_dot_square_is_norm_squared(rng):
    v = rng.standard_normal(3)
    a = alpha_dot(v)
    assert np.abs(a @ a - (v @ v) * ID4).max() <= 1e-13


@pytest.mark.parametrize("n", [np.array([0.0, 0.0, 1.0]), np.array([0.6, 0.0, 0.8])])
def test_mit_matrix_involution(n):
    b = mit_matrix(n)
    assert np.abs(b @ b - ID4).max() <= 1e-15
    assert np.abs(b - b.conj().T).max() <= 1e-15


def test_mit_projector_laws(rng):
    for n in random_normals(rng, 50):
        pp, pm = mit_projectors(n)
        assert np.abs(pp @ pp - pp).max() <= 1e-14
        assert np.abs(pp @ pm).max() <= 1e-14
        assert np.abs(pp + pm - ID4).max() <= 1e-15
        assert np.abs(pp - pp.conj().T).max() <= 1e-15
        # the boundary form vanishes on the range of P_+
        assert np.abs(pp.conj().T @ (-1j * alpha_dot(n)) @ pp).max() <= 1e-14


def test_non_unit_normal_rejected():
    with pytest.raises(ValueError):
        mit_matrix([1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        p_tau([0.0, 0.0], 1.0)


def test_transfer_matrix_solves_transmission_condition(rng):
    # oracle: R_tau = -P_tau^{-1} P_tau^* by a generic linear solve
    for n in random_normals(rng, 10):
        for tau in (-3.0, -1.0, 0.0, 0.5, 1.7, 3.2):
            p = p_tau(n, tau)
            expected = -np.linalg.solve(p, p.conj().T)
            assert np.abs(r_tau(n, tau) - expected).max() <= 1e-12


def test_transfer_preserves_boundary_form(rng):
    for n in random_normals(rng, 50):
        an = alpha_dot(n)
        for tau in np.linspace(-4.0, 4.0, 25):
            r = r_tau(n, tau)
            assert np.abs(r.conj().T @ (-1j * an) @ r + 1j * an).max() <= 1e-10


def test_p_tau_commutes_with_alpha_n(rng):
    for n in random_normals(rng, 20):
        an = 1j * alpha_dot(n)
        p = p_tau(n, 1.3)
        assert np.abs(p @ an - an @ p).max() <= 1e-14


@pytest.mark.parametrize("eps", [1, -1])
def test_critical_uncoupling_pattern(rng, eps):
    for n in random_normals(rng, 20):
        ul, ur, ll, lr = upper_lower_blocks(r_tau(n, 2.0 * eps))
        assert np.abs(ul).max() <= 1e-15
        assert np.abs(lr).max() <= 1e-15
        sn = np.tensordot(n, SIGMA, axes=1)
        assert np.abs(ur - 1j * eps * sn).max() <= 1e-15
        assert np.abs(ll - 1j * eps * sn).max() <= 1e-15


def test_sigma_min_law_against_svd(rng):
    normals = random_normals(rng, 50)
    for tau in np.linspace(-4.0, 4.0, 25):
        s = np.linalg.svd(shell_block_matrix(normals, tau), compute_uv=False)
        assert np.abs(s[:, -1] - shell_sigma_min(tau)).max() <= 1e-10


def test_shell_block_singular_values_are_tau_half_plus_minus_one():
    s = np.linalg.svd(shell_block_matrix([0.0, 0.0, 1.0], 0.6), compute_uv=False)
    assert np.allclose(sorted(s), [0.7] * 4 + [1.3] * 4)


def test_transmission_params_epsilon():
    assert TransmissionParams(2.0).epsilon == 1
    assert TransmissionParams(-2.0).epsilon == -1
    assert TransmissionParams(-2.0).is_critical
    with pytest.raises(ValueError):
        TransmissionParams(1.0).epsilon
