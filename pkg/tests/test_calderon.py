import numpy as np
import pytest

from diracbie.calderon import (
    IDENTITY_NAMES,
    CalderonSuite,
    harmonic_trace,
    identity_residuals,
    loglog_slope,
    make_anticommutator,
    operator_norm,
    restricted_norm,
    smoothing_profile,
    test_space as make_test_space,
)
from diracbie.layerpot import BoundaryOperator, assemble_cs
from diracbie.surface import Sphere, build_surface, inner


@pytest.fixture(scope="module")
def suites(sphere0, sphere1):
    return {
        (lev, m): CalderonSuite.build(g, 1.0, m)
        for lev, g in ((0, sphere0), (1, sphere1))
        for m in ("offsurface", "pv_direct")
    }


def test_test_space_is_weighted_orthonormal(sphere1, torus0):
    for g in (sphere1, torus0):
        Q = make_test_space(g)
        w = np.repeat(g.weights, 4)
        gram = Q.conj().T @ (w[:, None] * Q)
        assert np.abs(gram - np.eye(Q.shape[1])).max() <= 1e-12


def test_power_iteration_matches_svd(sphere0, rng):
    n = 4 * sphere0.n_nodes
    M = rng.standard_normal((n, n))
    Q = make_test_space(sphere0)
    power = restricted_norm(M @ Q, sphere0, "power")
    exact = restricted_norm(M @ Q, sphere0, "svd")
    assert power <= exact * (1 + 1e-12)
    assert power == pytest.approx(exact, rel=5e-2)
    assert operator_norm(BoundaryOperator.identity(sphere0), sphere0, Q, "svd") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        restricted_norm(M @ Q, sphere0, "lanczos")


def test_partition_exact(suites):
    s = suites[(1, "offsurface")]
    total = s.Cal_plus.matrix + s.Cal_minus.matrix
    assert np.abs(total - np.eye(total.shape[0])).max() <= 1e-13


def test_identity_residuals_small_and_shrinking(suites, sphere0, sphere1):
    r0 = identity_residuals(sphere0, 1.0, suite=suites[(0, "offsurface")], norm_method="svd")
    r1 = identity_residuals(sphere1, 1.0, suite=suites[(1, "offsurface")], norm_method="svd")
    assert set(r1) == set(IDENTITY_NAMES)
    for name in IDENTITY_NAMES:
        if name != "partition":
            assert r1[name] < r0[name]
            assert r1[name] <= 5e-3


def test_pv_direct_is_spectrally_exact_on_the_sphere(suites, sphere1):
    r = identity_residuals(sphere1, 1.0, suite=suites[(1, "pv_direct")], norm_method="svd")
    assert max(r.values()) <= 1e-11


def test_star_identity_from_jump(suites):
    # with pv_direct the star projectors equal Cal_pm -+ i A exactly
    s = suites[(1, "pv_direct")]
    assert np.abs(s.Star_plus.matrix - (s.Cal_plus.matrix - 1j * s.A.matrix)).max() <= 1e-12


def test_cs_is_self_adjoint_in_weighted_product(suites, sphere1, rng):
    s = suites[(1, "offsurface")]
    f = harmonic_trace(sphere1, 2, 1, 0)
    g = harmonic_trace(sphere1, 3, -1, 2)
    lhs = inner(sphere1, s.Cs.apply(f).values, g.values)
    rhs = inner(sphere1, f.values, s.Cs.apply(g).values)
    assert abs(lhs - rhs) <= 1e-4


def test_anticommutator_smoothing_profile():
    g = build_surface(Sphere(1.0), 1)
    A = make_anticommutator(assemble_cs(g, 1.0, "pv_direct"), g)
    prof = smoothing_profile(A, g, [1, 2, 4, 8])
    assert loglog_slope(prof) <= -0.8
    # callable form gives the same numbers
    prof2 = smoothing_profile(lambda v: (A.matrix @ v.reshape(-1)).reshape(-1, 4), g, [1, 2, 4, 8])
    assert np.allclose([p[1] for p in prof], [p[1] for p in prof2])
    with pytest.raises(ValueError):
        smoothing_profile(A, g, [12])


def test_anticommutator_vanishes_for_massless_sphere():
    g = build_surface(Sphere(1.0), 1)
    A = make_anticommutator(assemble_cs(g, 0.0, "pv_direct"), g)
    prof = smoothing_profile(A, g, [1, 2, 4])
    assert max(p[1] for p in prof) <= 1e-10


def test_loglog_slope_of_power_law():
    assert loglog_slope([(l, 3.0 * l**-2) for l in (2, 4, 8, 16)]) == pytest.approx(-2.0)
