import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.special import elliprg, sph_harm_y

from diracbie.surface import (
    Ellipsoid,
    HarmonicSpectrum,
    Sphere,
    SpinorTrace,
    Torus,
    build_surface,
    inner,
    l2_norm,
    make_shape,
    random_spectrum,
    refine,
    sh_analyze,
    sh_index,
    sh_matrix,
    sh_synthesize,
    smooth_trace,
    sobolev_norm,
)


def ellipsoid_area(a, b, c):
    # Carlson form of the ellipsoid surface area
    return 4 * np.pi * a * b * c * elliprg(1 / a**2, 1 / b**2, 1 / c**2)


@pytest.mark.parametrize(
    "shape, exact",
    [
        (Sphere(1.0), 4 * np.pi),
        (Sphere(2.5), 4 * np.pi * 2.5**2),
        (Ellipsoid(1.0, 1.3, 0.8), ellipsoid_area(1.0, 1.3, 0.8)),
        (Torus(2.0, 0.7), 4 * np.pi**2 * 2.0 * 0.7),
    ],
)
def test_area_converges(shape, exact):
    errs = [abs(build_surface(shape, lev).area - exact) / exact for lev in (0, 1, 2)]
    assert errs[-1] <= 1e-10 or errs[-1] < errs[0] / 100


def test_node_counts_grow_fourfold():
    for shape in (Sphere(1.0), Torus(2.0, 0.7)):
        g0 = build_surface(shape, 0)
        g1 = refine(g0)
        assert g1.level == 1
        assert g1.n_nodes == 4 * g0.n_nodes
    assert build_surface(Torus(2.0, 0.7), 0).n_nodes == 100


@pytest.mark.parametrize("shape", [Sphere(1.3), Ellipsoid(1.0, 1.3, 0.8), Torus(2.0, 0.7)])
def test_nodes_on_surface_with_outward_unit_normals(shape):
    g = build_surface(shape, 1)
    assert np.abs(np.linalg.norm(g.normals, axis=1) - 1).max() <= 1e-14
    inside = shape.signed_distance_sign(g.nodes - 1e-3 * g.normals)
    outside = shape.signed_distance_sign(g.nodes + 1e-3 * g.normals)
    assert np.all(inside == 1) and np.all(outside == -1)
    if shape.kind != "torus":
        assert np.abs(np.sum((g.nodes / shape.axes) ** 2, axis=1) - 1).max() <= 1e-13


def test_grid_arrays_are_read_only(sphere0):
    with pytest.raises(ValueError):
        sphere0.nodes[0, 0] = 5.0


def test_quadrature_integrates_polynomials(sphere1):
    x = sphere1.nodes
    assert np.sum(sphere1.weights * x[:, 2] ** 2) == pytest.approx(4 * np.pi / 3, rel=1e-13)
    assert np.sum(sphere1.weights * x[:, 0] ** 4) == pytest.approx(4 * np.pi / 5, rel=1e-13)


def test_ellipsoid_closest_point_matches_optimizer():
    e = Ellipsoid(1.0, 1.3, 0.8)
    for x in ([0.3, 1.6, 0.2], [0.1, -0.2, 0.5], [2.0, 0.0, -1.0]):
        x = np.asarray(x)
        p = e.closest_point(x)
        res = minimize(
            lambda a: np.sum((e.axes * [np.sin(a[0]) * np.cos(a[1]), np.sin(a[0]) * np.sin(a[1]), np.cos(a[0])] - x) ** 2),
            x0=np.arccos(np.clip(e.to_unit(x)[2], -1, 1)) * np.array([1, 0]) + [0, np.arctan2(x[1], x[0])],
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 5000},
        )
        assert np.linalg.norm(p - x) <= np.sqrt(res.fun) + 1e-8


def test_torus_closest_point():
    t = Torus(2.0, 0.7)
    x = np.array([2.5, 0.0, 0.3])
    p = t.closest_point(x)
    expected = np.array([2.0, 0.0, 0.0]) + 0.7 * (x - [2.0, 0, 0]) / np.linalg.norm(x - [2.0, 0, 0])
    assert np.abs(p - expected).max() <= 1e-14


def test_invalid_shapes():
    with pytest.raises(ValueError):
        Torus(1.0, 2.0)
    with pytest.raises(ValueError):
        Ellipsoid(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        make_shape("cube")
    assert make_shape("torus", major=3.0, minor=1.0).params == {"major": 3.0, "minor": 1.0}


def test_sh_matrix_matches_scipy():
    th, ph = 0.7, 1.9
    y = sh_matrix(4, th, ph)[0]
    assert y[sh_index(3, -2)] == pytest.approx(sph_harm_y(3, -2, th, ph))
    assert y[sh_index(4, 4)] == pytest.approx(sph_harm_y(4, 4, th, ph))


def test_sh_orthonormal_on_grid(sphere1):
    y = sh_matrix(sphere1.band_limit, sphere1.param_coords[:, 0], sphere1.param_coords[:, 1])
    gram = (np.conj(y).T * sphere1.weights) @ y
    assert np.abs(gram - np.eye(y.shape[1])).max() <= 1e-12


@pytest.mark.parametrize("radius", [1.0, 2.0])
def test_analysis_synthesis_round_trip(radius, rng):
    g = build_surface(Sphere(radius), 1)
    spec = random_spectrum(g.band_limit, rng, radius=radius)
    f = sh_synthesize(spec, g)
    back = sh_analyze(f)
    assert np.abs(back.coeffs - spec.coeffs).max() <= 1e-11
    assert f.norm() == pytest.approx(sobolev_norm(spec, 0.0), rel=1e-12)


def test_sobolev_norm_of_single_harmonic(sphere1):
    c = np.zeros((4, (sphere1.band_limit + 1) ** 2), dtype=complex)
    c[2, sh_index(3, 1)] = 1.0
    f = sh_synthesize(HarmonicSpectrum(c, sphere1.band_limit), sphere1)
    for s in (-1.0, -0.5, 0.0, 0.5, 1.0):
        assert sobolev_norm(f, s) == pytest.approx(13.0 ** (s / 2), rel=1e-12)
    with pytest.raises(ValueError):
        sobolev_norm(f, 1.5)


def test_spectral_transforms_need_sphere(ellipsoid0, rng):
    with pytest.raises(ValueError):
        sh_analyze(smooth_trace(ellipsoid0, rng))
    with pytest.raises(ValueError):
        sh_analyze(smooth_trace(build_surface(Sphere(1.0), 0), rng), lmax=10)


def test_spinor_trace_arithmetic(sphere0, sphere1, rng):
    f = smooth_trace(sphere0, rng)
    g = smooth_trace(sphere0, rng)
    assert (f + g - g).values == pytest.approx(f.values)
    assert (2 * f).norm() == pytest.approx(2 * f.norm())
    assert inner(sphere0, f.values, f.values).real == pytest.approx(f.norm() ** 2)
    assert l2_norm(sphere0, f.vector) == pytest.approx(f.norm())
    with pytest.raises(ValueError):
        f + smooth_trace(sphere1, rng)
    with pytest.raises(ValueError):
        SpinorTrace(np.zeros((3, 4)), sphere0)


def test_smooth_trace_is_level_independent():
    g0 = build_surface(Sphere(1.0), 0)
    g1 = build_surface(Sphere(1.0), 1)
    f0 = smooth_trace(g0, np.random.default_rng(3))
    f1 = smooth_trace(g1, np.random.default_rng(3))
    # same polynomial, so the spectra agree up to the coarse band limit
    assert np.abs(sh_analyze(f0).coeffs - sh_analyze(f1, g0.band_limit).coeffs).max() <= 1e-12


def test_grid_csv(tmp_path, sphere0):
    p = tmp_path / "grid.csv"
    sphere0.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,y,z,nx,ny,nz,w"
    assert len(lines) == sphere0.n_nodes + 1
    assert sphere0.describe() == "sphere(radius=1)"
