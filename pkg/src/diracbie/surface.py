"""
Parametric closed surfaces, their quadrature grids and spectral transforms.

Sphere and ellipsoid share the unit-sphere chart ``x = A p`` with
``A = diag(a, b, c)`` and ``|p| = 1``. They are sampled on a product
Gauss-Legendre (colatitude) x trapezoid (longitude) grid, so no node sits on
a pole. The torus uses its angle chart with the trapezoid rule in both
periodic directions.

Nodes are stored ring by ring: ``index = ring * n_phi + j`` where ``ring``
enumerates colatitudes (poloidal angles on the torus) and ``j`` longitudes
(toroidal angles). Spinor vectors are flattened node-major, i.e. component
``a`` of node ``i`` lives at ``4 * i + a``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import sph_harm_y_all

DEFAULT_BASE = 5


# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class Ellipsoid:
    """Ellipsoid with semi-axes ``a, b, c`` along x, y, z."""

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0

    kind = "ellipsoid"
    topology = "sphere"

    def __post_init__(self):
        for v in self.axes:
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"semi-axes must be positive, got {self.axes}")

    @property
    def axes(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c], dtype=float)

    @property
    def params(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c}

    @property
    def diameter(self) -> float:
        return 2.0 * float(self.axes.max())

    @property
    def reach(self) -> float:
        """Smallest principal radius of curvature."""
        s = self.axes
        return float(min(s[i] ** 2 / s[j] for i in range(3) for j in range(3)))

    @property
    def inradius(self) -> float:
        """Half the shortest chord through the centre."""
        return float(self.axes.min())

    @property
    def is_axisymmetric(self) -> bool:
        return self.a == self.b

    def from_unit(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Map unit-sphere points to (points, outward normals, area factors)."""
        s = self.axes
        x = p * s
        q = p / s
        nq = np.linalg.norm(q, axis=-1)
        return x, q / nq[..., None], float(np.prod(s)) * nq

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        p = np.asarray(x, dtype=float) / self.axes
        return p / np.linalg.norm(p, axis=-1, keepdims=True)

    def closest_point(self, x) -> np.ndarray:
        """Closest surface point to ``x`` (found by a scalar secular equation)."""
        x = np.asarray(x, dtype=float)
        s2 = self.axes**2
        if np.allclose(s2, s2[0]):
            nrm = np.linalg.norm(x)
            if nrm == 0.0:
                return np.array([0.0, 0.0, self.c])
            return x * (self.a / nrm)

        def g(t):
            return np.sum(s2 * x**2 / (s2 + t) ** 2) - 1.0

        lo = -s2.min() * (1.0 - 1e-15)
        if g(lo) < 0.0 or np.any(np.abs(x[s2 == s2.min()]) < 1e-300):
            # degenerate medial-axis case: fall back to a dense search
            return self._closest_brute(x)
        hi = max(1.0, np.linalg.norm(x) * self.axes.max())
        while g(hi) > 0.0:
            hi *= 2.0
        t = brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
        return s2 * x / (s2 + t)

    def _closest_brute(self, x: np.ndarray) -> np.ndarray:
        th = np.linspace(0.0, np.pi, 401)
        ph = np.linspace(0.0, 2.0 * np.pi, 801)
        T, P = np.meshgrid(th, ph, indexing="ij")
        p = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
        y = p * self.axes
        return y[np.argmin(np.linalg.norm(y - x, axis=-1))]

    def signed_distance_sign(self, x) -> np.ndarray:
        """+1 inside, -1 outside, 0 on the surface."""
        v = np.sum((np.asarray(x, dtype=float) / self.axes) ** 2, axis=-1)
        return np.sign(1.0 - v)


@dataclass(frozen=True)
class Sphere(Ellipsoid):
    """Round sphere of radius ``radius`` centred at the origin."""

    radius: float = 1.0
    kind = "sphere"

    def __init__(self, radius: float = 1.0):
        object.__setattr__(self, "radius", float(radius))
        object.__setattr__(self, "a", float(radius))
        object.__setattr__(self, "b", float(radius))
        object.__setattr__(self, "c", float(radius))
        self.__post_init__()

    @property
    def params(self) -> dict:
        return {"radius": self.radius}


@dataclass(frozen=True)
class Torus:
    """Torus of revolution about the z axis with radii ``major > minor``."""

    major: float = 2.0
    minor: float = 0.7

    kind = "torus"
    topology = "torus"

    def __post_init__(self):
        if not (self.major > 0 and self.minor > 0):
            raise ValueError("torus radii must be positive")
        if self.minor >= self.major:
            raise ValueError(
                f"degenerate torus: minor radius {self.minor} >= major radius {self.major}"
            )

    @property
    def params(self) -> dict:
        return {"major": self.major, "minor": self.minor}

    @property
    def diameter(self) -> float:
        return 2.0 * (self.major + self.minor)

    @property
    def reach(self) -> float:
        return float(min(self.minor, self.major - self.minor))

    @property
    def inradius(self) -> float:
        """Tube radius: interior points stay inside the tube up to this depth."""
        return float(self.minor)

    @property
    def is_axisymmetric(self) -> bool:
        return True

    def chart(self, v, u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Points, outward normals and area factors at poloidal ``v``, toroidal ``u``."""
        v = np.asarray(v, dtype=float)
        u = np.asarray(u, dtype=float)
        cv, sv, cu, su = np.cos(v), np.sin(v), np.cos(u), np.sin(u)
        rho = self.major + self.minor * cv
        x = np.stack([rho * cu, rho * su, self.minor * sv], axis=-1)
        n = np.stack([cv * cu, cv * su, sv], axis=-1)
        return x, n, self.minor * rho

    def closest_angles(self, x) -> tuple[float, float]:
        x = np.asarray(x, dtype=float)
        u = float(np.arctan2(x[1], x[0]))
        rho = np.hypot(x[0], x[1])
        v = float(np.arctan2(x[2], rho - self.major))
        return v, u

    def closest_point(self, x) -> np.ndarray:
        v, u = self.closest_angles(x)
        return self.chart(v, u)[0]

    def signed_distance_sign(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        rho = np.hypot(x[..., 0], x[..., 1])
        d = np.hypot(rho - self.major, x[..., 2])
        return np.sign(self.minor - d)


def make_shape(kind: str, **params):
    """Construct a shape from its kind name and parameters."""
    if kind == "sphere":
        return Sphere(params.get("radius", params.get("R", 1.0)))
    if kind == "ellipsoid":
        return Ellipsoid(params.get("a", 1.0), params.get("b", 1.0), params.get("c", 1.0))
    if kind == "torus":
        return Torus(params.get("major", params.get("R", 2.0)), params.get("minor", params.get("r", 0.7)))
    raise ValueError(f"unknown surface kind {kind!r}")


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """Quadrature grid on a closed surface.

    ``param_coords`` holds ``(theta, phi)`` on sphere-like surfaces and
    ``(v, u)`` (poloidal, toroidal) on the torus; in both cases the first
    coordinate is constant along a ring.
    """

    shape: object
    level: int
    base: int
    n_theta: int
    n_phi: int
    nodes: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    param_coords: np.ndarray
    param_weights: np.ndarray
    jacobians: np.ndarray
    unit_points: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for a in (self.nodes, self.normals, self.weights, self.param_coords):
            a.setflags(write=False)

    @property
    def kind(self) -> str:
        return self.shape.kind

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    @property
    def spacing(self) -> float:
        """Mean node spacing ``sqrt(area / N)``."""
        return float(np.sqrt(self.area / self.n_nodes))

    @property
    def band_limit(self) -> int:
        """Highest spherical-harmonic degree the grid integrates exactly against itself."""
        if self.shape.topology != "sphere":
            raise ValueError("band limit is only defined for sphere-like grids")
        return self.n_theta - 1

    @cached_property
    def alpha_n(self) -> np.ndarray:
        """``(N, 4, 4)`` stack of ``alpha . n_i``."""
        from diracbie.algebra import alpha_dot

        return alpha_dot(self.normals)

    def describe(self) -> str:
        p = ",".join(f"{k}={v:g}" for k, v in self.shape.params.items())
        return f"{self.kind}({p})"

    def to_csv(self, path) -> None:
        """Write ``x,y,z,nx,ny,nz,w`` rows for inspection."""
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "nx", "ny", "nz", "w"])
            for x, n, wt in zip(self.nodes, self.normals, self.weights):
                w.writerow([repr(float(v)) for v in (*x, *n, wt)])


def _sphere_like_grid(shape, level: int, base: int) -> SurfaceGrid:
    n_theta = base * 2**level
    n_phi = 2 * n_theta
    t, wt = np.polynomial.legendre.leggauss(n_theta)
    t, wt = t[::-1], wt[::-1]  # north to south
    theta = np.arccos(t)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    T, P = T.ravel(), P.ravel()
    p = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    pw = np.repeat(wt, n_phi) * (2.0 * np.pi / n_phi)
    x, n, jac = shape.from_unit(p)
    return SurfaceGrid(
        shape=shape,
        level=level,
        base=base,
        n_theta=n_theta,
        n_phi=n_phi,
        nodes=x,
        normals=n,
        weights=pw * jac,
        param_coords=np.stack([T, P], axis=-1),
        param_weights=pw,
        jacobians=jac,
        unit_points=p,
    )


def _torus_grid(shape: Torus, level: int, base: int) -> SurfaceGrid:
    n_v = base * 2**level
    n_u = 2 * n_v * max(1, int(np.ceil(shape.major / (2.0 * shape.minor))))
    v = 2.0 * np.pi * np.arange(n_v) / n_v
    u = 2.0 * np.pi * np.arange(n_u) / n_u
    V, U = np.meshgrid(v, u, indexing="ij")
    V, U = V.ravel(), U.ravel()
    x, n, jac = shape.chart(V, U)
    pw = np.full(V.shape, (2.0 * np.pi) ** 2 / (n_v * n_u))
    return SurfaceGrid(
        shape=shape,
        level=level,
        base=base,
        n_theta=n_v,
        n_phi=n_u,
        nodes=x,
        normals=n,
        weights=pw * jac,
        param_coords=np.stack([V, U], axis=-1),
        param_weights=pw,
        jacobians=jac,
    )


def build_surface(shape, level: int, base: int = DEFAULT_BASE) -> SurfaceGrid:
    """Build the quadrature grid of ``shape`` at refinement ``level``.

    The ring count is ``base * 2**level`` so the node count grows 4x per level.
    ``shape`` may be a shape object or a kind name (default parameters).
    """
    if isinstance(shape, str):
        shape = make_shape(shape)
    if int(level) != level or level < 0:
        raise ValueError(f"level must be a non-negative integer, got {level}")
    if base < 2:
        raise ValueError("base ring count must be at least 2")
    if shape.topology == "sphere":
        return _sphere_like_grid(shape, int(level), int(base))
    return _torus_grid(shape, int(level), int(base))


def refine(grid: SurfaceGrid) -> SurfaceGrid:
    """Return the next refinement level of ``grid``."""
    return build_surface(grid.shape, grid.level + 1, grid.base)


# ---------------------------------------------------------------------------
# spinor traces


@dataclass(frozen=True, eq=False)
class SpinorTrace:
    """C^4 values at the nodes of a grid, shape ``(N, 4)``."""

    values: np.ndarray
    grid: SurfaceGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v.reshape(-1, 4)
        if v.shape != (self.grid.n_nodes, 4):
            raise ValueError(f"trace shape {v.shape} does not match grid with {self.grid.n_nodes} nodes")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_vector(cls, vec: np.ndarray, grid: SurfaceGrid) -> "SpinorTrace":
        return cls(np.asarray(vec).reshape(-1, 4), grid)

    @property
    def vector(self) -> np.ndarray:
        return self.values.reshape(-1)

    def norm(self) -> float:
        return l2_norm(self.grid, self.values)

    def __add__(self, other: "SpinorTrace") -> "SpinorTrace":
        _same_grid(self.grid, other.grid)
        return SpinorTrace(self.values + other.values, self.grid)

    def __sub__(self, other: "SpinorTrace") -> "SpinorTrace":
        _same_grid(self.grid, other.grid)
        return SpinorTrace(self.values - other.values, self.grid)

    def __mul__(self, s) -> "SpinorTrace":
        return SpinorTrace(self.values * s, self.grid)

    __rmul__ = __mul__


def _same_grid(a: SurfaceGrid, b: SurfaceGrid) -> None:
    if a is not b and (a.n_nodes != b.n_nodes or not np.array_equal(a.nodes, b.nodes)):
        raise ValueError("traces live on different grids")


def l2_norm(grid: SurfaceGrid, values: np.ndarray) -> float:
    """Quadrature L2 norm ``sqrt(sum_i w_i |f_i|^2)`` of node values."""
    v = np.asarray(values).reshape(grid.n_nodes, -1)
    return float(np.sqrt(np.sum(grid.weights[:, None] * np.abs(v) ** 2)))


def inner(grid: SurfaceGrid, f: np.ndarray, g: np.ndarray) -> complex:
    """Weighted inner product, antilinear in the first argument."""
    f = np.asarray(f).reshape(grid.n_nodes, -1)
    g = np.asarray(g).reshape(grid.n_nodes, -1)
    return complex(np.sum(grid.weights[:, None] * np.conj(f) * g))


# ---------------------------------------------------------------------------
# spherical harmonics


def sh_index(l: int, m: int) -> int:
    return l * l + l + m


def sh_degrees(lmax: int) -> np.ndarray:
    """Degree ``l`` of every flat coefficient index up to ``lmax``."""
    return np.concatenate([np.full(2 * l + 1, l) for l in range(lmax + 1)])


def sh_orders(lmax: int) -> np.ndarray:
    return np.concatenate([np.arange(-l, l + 1) for l in range(lmax + 1)])


def sh_matrix(lmax: int, theta, phi) -> np.ndarray:
    """Orthonormal complex spherical harmonics, shape ``(npts, (lmax+1)^2)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    y = sph_harm_y_all(lmax, lmax, theta, phi)
    ls = sh_degrees(lmax)
    ms = sh_orders(lmax)
    return np.ascontiguousarray(y[ls, ms].T)


def sh_matrix_points(lmax: int, p: np.ndarray) -> np.ndarray:
    """Spherical harmonics at unit vectors ``p`` of shape ``(npts, 3)``."""
    p = np.asarray(p, dtype=float)
    theta = np.arccos(np.clip(p[..., 2], -1.0, 1.0))
    phi = np.arctan2(p[..., 1], p[..., 0])
    return sh_matrix(lmax, theta.ravel(), phi.ravel())


@dataclass(frozen=True, eq=False)
class HarmonicSpectrum:
    """Component-wise spherical-harmonic coefficients of a spinor trace.

    ``coeffs`` has shape ``(4, (lmax+1)^2)``; flat index ``l*l + l + m``.
    The basis is orthonormal on the physical sphere of radius ``radius``.
    """

    coeffs: np.ndarray
    lmax: int
    radius: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (4, (self.lmax + 1) ** 2):
            raise ValueError(f"coefficient array shape {c.shape} does not match lmax={self.lmax}")
        object.__setattr__(self, "coeffs", c)

    def degree(self, l: int) -> np.ndarray:
        return self.coeffs[:, l * l : (l + 1) ** 2]

    def truncate(self, lmax: int) -> "HarmonicSpectrum":
        if lmax > self.lmax:
            c = np.zeros((4, (lmax + 1) ** 2), dtype=complex)
            c[:, : self.coeffs.shape[1]] = self.coeffs
            return HarmonicSpectrum(c, lmax, self.radius)
        return HarmonicSpectrum(self.coeffs[:, : (lmax + 1) ** 2].copy(), lmax, self.radius)


def _require_sphere(grid: SurfaceGrid) -> None:
    if grid.kind != "sphere":
        raise ValueError(f"spectral transforms need a sphere grid, got {grid.kind}")


def _grid_sh(grid: SurfaceGrid, lmax: int) -> np.ndarray:
    t, p = grid.param_coords[:, 0], grid.param_coords[:, 1]
    return sh_matrix(lmax, t, p)


def sh_analyze(f: SpinorTrace, lmax: int | None = None) -> HarmonicSpectrum:
    """Spherical-harmonic coefficients of each spinor component."""
    grid = f.grid
    _require_sphere(grid)
    lmax = grid.band_limit if lmax is None else int(lmax)
    if lmax > grid.band_limit:
        raise ValueError(f"lmax={lmax} exceeds the grid band limit {grid.band_limit}")
    R = grid.shape.radius
    y = _grid_sh(grid, lmax) / R
    c = (np.conj(y).T * grid.weights) @ f.values
    return HarmonicSpectrum(c.T, lmax, R)


def sh_synthesize(spec: HarmonicSpectrum, grid: SurfaceGrid) -> SpinorTrace:
    """Evaluate a spectrum at the grid nodes."""
    _require_sphere(grid)
    y = _grid_sh(grid, spec.lmax) / grid.shape.radius
    return SpinorTrace(y @ spec.coeffs.T, grid)


def sobolev_weights(lmax: int, s: float) -> np.ndarray:
    ls = sh_degrees(lmax)
    return (1.0 + ls * (ls + 1.0)) ** s


def spectrum_sobolev_norm(spec: HarmonicSpectrum, s: float) -> float:
    w = sobolev_weights(spec.lmax, s)
    return float(np.sqrt(np.sum(w[None, :] * np.abs(spec.coeffs) ** 2)))


def sobolev_norm(f, s: float, lmax: int | None = None) -> float:
    """Spectral ``H^s`` norm with weights ``(1 + l(l+1))^s``, ``-1 <= s <= 1``."""
    if not -1.0 <= s <= 1.0:
        raise ValueError("sobolev order must lie in [-1, 1]")
    spec = f if isinstance(f, HarmonicSpectrum) else sh_analyze(f, lmax)
    return spectrum_sobolev_norm(spec, s)


def random_spectrum(lmax: int, rng: np.random.Generator, radius: float = 1.0, decay: float = 0.0) -> HarmonicSpectrum:
    """Random complex coefficients with per-degree scale ``(1 + l(l+1))^(-decay/2)``."""
    n = (lmax + 1) ** 2
    c = rng.standard_normal((4, n)) + 1j * rng.standard_normal((4, n))
    c *= sobolev_weights(lmax, -0.5 * decay)[None, :]
    return HarmonicSpectrum(c, lmax, radius)


def smooth_trace(grid: SurfaceGrid, rng: np.random.Generator, degree: int = 3) -> SpinorTrace:
    """Random band-limited trace built from polynomials of degree ``degree`` in x, y, z.

    Works on every surface kind: it samples the restriction of a random
    polynomial spinor field.
    """
    x = grid.nodes / (0.5 * grid.shape.diameter)
    exps = [(i, j, k) for i in range(degree + 1) for j in range(degree + 1 - i) for k in range(degree + 1 - i - j)]
    mono = np.stack([x[:, 0] ** i * x[:, 1] ** j * x[:, 2] ** k for i, j, k in exps], axis=-1)
    c = rng.standard_normal((len(exps), 4)) + 1j * rng.standard_normal((len(exps), 4))
    return SpinorTrace(mono @ c, grid)
