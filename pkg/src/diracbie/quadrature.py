"""
Singular and near-singular surface quadrature for the Dirac layer kernel.

The layer kernel is split into scalar channels: three vector channels
``i f(r) z_c`` that multiply ``alpha_c`` and, for ``mu != 0``, the channel
``psi(r)`` that multiplies ``mu beta``. For every target the quadrature
produces one row per channel; rows are combined into spinor operators by
``diracbie.layerpot``.

Sphere-like surfaces use a polar rule on the whole parameter sphere centred
at the target (rotated pole). The density is interpolated by spherical
harmonics of degree ``n_theta - 1``; the rotation of harmonics is done with
Wigner small-d matrices, so all targets of one ring share the same work.
Row blocks are therefore kept in factored form ``B @ A`` with ``A`` the
harmonic analysis matrix.

The torus uses a polar patch in metric-scaled angle coordinates with a
smooth partition of unity. The patch carries the singular part and the
remainder uses the native trapezoid rule. Rows for one target per ring are
computed and the rest follow from rotational symmetry about the z axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from diracbie.kernels import psi_radial, vector_radial
from diracbie.surface import SurfaceGrid, sh_degrees, sh_matrix, sh_matrix_points, sh_orders


@dataclass(frozen=True)
class QuadratureOptions:
    """Resolution knobs of the singular quadrature."""

    panel_order: int = 12
    angular_extra: int = 16
    patch_fraction: float = 0.6
    grading: float = 0.5


@dataclass
class KernelRows:
    """Per-channel scalar rows ``R_k`` of shape ``(K, N, N)``.

    Stored either dense (``analysis is None``) or factored as
    ``factors @ analysis`` with ``factors`` of shape ``(K, N, M)``.
    """

    factors: np.ndarray
    analysis: np.ndarray | None = None

    @property
    def n_channels(self) -> int:
        return self.factors.shape[0]

    def dense(self) -> np.ndarray:
        if self.analysis is None:
            return self.factors
        return self.factors @ self.analysis

    def apply(self, g: np.ndarray) -> np.ndarray:
        """Apply every channel to node values ``g`` of shape ``(N, d)``."""
        if self.analysis is None:
            return self.factors @ g
        return self.factors @ (self.analysis @ g)

    def scaled_add(self, other: "KernelRows", s: complex) -> "KernelRows":
        if (self.analysis is None) != (other.analysis is None):
            raise ValueError("cannot combine dense and factored rows")
        return KernelRows(self.factors + s * other.factors, self.analysis)

    @staticmethod
    def combination(rows: list["KernelRows"], coeffs) -> "KernelRows":
        out = KernelRows(coeffs[0] * rows[0].factors, rows[0].analysis)
        for r, c in zip(rows[1:], coeffs[1:]):
            out.factors += c * r.factors
        return out


def kernel_channels(z: np.ndarray, mu: float) -> np.ndarray:
    """Scalar channels of ``phi(z)`` with shape ``(K, ...)``.

    Channels ``0..2`` are ``i f(r) z_c`` and channel 3 (only when ``mu != 0``)
    is ``psi(r)``.
    """
    r = np.linalg.norm(z, axis=-1)
    f = vector_radial(mu, r)
    ch = [1j * f * z[..., c] for c in range(3)]
    if mu != 0.0:
        ch.append(psi_radial(mu, r).astype(complex))
    return np.stack(ch, axis=0)


def n_channels(mu: float) -> int:
    return 3 if mu == 0.0 else 4


def _gl_panels(breaks: np.ndarray, order_fn) -> tuple[np.ndarray, np.ndarray]:
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        q = order_fn(b - a)
        t, w = np.polynomial.legendre.leggauss(q)
        xs.append(0.5 * (b - a) * t + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def graded_breaks(start: float, stop: float, grading: float) -> np.ndarray:
    """Panel breaks ``0, start, 2 start, 4 start, ...`` up to ``stop``.

    With ``start <= 0`` a short uniform split of ``[0, stop]`` is returned.
    """
    if start <= 0.0:
        return np.linspace(0.0, stop, 5)
    br = [0.0]
    s = start * grading
    while s < stop / 1.5:
        br.append(s)
        s *= 2.0
    br.append(stop)
    return np.array(br)


def wigner_d_blocks(lmax: int, beta: float) -> list[np.ndarray]:
    """Real Wigner small-d matrices ``d^l(beta)`` for ``l = 0..lmax``.

    With scipy's harmonics ``Y_l(R_y(beta) p) = d^l(beta) Y_l(p)``.
    """
    return [_wigner_eig(l, beta) for l in range(lmax + 1)]


_EIG_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _wigner_eig(l: int, beta: float) -> np.ndarray:
    if l not in _EIG_CACHE:
        m = np.arange(-l, l + 1)
        jp = np.zeros((2 * l + 1, 2 * l + 1))
        for i, mm in enumerate(m[:-1]):
            jp[i + 1, i] = np.sqrt(l * (l + 1) - mm * (mm + 1))
        jy = (jp - jp.T) / 2j
        lam, v = np.linalg.eigh(jy)
        _EIG_CACHE[l] = (np.round(lam), v)
    lam, v = _EIG_CACHE[l]
    return ((v * np.exp(-1j * beta * lam)) @ v.conj().T).real


def rotation_matrix(theta0: float, phi0: float) -> np.ndarray:
    """``R_z(phi0) R_y(theta0)``: maps the north pole to ``(theta0, phi0)``."""
    ct, st, cp, sp = np.cos(theta0), np.sin(theta0), np.cos(phi0), np.sin(phi0)
    ry = np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])
    rz = np.array([[cp, -sp, 0.0], [sp, cp, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry


def _rotz(delta: float) -> np.ndarray:
    c, s = np.cos(delta), np.sin(delta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


class SphereCapQuadrature:
    """Rotated-pole polar quadrature on sphere-like surfaces."""

    def __init__(self, grid: SurfaceGrid, options: QuadratureOptions | None = None):
        if grid.shape.topology != "sphere":
            raise ValueError("SphereCapQuadrature needs a sphere-like grid")
        self.grid = grid
        self.opt = options or QuadratureOptions()
        self.L = grid.n_theta - 1
        n_ang = 2 * self.L + 2 + self.opt.angular_extra
        self.n_ang = n_ang + (n_ang % 2)
        self.ang = 2.0 * np.pi * np.arange(self.n_ang) / self.n_ang
        self.ring_theta = grid.param_coords[:: grid.n_phi, 0]
        self._ls = sh_degrees(self.L)
        self._ms = sh_orders(self.L)

    @cached_property
    def analysis(self) -> np.ndarray:
        """``(M, N)`` map from node values to parameter-sphere harmonic coefficients."""
        g = self.grid
        y = sh_matrix(self.L, g.param_coords[:, 0], g.param_coords[:, 1])
        return np.ascontiguousarray((np.conj(y) * g.param_weights[:, None]).T)

    def radial_rule(self, h: float) -> tuple[np.ndarray, np.ndarray]:
        amax = float(self.grid.shape.axes.max())
        L = self.L
        q0 = self.opt.panel_order

        def order(length):
            return max(q0, int(np.ceil(0.5 * L * length)) + q0 // 2)

        return _gl_panels(graded_breaks(h / amax, np.pi, self.opt.grading), order)

    def _points(self, rot: np.ndarray, rad: np.ndarray) -> np.ndarray:
        st, ct = np.sin(rad), np.cos(rad)
        ca, sa = np.cos(self.ang), np.sin(self.ang)
        p = np.stack(
            [st[:, None] * ca[None, :], st[:, None] * sa[None, :], np.broadcast_to(ct[:, None], (rad.size, self.n_ang))],
            axis=-1,
        )
        return p @ rot.T

    def _weights(self, rad, rw):
        return (rw * np.sin(rad))[:, None] * (2.0 * np.pi / self.n_ang)

    def ring_factors(self, ring: int, h: float, side: int, mu: float) -> np.ndarray:
        """Factored rows ``(K, n_phi, M)`` for all targets on ``ring``.

        Targets sit at ``x_i - side * h * n_i`` (``side = +1`` interior).
        """
        g = self.grid
        shape = g.shape
        rad, rw = self.radial_rule(h)
        theta0 = self.ring_theta[ring]
        idx = ring * g.n_phi + np.arange(g.n_phi)
        K = n_channels(mu)
        L = self.L
        nr = rad.size
        base_w = self._weights(rad, rw)
        # on a surface of revolution every target of the ring is a z-rotation
        # of the first one, so a single reference target suffices
        symmetric = shape.is_axisymmetric
        targets = idx[:1] if symmetric else idx
        G = np.empty((targets.size, K, nr, self.n_ang), dtype=complex)
        for t, i in enumerate(targets):
            rot = rotation_matrix(theta0, g.param_coords[i, 1])
            p = self._points(rot, rad)
            y, _, jac = shape.from_unit(p)
            X = g.nodes[i] - side * h * g.normals[i]
            G[t] = kernel_channels(X - y, mu) * (base_w * jac)[None]
        # sum over the angle against exp(i m' angle)
        F = np.fft.ifft(G, axis=-1) * self.n_ang
        ms = np.arange(-L, L + 1)
        ystd = sh_matrix(L, rad, np.zeros_like(rad))  # (nr, M)
        H = np.zeros((targets.size, K, (L + 1) ** 2), dtype=complex)
        for m in ms:
            cols = np.nonzero(self._ms == m)[0]
            H[:, :, cols] = F[:, :, :, m % self.n_ang] @ ystd[:, cols]
        d = wigner_d_blocks(L, theta0)
        B = np.empty_like(H)
        for l in range(L + 1):
            sl = slice(l * l, (l + 1) ** 2)
            B[:, :, sl] = H[:, :, sl] @ d[l].T
        if symmetric:
            delta = g.param_coords[idx, 1] - g.param_coords[idx[0], 1]
            rz = np.stack([_rotz(dl) for dl in delta])
            full = np.empty((g.n_phi, K, B.shape[-1]), dtype=complex)
            full[:, :3] = np.einsum("tcd,dm->tcm", rz, B[0, :3])
            if K == 4:
                full[:, 3] = B[0, 3]
            B = full
        phase = np.exp(1j * np.outer(g.param_coords[idx, 1], self._ms))
        B *= phase[:, None, :]
        return np.transpose(B, (1, 0, 2))

    def rows(self, h: float, side: int, mu: float) -> KernelRows:
        g = self.grid
        K = n_channels(mu)
        out = np.empty((K, g.n_nodes, (self.L + 1) ** 2), dtype=complex)
        for ring in range(g.n_theta):
            out[:, ring * g.n_phi : (ring + 1) * g.n_phi] = self.ring_factors(ring, h, side, mu)
        return KernelRows(out, self.analysis)

    def point_factors(self, x_base: np.ndarray, X: np.ndarray, h: float, mu: float) -> np.ndarray:
        """Factored row ``(K, M)`` for an arbitrary target ``X`` near ``x_base``.

        ``x_base`` is the surface point closest to ``X`` and ``h`` their distance.
        """
        shape = self.grid.shape
        p0 = shape.to_unit(x_base)
        theta0 = np.arccos(np.clip(p0[2], -1.0, 1.0))
        phi0 = np.arctan2(p0[1], p0[0])
        rad, rw = self.radial_rule(h)
        p = self._points(rotation_matrix(theta0, phi0), rad)
        y, _, jac = shape.from_unit(p)
        kw = kernel_channels(X - y, mu) * (self._weights(rad, rw) * jac)[None]
        Y = sh_matrix_points(self.L, p.reshape(-1, 3))
        return kw.reshape(kw.shape[0], -1) @ Y


def bump(t: np.ndarray) -> np.ndarray:
    """Smooth cutoff: 1 at ``t = 0``, 0 for ``t >= 1``, flat at both ends."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = t < 1.0
    ti = np.clip(t[inside], 1e-300, None)
    with np.errstate(over="ignore", under="ignore"):
        out[inside] = np.exp(2.0 * np.exp(-1.0 / ti) / (ti - 1.0))
    return out


class TorusPatchQuadrature:
    """Polar patch plus partition of unity on the torus."""

    def __init__(self, grid: SurfaceGrid, options: QuadratureOptions | None = None):
        if grid.kind != "torus":
            raise ValueError("TorusPatchQuadrature needs a torus grid")
        self.grid = grid
        self.opt = options or QuadratureOptions()
        sh = grid.shape
        self.radius = self.opt.patch_fraction * np.pi * min(sh.minor, sh.major - sh.minor)
        self.nv, self.nu = grid.n_theta, grid.n_phi
        n_ang = max(int(np.ceil(self.nv * self.radius / sh.minor)), 32) + self.opt.angular_extra
        self.n_ang = n_ang + (n_ang % 2)
        self.ang = 2.0 * np.pi * np.arange(self.n_ang) / self.n_ang
        self.kv = np.arange(-(self.nv // 2), self.nv // 2 + 1)
        self.ku = np.arange(-(self.nu // 2), self.nu // 2 + 1)

    def _analysis_1d(self, n: int, k: np.ndarray) -> np.ndarray:
        t = 2.0 * np.pi * np.arange(n) / n
        a = np.exp(-1j * np.outer(k, t)) / n
        if n % 2 == 0:
            a[0] *= 0.5
            a[-1] *= 0.5
        return a

    @cached_property
    def analysis_v(self) -> np.ndarray:
        return self._analysis_1d(self.nv, self.kv)

    @cached_property
    def analysis_u(self) -> np.ndarray:
        return self._analysis_1d(self.nu, self.ku)

    def radial_rule(self, h: float) -> tuple[np.ndarray, np.ndarray]:
        q0 = self.opt.panel_order
        freq = self.nv / (4.0 * self.grid.shape.minor)

        def order(length):
            return max(q0, int(np.ceil(freq * length)) + q0 // 2)

        return _gl_panels(graded_breaks(h, self.radius, self.opt.grading), order)

    def _scales(self, v0: float) -> tuple[float, float]:
        sh = self.grid.shape
        return sh.minor, sh.major + sh.minor * np.cos(v0)

    def _patch_row(self, v0: float, u0: float, X: np.ndarray, h: float, mu: float) -> np.ndarray:
        """Patch contribution as a dense grid row ``(K, N)``."""
        sh = self.grid.shape
        sv, su = self._scales(v0)
        rad, rw = self.radial_rule(h)
        ca, sa = np.cos(self.ang), np.sin(self.ang)
        v = v0 + np.outer(rad, ca) / sv
        u = u0 + np.outer(rad, sa) / su
        y, _, jac = sh.chart(v, u)
        w = (rw * rad * bump(rad / self.radius))[:, None] * (2.0 * np.pi / self.n_ang) / (sv * su) * jac
        kw = kernel_channels(X - y, mu) * w[None]
        ev = np.exp(1j * v.reshape(-1, 1) * self.kv[None, :])
        eu = np.exp(1j * u.reshape(-1, 1) * self.ku[None, :])
        K = kw.shape[0]
        out = np.empty((K, self.nv, self.nu), dtype=complex)
        for k in range(K):
            b = (ev * kw[k].reshape(-1, 1)).T @ eu
            out[k] = self.analysis_v.T @ b @ self.analysis_u
        return out.reshape(K, -1)

    def _far_row(self, v0: float, u0: float, X: np.ndarray, mu: float) -> np.ndarray:
        g = self.grid
        sv, su = self._scales(v0)
        dv = np.angle(np.exp(1j * (g.param_coords[:, 0] - v0)))
        du = np.angle(np.exp(1j * (g.param_coords[:, 1] - u0)))
        rho = np.hypot(sv * dv, su * du)
        w = g.weights * (1.0 - bump(rho / self.radius))
        z = X - g.nodes
        keep = w > 0.0
        out = np.zeros((n_channels(mu), g.n_nodes), dtype=complex)
        out[:, keep] = kernel_channels(z[keep], mu) * w[keep][None]
        return out

    def point_row(self, X: np.ndarray, h: float, mu: float) -> np.ndarray:
        """Dense row ``(K, N)`` for an arbitrary target ``X`` at distance ``h``."""
        v0, u0 = self.grid.shape.closest_angles(X)
        return self._patch_row(v0, u0, X, h, mu) + self._far_row(v0, u0, X, mu)

    def rows(self, h: float, side: int, mu: float) -> KernelRows:
        g = self.grid
        K = n_channels(mu)
        nv, nu = self.nv, self.nu
        out = np.empty((K, g.n_nodes, g.n_nodes), dtype=complex)
        for ring in range(nv):
            i0 = ring * nu
            v0, u0 = g.param_coords[i0]
            X = g.nodes[i0] - side * h * g.normals[i0]
            ref = self._patch_row(v0, u0, X, h, mu) + self._far_row(v0, u0, X, mu)
            ref = ref.reshape(K, nv, nu)
            for j in range(nu):
                rolled = np.roll(ref, j, axis=2).reshape(K, -1)
                rz = _rotz(2.0 * np.pi * j / nu)
                out[:3, i0 + j] = rz @ rolled[:3]
                if K == 4:
                    out[3, i0 + j] = rolled[3]
        return KernelRows(out)


def make_quadrature(grid: SurfaceGrid, options: QuadratureOptions | None = None):
    if grid.shape.topology == "sphere":
        return SphereCapQuadrature(grid, options)
    return TorusPatchQuadrature(grid, options)
