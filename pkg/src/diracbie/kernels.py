"""
Closed-form kernels of the free Dirac operator ``H(mu) = alpha . D + mu beta``.

``psi`` is the Yukawa (Coulomb for ``mu = 0``) fundamental solution of
``-Laplace + mu^2`` and ``phi = H(mu)(psi Id)`` the fundamental solution of
``H(mu)``. Every function accepts stacks of points with a trailing axis of
length 3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from diracbie.algebra import BETA, ID4, alpha_dot

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class DiracParams:
    """Kernel mass ``mu``, operator mass ``m`` and shell strength ``tau``.

    Boundary operators only depend on ``mu``. ``m`` is carried as metadata.
    """

    mu: float = 0.0
    m: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        for name in ("mu", "m", "tau"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def _radius(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("kernel evaluated at the singular point x = 0")
    return r


def psi_radial(mu: float, r):
    """``exp(-|mu| r) / (4 pi r)`` as a function of the distance."""
    return np.exp(-abs(mu) * r) / (FOUR_PI * r)


def vector_radial(mu: float, r):
    """Coefficient ``f(r)`` of ``i (alpha . x)`` in ``phi``.

    ``f(r) = (1 + |mu| r) exp(-|mu| r) / (4 pi r^3)``.
    """
    a = abs(mu)
    return (1.0 + a * r) * np.exp(-a * r) / (FOUR_PI * r**3)


def psi(mu: float, x) -> np.ndarray | float:
    """Fundamental solution ``exp(-|mu||x|) / (4 pi |x|)``."""
    r = _radius(x)
    out = psi_radial(mu, r)
    return float(out) if np.ndim(out) == 0 else out


def grad_psi(mu: float, x) -> np.ndarray:
    """Gradient of ``psi``, equal to ``-f(|x|) x``."""
    x = np.asarray(x, dtype=float)
    r = _radius(x)
    return -vector_radial(mu, r)[..., None] * x


def phi(mu: float, x) -> np.ndarray:
    """Fundamental solution of ``H(mu)``.

    ``phi(x) = mu beta psi(x) + i f(|x|) (alpha . x)``.
    """
    x = np.asarray(x, dtype=float)
    r = _radius(x)
    scal = psi_radial(mu, r)[..., None, None]
    vec = vector_radial(mu, r)[..., None, None]
    return mu * scal * BETA + 1j * vec * alpha_dot(x)


def fourier_symbol(mu: float, xi) -> np.ndarray:
    """Fourier symbol ``(alpha . xi + mu beta) / (|xi|^2 + mu^2)`` of ``phi``."""
    xi = np.asarray(xi, dtype=float)
    den = np.sum(xi * xi, axis=-1) + mu * mu
    if np.any(den == 0.0):
        raise ValueError("the symbol is undefined at mu = 0, xi = 0")
    return (alpha_dot(xi) + mu * BETA) / np.asarray(den)[..., None, None]


def anticommutator_kernel_split(mu: float, x, y, nx, ny) -> tuple[np.ndarray, np.ndarray]:
    """Split the anticommutator kernel ``(a.nx) phi + phi (a.ny)`` into two parts.

    Returns ``(K1, K2)`` with ``K1 = -2i (nx . grad psi)(x - y) Id``, which is
    weakly singular on a C^2 surface, and ``K2 = phi(x - y) (alpha . (ny - nx))``.
    """
    z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    nx = np.asarray(nx, dtype=float)
    ny = np.asarray(ny, dtype=float)
    g = grad_psi(mu, z)
    k1 = np.asarray(-2j * np.sum(nx * g, axis=-1))[..., None, None] * ID4
    k2 = phi(mu, z) @ alpha_dot(ny - nx)
    return k1, k2


def dirac_apply_fd(field, x, mu: float, h: float) -> np.ndarray:
    """Apply ``H(mu) = -i alpha . grad + mu beta`` to ``field`` by central differences.

    ``field`` maps a 3-vector to an array whose leading axis has length 4
    (a spinor, or a 4x4 matrix acting on spinors). Second order in ``h``.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(field(x))
    out = mu * np.tensordot(BETA, f0, axes=1)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        d = (np.asarray(field(x + e)) - np.asarray(field(x - e))) / (2.0 * h)
        out = out - 1j * np.tensordot(alpha_dot(np.eye(3)[j]), d, axes=1)
    return out
