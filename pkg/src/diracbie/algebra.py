"""
Dirac matrix calculus in the standard (Dirac) representation.

All functions return fresh dense ``complex128`` arrays. Vectorised variants
accept stacks of normals with shape ``(N, 3)`` and return ``(N, 4, 4)``
arrays, which is how the boundary operators use them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-10

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

_I2 = np.eye(2, dtype=complex)
_Z2 = np.zeros((2, 2), dtype=complex)

ALPHA = np.array([np.block([[_Z2, s], [s, _Z2]]) for s in SIGMA])
BETA = np.block([[_I2, _Z2], [_Z2, -_I2]])
ID4 = np.eye(4, dtype=complex)

ALPHA.setflags(write=False)
BETA.setflags(write=False)
ID4.setflags(write=False)


@dataclass(frozen=True)
class DiracMatrices:
    """The four Hermitian, unitary Dirac matrices."""

    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray
    beta: np.ndarray

    @classmethod
    def standard(cls) -> "DiracMatrices":
        return cls(ALPHA[0].copy(), ALPHA[1].copy(), ALPHA[2].copy(), BETA.copy())

    @property
    def alphas(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.alpha1, self.alpha2, self.alpha3


@dataclass(frozen=True)
class TransmissionParams:
    """Coupling strength of the electrostatic shell interaction.

    ``epsilon`` is the sign ``tau / 2`` and is only defined at the critical
    strengths ``tau = +-2``.
    """

    tau: float

    @property
    def is_critical(self) -> bool:
        return abs(abs(self.tau) - 2.0) <= 1e-14

    @property
    def epsilon(self) -> int:
        if not self.is_critical:
            raise ValueError(f"epsilon is only defined for tau = +-2, got tau={self.tau}")
        return int(np.sign(self.tau))


def _check_unit(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if n.shape[-1] != 3:
        raise ValueError(f"normal must have 3 components, got shape {n.shape}")
    dev = np.abs(np.linalg.norm(n, axis=-1) - 1.0)
    if np.any(dev > UNIT_TOL):
        raise ValueError(f"normal is not a unit vector (| |n| - 1 | = {dev.max():.3e})")
    return n


def alpha_dot(v) -> np.ndarray:
    """Return ``sum_j v_j alpha_j``.

    ``v`` may be a single 3-vector or a stack ``(..., 3)``.
    """
    v = np.asarray(v, dtype=float)
    return np.tensordot(v, ALPHA, axes=([-1], [0]))


def mit_matrix(n) -> np.ndarray:
    """MIT bag boundary matrix ``B = -i beta (alpha . n)``."""
    n = _check_unit(n)
    return -1j * BETA @ alpha_dot(n)


def mit_projectors(n) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(P_plus, P_minus) = ((I + B)/2, (I - B)/2)``."""
    b = mit_matrix(n)
    return 0.5 * (ID4 + b), 0.5 * (ID4 - b)


def p_tau(n, tau: float) -> np.ndarray:
    """Transmission matrix ``tau/2 + i (alpha . n)``."""
    n = _check_unit(n)
    return 0.5 * tau * ID4 + 1j * alpha_dot(n)


def r_tau(n, tau: float) -> np.ndarray:
    """Transfer matrix ``(1 - tau^2/4 + tau i(alpha . n)) / (tau^2/4 + 1)``.

    A trace pair satisfies the shell condition exactly when
    ``f_plus = r_tau(n, tau) @ f_minus``.
    """
    n = _check_unit(n)
    q = 0.25 * tau * tau
    return ((1.0 - q) * ID4 + 1j * tau * alpha_dot(n)) / (q + 1.0)


def shell_block_matrix(n, tau: float) -> np.ndarray:
    """The 8x8 block matrix ``[[tau/2, -i a.n], [i a.n, tau/2]]``.

    Its smallest singular value is ``| |tau| - 2 | / 2`` for every unit normal.
    """
    n = _check_unit(n)
    an = alpha_dot(n)
    d = 0.5 * tau * np.broadcast_to(ID4, an.shape)
    top = np.concatenate([d, -1j * an], axis=-1)
    bottom = np.concatenate([1j * an, d], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def shell_sigma_min(tau: float) -> float:
    """Closed form of the smallest singular value of the shell block matrix."""
    return abs(abs(tau) - 2.0) / 2.0


def upper_lower_blocks(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Split a 4x4 matrix into its 2x2 upper/lower spinor blocks."""
    return m[..., :2, :2], m[..., :2, 2:], m[..., 2:, :2], m[..., 2:, 2:]
