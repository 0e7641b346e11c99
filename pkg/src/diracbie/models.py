"""
MIT bag boundary algebra and the electrostatic delta-shell interaction.

MIT bag traces satisfy ``B t = t`` node-wise with ``B = -i beta (alpha . n)``.
The shell interaction of strength ``tau`` couples interior and exterior
traces through ``P_tau f_+ + P_tau^* f_- = 0`` with
``P_tau = tau/2 + i alpha . n``; at ``tau = 2 eps`` this reads
``f_+ = i eps (alpha . n) f_-``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from diracbie.algebra import BETA, ID4, alpha_dot, mit_matrix, p_tau, r_tau, shell_block_matrix
from diracbie.calderon import make_anticommutator, make_projectors
from diracbie.kernels import DiracParams
from diracbie.layerpot import BoundaryOperator, LayerPotential, SingularOperator, assemble_cs, times_alpha_n
from diracbie.surface import HarmonicSpectrum, SpinorTrace, SurfaceGrid, l2_norm, sh_synthesize, sobolev_norm, sobolev_weights

# ---------------------------------------------------------------------------
# MIT bag


def mit_blocks(grid: SurfaceGrid) -> np.ndarray:
    """``(N, 4, 4)`` stack of ``B(n_i)``."""
    return np.array([mit_matrix(n) for n in grid.normals])


def mit_project(f: SpinorTrace) -> SpinorTrace:
    """Apply ``P_+ = (I + B)/2`` node-wise."""
    b = mit_blocks(f.grid)
    return SpinorTrace(0.5 * (f.values + np.einsum("nab,nb->na", b, f.values)), f.grid)


def mit_boundary_form(f: SpinorTrace, g: SpinorTrace) -> complex:
    """``sum_i w_i <(-i alpha . n_i) f_i, g_i>`` (antilinear in ``f``)."""
    if f.grid is not g.grid:
        raise ValueError("traces live on different grids")
    grid = f.grid
    af = -1j * times_alpha_n(grid, f.values)
    return complex(np.sum(grid.weights[:, None] * np.conj(af) * g.values))


def _beta(v: np.ndarray) -> np.ndarray:
    return v @ BETA.T


@dataclass
class BootstrapReport:
    """Residuals of the MIT regularity bootstrap on one grid.

    ``display`` uses ``Cal_+ t = i beta (a.n) (Cal_- t + i A t)`` and
    ``derived`` the opposite overall sign. ``beta_anti`` measures
    ``Cal_pm(beta f) + beta Cal_pm(f)`` and ``beta_comm`` measures
    ``Cal_pm(beta f) - beta Cal_pm(f)`` (max over the two signs).
    """

    display: float
    derived: float
    beta_anti: float
    beta_comm: float
    trace_norm: float


def _projector_actions(Cs: BoundaryOperator):
    grid = Cs.grid
    m = Cs.matrix

    def cs(v):
        return (m @ v.reshape(-1)).reshape(-1, 4)

    def N(v):
        return times_alpha_n(grid, v)

    def cal(sign, v):
        return 0.5 * v + sign * 1j * cs(N(v))

    def anti(v):
        return N(cs(v)) + cs(N(v))

    return cal, anti, N


def mit_bootstrap_report(t_u: SpinorTrace, Cs: BoundaryOperator, f: SpinorTrace | None = None) -> BootstrapReport:
    """All bootstrap residuals for an MIT trace ``t_u`` (projected first).

    ``f`` is the generic trace used for the beta relations (defaults to
    ``t_u`` before projection).
    """
    grid = t_u.grid
    t = mit_project(t_u).values
    cal, anti, N = _projector_actions(Cs)
    lhs = cal(+1, t)
    inner = cal(-1, t) + 1j * anti(t)
    rhs_display = 1j * _beta(N(inner))
    display = l2_norm(grid, lhs - rhs_display)
    derived = l2_norm(grid, lhs + rhs_display)
    fv = (f if f is not None else t_u).values
    anti_r, comm_r = 0.0, 0.0
    for s in (+1, -1):
        a = cal(s, _beta(fv))
        b = _beta(cal(s, fv))
        anti_r = max(anti_r, l2_norm(grid, a + b))
        comm_r = max(comm_r, l2_norm(grid, a - b))
    return BootstrapReport(display, derived, anti_r, comm_r, l2_norm(grid, t))


def mit_bootstrap_residual(grid: SurfaceGrid, t_u: SpinorTrace, mu: float = 0.0, Cs: BoundaryOperator | None = None) -> float:
    """L2 residual of ``Cal_+ t = i beta (a.n)(Cal_- t + i A t)`` for ``t = P_+ t_u``."""
    if t_u.grid is not grid:
        raise ValueError("trace lives on a different grid")
    if not np.any(t_u.values):
        return 0.0
    Cs = Cs if Cs is not None else assemble_cs(grid, mu)
    return mit_bootstrap_report(t_u, Cs).display


def beta_anticommutation_residual(f: SpinorTrace, Cs: BoundaryOperator) -> float:
    """``max_pm ||Cal_pm(beta f) + beta Cal_pm(f)||``."""
    return mit_bootstrap_report(f, Cs, f).beta_anti


# ---------------------------------------------------------------------------
# delta shell


def _node_matrices(grid: SurfaceGrid, fn, tau: float) -> np.ndarray:
    return np.array([fn(n, tau) for n in grid.normals])


def shell_transmission_residual(f_plus: SpinorTrace, f_minus: SpinorTrace, tau: float) -> float:
    """L2 norm of ``P_tau f_+ + P_tau^* f_-``."""
    if f_plus.grid is not f_minus.grid:
        raise ValueError("traces live on different grids")
    grid = f_plus.grid
    p = _node_matrices(grid, p_tau, tau)
    r = np.einsum("nab,nb->na", p, f_plus.values) + np.einsum("nba,nb->na", p.conj(), f_minus.values)
    return l2_norm(grid, r)


def transfer(f_minus: SpinorTrace, tau: float) -> SpinorTrace:
    """``R_tau f_-`` node-wise: the interior trace matching ``f_-``."""
    r = _node_matrices(f_minus.grid, r_tau, tau)
    return SpinorTrace(np.einsum("nab,nb->na", r, f_minus.values), f_minus.grid)


@dataclass
class ShellConditioning:
    tau: float
    sigma_min: float
    kappa: float


def shell_system_conditioning(grid: SurfaceGrid, mu: float, tau_list) -> list[ShellConditioning]:
    """Node-wise extreme singular values of the shell block matrix.

    ``sigma_min`` is the minimum over nodes and ``kappa`` the condition
    number of the block-diagonal left-hand side of the shell system
    (``inf`` at ``tau = +-2``). The left-hand side does not depend on ``mu``.
    """
    out = []
    for tau in tau_list:
        s = np.linalg.svd(np.array([shell_block_matrix(n, tau) for n in grid.normals]), compute_uv=False)
        smin = float(s[:, -1].min())
        smax = float(s[:, 0].max())
        if smin <= 1e-14 * smax:
            smin, kappa = 0.0, float("inf")
        else:
            kappa = smax / smin
        out.append(ShellConditioning(float(tau), smin, kappa))
    return out


@dataclass
class ShellSystem:
    """Block system for traces ``(f_+, f_-)`` of the shell interaction.

    ``M (Cal_+ f_+, Cal_- f_-) = M' (Cal_+ f_-, Cal_- f_+) + (N A d, -N A d)``
    with ``d = f_+ - f_-``, ``M = [[tau/2, -iN], [iN, tau/2]]`` and
    ``M' = [[-tau/2, -iN], [iN, -tau/2]]``.
    """

    grid: SurfaceGrid
    params: DiracParams
    Cal_plus: BoundaryOperator
    Cal_minus: BoundaryOperator
    A: BoundaryOperator

    @classmethod
    def build(cls, grid: SurfaceGrid, params: DiracParams, Cs: BoundaryOperator | None = None) -> "ShellSystem":
        Cs = Cs if Cs is not None else assemble_cs(grid, params.mu)
        cp, cm = make_projectors(Cs, grid)
        return cls(grid, params, cp, cm, make_anticommutator(Cs, grid))

    @property
    def lhs_blocks(self) -> np.ndarray:
        return np.array([shell_block_matrix(n, self.params.tau) for n in self.grid.normals])

    def lhs_matrix(self) -> np.ndarray:
        """The ``8N x 8N`` left-hand side ``M diag(Cal_+, Cal_-)``."""
        n = self.grid.n_nodes
        t = self.params.tau
        N = BoundaryOperator.alpha_n(self.grid).matrix
        I = np.eye(4 * n)
        M = np.block([[0.5 * t * I, -1j * N], [1j * N, 0.5 * t * I]])
        Z = np.zeros_like(I)
        D = np.block([[self.Cal_plus.matrix, Z], [Z, self.Cal_minus.matrix]])
        return M @ D

    def _apply(self, op: BoundaryOperator, v: np.ndarray) -> np.ndarray:
        return (op.matrix @ v.reshape(-1)).reshape(-1, 4)

    def sides(self, f_plus: SpinorTrace, f_minus: SpinorTrace) -> tuple[np.ndarray, np.ndarray]:
        g = self.grid
        t = self.params.tau
        N = lambda v: times_alpha_n(g, v)  # noqa: E731
        a = self._apply(self.Cal_plus, f_plus.values)
        b = self._apply(self.Cal_minus, f_minus.values)
        lhs = np.concatenate([0.5 * t * a - 1j * N(b), 1j * N(a) + 0.5 * t * b])
        c = self._apply(self.Cal_plus, f_minus.values)
        d = self._apply(self.Cal_minus, f_plus.values)
        nad = N(self._apply(self.A, f_plus.values - f_minus.values))
        rhs = np.concatenate([-0.5 * t * c - 1j * N(d) + nad, 1j * N(c) - 0.5 * t * d - nad])
        return lhs, rhs

    def residual(self, f_plus: SpinorTrace, f_minus: SpinorTrace) -> float:
        """L2 norm (on the doubled grid) of left minus right-hand side."""
        lhs, rhs = self.sides(f_plus, f_minus)
        w = np.concatenate([self.grid.weights, self.grid.weights])
        return float(np.sqrt(np.sum(w[:, None] * np.abs(lhs - rhs) ** 2)))


def critical_uncoupling_blocks(n, epsilon: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Upper/lower 2x2 blocks of ``R_tau`` at ``tau = 2 epsilon``."""
    r = r_tau(n, 2.0 * epsilon)
    return r[:2, :2], r[:2, 2:], r[2:, :2], r[2:, 2:]


# ---------------------------------------------------------------------------
# critical witness


def rough_spectrum(lmax: int, rng: np.random.Generator, delta: float = 0.05, radius: float = 1.0) -> HarmonicSpectrum:
    """Coefficients ``(1 + l(l+1))^(-1/4 - delta/2) xi`` with unimodular random ``xi``.

    Every partial sum lies in ``H^{1/2}`` but the ``H^{1/2}`` norms grow like
    ``L^(1 - delta)`` while the ``H^{-1/2}`` norms stay bounded.
    """
    n = (lmax + 1) ** 2
    xi = np.exp(2j * np.pi * rng.random((4, n)))
    return HarmonicSpectrum(xi * sobolev_weights(lmax, -0.25 - 0.5 * delta)[None, :], lmax, radius)


@dataclass
class WitnessRow:
    L: int
    transm_residual: float
    h_half_norm: float
    f_minus_half_norm: float


class _MatrixFreeCalderon:
    def __init__(self, grid: SurfaceGrid, cs):
        self.grid = grid
        if isinstance(cs, BoundaryOperator):
            m = cs.matrix
            self.cs = lambda v: (m @ v.reshape(-1)).reshape(-1, 4)
        else:
            self.cs = cs

    def N(self, v):
        return times_alpha_n(self.grid, v)

    def cal(self, sign: int, v):
        return 0.5 * v + sign * 1j * self.cs(self.N(v))

    def anti(self, v):
        return self.N(self.cs(v)) + self.cs(self.N(v))


def critical_witness(
    grid: SurfaceGrid,
    mu: float,
    epsilon: int,
    spectrum: HarmonicSpectrum,
    cutoffs,
    cs=None,
    method: str = "offsurface",
) -> list[WitnessRow]:
    """Trace-level witness of the critical shell condition.

    For each cutoff ``L``: ``f_L`` is the truncated spectrum, ``g = Cal_- f_L``,
    ``t u_- = -g`` and ``t u_+ = -i eps Cal_+(N g) - eps A(N g)``. Reports the
    transmission residual ``||t u_+ - i eps N t u_-||`` and the ``H^{1/2}``
    norm of ``t u_-``. ``cs`` may be a dense operator or a callable on
    ``(N, 4)`` node values; it is assembled matrix-free when omitted.
    """
    if grid.kind != "sphere":
        raise ValueError("the critical witness needs a sphere grid")
    if mu == 0.0:
        raise ValueError("the critical witness needs a nonzero kernel mass")
    if epsilon not in (1, -1):
        raise ValueError("epsilon must be +1 or -1")
    if cs is None:
        cs = SingularOperator(grid, mu, method)
    ops = _MatrixFreeCalderon(grid, cs)
    rows = []
    for L in cutoffs:
        if L > grid.band_limit:
            raise ValueError(f"cutoff {L} exceeds the grid band limit {grid.band_limit}")
        f = sh_synthesize(spectrum.truncate(int(L)), grid).values
        g = ops.cal(-1, f)
        tu_minus = -g
        ng = ops.N(g)
        tu_plus = -1j * epsilon * ops.cal(+1, ng) - epsilon * ops.anti(ng)
        res = l2_norm(grid, tu_plus - 1j * epsilon * ops.N(tu_minus))
        rows.append(
            WitnessRow(
                int(L),
                res,
                sobolev_norm(SpinorTrace(tu_minus, grid), 0.5),
                sobolev_norm(SpinorTrace(f, grid), -0.5),
            )
        )
    return rows
