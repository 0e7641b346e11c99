"""
Layer potential, one-sided traces and the singular boundary operator.

The layer potential of a density ``g`` is
``Phi(g)(x) = sum_i w_i phi(x - x_i) g_i`` (Nystrom). Near the surface the
sum is replaced by the singular quadrature of ``diracbie.quadrature``.
One-sided traces are limits of ``Phi(g)(x -+ h n)`` (``+`` is the interior)
obtained by polynomial extrapolation in ``h`` along a geometric ladder.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from diracbie.algebra import ALPHA, BETA
from diracbie.kernels import phi, dirac_apply_fd
from diracbie.quadrature import KernelRows, QuadratureOptions, kernel_channels, make_quadrature, n_channels
from diracbie.surface import SpinorTrace, SurfaceGrid, l2_norm

INTERIOR = +1
EXTERIOR = -1


class ExtrapolationError(RuntimeError):
    """Raised when the trace extrapolation ladder does not converge."""

    def __init__(self, message: str, nodes: np.ndarray | None = None):
        super().__init__(message)
        self.nodes = nodes


def parse_side(side) -> int:
    if side in (INTERIOR, "+", "plus", "interior"):
        return INTERIOR
    if side in (EXTERIOR, "-", "minus", "exterior"):
        return EXTERIOR
    raise ValueError(f"side must be '+' or '-', got {side!r}")


# ---------------------------------------------------------------------------
# boundary operators


@dataclass(eq=False)
class BoundaryOperator:
    """Dense ``(4N, 4N)`` operator on spinor traces of one grid.

    Vectors are flattened node-major. The adjoint is taken with respect to
    the weighted product ``<f, g> = sum_i w_i <f_i, g_i>``.
    """

    matrix: np.ndarray
    grid: SurfaceGrid
    label: str = ""
    node_blocks: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = 4 * self.grid.n_nodes
        if self.matrix.shape != (n, n):
            raise ValueError(f"operator shape {self.matrix.shape} does not match grid ({n}, {n})")

    @classmethod
    def identity(cls, grid: SurfaceGrid, label: str = "Id") -> "BoundaryOperator":
        blocks = np.broadcast_to(np.eye(4, dtype=complex), (grid.n_nodes, 4, 4)).copy()
        return cls(np.eye(4 * grid.n_nodes, dtype=complex), grid, label, blocks)

    @classmethod
    def multiplication(cls, grid: SurfaceGrid, blocks: np.ndarray, label: str = "") -> "BoundaryOperator":
        """Block-diagonal operator from per-node 4x4 matrices ``(N, 4, 4)``."""
        n = grid.n_nodes
        m = np.zeros((n, 4, n, 4), dtype=complex)
        i = np.arange(n)
        m[i, :, i, :] = blocks
        return cls(m.reshape(4 * n, 4 * n), grid, label, np.asarray(blocks, dtype=complex))

    @classmethod
    def alpha_n(cls, grid: SurfaceGrid) -> "BoundaryOperator":
        return cls.multiplication(grid, grid.alpha_n, "a.n")

    def _check(self, other: "BoundaryOperator") -> None:
        if other.grid is not self.grid:
            raise ValueError("operators live on different grids")

    def __matmul__(self, other):
        if isinstance(other, BoundaryOperator):
            self._check(other)
            label = f"{self.label}*{other.label}"
            n = self.grid.n_nodes
            if self.node_blocks is not None and other.node_blocks is not None:
                return BoundaryOperator.multiplication(self.grid, self.node_blocks @ other.node_blocks, label)
            if other.node_blocks is not None:
                m = np.einsum("inb,nbc->inc", self.matrix.reshape(4 * n, n, 4), other.node_blocks)
                return BoundaryOperator(m.reshape(4 * n, 4 * n), self.grid, label)
            if self.node_blocks is not None:
                m = np.einsum("nab,nbj->naj", self.node_blocks, other.matrix.reshape(n, 4, 4 * n))
                return BoundaryOperator(m.reshape(4 * n, 4 * n), self.grid, label)
            return BoundaryOperator(self.matrix @ other.matrix, self.grid, label)
        if isinstance(other, SpinorTrace):
            return self.apply(other)
        return self.matrix @ other

    def __add__(self, other: "BoundaryOperator") -> "BoundaryOperator":
        self._check(other)
        blocks = None
        if self.node_blocks is not None and other.node_blocks is not None:
            blocks = self.node_blocks + other.node_blocks
        return BoundaryOperator(self.matrix + other.matrix, self.grid, f"({self.label}+{other.label})", blocks)

    def __sub__(self, other: "BoundaryOperator") -> "BoundaryOperator":
        return self + (-1.0) * other

    def __mul__(self, s) -> "BoundaryOperator":
        blocks = None if self.node_blocks is None else s * self.node_blocks
        return BoundaryOperator(s * self.matrix, self.grid, self.label, blocks)

    __rmul__ = __mul__

    def __neg__(self) -> "BoundaryOperator":
        return -1.0 * self

    def apply(self, f: SpinorTrace) -> SpinorTrace:
        if f.grid is not self.grid:
            raise ValueError("trace lives on a different grid")
        return SpinorTrace.from_vector(self.matrix @ f.vector, self.grid)

    def adjoint(self) -> "BoundaryOperator":
        w = np.repeat(self.grid.weights, 4)
        return BoundaryOperator((self.matrix.conj().T * w[None, :]) / w[:, None], self.grid, f"{self.label}^*")

    def save(self, path) -> None:
        """Write the matrix, node coordinates and weights to an ``.npz`` file."""
        np.savez(Path(path), matrix=self.matrix, nodes=self.grid.nodes, weights=self.grid.weights, label=self.label)

    def to_csv(self, path) -> None:
        """Write ``row,col,re,im`` for every nonzero entry."""
        r, c = np.nonzero(self.matrix)
        v = self.matrix[r, c]
        data = np.column_stack([r, c, v.real, v.imag])
        np.savetxt(Path(path), data, delimiter=",", header="row,col,re,im", comments="", fmt=["%d", "%d", "%.17g", "%.17g"])


def adjoint_of(op: BoundaryOperator) -> BoundaryOperator:
    return op.adjoint()


def spinor_matrix(rows: KernelRows, mu: float) -> np.ndarray:
    """Assemble ``sum_c R_c (x) alpha_c + mu R_psi (x) beta`` as a dense matrix."""
    R = rows.dense()
    n = R.shape[1]
    mats = list(ALPHA)
    if R.shape[0] == 4:
        mats.append(mu * BETA)
    out = np.einsum("cij,cab->iajb", R, np.array(mats), optimize=True)
    return out.reshape(4 * n, 4 * n)


def apply_spinor_rows(rows: KernelRows, mu: float, g: np.ndarray) -> np.ndarray:
    """Apply the spinor operator built from ``rows`` to node values ``(N, 4)``."""
    rg = rows.apply(np.asarray(g, dtype=complex).reshape(-1, 4))
    out = np.zeros_like(rg[0])
    for c in range(3):
        out += rg[c] @ ALPHA[c].T
    if rg.shape[0] == 4:
        out += mu * (rg[3] @ BETA.T)
    return out


# ---------------------------------------------------------------------------
# ladder


@dataclass(frozen=True)
class LadderOptions:
    """Off-surface extrapolation ladder ``h_k = h0 2^-k, k = 0..n_steps-1``.

    ``h0 = min(spacing_factor * mean spacing, depth_fraction * inradius)``;
    the cap only binds on very coarse grids and keeps ``x - h n`` inside the
    body.
    """

    n_steps: int = 5
    spacing_factor: float = 2.0
    depth_fraction: float = 0.9
    noise_floor: float = 1e-11


def ladder_heights(grid: SurfaceGrid, opts: LadderOptions | None = None) -> np.ndarray:
    opts = opts or LadderOptions()
    h0 = min(opts.spacing_factor * grid.spacing, opts.depth_fraction * grid.shape.inradius)
    return h0 * 2.0 ** -np.arange(opts.n_steps)


def richardson_weights(h: np.ndarray) -> np.ndarray:
    """Lagrange weights that extrapolate samples at ``h`` to ``h = 0``."""
    h = np.asarray(h, dtype=float)
    c = np.ones(h.size)
    for k in range(h.size):
        for j in range(h.size):
            if j != k:
                c[k] *= h[j] / (h[j] - h[k])
    return c


def neville_diagonal(h: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """Successive extrapolants to ``h = 0`` using the first ``k+1`` samples.

    ``samples`` has the ladder on axis 0; the result has the same shape.
    """
    n = len(h)
    T = [np.array(s, dtype=complex) for s in samples]
    diag = [T[0].copy()]
    for k in range(1, n):
        for j in range(k - 1, -1, -1):
            # T[j] currently holds P_{j..k-1}(0); update to P_{j..k}(0)
            T[j] = (0.0 - h[k]) * T[j] / (h[j] - h[k]) + (h[j] - 0.0) * T[j + 1] / (h[j] - h[k])
        diag.append(T[0].copy())
    return np.array(diag)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class LayerPotential:
    """Reusable evaluator bound to one grid and kernel mass."""

    grid: SurfaceGrid
    mu: float = 0.0
    quad_options: QuadratureOptions = field(default_factory=QuadratureOptions)
    ladder: LadderOptions = field(default_factory=LadderOptions)
    near_factor: float = 8.0
    cache_limit_mb: float = 400.0
    _quad: object = field(default=None, init=False, repr=False)
    _rows: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def quad(self):
        if self._quad is None:
            self._quad = make_quadrature(self.grid, self.quad_options)
        return self._quad

    def _row_megabytes(self) -> float:
        n = self.grid.n_nodes
        return n_channels(self.mu) * n * n * 16 / 2**20

    def rows(self, h: float, side: int) -> KernelRows:
        key = (float(h), int(side) if h > 0 else 0)
        if key in self._rows:
            return self._rows[key]
        r = self.quad.rows(h, side, self.mu)
        if self._row_megabytes() * (len(self._rows) + 1) <= self.cache_limit_mb:
            self._rows[key] = r
        return r

    def _accumulate(self, terms) -> KernelRows:
        # running sum so that at most two row blocks are alive at once
        out = None
        for h, side, c in terms:
            r = self.rows(h, side)
            if out is None:
                out = KernelRows(c * r.factors, r.analysis)
            else:
                out.factors += c * r.factors
            del r
        if not np.all(np.isfinite(out.factors)):
            raise ExtrapolationError("non-finite entries in the extrapolated trace operator")
        return out

    def trace_rows(self, side: int) -> KernelRows:
        """Extrapolated rows of the one-sided trace operator ``C_side``."""
        h = ladder_heights(self.grid, self.ladder)
        c = richardson_weights(h)
        return self._accumulate([(hk, side, ck) for hk, ck in zip(h, c)])

    def cs_rows(self, method: str = "offsurface") -> KernelRows:
        if method == "offsurface":
            h = ladder_heights(self.grid, self.ladder)
            c = richardson_weights(h)
            terms = [(hk, s, 0.5 * ck) for s in (INTERIOR, EXTERIOR) for hk, ck in zip(h, c)]
            return self._accumulate(terms)
        if method == "pv_direct":
            return self.rows(0.0, 0)
        raise ValueError(f"unknown assembly method {method!r}")

    def evaluate(self, g: np.ndarray, X: np.ndarray, ball_radius: float | None = None) -> np.ndarray:
        return eval_layer_potential(self.grid, g, X, self.mu, ball_radius=ball_radius, _lp=self)


def _values(g) -> np.ndarray:
    if isinstance(g, SpinorTrace):
        return g.values
    return np.asarray(g, dtype=complex).reshape(-1, 4)


def native_potential(grid: SurfaceGrid, g: np.ndarray, X: np.ndarray, mu: float) -> np.ndarray:
    """Plain Nystrom sum, accurate well away from the surface."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = X[:, None, :] - grid.nodes[None, :, :]
    ch = kernel_channels(z, mu) * grid.weights[None, None, :]
    gv = _values(g)
    out = np.zeros((X.shape[0], 4), dtype=complex)
    for c in range(3):
        out += (ch[c] @ gv) @ ALPHA[c].T
    if ch.shape[0] == 4:
        out += mu * ((ch[3] @ gv) @ BETA.T)
    return out


def eval_layer_potential(
    grid: SurfaceGrid,
    g,
    X,
    mu: float,
    ball_radius: float | None = None,
    near_factor: float = 8.0,
    quad_options: QuadratureOptions | None = None,
    _lp: LayerPotential | None = None,
) -> np.ndarray:
    """Evaluate ``Phi(g)`` at off-surface points ``X`` (shape ``(P, 3)``).

    Points closer than ``near_factor`` grid spacings use the singular
    quadrature centred at the closest surface point.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    gv = _values(g)
    shape = grid.shape
    if mu == 0.0:
        R = 3.0 * shape.diameter if ball_radius is None else float(ball_radius)
        outside = shape.signed_distance_sign(X) < 0
        far = np.linalg.norm(X, axis=-1) > R
        if np.any(outside & far):
            raise ValueError(f"mu = 0 exterior evaluation outside the ball of radius {R:g}")
    closest = np.array([shape.closest_point(x) for x in X])
    dist = np.linalg.norm(X - closest, axis=-1)
    if np.any(dist <= 1e-12 * shape.diameter):
        raise ValueError("evaluation point lies on the surface; use one_sided_trace")
    out = np.empty((X.shape[0], 4), dtype=complex)
    near = dist < near_factor * grid.spacing
    if np.any(~near):
        out[~near] = native_potential(grid, gv, X[~near], mu)
    if np.any(near):
        quad = _lp.quad if _lp is not None else make_quadrature(grid, quad_options)
        if shape.topology == "sphere":
            coef = quad.analysis @ gv
            for k in np.nonzero(near)[0]:
                b = quad.point_factors(closest[k], X[k], dist[k], mu)
                out[k] = _combine_channels(b @ coef, mu)
        else:
            for k in np.nonzero(near)[0]:
                row = quad.point_row(X[k], dist[k], mu)
                out[k] = _combine_channels(row @ gv, mu)
    return out


def _combine_channels(rg: np.ndarray, mu: float) -> np.ndarray:
    out = sum(ALPHA[c] @ rg[c] for c in range(3))
    if rg.shape[0] == 4:
        out = out + mu * (BETA @ rg[3])
    return out


def harmonicity_check(grid: SurfaceGrid, g, x, mu: float, h_fd: float = 1e-2) -> float:
    """Norm of a central-difference ``H(mu) Phi(g)`` at ``x``.

    The stencil must stay well clear of the surface.
    """
    x = np.asarray(x, dtype=float)
    d = np.linalg.norm(x - grid.shape.closest_point(x))
    if d <= 4.0 * h_fd or d <= 2.0 * grid.spacing:
        raise ValueError("finite-difference stencil is too close to the surface")
    gv = _values(g)

    def field(y):
        return eval_layer_potential(grid, gv, y[None, :], mu)[0]

    return float(np.linalg.norm(dirac_apply_fd(field, x, mu, h_fd)))


@dataclass
class TraceReport:
    """Extrapolated trace together with per-node convergence diagnostics."""

    trace: SpinorTrace
    heights: np.ndarray
    last_change: np.ndarray
    diverged: np.ndarray


def one_sided_trace_report(
    grid: SurfaceGrid, g, side, mu: float, lp: LayerPotential | None = None
) -> TraceReport:
    side = parse_side(side)
    lp = lp or LayerPotential(grid, mu)
    gv = _values(g)
    h = ladder_heights(grid, lp.ladder)
    samples = np.array([apply_spinor_rows(lp.rows(hk, side), mu, gv) for hk in h])
    diag = neville_diagonal(h, samples)
    change = np.abs(np.diff(diag, axis=0)).max(axis=-1)  # (n-1, N)
    scale = max(float(np.abs(samples).max()), 1e-300)
    floor = lp.ladder.noise_floor * scale
    diverged = (change[-1] >= change[-2]) & (change[-1] > floor)
    return TraceReport(SpinorTrace(diag[-1], grid), h, change[-1], diverged)


def one_sided_trace(grid: SurfaceGrid, g, side, mu: float, lp: LayerPotential | None = None, strict: bool = False) -> SpinorTrace:
    """Boundary value of ``Phi(g)`` from the interior (``'+'``) or exterior (``'-'``).

    Nodes whose extrapolation differences stop decreasing are reported with
    a warning, or an :class:`ExtrapolationError` when ``strict`` is set.
    """
    rep = one_sided_trace_report(grid, g, side, mu, lp)
    bad = np.nonzero(rep.diverged)[0]
    if bad.size:
        msg = f"trace extrapolation not contracting at {bad.size} node(s), e.g. {bad[:5].tolist()}"
        if strict:
            raise ExtrapolationError(msg, bad)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return rep.trace


def assemble_one_sided(grid: SurfaceGrid, mu: float, side, lp: LayerPotential | None = None) -> BoundaryOperator:
    """Dense trace operator ``C_+`` (interior) or ``C_-`` (exterior) by extrapolation."""
    side = parse_side(side)
    lp = lp or LayerPotential(grid, mu)
    return BoundaryOperator(spinor_matrix(lp.trace_rows(side), mu), grid, "C+" if side > 0 else "C-")


def assemble_cs(grid: SurfaceGrid, mu: float, method: str = "offsurface", lp: LayerPotential | None = None) -> BoundaryOperator:
    """Discrete principal-value operator ``C_s``.

    ``offsurface`` averages the extrapolated interior and exterior traces;
    ``pv_direct`` applies the polar singular quadrature on the surface.
    """
    lp = lp or LayerPotential(grid, mu)
    return BoundaryOperator(spinor_matrix(lp.cs_rows(method), mu), grid, "Cs")


def jump_operator(grid: SurfaceGrid) -> BoundaryOperator:
    """Multiplication by ``-(i/2) alpha . n``."""
    return BoundaryOperator.multiplication(grid, -0.5j * grid.alpha_n, "-(i/2)a.n")


def assemble_trace_ops(Cs: BoundaryOperator, grid: SurfaceGrid | None = None) -> tuple[BoundaryOperator, BoundaryOperator]:
    """``C_+- = -+(i/2)(alpha . n) + C_s``."""
    grid = grid or Cs.grid
    j = jump_operator(grid)
    cp = j + Cs
    cm = Cs - j
    cp.label, cm.label = "C+", "C-"
    return cp, cm


class SingularOperator:
    """Matrix-free ``C_s`` for grids too large for dense spinor matrices."""

    def __init__(self, grid: SurfaceGrid, mu: float, method: str = "offsurface", lp: LayerPotential | None = None):
        self.grid = grid
        self.mu = mu
        self.lp = lp or LayerPotential(grid, mu)
        self.rows = self.lp.cs_rows(method)
        self.lp._rows.clear()

    def __call__(self, g: np.ndarray) -> np.ndarray:
        return apply_spinor_rows(self.rows, self.mu, g)

    def dense(self) -> BoundaryOperator:
        return BoundaryOperator(spinor_matrix(self.rows, self.mu), self.grid, "Cs")


def times_alpha_n(grid: SurfaceGrid, g: np.ndarray) -> np.ndarray:
    """Node-wise ``(alpha . n_i) g_i`` for values ``(N, 4)``."""
    return np.einsum("nab,nb->na", grid.alpha_n, np.asarray(g).reshape(-1, 4))


def harmonic_spinor(mu: float, x0, c) -> callable:
    """``u(x) = phi(x - x0) c``; H(mu)-harmonic away from ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    c = np.asarray(c, dtype=complex)

    def u(x):
        return phi(mu, np.asarray(x, dtype=float) - x0) @ c

    return u


def reproducing_residual(
    grid: SurfaceGrid,
    mu: float,
    x0,
    c,
    X,
    Cs: BoundaryOperator | None = None,
    lp: LayerPotential | None = None,
) -> tuple[float, float]:
    """Residuals of ``u = Phi((i a.n) t u)`` for ``u = phi(. - x0) c``.

    Returns ``(max_X |Phi((i a.n) t u) - u|, ||Cal_+(t u) - t u||_{L2})``.
    """
    x0 = np.asarray(x0, dtype=float)
    if grid.shape.signed_distance_sign(x0) >= 0:
        raise ValueError("the source point must lie strictly outside the surface")
    c = np.asarray(c, dtype=complex)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.any(c):
        return 0.0, 0.0
    u = harmonic_spinor(mu, x0, c)
    tu = u(grid.nodes)
    g = 1j * times_alpha_n(grid, tu)
    lp = lp or LayerPotential(grid, mu)
    field_res = float(np.abs(lp.evaluate(g, X) - u(X)).max())
    if Cs is None:
        Cs = assemble_cs(grid, mu, lp=lp)
    from diracbie.calderon import make_projectors

    cal_p, _ = make_projectors(Cs, grid)
    r = cal_p.matrix @ tu.reshape(-1) - tu.reshape(-1)
    return field_res, l2_norm(grid, r)
