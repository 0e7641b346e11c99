"""
Calderon projectors, their stars, the anticommutator and the identity suite.

With ``N`` the multiplication by ``alpha . n``:

* ``Cal_pm = 1/2 pm i Cs N`` (so ``Cal_+ + Cal_- = Id`` by construction),
* ``Star_pm = -+ i N C_-+`` built from one-sided trace operators,
* ``A = N Cs + Cs N``.

Residual norms are induced norms restricted to a test space of smooth
traces (spherical harmonics of low degree in the surface chart, or low
Fourier modes on the torus). The full-grid induced norm of a Nystrom
residual is dominated by unresolved grid modes and does not converge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from diracbie.layerpot import (
    EXTERIOR,
    INTERIOR,
    BoundaryOperator,
    LayerPotential,
    spinor_matrix,
)
from diracbie.surface import SpinorTrace, SurfaceGrid, l2_norm, sh_index, sh_matrix

IDENTITY_NAMES = (
    "idempotency",
    "partition",
    "star_partition",
    "swap",
    "plemelj_square",
    "anticommutator_consistency",
    "cs_self_adjointness",
    "anticommutator_self_adjointness",
)


def make_projectors(Cs: BoundaryOperator, grid: SurfaceGrid | None = None) -> tuple[BoundaryOperator, BoundaryOperator]:
    """``Cal_pm = 1/2 pm i Cs (alpha . n)``."""
    grid = grid or Cs.grid
    half = 0.5 * BoundaryOperator.identity(grid)
    t = 1j * (Cs @ BoundaryOperator.alpha_n(grid))
    cp, cm = half + t, half - t
    cp.label, cm.label = "Cal+", "Cal-"
    return cp, cm


def make_star(C: BoundaryOperator, grid: SurfaceGrid | None = None, sign: str = "+") -> BoundaryOperator:
    """``Star_+ = -i N C_-`` (pass ``C_-``) or ``Star_- = +i N C_+`` (pass ``C_+``)."""
    grid = grid or C.grid
    n = BoundaryOperator.alpha_n(grid)
    if sign == "+":
        out = -1j * (n @ C)
    elif sign == "-":
        out = 1j * (n @ C)
    else:
        raise ValueError("sign must be '+' or '-'")
    out.label = f"Star{sign}"
    return out


def make_anticommutator(Cs: BoundaryOperator, grid: SurfaceGrid | None = None) -> BoundaryOperator:
    """``A = (alpha . n) Cs + Cs (alpha . n)``."""
    grid = grid or Cs.grid
    n = BoundaryOperator.alpha_n(grid)
    out = n @ Cs + Cs @ n
    out.label = "A"
    return out


# ---------------------------------------------------------------------------
# test spaces and norms


def default_test_degree(grid: SurfaceGrid) -> int:
    """Half the grid band limit (sphere-like) or a quarter of the modes (torus)."""
    return max(1, (grid.n_theta - 1) // 2)


def test_space(grid: SurfaceGrid, degree: int | None = None) -> np.ndarray:
    """Weighted-orthonormal basis ``Q`` (``4N x 4d``) of smooth spinor traces.

    Columns satisfy ``Q^H W Q = Id`` for the quadrature weights ``W``.
    """
    if grid.shape.topology == "sphere":
        deg = default_test_degree(grid) if degree is None else int(degree)
        deg = min(deg, grid.n_theta - 1)
        phi = sh_matrix(deg, grid.param_coords[:, 0], grid.param_coords[:, 1])
    else:
        kmax = max(1, grid.n_theta // 4) if degree is None else int(degree)
        v, u = grid.param_coords[:, 0], grid.param_coords[:, 1]
        kv = np.arange(-kmax, kmax + 1)
        ku = np.arange(-min(2 * kmax, grid.n_phi // 2 - 1), min(2 * kmax, grid.n_phi // 2 - 1) + 1)
        phi = (np.exp(1j * np.outer(v, kv))[:, :, None] * np.exp(1j * np.outer(u, ku))[:, None, :]).reshape(grid.n_nodes, -1)
    sw = np.sqrt(grid.weights)
    q, r = np.linalg.qr(sw[:, None] * phi)
    qs = q / sw[:, None]
    return np.kron(qs, np.eye(4))


def restricted_norm(RQ: np.ndarray, grid: SurfaceGrid, method: str = "power", max_iter: int = 20, rtol: float = 1e-6) -> float:
    """Norm of an operator given its action ``RQ`` on a weighted-orthonormal basis."""
    B = np.repeat(np.sqrt(grid.weights), 4)[:, None] * RQ
    if method == "svd":
        return float(np.linalg.norm(B, 2))
    if method != "power":
        raise ValueError(f"unknown norm method {method!r}")
    G = B.conj().T @ B
    x = np.ones(G.shape[0], dtype=complex) / np.sqrt(G.shape[0])
    x += 0.1 * np.cos(np.arange(G.shape[0]))
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = G @ x
        new = float(np.real(np.vdot(x, y)))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        if lam > 0.0 and abs(new - lam) <= rtol * abs(new):
            lam = new
            break
        lam = new
    return float(np.sqrt(max(lam, 0.0)))


def operator_norm(
    op, grid: SurfaceGrid, Q: np.ndarray | None = None, method: str = "power", max_iter: int = 20, rtol: float = 1e-6
) -> float:
    """Induced weighted-L2 norm of ``op`` on the span of ``Q``.

    ``method='power'`` runs power iteration on ``B^H B`` with
    ``B = W^(1/2) op Q``; ``'svd'`` returns the exact largest singular value.
    """
    m = op.matrix if isinstance(op, BoundaryOperator) else np.asarray(op)
    Q = test_space(grid) if Q is None else Q
    return restricted_norm(m @ Q, grid, method, max_iter, rtol)


# ---------------------------------------------------------------------------
# suite


@dataclass
class CalderonSuite:
    """All operators of the identity suite on one grid."""

    grid: SurfaceGrid
    mu: float
    Cs: BoundaryOperator
    C_plus: BoundaryOperator
    C_minus: BoundaryOperator
    Cal_plus: BoundaryOperator
    Cal_minus: BoundaryOperator
    Star_plus: BoundaryOperator
    Star_minus: BoundaryOperator
    A: BoundaryOperator
    method: str = "offsurface"

    @classmethod
    def build(cls, grid: SurfaceGrid, mu: float, method: str = "offsurface", lp: LayerPotential | None = None) -> "CalderonSuite":
        """Assemble the suite.

        With ``offsurface`` the one-sided operators ``C_pm`` are the
        extrapolated traces and ``Cs`` their mean. With ``pv_direct`` the
        one-sided operators follow from ``Cs`` by the jump relation, which
        makes the star identities exact.
        """
        lp = lp or LayerPotential(grid, mu)
        if method == "offsurface":
            rp = lp.trace_rows(INTERIOR)
            rm = lp.trace_rows(EXTERIOR)
            cp = BoundaryOperator(spinor_matrix(rp, mu), grid, "C+")
            cm = BoundaryOperator(spinor_matrix(rm, mu), grid, "C-")
            cs = 0.5 * (cp + cm)
            cs.label = "Cs"
        elif method == "pv_direct":
            from diracbie.layerpot import assemble_trace_ops

            cs = BoundaryOperator(spinor_matrix(lp.cs_rows("pv_direct"), mu), grid, "Cs")
            cp, cm = assemble_trace_ops(cs, grid)
        else:
            raise ValueError(f"unknown assembly method {method!r}")
        lp._rows.clear()
        calp, calm = make_projectors(cs, grid)
        return cls(
            grid=grid,
            mu=mu,
            Cs=cs,
            C_plus=cp,
            C_minus=cm,
            Cal_plus=calp,
            Cal_minus=calm,
            Star_plus=make_star(cm, grid, "+"),
            Star_minus=make_star(cp, grid, "-"),
            A=make_anticommutator(cs, grid),
            method=method,
        )

    def residual_actions(self) -> dict[str, list]:
        """Residual operators as maps ``X -> R X`` on blocks of column vectors."""
        g = self.grid
        w = np.repeat(g.weights, 4)
        nb = g.alpha_n

        def N(X):
            return np.einsum("nab,nbk->nak", nb, X.reshape(g.n_nodes, 4, -1)).reshape(X.shape)

        cp, cm = self.Cal_plus.matrix, self.Cal_minus.matrix
        sp, sm = self.Star_plus.matrix, self.Star_minus.matrix
        cs, A = self.Cs.matrix, self.A.matrix

        def adj(m, X):
            return (m.conj().T @ (w[:, None] * X)) / w[:, None]

        def csn2(X):
            Y = cs @ N(X)
            return -4.0 * (cs @ N(Y)) - X

        return {
            "idempotency": [lambda X: cp @ (cp @ X) - cp @ X, lambda X: cm @ (cm @ X) - cm @ X],
            "partition": [lambda X: cp @ X + cm @ X - X],
            "star_partition": [lambda X: sp @ X + sm @ X - X],
            "swap": [lambda X: N(cp @ X) - sm @ N(X), lambda X: N(cm @ X) - sp @ N(X)],
            "plemelj_square": [csn2],
            "anticommutator_consistency": [
                lambda X: cp @ X - sp @ X - 1j * (A @ X),
                lambda X: cm @ X - sm @ X + 1j * (A @ X),
            ],
            "cs_self_adjointness": [lambda X: cs @ X - adj(cs, X)],
            "anticommutator_self_adjointness": [lambda X: A @ X - adj(A, X)],
        }


def identity_residuals(
    grid: SurfaceGrid,
    mu: float,
    method: str = "offsurface",
    test_degree: int | None = None,
    norm_method: str = "power",
    suite: CalderonSuite | None = None,
) -> dict[str, float]:
    """Residual table of the Calderon identities (max over the +- variants).

    Keys are :data:`IDENTITY_NAMES`; each value is an induced norm on the
    test space of :func:`test_space`. ``partition`` is exact by construction
    and is measured in the full-grid norm.
    """
    suite = suite or CalderonSuite.build(grid, mu, method)
    Q = test_space(grid, test_degree)
    out = {}
    for name, acts in suite.residual_actions().items():
        if name == "partition":
            I = np.eye(4 * grid.n_nodes)
            out[name] = float(np.abs(acts[0](I)).max())
        else:
            out[name] = max(restricted_norm(a(Q), grid, norm_method) for a in acts)
    return out


# ---------------------------------------------------------------------------
# smoothing


def harmonic_trace(grid: SurfaceGrid, l: int, m: int, component: int) -> SpinorTrace:
    """Trace equal to ``Y_lm`` (surface chart) in one spinor component."""
    y = sh_matrix(l, grid.param_coords[:, 0], grid.param_coords[:, 1])[:, sh_index(l, m)]
    v = np.zeros((grid.n_nodes, 4), dtype=complex)
    v[:, component] = y
    return SpinorTrace(v, grid)


def smoothing_profile(
    A, grid: SurfaceGrid, degrees, orders=None, components=(0, 1, 2, 3)
) -> list[tuple[int, float]]:
    """Mean gain ``||A f_l|| / ||f_l||`` over harmonic inputs of each degree.

    ``orders`` maps a degree to the orders used; by default
    ``{0, l // 2, l}``. ``A`` may be a :class:`BoundaryOperator` or a
    callable acting on ``(N, 4)`` node values.
    """
    if grid.kind != "sphere":
        raise ValueError("the smoothing profile needs a sphere grid")
    if orders is None:
        orders = lambda l: sorted({0, l // 2, l})  # noqa: E731
    apply = A.matrix.__matmul__ if isinstance(A, BoundaryOperator) else None
    out = []
    for l in degrees:
        if l > grid.band_limit:
            raise ValueError(f"degree {l} exceeds the grid band limit {grid.band_limit}")
        gains = []
        for m in orders(l):
            for k in components:
                f = harmonic_trace(grid, l, m, k)
                if apply is not None:
                    af = apply(f.vector)
                else:
                    af = np.asarray(A(f.values)).reshape(-1)
                gains.append(l2_norm(grid, af) / f.norm())
        out.append((int(l), float(np.mean(gains))))
    return out


def loglog_slope(profile) -> float:
    """Least-squares slope of ``log gain`` against ``log l``."""
    l = np.array([p[0] for p in profile], dtype=float)
    g = np.array([p[1] for p in profile], dtype=float)
    return float(np.polyfit(np.log(l), np.log(g), 1)[0])
