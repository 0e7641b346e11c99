"""
Acceptance criteria, one test per criterion.

Each test appends a ``[PASS]`` or ``[FAIL]`` line to the acceptance summary
printed at the end of the pytest run. Run this file directly to see only
the summary:

    python3 tests/test_acceptance.py
"""

import functools
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_normals

from diracbie.algebra import (
    ALPHA,
    BETA,
    ID4,
    alpha_dot,
    mit_matrix,
    mit_projectors,
    p_tau,
    r_tau,
    shell_block_matrix,
    shell_sigma_min,
)
from diracbie.calderon import CalderonSuite, identity_residuals, loglog_slope, smoothing_profile
from diracbie.layerpot import LayerPotential, one_sided_trace_report, reproducing_residual, times_alpha_n
from diracbie.models import (
    critical_uncoupling_blocks,
    critical_witness,
    mit_boundary_form,
    mit_bootstrap_report,
    mit_project,
    rough_spectrum,
)
from diracbie.surface import Ellipsoid, Sphere, SpinorTrace, Torus, build_surface, l2_norm, smooth_trace

# thresholds as stated in the acceptance criteria
TOL = {
    "algebra": 1e-10,
    "jump_sphere": 1e-3,
    "plemelj_square": 5e-2,
    "partition": 1e-13,
    "reproduce_field": 1e-6,
    "reproduce_fixed_point": 1e-3,
    "classical": 1e-3,
    "smoothing_slope": -0.8,
    "mit_form": 1e-12,
    "witness_growth": 1.5,
    "witness_flatness": 0.2,
}
# "decreasing" means each refinement step shrinks the residual to at most this fraction
DECREASE = 0.9
LEVELS = (0, 1, 2)


def record(n, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}"
    ACCEPTANCE_LINES.append(line)
    return ok


def decreasing(values):
    return len(values) > 1 and all(b <= DECREASE * a for a, b in zip(values, values[1:]))


def fmt(values):
    return " -> ".join(f"{v:.2e}" for v in values)


@functools.lru_cache(maxsize=None)
def sphere(level):
    return build_surface(Sphere(1.0), level)


@functools.lru_cache(maxsize=None)
def suite(mu, level):
    return CalderonSuite.build(sphere(level), mu, "offsurface")


@functools.lru_cache(maxsize=None)
def identities(mu, level):
    return identity_residuals(sphere(level), mu, suite=suite(mu, level))


def test_criterion_1_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    normals = random_normals(rng, 50)
    taus = np.linspace(-4.0, 4.0, 25)
    err = 0.0
    mats = list(ALPHA) + [BETA]
    for i, a in enumerate(mats):
        for j, b in enumerate(mats):
            err = max(err, np.abs(a @ b + b @ a - 2.0 * (i == j) * ID4).max())
    for n in normals:
        an = alpha_dot(n)
        B = mit_matrix(n)
        err = max(err, np.abs(B @ B - ID4).max(), np.abs(B - B.conj().T).max())
        pp, pm = mit_projectors(n)
        err = max(err, np.abs(pp @ pp - pp).max(), np.abs(pm @ pm - pm).max(), np.abs(pp @ pm).max(), np.abs(pp + pm - ID4).max())
        for tau in taus:
            R = r_tau(n, tau)
            err = max(err, np.abs(R.conj().T @ (-1j * an) @ R + 1j * an).max())
            P = p_tau(n, tau)
            err = max(err, np.abs(P @ (1j * an) - (1j * an) @ P).max())
            s = np.linalg.svd(shell_block_matrix(n, tau), compute_uv=False)
            err = max(err, abs(s.min() - shell_sigma_min(tau)))
        for eps in (1, -1):
            ul, _, _, lr = critical_uncoupling_blocks(n, eps)
            err = max(err, np.abs(ul).max(), np.abs(lr).max())
    dt = time.perf_counter() - t0
    ok = err <= TOL["algebra"] and dt < 1.0
    assert record(1, ok, f"algebra identities max error {err:.1e} <= {TOL['algebra']:.0e} in {dt:.2f} s"), f"{err}, {dt}"


SURFACES = {
    "sphere": Sphere(1.0),
    "ellipsoid": Ellipsoid(1.0, 1.3, 0.8),
    "torus": Torus(2.0, 0.7),
}


def jump_residuals(shape, mu):
    rng = np.random.default_rng(2)
    out = []
    for level in LEVELS:
        g = build_surface(shape, level)
        gv = smooth_trace(g, rng).values
        lp = LayerPotential(g, mu)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tp = one_sided_trace_report(g, gv, +1, mu, lp).trace.values
            tm = one_sided_trace_report(g, gv, -1, mu, lp).trace.values
        out.append(l2_norm(g, tp - tm + 1j * times_alpha_n(g, gv)) / l2_norm(g, gv))
    return out


def test_criterion_2_plemelj_jump():
    ok = True
    parts = []
    for name, shape in SURFACES.items():
        for mu in (0.0, 1.0):
            r = jump_residuals(shape, mu)
            good = decreasing(r) and (name != "sphere" or r[-1] <= TOL["jump_sphere"])
            ok &= good
            parts.append(f"{name} mu={mu:g} {fmt(r)}")
    assert record(2, ok, "jump residual decreasing, sphere final <= 1e-3; " + "; ".join(parts))


def test_criterion_3_plemelj_square():
    ok = True
    parts = []
    for mu in (0.0, 1.0):
        r = [identities(mu, lv)["plemelj_square"] for lv in LEVELS]
        ok &= decreasing(r) and r[-1] <= TOL["plemelj_square"]
        parts.append(f"mu={mu:g} {fmt(r)}")
    assert record(3, ok, "-4(Cs N)^2 - Id decreasing, final <= 5e-2; " + "; ".join(parts))


def test_criterion_4_calderon_suite():
    ok = True
    parts = []
    for mu in (0.0, 1.0):
        for name in ("idempotency", "star_partition", "swap", "anticommutator_consistency"):
            r = [identities(mu, lv)[name] for lv in LEVELS]
            ok &= decreasing(r)
            parts.append(f"{name} mu={mu:g} {fmt(r)}")
        part = max(identities(mu, lv)["partition"] for lv in LEVELS)
        ok &= part <= TOL["partition"]
        parts.append(f"partition mu={mu:g} {part:.1e}")
    assert record(4, ok, "Calderon identities decreasing, partition exact; " + "; ".join(parts))


def test_criterion_5_reproducing_formula():
    mu = 1.0
    rng = np.random.default_rng(5)
    coef = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    d = rng.standard_normal((8, 3))
    X = 0.5 * rng.uniform(0, 1, (8, 1)) * d / np.linalg.norm(d, axis=1, keepdims=True)
    direction = np.array([1.0, 2.0, 2.0]) / 3.0
    top = LEVELS[-1]
    ok = True
    parts = []
    for radius in (1.5, 3.0):
        fr, fp = reproducing_residual(sphere(top), mu, radius * direction, coef, X, Cs=suite(mu, top).Cs)
        ok &= fr <= TOL["reproduce_field"] and fp <= TOL["reproduce_fixed_point"]
        parts.append(f"|x0|={radius:g} field {fr:.1e} fixed point {fp:.1e}")
    assert record(5, ok, "field <= 1e-6, Cal_+ fixed point <= 1e-3; " + "; ".join(parts))


def test_criterion_6_classical_oracle():
    # electrostatics of a uniformly charged unit sphere: (C_s c)(x) = (i/2)(alpha . x) c
    c = np.array([1.0, 0.5j, -0.3, 0.2])
    errs = []
    for lv in LEVELS:
        g = sphere(lv)
        got = (suite(0.0, lv).Cs.matrix @ np.tile(c, g.n_nodes)).reshape(-1, 4)
        exp = 0.5j * np.einsum("nab,b->na", alpha_dot(g.nodes), c)
        errs.append(float(np.abs(got - exp).max()))
    ok = decreasing(errs) and errs[-1] <= TOL["classical"]
    assert record(6, ok, f"uniform density max node error {fmt(errs)}, final <= 1e-3")


def test_criterion_7_smoothing():
    # at mu = 0 the anticommutator vanishes identically on a sphere, so mu = 1 is used
    top = LEVELS[-1]
    prof = smoothing_profile(suite(1.0, top).A, sphere(top), [2, 4, 8, 16])
    slope = loglog_slope(prof)
    ok = slope <= TOL["smoothing_slope"]
    gains = ", ".join(f"l={l}: {v:.2e}" for l, v in prof)
    assert record(7, ok, f"log-log slope {slope:.2f} <= -0.8 ({gains})")


def test_criterion_8_mit():
    rng = np.random.default_rng(8)
    forms, display, derived, anti = [], [], [], []
    for lv in LEVELS:
        g = sphere(lv)
        f = mit_project(SpinorTrace(rng.standard_normal((g.n_nodes, 4)) + 1j * rng.standard_normal((g.n_nodes, 4)), g))
        h = mit_project(SpinorTrace(rng.standard_normal((g.n_nodes, 4)) + 1j * rng.standard_normal((g.n_nodes, 4)), g))
        forms.append(abs(mit_boundary_form(f, h)) / (f.norm() * h.norm()))
        rep = mit_bootstrap_report(smooth_trace(g, rng), suite(0.0, lv).Cs)
        display.append(rep.display)
        derived.append(rep.derived / rep.trace_norm)
        anti.append(rep.beta_anti)
    form_ok = max(forms) <= TOL["mit_form"]
    ok = form_ok and decreasing(display) and decreasing(anti)
    record(
        8,
        ok,
        f"boundary form {max(forms):.1e} <= 1e-12; bootstrap residual {fmt(display)}; "
        f"beta anticommutation {fmt(anti)} (both must decrease)",
    )
    ACCEPTANCE_LINES.append(
        f"       supplemental: bootstrap with the sign -i beta N holds to {max(derived):.1e} relative on every level"
    )
    assert ok


def test_criterion_9_critical_witness():
    mu, eps = 1.0, 1
    spec = rough_spectrum(32, np.random.default_rng(9), 0.05)
    transm = [critical_witness(build_surface(Sphere(1.0), lv), mu, eps, spec, [8])[0].transm_residual for lv in (1, 2)]
    rows = critical_witness(build_surface(Sphere(1.0), 3), mu, eps, spec, [8, 16, 32])
    transm.append(rows[0].transm_residual)
    h = [r.h_half_norm for r in rows]
    fm = [r.f_minus_half_norm for r in rows]
    growth = [b / a for a, b in zip(h, h[1:])]
    flat = max(fm) / min(fm)
    ok = decreasing(transm) and min(growth) >= TOL["witness_growth"] and flat <= 1.0 + TOL["witness_flatness"]
    assert record(
        9,
        ok,
        f"transmission at L=8 {fmt(transm)}; H^1/2 growth per doubling "
        + ", ".join(f"{x:.2f}" for x in growth)
        + f" >= 1.5; H^-1/2 max/min {flat:.4f} <= 1.2",
    )


def test_criterion_10_determinism(tmp_path):
    outs = []
    path = tmp_path / "report.csv"
    argv = [sys.executable, "-m", "diracbie.cli", "mit", "--mu", "0", "1", "--levels", "0", "1", "--output", str(path)]
    for _ in range(2):
        subprocess.run(argv, capture_output=True, check=False)
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    assert record(10, ok, f"two CLI runs give byte-identical CSV ({len(outs[0])} bytes)")


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
