"""
Command-line experiment runner.

Each subcommand runs one refinement study and writes a report as CSV or as
an aligned table. The resolved configuration, including every numeric
default, is printed in the report header so that a report can be
reproduced from itself. Exit status is 0 when every check passes, 1 when
a check fails and 2 on a configuration error.

Usage:
    diracbie identities --surface sphere --levels 0 2 --mu 0 1
    diracbie shell-sweep --format pretty
    diracbie critical --config study.toml --output witness.csv

Set DIRACBIE_THREADS to run independent cases on several threads.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
import time
import warnings
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from diracbie import __version__
from diracbie.calderon import (
    IDENTITY_NAMES,
    CalderonSuite,
    identity_residuals,
    loglog_slope,
    make_anticommutator,
    smoothing_profile,
)
from diracbie.layerpot import LadderOptions, LayerPotential, assemble_cs, one_sided_trace_report, reproducing_residual, times_alpha_n
from diracbie.models import (
    critical_witness,
    mit_boundary_form,
    mit_bootstrap_report,
    mit_project,
    rough_spectrum,
    shell_system_conditioning,
)
from diracbie.quadrature import QuadratureOptions
from diracbie.surface import SpinorTrace, build_surface, l2_norm, make_shape, smooth_trace

EXPERIMENTS = ("identities", "jump", "reproduce", "smoothing", "mit", "shell-sweep", "critical")
THREADS_ENV = "DIRACBIE_THREADS"

DEFAULT_TOLERANCES = {
    "partition": 1e-13,
    "plemelj_square": 5e-2,
    "jump_sphere": 1e-3,
    "reproduce_field": 1e-6,
    "reproduce_fixed_point": 1e-3,
    "smoothing_slope": -0.8,
    "mit_form": 1e-12,
    "exact": 1e-10,
    "witness_growth": 1.5,
    "witness_flatness": 0.2,
    "decrease_ratio": 0.9,
}

DEFAULT_SURFACE_PARAMS = {
    "sphere": {"radius": 1.0},
    "ellipsoid": {"a": 1.0, "b": 1.3, "c": 0.8},
    "torus": {"major": 2.0, "minor": 0.7},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    experiment: str
    surface: str = "sphere"
    surface_params: dict = field(default_factory=dict)
    levels: tuple[int, int] = (0, 2)
    mu: list[float] = field(default_factory=lambda: [0.0, 1.0])
    tau: list[float] = field(default_factory=lambda: [float(t) for t in np.linspace(-4.0, 4.0, 25)])
    method: str = "offsurface"
    test_degree: int | None = None
    ball_radius: float | None = None
    source_radii: list[float] = field(default_factory=lambda: [1.5, 3.0])
    degrees: list[int] = field(default_factory=lambda: [2, 4, 8, 16])
    bootstrap_form: str = "display"
    epsilon: int = 1
    cutoffs: list[int] = field(default_factory=lambda: [8, 16, 32])
    delta: float = 0.05
    seed: int = 12345
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.surface not in DEFAULT_SURFACE_PARAMS:
            raise ConfigError(f"unknown surface kind {self.surface!r}")
        self.surface_params = {**DEFAULT_SURFACE_PARAMS[self.surface], **self.surface_params}
        try:
            self.shape = make_shape(self.surface, **self.surface_params)
        except ValueError as exc:
            raise ConfigError(f"invalid surface parameters: {exc}") from None
        lo, hi = (int(v) for v in self.levels)
        if lo < 0 or hi < lo:
            raise ConfigError(f"empty level range {lo}..{hi}")
        self.levels = (lo, hi)
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
        self.tolerances = {**DEFAULT_TOLERANCES, **{k: float(v) for k, v in self.tolerances.items()}}
        if self.ball_radius is not None and self.ball_radius <= self.shape.diameter:
            raise ConfigError(f"ball radius {self.ball_radius} must exceed the surface diameter {self.shape.diameter}")
        if self.method not in ("offsurface", "pv_direct"):
            raise ConfigError(f"unknown assembly method {self.method!r}")
        if self.bootstrap_form not in ("display", "derived"):
            raise ConfigError("bootstrap_form must be 'display' or 'derived'")
        if self.format not in ("csv", "pretty"):
            raise ConfigError("format must be 'csv' or 'pretty'")
        if self.experiment in ("smoothing", "critical") and self.surface != "sphere":
            raise ConfigError(f"the {self.experiment} experiment needs a sphere surface")
        if self.experiment == "critical" and any(m == 0.0 for m in self.mu):
            raise ConfigError("the critical experiment needs nonzero mu")
        if self.epsilon not in (1, -1):
            raise ConfigError("epsilon must be +1 or -1")

    @property
    def level_list(self) -> list[int]:
        return list(range(self.levels[0], self.levels[1] + 1))

    def describe(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "tolerances" or f.name == "surface_params":
                v = ", ".join(f"{k}={v[k]!r}" for k in sorted(v))
            out.append(f"{f.name} = {v}")
        out.append("quadrature = " + ", ".join(f"{k}={v!r}" for k, v in asdict(QuadratureOptions()).items()))
        out.append("ladder = " + ", ".join(f"{k}={v!r}" for k, v in asdict(LadderOptions()).items()))
        return out


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    """Merge a TOML file with command-line overrides (which win)."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        surface = raw.pop("surface", {})
        if isinstance(surface, dict):
            surface = dict(surface)
            if "kind" in surface:
                data["surface"] = surface.pop("kind")
            data["surface_params"] = surface
        else:
            data["surface"] = surface
        data.update(raw.pop("run", {}))
        out = dict(raw.pop("output", {}))
        if "path" in out:
            data["output"] = out.pop("path")
        data.update(out)
        data.update(raw)
    for k, v in overrides.items():
        if k == "surface_params":
            data["surface_params"] = {**data.get("surface_params", {}), **v}
        elif k == "tolerances":
            data["tolerances"] = {**data.get("tolerances", {}), **v}
        else:
            data[k] = v
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "experiment" not in data:
        raise ConfigError("no experiment given")
    return ExperimentConfig(**data)


# ---------------------------------------------------------------------------
# reports


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class RunReport:
    experiment: str
    key_columns: list[str]
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    header: list[str] = field(default_factory=list)
    rate_columns: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def rates(self) -> list[dict]:
        """``log2(r_l / r_{l+1})`` between consecutive levels of the same case."""
        out = []
        prev: dict = {}
        for row in self.rows:
            group = tuple(row[k] for k in self.key_columns if k != "level")
            last = prev.get(group)
            r = {}
            for c in self.rate_columns:
                a = last.get(c) if last is not None else None
                b = row.get(c)
                if a is None or b is None or not (a > 0 and b > 0) or not math.isfinite(a / b):
                    r[c] = None
                else:
                    r[c] = math.log2(a / b)
            out.append(r)
            prev[group] = row
        return out

    def summary(self) -> str:
        n_pass = sum(c.passed for c in self.checks)
        status = "PASS" if self.passed else "FAIL"
        return f"summary: {status} {n_pass}/{len(self.checks)} checks"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.6e}"
    return str(v)


def emit_report(report: RunReport, fmt: str = "csv") -> bytes:
    """Serialize ``report``; the CSV form is byte-stable for a fixed seed."""
    buf = io.StringIO()
    for line in report.header:
        buf.write(f"# {line}\n")
    rates = report.rates()
    if fmt == "csv":
        cols = report.key_columns + report.columns + [f"{c}_rate" for c in report.rate_columns]
        buf.write(",".join(cols) + "\n")
        for row, rate in zip(report.rows, rates):
            vals = [_fmt(row.get(c)) for c in report.key_columns + report.columns]
            vals += [_fmt(rate[c]) for c in report.rate_columns]
            buf.write(",".join(vals) + "\n")
        for c in report.checks:
            buf.write(f"# check {'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}\n")
        buf.write(f"# {report.summary()}\n")
    elif fmt == "pretty":
        cols = report.key_columns + report.columns
        table = [cols]
        for row, rate in zip(report.rows, rates):
            line = []
            for c in cols:
                s = _fmt(row.get(c))
                if c in report.rate_columns and rate[c] is not None:
                    s += f" ({rate[c]:+.2f})"
                line.append(s)
            table.append(line)
        widths = [max(len(r[i]) for r in table) for i in range(len(cols))]
        for r in table:
            buf.write("  ".join(s.rjust(w) for s, w in zip(r, widths)).rstrip() + "\n")
        if report.rate_columns:
            buf.write("(rates in parentheses: log2 of the residual ratio between consecutive levels)\n")
        for c in report.checks:
            buf.write(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}\n")
        for stage, sec in report.timings.items():
            buf.write(f"time {stage}: {sec:.1f} s\n")
        buf.write(report.summary() + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return buf.getvalue().encode()


# ---------------------------------------------------------------------------
# checks


def _decreasing(name: str, values, max_ratio: float) -> Check:
    """Every refinement step must shrink the residual by ``max_ratio`` or better."""
    v = [float(x) for x in values]
    ratios = [b / a if a > 0 else math.inf for a, b in zip(v, v[1:])]
    ok = len(v) >= 2 and all(r <= max_ratio for r in ratios)
    seq = " > ".join(f"{x:.3e}" for x in v) if ok else ", ".join(f"{x:.3e}" for x in v)
    return Check(name, ok, f"{seq} (step ratios {', '.join(f'{r:.3f}' for r in ratios)}, need <= {max_ratio})")


def _below(name: str, value: float, tol: float) -> Check:
    return Check(name, bool(value <= tol), f"{value:.3e} <= {tol:.1e}" if value <= tol else f"{value:.3e} > {tol:.1e}")


def _case_rng(seed: int, *key) -> np.random.Generator:
    # one stream per case, independent of thread scheduling and of hash salting
    words = [k if isinstance(k, int) else zlib.crc32(str(k).encode()) for k in key]
    return np.random.default_rng([seed, *words])


# ---------------------------------------------------------------------------
# experiments


def _grids(cfg: ExperimentConfig):
    return [build_surface(cfg.shape, lev) for lev in cfg.level_list]


def _run_identities(cfg: ExperimentConfig, report: RunReport, pool):
    report.key_columns = ["mu", "level"]
    report.columns = list(IDENTITY_NAMES)
    report.rate_columns = [n for n in IDENTITY_NAMES if n != "partition"]
    grids = _grids(cfg)

    def case(mu):
        rows = []
        for g in grids:
            suite = CalderonSuite.build(g, mu, cfg.method)
            r = identity_residuals(g, mu, cfg.method, test_degree=cfg.test_degree, suite=suite)
            rows.append({"mu": mu, "level": g.level, **r})
        return rows

    tol = cfg.tolerances
    for mu, rows in zip(cfg.mu, pool.map(case, cfg.mu)):
        report.rows += rows
        for n in report.rate_columns:
            report.checks.append(_decreasing(f"{n} mu={mu}", [r[n] for r in rows], tol["decrease_ratio"]))
        report.checks.append(_below(f"partition mu={mu}", max(r["partition"] for r in rows), tol["partition"]))
        report.checks.append(_below(f"plemelj_square final mu={mu}", rows[-1]["plemelj_square"], tol["plemelj_square"]))


def _run_jump(cfg: ExperimentConfig, report: RunReport, pool):
    report.key_columns = ["mu", "level"]
    report.columns = ["relative_residual", "unconverged_nodes"]
    report.rate_columns = ["relative_residual"]
    grids = _grids(cfg)

    def case(mu):
        rows = []
        for g in grids:
            gv = smooth_trace(g, _case_rng(cfg.seed, "jump")).values
            lp = LayerPotential(g, mu)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                tp = one_sided_trace_report(g, gv, +1, mu, lp)
                tm = one_sided_trace_report(g, gv, -1, mu, lp)
            res = tp.trace.values - tm.trace.values + 1j * times_alpha_n(g, gv)
            bad = int(np.count_nonzero(tp.diverged | tm.diverged))
            rows.append({"mu": mu, "level": g.level, "relative_residual": l2_norm(g, res) / l2_norm(g, gv), "unconverged_nodes": bad})
        return rows

    tol = cfg.tolerances
    for mu, rows in zip(cfg.mu, pool.map(case, cfg.mu)):
        report.rows += rows
        report.checks.append(_decreasing(f"jump mu={mu}", [r["relative_residual"] for r in rows], tol["decrease_ratio"]))
        if cfg.surface == "sphere":
            report.checks.append(_below(f"jump final mu={mu}", rows[-1]["relative_residual"], tol["jump_sphere"]))


def interior_probes(shape, rng: np.random.Generator, n: int = 8) -> np.ndarray:
    """Points well inside ``shape``."""
    if shape.kind == "torus":
        u = rng.uniform(0, 2 * np.pi, n)
        v = rng.uniform(0, 2 * np.pi, n)
        rho = 0.5 * shape.minor * rng.uniform(0, 1, n)
        w = shape.major + rho * np.cos(v)
        return np.stack([w * np.cos(u), w * np.sin(u), rho * np.sin(v)], axis=1)
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return 0.5 * rng.uniform(0, 1, (n, 1)) * d * shape.axes


def _run_reproduce(cfg: ExperimentConfig, report: RunReport, pool):
    report.key_columns = ["mu", "source_radius", "level"]
    report.columns = ["field_residual", "fixed_point_residual"]
    report.rate_columns = list(report.columns)
    grids = _grids(cfg)
    direction = np.array([1.0, 2.0, 2.0]) / 3.0
    outer = 0.5 * cfg.shape.diameter
    cases = [(mu, r) for mu in cfg.mu for r in cfg.source_radii]

    def case(c):
        mu, r = c
        rng = _case_rng(cfg.seed, "reproduce", repr(mu), repr(r))
        coef = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        X = interior_probes(cfg.shape, rng)
        x0 = r * outer * direction
        rows = []
        for g in grids:
            lp = LayerPotential(g, mu)
            Cs = assemble_cs(g, mu, cfg.method, lp=lp)
            fr, fp = reproducing_residual(g, mu, x0, coef, X, Cs=Cs, lp=lp)
            rows.append({"mu": mu, "source_radius": r, "level": g.level, "field_residual": fr, "fixed_point_residual": fp})
        return rows

    tol = cfg.tolerances
    for (mu, r), rows in zip(cases, pool.map(case, cases)):
        report.rows += rows
        report.checks.append(_below(f"field mu={mu} r={r}", rows[-1]["field_residual"], tol["reproduce_field"]))
        report.checks.append(_below(f"fixed point mu={mu} r={r}", rows[-1]["fixed_point_residual"], tol["reproduce_fixed_point"]))


def _run_smoothing(cfg: ExperimentConfig, report: RunReport, pool):
    report.key_columns = ["mu", "level"]
    report.columns = [f"gain_l{l}" for l in cfg.degrees] + ["slope"]
    grids = _grids(cfg)
    for g in grids:
        if max(cfg.degrees) > g.band_limit:
            raise ConfigError(f"degree {max(cfg.degrees)} exceeds the band limit {g.band_limit} at level {g.level}")

    def case(mu):
        rows = []
        for g in grids:
            A = make_anticommutator(assemble_cs(g, mu, cfg.method), g)
            prof = smoothing_profile(A, g, cfg.degrees)
            row = {"mu": mu, "level": g.level, "slope": loglog_slope(prof)}
            row.update({f"gain_l{l}": v for l, v in prof})
            rows.append(row)
        return rows

    for mu, rows in zip(cfg.mu, pool.map(case, cfg.mu)):
        report.rows += rows
        s = rows[-1]["slope"]
        tol = cfg.tolerances["smoothing_slope"]
        report.checks.append(Check(f"slope mu={mu}", s <= tol, f"{s:.3f} {'<=' if s <= tol else '>'} {tol}"))


def _run_mit(cfg: ExperimentConfig, report: RunReport, pool):
    report.key_columns = ["mu", "level"]
    report.columns = ["form_ratio", "bootstrap_display", "bootstrap_derived", "beta_anti", "beta_comm", "trace_norm"]
    report.rate_columns = ["bootstrap_display", "beta_anti"]
    grids = _grids(cfg)

    def case(mu):
        rows = []
        for g in grids:
            rng = _case_rng(cfg.seed, "mit")
            f = mit_project(SpinorTrace(rng.standard_normal((g.n_nodes, 4)) + 1j * rng.standard_normal((g.n_nodes, 4)), g))
            h = mit_project(SpinorTrace(rng.standard_normal((g.n_nodes, 4)) + 1j * rng.standard_normal((g.n_nodes, 4)), g))
            form = abs(mit_boundary_form(f, h)) / (f.norm() * h.norm())
            t = smooth_trace(g, _case_rng(cfg.seed, "mit-trace"))
            rep = mit_bootstrap_report(t, assemble_cs(g, mu, cfg.method))
            rows.append(
                {
                    "mu": mu,
                    "level": g.level,
                    "form_ratio": form,
                    "bootstrap_display": rep.display,
                    "bootstrap_derived": rep.derived,
                    "beta_anti": rep.beta_anti,
                    "beta_comm": rep.beta_comm,
                    "trace_norm": rep.trace_norm,
                }
            )
        return rows

    tol = cfg.tolerances
    for mu, rows in zip(cfg.mu, pool.map(case, cfg.mu)):
        report.rows += rows
        report.checks.append(_below(f"boundary form mu={mu}", max(r["form_ratio"] for r in rows), tol["mit_form"]))
        if cfg.bootstrap_form == "display":
            report.checks.append(_decreasing(f"bootstrap mu={mu}", [r["bootstrap_display"] for r in rows], tol["decrease_ratio"]))
            report.checks.append(_decreasing(f"beta anticommutation mu={mu}", [r["beta_anti"] for r in rows], tol["decrease_ratio"]))
        else:
            rel = max(r["bootstrap_derived"] / r["trace_norm"] for r in rows)
            report.checks.append(_below(f"bootstrap (derived sign) mu={mu}", rel, tol["exact"]))
            if mu == 0.0:
                rel = max(r["beta_comm"] / r["trace_norm"] for r in rows)
                report.checks.append(_below(f"beta commutation mu={mu}", rel, tol["exact"]))


def _run_shell_sweep(cfg: ExperimentConfig, report: RunReport, pool):
    report.key_columns = ["tau"]
    report.columns = ["sigma_min", "kappa", "expected_sigma_min", "error"]
    g = build_surface(cfg.shape, cfg.levels[1])
    mu = cfg.mu[0] if cfg.mu else 0.0
    for c in shell_system_conditioning(g, mu, cfg.tau):
        exp = abs(abs(c.tau) - 2.0) / 2.0
        report.rows.append({"tau": c.tau, "sigma_min": c.sigma_min, "kappa": c.kappa, "expected_sigma_min": exp, "error": abs(c.sigma_min - exp)})
    err = max((r["error"] for r in report.rows), default=0.0)
    report.checks.append(_below("sigma_min law", err, cfg.tolerances["exact"]))


def _run_critical(cfg: ExperimentConfig, report: RunReport, pool):
    report.key_columns = ["mu", "L", "level"]
    report.columns = ["transm_residual", "h_half_norm", "f_minus_half_norm"]
    report.rate_columns = ["transm_residual"]
    grids = _grids(cfg)
    top = grids[-1]
    cutoffs = sorted(int(c) for c in cfg.cutoffs)
    if cutoffs[-1] > top.band_limit:
        raise ConfigError(f"cutoff {cutoffs[-1]} exceeds the band limit {top.band_limit} at level {top.level}")
    L0 = cutoffs[0]

    def case(mu):
        spec = rough_spectrum(cutoffs[-1], _case_rng(cfg.seed, "critical"), cfg.delta)
        rows = []
        for g in grids:
            use = cutoffs if g is top else [L for L in [L0] if L <= g.band_limit]
            for w in critical_witness(g, mu, cfg.epsilon, spec, use, method=cfg.method):
                rows.append({"mu": mu, "L": w.L, "level": g.level, **{k: getattr(w, k) for k in report.columns}})
        return sorted(rows, key=lambda r: (r["L"], r["level"]))

    tol = cfg.tolerances
    for mu, rows in zip(cfg.mu, pool.map(case, cfg.mu)):
        report.rows += rows
        report.checks.append(_decreasing(f"transmission L={L0} mu={mu}", [r["transm_residual"] for r in rows if r["L"] == L0], tol["decrease_ratio"]))
        topr = [r for r in rows if r["level"] == top.level]
        h = [r["h_half_norm"] for r in topr]
        growth = [b / a for a, b in zip(h, h[1:])]
        ok = bool(growth) and min(growth) >= tol["witness_growth"]
        report.checks.append(Check(f"H^1/2 growth mu={mu}", ok, "per doubling " + ", ".join(f"{x:.3f}" for x in growth)))
        fm = [r["f_minus_half_norm"] for r in topr]
        ratio = max(fm) / min(fm)
        report.checks.append(Check(f"H^-1/2 flatness mu={mu}", ratio <= 1.0 + tol["witness_flatness"], f"max/min {ratio:.4f} vs {1.0 + tol['witness_flatness']:.2f}"))


RUNNERS = {
    "identities": _run_identities,
    "jump": _run_jump,
    "reproduce": _run_reproduce,
    "smoothing": _run_smoothing,
    "mit": _run_mit,
    "shell-sweep": _run_shell_sweep,
    "critical": _run_critical,
}


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Run the configured study and evaluate its checks."""
    report = RunReport(cfg.experiment, [], [])
    report.header = [f"diracbie {__version__} experiment={cfg.experiment}"] + cfg.describe()
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        RUNNERS[cfg.experiment](cfg, report, pool)
    report.timings["total"] = time.perf_counter() - t0
    return report


# ---------------------------------------------------------------------------
# argument parsing


def _key_values(items, cast=float) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = cast(v)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diracbie", description="Boundary integral experiments for the free Dirac operator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} study")
        p.add_argument("--config", help="TOML file with run settings")
        p.add_argument("--surface", choices=sorted(DEFAULT_SURFACE_PARAMS))
        p.add_argument("--param", action="append", metavar="KEY=VALUE", help="surface parameter, e.g. radius=1.0")
        p.add_argument("--levels", nargs=2, type=int, metavar=("LO", "HI"))
        p.add_argument("--mu", nargs="+", type=float)
        p.add_argument("--tau", nargs="+", type=float)
        p.add_argument("--tau-range", nargs=3, type=float, metavar=("LO", "HI", "N"))
        p.add_argument("--method", choices=["offsurface", "pv_direct"])
        p.add_argument("--test-degree", type=int)
        p.add_argument("--ball-radius", type=float)
        p.add_argument("--source-radii", nargs="+", type=float)
        p.add_argument("--degrees", nargs="+", type=int)
        p.add_argument("--bootstrap-form", choices=["display", "derived"])
        p.add_argument("--epsilon", type=int, choices=[1, -1])
        p.add_argument("--cutoffs", nargs="+", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", action="append", metavar="KEY=VALUE", help="override a tolerance")
        p.add_argument("--format", choices=["csv", "pretty"])
        p.add_argument("--output", "-o", help="write the report here instead of stdout")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict:
    out: dict = {"experiment": args.experiment}
    simple = ["surface", "mu", "tau", "method", "test_degree", "ball_radius", "source_radii", "degrees",
              "bootstrap_form", "epsilon", "cutoffs", "delta", "seed", "format", "output"]
    for k in simple:
        v = getattr(args, k)
        if v is not None:
            out[k] = v
    if args.levels is not None:
        out["levels"] = tuple(args.levels)
    if args.tau_range is not None:
        lo, hi, n = args.tau_range
        out["tau"] = [float(t) for t in np.linspace(lo, hi, int(n))]
    if args.param:
        out["surface_params"] = _key_values(args.param)
    if args.tol:
        out["tolerances"] = _key_values(args.tol)
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, overrides_from_args(args))
        report = run_experiment(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    data = emit_report(report, cfg.format)
    if cfg.output:
        try:
            with open(cfg.output, "wb") as fh:
                fh.write(data)
        except OSError as exc:
            print(f"error: cannot write {cfg.output}: {exc}", file=sys.stderr)
            return 2
        print(report.summary(), file=sys.stderr)
    else:
        sys.stdout.write(data.decode())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
