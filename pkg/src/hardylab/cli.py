"""Configuration-driven experiment runner.

``hardylab <scenario> --config <path> [--out <dir>]`` reads a flat
``key = value`` file, runs one scenario, writes ``<scenario>.csv`` and
updates ``summary.txt`` with one PASS/FAIL line per check.
"""

import argparse
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .funcs import eval_xk_tilde, exponent_from_lambda
from .grids import PositivityError, RadialDomain, make_grid
from .ground import MatchError, build_ground_state
from .heat import (UnderResolved, bound_stability, check_bound, diagonal_kernel, exponent_check,
                   ground_transform_check, heat_grid, random_profiles)
from .identities import (derivative_rule_check, gauge_identity_check, random_log_bumps,
                         random_vectors)
from .mazya import (InequalityViolation, MazyaCheck, SobolevQuotient, best_constant,
                    form_on_samples, harmonic_improvement_check, mazya_sup)
from .potentials import CriticalInner, InverseSquare, IteratedLogBounded, PowerLaw
from .rayleigh import (CriticalWarning, DiscretizationFault, RayleighProblem, epsilon0,
                       epsilon0_lower_bound, lambda_formula, mu_formula, solve_quotient)
from .shooting import BracketNotFound, epsilon0_by_bisection, shoot

SCENARIOS = ("rayleigh", "epsilon0", "shoot", "mazya", "best-constant", "heat-bound",
             "identity-suite")

CONFIG_KEYS = ("N", "domain", "R", "Rinf", "rmin", "grid_sizes", "alpha", "lambda", "epsilon",
               "k", "mu", "sigma", "Kbound", "tail", "tmin", "tmax", "t_points", "sectors",
               "tol", "seed")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_FAILED = 0, 1, 2, 3

SOLVER_FAULTS = (DiscretizationFault, PositivityError, UnderResolved, BracketNotFound,
                 MatchError, InequalityViolation, RuntimeError, FloatingPointError)

EPILOG = """\
config keys (flat "key = value", '#' starts a comment):
  N           dimension, or a comma list
  domain      ball | exterior | both | whole
  R, Rinf     ball radius, truncation radius
  rmin        smallest radius of the grid
  grid_sizes  node counts, strictly increasing; each must be 2n-1 of the previous
  alpha       "start:stop:count", a comma list, or "auto:COUNT" (COUNT per regime)
  lambda      coefficient of |x|^-2 (may be negative)
  epsilon     numbers or multiples of the threshold such as "0.5*eps0"
  k, mu       iterated-log depth(s) and last coefficient
  tail        tail profiles "r^-P" (comma list), scaled by Kbound
  sigma       tail decay exponent; alone it means tail = r^-(2+sigma)
  Kbound      bound constant K of the tail or core
  tmin, tmax, t_points   time grid (geometric)
  sectors     fixed harmonic-sector cutoff (adaptive when absent)
  tol         acceptance tolerance of the scenario
  seed        random seed

acceptance criteria (configs shipped in configs/):
  1 formulas            rayleigh        configs/c1_rayleigh.cfg
  2 sandwich/monotone   rayleigh        configs/c2_sandwich.cfg
  3 Kelvin duality      rayleigh        configs/c3_kelvin.cfg
  4 threshold           epsilon0        configs/c4_epsilon0.cfg
  5 Maz'ja criterion    mazya           configs/c5_mazya.cfg
  6 identities          identity-suite  configs/c6_identities.cfg
  7 free kernel         heat-bound      configs/c7_free_kernel.cfg
  8 heat bounds         heat-bound      configs/c8a_critical.cfg ... c8e_log_refined.cfg
  9 improved Hardy      identity-suite  configs/c9_positivity.cfg
 10 determinism         any scenario, run twice with the same config

exit codes: 0 all checks pass, 1 invalid config, 2 solver fault, 3 a check failed
"""


class ConfigError(ValueError):
    """The configuration violates a documented invariant."""


# -- config -----------------------------------------------------------------

def _positive_float(key, text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None
    if not v > 0 or not math.isfinite(v):
        raise ConfigError(f"{key} must be positive and finite, got {text!r}")
    return v


def _int_list(key, text, minimum=1):
    try:
        vals = [int(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"{key} must be a comma list of integers, got {text!r}") from None
    if any(v < minimum for v in vals):
        raise ConfigError(f"{key} values must be >= {minimum}")
    return vals


def _grid_sizes(key, text):
    vals = _int_list(key, text, 16)
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("grid_sizes must be strictly increasing")
    if any(b != 2 * a - 1 for a, b in zip(vals, vals[1:])):
        raise ConfigError("grid_sizes must nest: each size is 2n-1 of the previous")
    return vals


def _tails(key, text):
    out = []
    for item in text.split(","):
        item = item.strip().replace(" ", "")
        if not item.startswith("r^"):
            raise ConfigError(f"tail must look like r^-P, got {item!r}")
        try:
            power = float(item[2:])
        except ValueError:
            raise ConfigError(f"tail must look like r^-P, got {item!r}") from None
        out.append((item, power))
    return out


def _float(key, text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return v


PARSERS = {
    "N": lambda k, t: _int_list(k, t, 3),
    "domain": lambda k, t: t,
    "R": _positive_float,
    "Rinf": _positive_float,
    "rmin": _positive_float,
    "grid_sizes": _grid_sizes,
    "alpha": lambda k, t: t,
    "lambda": _float,
    "epsilon": lambda k, t: [x.strip() for x in t.split(",")],
    "k": lambda k, t: _int_list(k, t, 0),
    "mu": _positive_float,
    "sigma": _positive_float,
    "Kbound": _positive_float,
    "tail": _tails,
    "tmin": _positive_float,
    "tmax": _positive_float,
    "t_points": lambda k, t: _int_list(k, t, 2)[0],
    "sectors": lambda k, t: _int_list(k, t, 1)[0],
    "tol": _positive_float,
    "seed": lambda k, t: _int_list(k, t, 0)[0],
}


@dataclass
class ExperimentConfig:
    scenario: str
    values: dict = field(default_factory=dict)
    out: Path = Path(".")

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"scenario {self.scenario} needs the key {key!r}")
        return self.values[key]


def parse_config(text: str, scenario: str, out=".") -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = PARSERS[key](key, val)
    if not values:
        raise ConfigError("empty config")
    cfg = ExperimentConfig(scenario, values, Path(out))
    if "domain" in values and values["domain"] not in ("ball", "exterior", "both", "whole"):
        raise ConfigError(f"domain must be ball, exterior, both or whole, got {values['domain']!r}")
    if "tmin" in values and "tmax" in values and not values["tmin"] < values["tmax"]:
        raise ConfigError("tmin must be below tmax")
    if "rmin" in values and "R" in values and not values["rmin"] < values["R"]:
        raise ConfigError("rmin must be below R")
    return cfg


def _alpha_values(text: str, N: int):
    half = (N - 2) / 2
    if text.startswith("auto:"):
        count = int(text[5:])
        # COUNT values strictly inside each regime (0, a) and (a, 2a)
        below = [half * i / (count + 1) for i in range(1, count + 1)]
        above = [half * (1 + i / (count + 1)) for i in range(1, count + 1)]
        return below + above
    if ":" in text:
        start, stop, count = text.split(":")
        return list(np.linspace(float(start), float(stop), int(count)))
    return [float(x) for x in text.split(",")]


def _tail_profiles(cfg):
    K = cfg.get("Kbound", 1.0)
    if "tail" in cfg.values:
        return [(name, PowerLaw(K, p)) for name, p in cfg.values["tail"]]
    if "sigma" in cfg.values:
        p = -2 - cfg.values["sigma"]
        return [(f"r^{p:g}", PowerLaw(K, p))]
    raise ConfigError(f"scenario {cfg.scenario} needs the key 'tail' or 'sigma'")


def _epsilons(cfg, eps0):
    out = []
    for item in cfg.require("epsilon"):
        if item.endswith("*eps0"):
            out.append(float(item[:-5]) * eps0())
        else:
            out.append(float(item))
    if any(not e > 0 for e in out):
        raise ConfigError("epsilon values must be positive")
    return out


def _single_N(cfg, default=None):
    Ns = cfg.get("N", None if default is None else [default])
    if Ns is None:
        raise ConfigError(f"scenario {cfg.scenario} needs the key 'N'")
    if len(Ns) != 1:
        raise ConfigError(f"scenario {cfg.scenario} takes a single N")
    return Ns[0]


# -- results ----------------------------------------------------------------

@dataclass
class Outcome:
    header: tuple
    rows: list
    checks: list  # (name, passed, detail)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".15g")
    return str(v)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(outcome: Outcome) -> str:
    lines = [",".join(outcome.header)]
    lines += [",".join(_fmt(v) for v in row) for row in outcome.rows]
    return "\n".join(lines) + "\n"


def _summary_lines(scenario, outcome):
    return [f"{scenario}: {'PASS' if ok else 'FAIL'} {name} ({detail})"
            for name, ok, detail in outcome.checks]


def _update_summary(path: Path, scenario: str, lines):
    old = path.read_text().splitlines() if path.exists() else []
    keep = [ln for ln in old if not ln.startswith(f"{scenario}: ")]
    _atomic_write(path, "\n".join(keep + lines) + "\n")


# -- scenarios ----------------------------------------------------------------

def run_rayleigh(cfg):
    Ns = cfg.require("N")
    which = cfg.get("domain", "both")
    if which == "whole":
        raise ConfigError("rayleigh runs on ball, exterior or both")
    R = cfg.get("R", 1.0)
    Rinf = cfg.get("Rinf", 1e300)
    rmin = cfg.get("rmin", 1e-300 * R)
    sizes = cfg.get("grid_sizes", [13801, 27601])
    tol = cfg.get("tol", 1e-3)
    alpha_text = cfg.get("alpha", "auto:12")
    domains = ["ball", "exterior"] if which == "both" else [which]

    def solve(N, kind, alpha):
        dom = RadialDomain.ball(R) if kind == "ball" else RadialDomain.exterior(R, Rinf)
        grid = make_grid(dom, sizes[0], rmin / R) if kind == "ball" else make_grid(dom, sizes[0])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CriticalWarning)
            return solve_quotient(RayleighProblem(N, dom, alpha), grid, len(sizes) - 1)

    rows, checks = [], []
    for N in Ns:
        alphas = _alpha_values(alpha_text, N)
        half = (N - 2) / 2
        computed = {}
        for kind in domains:
            formula = lambda_formula if kind == "ball" else mu_formula
            errs, finest = [], []
            for a in alphas:
                res = solve(N, kind, a)
                exact = formula(a, N)
                rows.append((N, kind, a, res.best, exact, abs(res.best - exact)))
                errs.append(abs(res.best - exact) / max(abs(exact), 1e-300))
                finest.append(res.value)
            computed[kind] = [r[3] for r in rows[-len(alphas):]]
            worst = max(errs)
            checks.append((f"formula N={N} {kind}", worst <= tol,
                           f"max relative error {worst:.3g} <= {tol:g}"))
            if kind == "ball":
                lam = computed[kind]
                lo = min(lam[i] - a * (N - 2 - a) for i, a in enumerate(alphas))
                hi = max(lam) - half * half
                inside = lo >= -1e-3 and hi <= 1e-3
                checks.append((f"sandwich N={N}", inside,
                               f"min excess over alpha(N-2-alpha) {lo:.3g}, "
                               f"max excess over ((N-2)/2)^2 {hi:.3g}, slack 1e-3"))
                order = np.argsort(alphas)
                # the finest-grid quotient is exactly monotone in alpha
                steps = np.diff(np.asarray(finest)[order])
                checks.append((f"monotone N={N}", bool(np.all(steps >= 0)),
                               f"smallest step {float(np.min(steps)):.3g}"))
        if which == "both":
            picks = [alphas[i] for i in (len(alphas) // 4, len(alphas) // 2, 3 * len(alphas) // 4)]
            gaps = []
            for a in picks:
                mu = computed["exterior"][alphas.index(a)]
                lam = solve(N, "ball", N - 2 - a).best
                gaps.append(abs(mu - lam))
            checks.append((f"kelvin N={N}", max(gaps) <= 2e-3,
                           "|mu(alpha) - lambda(N-2-alpha)| = "
                           + ", ".join(f"{g:.3g}" for g in gaps) + " <= 0.002 at alpha = "
                           + ", ".join(f"{a:.6g}" for a in picks)))
    header = ("N", "domain", "alpha", "lambda_computed", "lambda_formula", "abs_err")
    return Outcome(header, rows, checks)


def run_epsilon0(cfg):
    N = _single_N(cfg)
    ks = cfg.get("k", [0])
    which = cfg.get("domain", "exterior")
    if which not in ("exterior", "ball"):
        raise ConfigError("epsilon0 runs on exterior (tail) or ball (dual core)")
    sizes = cfg.get("grid_sizes", [4001, 8001])
    Rinf = cfg.get("Rinf", 1e8)
    tol = cfg.get("tol", 1e-2)
    rmin = cfg.get("rmin", 1e-12)
    rows, checks = [], []
    for name, weight in _tail_profiles(cfg):
        for k in ks:
            variant = "kelvin-dual" if which == "ball" else ("base" if k == 0 else "log")
            res = epsilon0(N, weight, variant, k, n=sizes[0], refinements=len(sizes) - 1,
                           Rinf=Rinf, r_min_fraction=rmin)
            if which == "ball":
                # Kelvin inversion turns the core g into the tail r^-4 g(1/r)
                shot_tail = PowerLaw(weight.K, -4 - weight.power)
            else:
                shot_tail = weight
            shot = epsilon0_by_bisection(shot_tail, N, (N - 2 + k) / 2, tol=1e-9,
                                         Rinf=min(Rinf, 1e8))
            bound = epsilon0_lower_bound(N, weight.K, variant, k)
            rows.append((N, variant, k, name, "rayleigh", res.best, bound))
            rows.append((N, variant, k, name, "shooting", shot, bound))
            gap = abs(res.best - shot) / shot
            checks.append((f"agreement {variant} k={k} {name}", gap <= tol,
                           f"rayleigh {res.best:.10g}, shooting {shot:.10g}, "
                           f"relative gap {gap:.3g} <= {tol:g}"))
            ok = res.best >= bound and shot >= bound
            checks.append((f"lower bound {variant} k={k} {name}", ok,
                           f"both >= {bound:.10g}"))
    header = ("N", "variant", "k", "tail", "method", "epsilon0", "lower_bound")
    return Outcome(header, rows, checks)


def run_shoot(cfg):
    N = _single_N(cfg)
    k = cfg.get("k", [0])[0]
    Rinf = cfg.get("Rinf", 1e6)
    robin = (N - 2 + k) / 2
    tails = _tail_profiles(cfg)
    if len(tails) != 1:
        raise ConfigError("shoot takes a single tail")
    name, tail = tails[0]
    cache = {}

    def eps0():
        if "eps0" not in cache:
            cache["eps0"] = epsilon0_by_bisection(tail, N, robin, tol=1e-10, Rinf=Rinf)
        return cache["eps0"]

    epsilons = _epsilons(cfg, eps0)
    threshold = eps0()
    radii = np.geomspace(1.0, Rinf, 41)
    rows, checks = [], []
    for eps in epsilons:
        res = shoot(eps, tail, N, Rinf, robin)
        psi, flux = res.value(radii), res.flux(radii)
        for r, p, f in zip(radii, psi, flux):
            rows.append((eps, r, p, f))
        ratio = eps / threshold
        if ratio < 1 - 1e-6:
            ok = res.positive and res.monotone_decreasing and res.limit_estimate > 0
            checks.append((f"subcritical eps={eps:.10g}", ok,
                           f"eps/eps0 = {ratio:.6g}, positive {res.positive}, decreasing "
                           f"{res.monotone_decreasing}, limit {res.limit_estimate:.6g}"))
        elif ratio > 1 + 1e-6:
            checks.append((f"supercritical eps={eps:.10g}", res.supercritical,
                           f"eps/eps0 = {ratio:.6g}, limit {res.limit_estimate:.6g}, "
                           f"crossing {res.crossing}"))
    header = ("epsilon", "r", "psi", "flux")
    return Outcome(header, rows, checks)


def run_mazya(cfg):
    N = _single_N(cfg, 3)
    tol = cfg.get("tol", 1e-3)
    q = 2 * N / (N - 2)
    half = (N - 2) / 2
    name, tail = _tail_profiles(cfg)[0] if ("tail" in cfg.values or "sigma" in cfg.values) \
        else ("r^-4", PowerLaw(cfg.get("Kbound", 1.0), -4))
    cache = {}

    def eps0():
        if "eps0" not in cache:
            cache["eps0"] = epsilon0_by_bisection(tail, N, half, tol=1e-10)
        return cache["eps0"]

    eps = _epsilons(cfg, eps0)[0] if "epsilon" in cfg.values else 0.5 * eps0()

    def power(r):
        return r ** (N - 1)

    closed = (N - 2) ** (-N / (N - 2)) / N
    sh = shoot(eps, tail, N, Rinf=1e6)
    if not sh.positive:
        raise ConfigError("epsilon must lie below the threshold for the weighted case")
    psi = build_ground_state(CriticalInner(N, eps, tail), outer_tail=sh)

    def A_papa(r):
        return psi.value(r) ** 2 * r ** (N - 1)

    def B_papa(r):
        return psi.value(r) ** q * eval_xk_tilde(1, r) ** (2 * (N - 1) / (N - 2)) * r ** (N - 1)

    cases = [("power", MazyaCheck(power, power, q), True),
             ("ground-state-weights", MazyaCheck(A_papa, B_papa, q), True),
             ("power-q2", MazyaCheck(power, power, 2.0), False)]
    rows, checks = [], []
    for label, check, expect in cases:
        res = mazya_sup(check)
        rows.append((label, res.q, res.sup_value, res.argmax_r, res.finite,
                     closed if label == "power" else float("nan")))
        if label == "power":
            err = abs(res.sup_value - closed)
            checks.append(("closed form", err <= tol and res.finite,
                           f"sup {res.sup_value:.10g} vs {closed:.10g}, error {err:.3g} <= {tol:g}"))
        else:
            checks.append((f"{label} {'finite' if expect else 'divergent'}",
                           res.finite == expect,
                           f"extension trace " + ", ".join(f"{v:.6g}" for v in res.trace)))
    header = ("case", "q", "sup_value", "argmax_r", "finite", "closed_form")
    return Outcome(header, rows, checks)


def talenti_constant(N: int) -> float:
    """Sharp Sobolev constant ``pi N (N-2) (Gamma(N/2) / Gamma(N))^(2/N)``."""
    return math.pi * N * (N - 2) * (math.gamma(N / 2) / math.gamma(N)) ** (2 / N)


def run_best_constant(cfg):
    N = _single_N(cfg, 3)
    rmin = cfg.get("rmin", 1e-4)
    Rinf = cfg.get("Rinf", 1e4)
    sizes = cfg.get("grid_sizes", [401, 801])
    tol = cfg.get("tol", 0.05)
    seed = cfg.get("seed", 0)
    dom = RadialDomain.whole(rmin, Rinf)
    res = best_constant(SobolevQuotient(N, dom), n=sizes[0], refinements=len(sizes) - 1,
                        seed=seed)
    exact = talenti_constant(N)
    rows = [(i, n, c) for i, (n, c) in enumerate(zip(sizes, res.trace))]
    steps = np.diff(res.trace)
    gap = abs(res.c_estimate - exact) / exact
    checks = [("monotone under refinement", bool(np.all(steps <= 0)),
               "trace " + ", ".join(f"{c:.10g}" for c in res.trace)),
              ("sharp constant", gap <= tol,
               f"estimate {res.c_estimate:.10g} vs {exact:.10g}, relative gap {gap:.3g} <= {tol:g}")]
    return Outcome(("level", "nodes", "c_estimate"), rows, checks)


def _heat_case(cfg):
    N = _single_N(cfg)
    which = cfg.require("domain")
    half = (N - 2) / 2
    if which == "ball":
        R = cfg.get("R", 1.0)
        dom = RadialDomain.ball(R)
        rep = R
    elif which == "whole":
        dom = RadialDomain.whole(cfg.get("rmin", 1e-6), cfg.get("Rinf", 8.0))
        rep = dom.Rinf / 8
    else:
        raise ConfigError("heat-bound runs on ball or whole")
    alpha = None
    if "lambda" in cfg.values:
        lam = cfg.values["lambda"]
        alpha = exponent_from_lambda(lam, N)
        pot = InverseSquare(N, lam)
        if which == "ball":
            kind = "critical-bounded" if abs(lam - half * half) < 1e-12 else "subcritical-bounded"
        elif lam < 0:
            kind = "subcritical-negative-lambda"
        else:
            raise ConfigError("on the whole space lambda must be negative")
        ground = build_ground_state(pot)
    elif "epsilon" in cfg.values:
        if which != "whole":
            raise ConfigError("the threshold potential lives on the whole space")
        _, tail = _tail_profiles(cfg)[0]
        cache = {}

        def eps0():
            if "eps0" not in cache:
                cache["eps0"] = epsilon0_by_bisection(tail, N, half, tol=1e-10)
            return cache["eps0"]

        eps = _epsilons(cfg, eps0)[0]
        sh = shoot(eps, tail, N, Rinf=1e6)
        if not sh.positive:
            raise ConfigError("epsilon must lie below the threshold")
        pot = CriticalInner(N, eps, tail)
        ground = build_ground_state(pot, outer_tail=sh)
        kind = "whole-space-V_eps"
    elif "mu" in cfg.values:
        k = cfg.get("k", [1])[0]
        if k < 1:
            raise ConfigError("the iterated-log potential needs k >= 1")
        if which != "ball":
            raise ConfigError("the iterated-log potential is set on a ball")
        pot = IteratedLogBounded(N, k, cfg.values["mu"], dom.R)
        ground = build_ground_state(pot)
        kind = "log-refined-bounded"
    else:
        if which != "whole":
            raise ConfigError("the free kernel runs on the whole space")
        pot, ground, kind = None, None, "free"
    return N, dom, rep, pot, ground, kind, alpha


def run_heat_bound(cfg):
    N, dom, rep, pot, ground, kind, alpha = _heat_case(cfg)
    tmin, tmax = cfg.get("tmin", 1e-4), cfg.get("tmax", 1e-1)
    if not tmin < tmax:
        raise ConfigError("tmin must be below tmax")
    t = np.geomspace(tmin, tmax, cfg.get("t_points", 7))
    tol = cfg.get("tol", 0.10 if kind != "free" else 0.03)
    if kind == "free":
        report = np.linspace(0.2 * rep, rep, 9)
    else:
        report = np.geomspace(1e-3 * rep, 0.9 * rep, 10)
    if "grid_sizes" in cfg.values:
        sizes = cfg.values["grid_sizes"]
        if len(sizes) > 2:
            raise ConfigError("heat-bound takes a base size and optionally its refinement")
        if dom.kind == "whole":
            base = make_grid(dom, sizes[0])
        else:
            base = make_grid(dom, sizes[0], cfg.get("rmin", 1e-6) / dom.R)
    else:
        base = heat_grid(dom, 0.01, cfg.get("rmin", 1e-6))
    fixed = cfg.get("sectors")
    memo = {}

    def build(refine, sectors):
        key = (refine, sectors)
        if key not in memo:
            grid = base.refine() if refine else base
            K = diagonal_kernel(N, grid, t, report, pot, ground,
                                sectors=fixed if sectors is None else sectors)
            memo[key] = (K, ground)
        return memo[key]

    rows, checks = [], []
    if kind == "free":
        K, _ = build(False, None)
        exact = (4 * np.pi * K.t[:, None]) ** (-N / 2)
        ratio = K.values / exact
        for i, tt in enumerate(K.t):
            for j, rr in enumerate(K.r):
                rows.append((tt, rr, K.values[i, j], ratio[i, j]))
        err = float(np.max(np.abs(ratio - 1)))
        checks.append(("free kernel", err <= tol,
                       f"max relative error {err:.3g} <= {tol:g}, sectors {K.M}, "
                       f"tail {K.tail_estimate:.3g}"))
        return Outcome(("t", "r", "K", "ratio"), rows, checks)

    stab = bound_stability(build, kind, alpha=alpha, rtol=tol)
    K, _ = build(False, None)
    rep_b = check_bound(K, kind, ground, alpha)
    for i, tt in enumerate(K.t):
        for j, rr in enumerate(K.r):
            rows.append((tt, rr, K.values[i, j], rep_b.ratios[i, j]))
    checks.append((f"{kind} sup finite", bool(np.isfinite(rep_b.sup_ratio)),
                   f"sup ratio {rep_b.sup_ratio:.6g} at (t, r) = ({rep_b.argmax[0]:.3g}, "
                   f"{rep_b.argmax[1]:.3g}), sectors {K.M}"))
    checks.append((f"{kind} grid refinement", stab.refine_change < tol,
                   f"change {stab.refine_change:.3g} < {tol:g}"))
    checks.append((f"{kind} sector doubling", stab.sector_change < tol,
                   f"change {stab.sector_change:.3g} < {tol:g}"))
    checks.append((f"{kind} sector cutoff", stab.tail_estimate <= 0.01,
                   f"tail estimate {stab.tail_estimate:.3g} <= 0.01"))
    if kind == "subcritical-negative-lambda":
        vals = [exponent_check(build(*key)[0], alpha)
                for key in ((False, None), (True, None), (False, 2 * max(K.M, 1)))]
        ch = max(abs(v - vals[0]) / abs(vals[0]) for v in vals[1:])
        ok = bool(np.all(np.isfinite(vals)) and ch < tol)
        checks.append((f"exponent check alpha={alpha:g}", ok,
                       "sup K_phi t^(N/2-alpha) = " + ", ".join(f"{v:.6g}" for v in vals)
                       + f", change {ch:.3g} < {tol:g}"))
    return Outcome(("t", "r", "K", "ratio"), rows, checks)


def run_identity_suite(cfg):
    Ns = cfg.require("N")
    ks = cfg.get("k", [1, 2])
    mu = cfg.get("mu", 0.25)
    seed = cfg.get("seed", 0)
    tol = cfg.get("tol", 1e-6)
    rng = np.random.default_rng(seed)
    count = 20
    rows, checks = [], []

    def record(label, N, k, check):
        for i, (a, b, g) in enumerate(zip(check.lhs, check.rhs, check.gaps)):
            rows.append((label, N, k, i, a, b, g))

    # derivative rules at 100 points per depth
    worst = 0.0
    for k in range(1, 5):
        for variant in ("x", "y"):
            a = rng.uniform(-2, 2)
            r = rng.uniform(1e-3, 0.99, 100) if variant == "x" else 1 / rng.uniform(1e-3, 0.99, 100)
            chk = derivative_rule_check(k, a, r, variant)
            record(f"derivative-{variant}", 0, k, chk)
            worst = max(worst, chk.worst)
    checks.append(("derivative rules k<=4", worst <= tol, f"max relative gap {worst:.3g}"))

    for N in Ns:
        half = (N - 2) / 2
        ball = RadialDomain.ball(1.0)
        grid = make_grid(ball, 1601, 1e-8)
        # discrete gauge identity for subcritical and critical exponents
        worst = 0.0
        for alpha in (0.5 * half, half):
            chk = gauge_identity_check(N, alpha, make_grid(ball, 401, 1e-6),
                                       random_vectors(rng, count, 401))
            record(f"gauge-identity alpha={alpha:g}", N, 0, chk)
            worst = max(worst, chk.worst)
        checks.append((f"gauge identity N={N}", worst <= tol, f"max relative gap {worst:.3g}"))

        # ground-state transform on smooth test functions
        worst = 0.0
        cases = [("subcritical", InverseSquare(N, 0.75 * half * half)),
                 ("critical", InverseSquare(N, half * half))]
        cases += [(f"log k={k}", IteratedLogBounded(N, k, mu)) for k in ks]
        for label, pot in cases:
            gs = build_ground_state(pot)
            profiles = random_profiles(rng, count // 2, 1.0) + random_log_bumps(rng, count // 2)
            res = ground_transform_check(N, pot, gs, grid, profiles)
            rows.extend((f"ground-transform {label}", N, getattr(pot, "k", 0), i, a, b,
                         abs(a - b) / max(abs(a), abs(b)))
                        for i, (a, b) in enumerate(zip(res.direct, res.transformed)))
            worst = max(worst, res.max_relative_gap)
        checks.append((f"ground transform N={N}", worst <= tol, f"max relative gap {worst:.3g}"))

        # sector energy identity on three-sector functions
        worst = 0.0
        pot = InverseSquare(N, half * half)
        for i in range(count):
            sectors = random_profiles(rng, 3, 1.0)
            hc = harmonic_improvement_check(N, sectors, pot, grid)
            rows.append(("sector-identity", N, 0, i, hc.direct_energy, hc.sector_sum, hc.identity_gap))
            worst = max(worst, hc.identity_gap)
        checks.append((f"sector identity N={N}", worst <= tol, f"max relative gap {worst:.3g}"))

        # improved Hardy positivity and the improved nonradial inequality
        for k in ks:
            profiles = random_profiles(rng, 50, 1.0) + random_log_bumps(rng, 50)
            forms = form_on_samples(N, grid, IteratedLogBounded(N, k + 1, 0.25), profiles)
            for i, f in enumerate(forms):
                rows.append(("improved-hardy", N, k, i, f, 0.0, f))
            checks.append((f"improved Hardy N={N} k={k}", bool(np.all(forms >= 0)),
                           f"min form {float(np.min(forms)):.3g} over {forms.size} functions"))
            pot = IteratedLogBounded(N, k, mu)
            fails, margin = 0, np.inf
            for i in range(100):
                sectors = [random_log_bumps(rng, 1)[0]] + random_profiles(rng, 2, 1.0)
                hc = harmonic_improvement_check(N, sectors, pot, grid, rtol=tol)
                rows.append(("nonradial-improvement", N, k, i, hc.lhs, hc.rhs, hc.lhs - hc.rhs))
                fails += not hc.holds
                margin = min(margin, (hc.lhs - hc.rhs) / max(abs(hc.lhs), 1e-300))
            checks.append((f"nonradial improvement N={N} k={k}", fails == 0,
                           f"{fails} violations in 100, min relative margin {margin:.3g}"))
    header = ("check", "N", "k", "sample", "lhs", "rhs", "gap")
    return Outcome(header, rows, checks)


RUNNERS = {
    "rayleigh": run_rayleigh,
    "epsilon0": run_epsilon0,
    "shoot": run_shoot,
    "mazya": run_mazya,
    "best-constant": run_best_constant,
    "heat-bound": run_heat_bound,
    "identity-suite": run_identity_suite,
}


def run(cfg: ExperimentConfig) -> int:
    """Run one scenario and write its artifacts; returns the exit code."""
    try:
        with np.errstate(over="ignore", under="ignore"):
            outcome = RUNNERS[cfg.scenario](cfg)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SOLVER_FAULTS as exc:
        print(f"solver fault ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(cfg.out)
    _atomic_write(out / f"{cfg.scenario}.csv", _csv_text(outcome))
    lines = _summary_lines(cfg.scenario, outcome)
    _update_summary(out / "summary.txt", cfg.scenario, lines)
    for ln in lines:
        print(ln)
    return EXIT_OK if all(ok for _, ok, _ in outcome.checks) else EXIT_FAILED


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hardylab",
                description="Numerical experiments on Hardy-type inequalities and heat "
                            "kernels of Schroedinger operators with inverse-square potentials.",
                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", required=True, help="flat key = value file")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = parse_config(text, args.scenario, args.out)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
