"""Acceptance checks shared by ``cavitycool validate`` and the test suite.

Each check returns a :class:`CriterionResult`; none of them raise on a
failed comparison. Drift matrices are built through ``moments.build_drift``
looked up at call time, so a patched builder is seen by every check.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import analytic, moments, oracle
from .errors import StiffnessError
from .params import EffectiveParams, RawParams, derive_effective


@dataclass
class CriterionResult:
    id: str
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.id:>3}  {self.name}  {_brief(self.detail)}  ({self.seconds:.1f}s)"

    def as_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "passed": self.passed, "seconds": self.seconds,
                "detail": _plain(self.detail)}


def _brief(detail: dict) -> str:
    keys = detail.get("_summary", ())
    return ", ".join(f"{k}={_fmt(detail[k])}" for k in keys)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items() if k != "_summary"}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


# --- 1: closed form vs linear solve -----------------------------------------

STATIONARY_REL_TOL = 1e-9
STATIONARY_ZERO_TOL = 1e-12
ZERO_COMPONENTS = ("k_x", "k4", "k8")


def stationary_grid():
    """eta x |g_eff| x sign x nu x delta_eff, 2*3*2*5*5 = 300 sets."""
    etas = (0.05, 0.1)
    gs = (1e-5, 1e-4, 1e-3)
    nus = np.geomspace(0.02, 20, 5)
    deltas = np.geomspace(0.1, 20, 5)
    for eta, g, sign, nu, d in itertools.product(etas, gs, (1, -1), nus, deltas):
        p = EffectiveParams(g_eff=sign * g, delta_eff=float(d), nu=float(nu), eta=eta)
        if abs(analytic.cubic_frequency(p)) < 1e-6 * p.nu * (p.kappa**2 + 4 * p.delta_eff**2):
            continue
        yield p


def check_stationary_agreement() -> CriterionResult:
    worst_rel, worst_abs, worst_at, n = 0.0, 0.0, None, 0
    failures = []
    for p in stationary_grid():
        n += 1
        closed = analytic.stationary_closed_form(p).to_array()
        numeric, _ = moments.stationary_numeric(moments.build_drift(p))
        num = numeric.to_array()
        for i, name in enumerate(moments.NAMES):
            if name in ZERO_COMPONENTS:
                err = abs(closed[i] - num[i])
                worst_abs = max(worst_abs, err)
                ok = err <= STATIONARY_ZERO_TOL
            else:
                rel = abs(closed[i] - num[i]) / abs(num[i]) if num[i] != 0 else abs(closed[i])
                if rel > worst_rel:
                    worst_rel, worst_at = rel, (name, p)
                ok = rel <= STATIONARY_REL_TOL
            if not ok:
                failures.append(name)
    passed = n >= 100 and not failures
    return CriterionResult("1", "closed-form stationary state equals linear solve", passed, {
        "n_sets": n, "worst_rel": worst_rel, "worst_abs_zero_components": worst_abs,
        "worst_component": worst_at[0] if worst_at else None,
        "failing_components": sorted(set(failures)),
        "_summary": ("n_sets", "worst_rel", "worst_abs_zero_components"),
    })


# --- 2: Lindblad oracle vs moment equations ---------------------------------

ORACLE_TOL = 1e-6
ORACLE_PARAMS = EffectiveParams(g_eff=1e-2, delta_eff=0.5, nu=0.2, eta=0.1)


def check_oracle_equivalence(t_max: float = 5.0, n_times: int = 51) -> CriterionResult:
    p = ORACLE_PARAMS
    cfg = oracle.FockConfig(phonon_cutoff=30, photon_cutoff=4)
    times = np.linspace(0.0, t_max, n_times)
    info = oracle.EvolutionInfo()
    rhos = oracle.evolve_density(oracle.build_effective_model(p, cfg), oracle.fock_initial(3, cfg), times, info=info)
    got = oracle.moment_array(rhos)
    ref = moments.evolve(moments.build_drift(p), moments.initial_state(3), times).states
    dev = np.abs(got - ref).max(axis=0)
    worst = float(dev.max())
    return CriterionResult("2", "density-matrix oracle reproduces all 14 moment trajectories", worst <= ORACLE_TOL, {
        "max_abs_deviation": worst,
        "per_moment": dict(zip(moments.NAMES, dev.tolist())),
        "trace_drift": info.max_trace_drift,
        "_summary": ("max_abs_deviation",),
    })


# --- 3: fitted rate and exponential cooldown ----------------------------------

RATE_TOL = 0.05
FIG4_NUS = (0.05, 0.2)


def fig4_params(nu: float) -> EffectiveParams:
    return EffectiveParams(g_eff=5e-4, delta_eff=0.5, nu=nu, eta=0.1)


def fig4_run(nu: float, m0: float = 2500.0, n_times: int = 400):
    p = fig4_params(nu)
    gamma = analytic.cooling_rate(p).gamma
    m_ss = analytic.stationary_closed_form(p).m
    t_end = 1.2 * math.log(m0 / (10 * m_ss)) / gamma
    traj = moments.evolve(moments.build_drift(p), moments.initial_state(m0), np.linspace(0.0, t_end, n_times))
    return p, gamma, m_ss, traj


def check_fitted_rate() -> CriterionResult:
    detail, passed = {}, True
    for nu in FIG4_NUS:
        _, gamma, m_ss, traj = fig4_run(nu)
        fit = moments.fit_cooling_rate(traj, m_ss)
        rel = abs(fit.rate / gamma - 1)
        detail[f"nu={nu}"] = {"gamma_formula": gamma, "gamma_fit": fit.rate, "rel_dev": rel, "r_squared": fit.r_squared}
        passed &= rel <= RATE_TOL
    detail["max_rel_dev"] = max(v["rel_dev"] for k, v in detail.items() if k.startswith("nu="))
    detail["_summary"] = ("max_rel_dev",)
    return CriterionResult("3a", "fitted cooling rate matches the closed-form rate", passed, detail)


def check_exponential_curve() -> CriterionResult:
    """m(t) against the bare exponential m(0) exp(-gamma t) while m >= 10 m_ss."""
    detail, passed = {}, True
    for nu in FIG4_NUS:
        _, gamma, m_ss, traj = fig4_run(nu)
        sel = traj.m >= 10 * m_ss
        bare = traj.m[0] * np.exp(-gamma * traj.times[sel])
        rel = float(np.max(np.abs(traj.m[sel] / bare - 1)))
        shifted = m_ss + (traj.m[0] - m_ss) * np.exp(-gamma * traj.times[sel])
        rel_shifted = float(np.max(np.abs(traj.m[sel] / shifted - 1)))
        detail[f"nu={nu}"] = {"rel_dev": rel, "rel_dev_with_stationary_offset": rel_shifted, "m_ss": m_ss}
        passed &= rel <= RATE_TOL
    detail["max_rel_dev"] = max(v["rel_dev"] for k, v in detail.items() if k.startswith("nu="))
    detail["_summary"] = ("max_rel_dev",)
    return CriterionResult("3b", "m(t) follows m(0)exp(-gamma t) within 5% while m >= 10 m_ss", passed, detail)


# --- 4: limit values -----------------------------------------------------------

def check_limit_values() -> CriterionResult:
    strong = EffectiveParams(g_eff=1e-4, delta_eff=10.0, nu=10.0, eta=0.1)
    weak = EffectiveParams(g_eff=1e-4, delta_eff=0.5, nu=0.05, eta=0.1)
    target_strong, target_weak = 1 / (16 * 10.0**2), 1 / (4 * 0.05)
    vals = {
        "strong_first_order": analytic.m_ss_first_order(strong),
        "strong_full": analytic.stationary_closed_form(strong).m,
        "weak_first_order": analytic.m_ss_first_order(weak),
        "weak_full": analytic.stationary_closed_form(weak).m,
    }
    devs = {
        "strong_first_order": abs(vals["strong_first_order"] / target_strong - 1),
        "strong_full": abs(vals["strong_full"] / target_strong - 1),
        "weak_first_order": abs(vals["weak_first_order"] / target_weak - 1),
        "weak_full": abs(vals["weak_full"] / target_weak - 1),
    }
    passed = (
        devs["strong_first_order"] <= 0.01 and devs["strong_full"] <= 0.01
        and devs["weak_first_order"] <= 0.15 and devs["weak_full"] <= 0.15
    )
    return CriterionResult("4", "limit values kappa^2/16nu^2 and kappa/4nu", passed, {
        **vals, **{f"dev_{k}": v for k, v in devs.items()},
        "_summary": ("dev_strong_full", "dev_weak_full"),
    })


# --- 5: optimal detuning -------------------------------------------------------

def numeric_optimal_detuning(p: EffectiveParams) -> float:
    """Brent search over log(delta_eff); the bracket uses only kappa + nu."""
    s = math.log(p.kappa + p.nu)
    res = minimize_scalar(
        lambda x: analytic.m_ss_first_order(p.with_(delta_eff=math.exp(x))),
        bracket=(s - math.log(100), s, s + math.log(100)),
        method="brent", tol=1e-12,
    )
    return math.exp(float(res.x))


def check_optimal_detuning(n_ratios: int = 20) -> CriterionResult:
    worst = 0.0
    for r in np.geomspace(0.01, 100, n_ratios):
        p = EffectiveParams(g_eff=1e-4, delta_eff=1.0, nu=float(r), eta=0.1)
        d_num = numeric_optimal_detuning(p)
        worst = max(worst, abs(d_num / analytic.optimal_detuning(p) - 1))
    return CriterionResult("5", "numeric argmin of m_ss equals sqrt(kappa^2+4nu^2)/2", worst <= 1e-6, {
        "n_ratios": n_ratios, "worst_rel_dev": worst, "_summary": ("worst_rel_dev",),
    })


# --- 6: identities ---------------------------------------------------------------

def check_identities() -> CriterionResult:
    rep = analytic.identity_checks(EffectiveParams(g_eff=1e-4, delta_eff=0.5, nu=0.05, eta=0.1))
    passed = rep.m_ss_deviation <= 0.15 and rep.gamma_deviation <= 0.15
    return CriterionResult("6", "m_ss(kappa/2) ~ sqrt(m_ss(nu)) and gamma ratio ~ kappa/8nu", passed, {
        "m_ss_ratio": rep.m_ss_ratio, "gamma_ratio": rep.gamma_ratio, "gamma_ratio_target": rep.gamma_ratio_target,
        "m_ss_deviation": rep.m_ss_deviation, "gamma_deviation": rep.gamma_deviation,
        "_summary": ("m_ss_deviation", "gamma_deviation"),
    })


# --- 7: adiabatic elimination ------------------------------------------------------

ELIMINATION_DELTAS = (25.0, 50.0, 100.0)


def full_vs_effective(delta_cap: float, *, g=0.05, omega=0.1, delta_eff=0.5, nu=0.2, eta=0.1,
                      m0=2, nb=6, nc=3, t_max=10.0, n_times=201, mode="first-order"):
    """Run the atom-phonon-cavity model and the cooling equations side by side.

    The laser-cavity detuning is set so that delta_eff is the same for every
    delta_cap. Returns (max |m_full - m_eff|, time-averaged P1).
    """
    raw = RawParams(omega=omega, g=g, delta_cap=delta_cap, delta=delta_eff + g**2 / delta_cap, nu=nu, eta=eta)
    p = derive_effective(raw)
    cfg = oracle.FockConfig(nb, nc, atom_included=True)
    times = np.linspace(0.0, t_max, n_times)
    rhos = oracle.evolve_density(oracle.build_full_model(raw, cfg, mode), oracle.fock_initial(m0, cfg), times)
    m_full = oracle.moment_array(rhos)[:, moments.IDX["m"]]
    m_eff = moments.evolve(moments.build_drift(p), moments.initial_state(m0), times).m
    p1 = oracle.excited_population(rhos)
    return float(np.max(np.abs(m_full - m_eff))), float(np.mean(p1))


def check_adiabatic_elimination() -> CriterionResult:
    devs, p1s = [], []
    for D in ELIMINATION_DELTAS:
        dev, p1 = full_vs_effective(D)
        devs.append(dev)
        p1s.append(p1)
    x = np.log(ELIMINATION_DELTAS)
    dev_slope = float(np.polyfit(x, np.log(devs), 1)[0])
    p1_slope = float(np.polyfit(x, np.log(p1s), 1)[0])
    pairwise = [math.log(devs[i + 1] / devs[i]) / math.log(ELIMINATION_DELTAS[i + 1] / ELIMINATION_DELTAS[i])
                for i in range(len(devs) - 1)]
    passed = max(pairwise) <= -1.0 and abs(p1_slope + 2) <= 0.2
    return CriterionResult("7", "full model converges to the effective model; P1 ~ Omega^2/Delta^2", passed, {
        "delta_cap": list(ELIMINATION_DELTAS), "m_deviation": devs, "mean_p1": p1s,
        "deviation_slope": dev_slope, "pairwise_slopes": pairwise, "p1_slope": p1_slope,
        "_summary": ("deviation_slope", "p1_slope"),
    })


# --- 8: laser-cooling correspondence --------------------------------------------

TLS_COHERENCE_BANDS = (4, 8, 16)
TLS_RESIDUAL_TOL = 1e-9


def tls_stationary_m(gamma_tls: float, nu: float, delta_tls: float, *, omega_eff=0.05, eta=0.1, nb=None,
                     bands=TLS_COHERENCE_BANDS) -> float:
    """Stationary phonon number of the two-level comparator.

    The coherence band is widened until the stationary residual is below
    TLS_RESIDUAL_TOL.
    """
    if nb is None:
        nb = tls_cutoff(gamma_tls, nu, delta_tls)
    cfg = oracle.FockConfig(nb, None, atom_included=True, budget=10**6)
    model = oracle.build_tls_comparator(omega_eff, gamma_tls, delta_tls, eta, nu, cfg)
    for band in bands:
        res = oracle.relax(model, oracle.fock_initial(0, cfg), coherence_band=band)
        if res.residual <= TLS_RESIDUAL_TOL:
            return oracle.extract_moments(res.state, "sm").m
    raise StiffnessError(
        f"stationary residual {res.residual:.2e} above {TLS_RESIDUAL_TOL:g} with coherence band {band} "
        f"(Gamma={gamma_tls:g}, nu={nu:g})"
    )


def tls_cutoff(gamma_tls: float, nu: float, delta_tls: float, tail: float = 1e-6) -> int:
    """Phonon cutoff leaving about ``tail`` of a thermal distribution whose
    mean is the first-order estimate (kappa -> Gamma)."""
    est = analytic.m_ss_first_order(EffectiveParams(g_eff=0.0, delta_eff=delta_tls, nu=nu, eta=0.0, kappa=gamma_tls))
    est = max(est, 0.05) * 1.2
    q = est / (est + 1)
    return max(10, math.ceil(math.log(tail) / math.log(q)))


WEAK_RATIOS = (8.0, 16.0, 32.0, 80.0)
STRONG_RATIOS = (0.25, 0.1, 0.05, 0.025)  # Gamma/nu


def check_laser_correspondence(weak_ratios=WEAK_RATIOS, strong_ratios=STRONG_RATIOS) -> CriterionResult:
    weak_m = [tls_stationary_m(1.0, 1.0 / r, 0.5) for r in weak_ratios]
    strong_m = [tls_stationary_m(1.0, 1.0 / r, 1.0 / r) for r in strong_ratios]
    weak_slope = float(np.polyfit(np.log(weak_ratios), np.log(weak_m), 1)[0])
    strong_slope = float(np.polyfit(np.log(strong_ratios), np.log(strong_m), 1)[0])
    passed = abs(weak_slope - 1) <= 0.15 and abs(strong_slope - 2) <= 0.2
    return CriterionResult("8", "two-level comparator: m_ss ~ Gamma/nu (weak), (Gamma/nu)^2 (strong)", passed, {
        "weak_gamma_over_nu": list(weak_ratios), "weak_m_ss": weak_m, "weak_slope": weak_slope,
        "strong_gamma_over_nu": list(strong_ratios), "strong_m_ss": strong_m, "strong_slope": strong_slope,
        "_summary": ("weak_slope", "strong_slope"),
    })


# --- driver -------------------------------------------------------------------------

CHECKS = {
    "1": check_stationary_agreement,
    "2": check_oracle_equivalence,
    "3a": check_fitted_rate,
    "3b": check_exponential_curve,
    "4": check_limit_values,
    "5": check_optimal_detuning,
    "6": check_identities,
    "7": check_adiabatic_elimination,
    "8": check_laser_correspondence,
}
CORE = ("1", "2", "3a", "3b", "4", "5", "6")
EXTENDED = ("7", "8")


def select(ids: str) -> list[str]:
    """Expand a comma list like ``"1,3,7"``; ``3`` means both 3a and 3b."""
    out = []
    for tok in ids.split(","):
        tok = tok.strip()
        matches = [k for k in CHECKS if k == tok or k.rstrip("ab") == tok]
        if not matches:
            raise KeyError(f"unknown criterion {tok!r}")
        out.extend(m for m in matches if m not in out)
    return out


def run(ids) -> list[CriterionResult]:
    results = []
    for cid in ids:
        t0 = time.perf_counter()
        try:
            res = CHECKS[cid]()
        except Exception as exc:  # a crashing check is a failing check
            res = CriterionResult(cid, CHECKS[cid].__name__, False, {"error": f"{type(exc).__name__}: {exc}"})
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results
