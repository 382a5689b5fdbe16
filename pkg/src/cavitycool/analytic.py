"""Closed-form stationary moments, cooling rates and optimal detunings."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import SingularFormulaError
from .moments import MomentState
from .params import EffectiveParams

REGIME_TOL = 1e-12


def cubic_frequency(p: EffectiveParams) -> float:
    """mu^3 = nu (kappa^2 + 4 delta_eff^2) - 16 eta^2 g_eff^2 delta_eff."""
    return p.nu * (p.kappa**2 + 4 * p.delta_eff**2) - 16 * p.eta**2 * p.g_eff**2 * p.delta_eff


@dataclass(frozen=True)
class StationaryMoments:
    moments: MomentState
    mu3: float

    def __getattr__(self, name):
        # forward k_x, n, m, ... to the moment state
        return getattr(self.__dict__["moments"], name)

    def to_array(self):
        return self.moments.to_array()


def stationary_closed_form(p: EffectiveParams) -> StationaryMoments:
    """All fourteen stationary moments, including every eta-dependent term.

    The photon number uses (kappa^2 + 4 delta_eff^2) in its leading eta^2
    term; this is the value that makes the photon-number equation vanish.
    """
    mu3 = cubic_frequency(p)
    if mu3 == 0:
        raise SingularFormulaError("cubic frequency mu^3 vanishes", denominator="mu3")
    if p.delta_eff == 0:
        raise SingularFormulaError("delta_eff = 0 makes n, k1, k3, k5 and m diverge", denominator="delta_eff")
    g, d, nu, k, eta = p.g_eff, p.delta_eff, p.nu, p.kappa, p.eta
    mu6 = mu3 * mu3
    k2d = k**2 + 4 * d**2
    k2d_minus = k**2 - 4 * d**2

    ky = 4 * g * k * nu / mu3
    ku = 8 * eta * g**2 * k / mu3
    kw = 8 * g * (4 * eta**2 * g**2 - d * nu) / mu3
    n = (
        eta**2 * g**2 * k2d / (2 * d * mu3)
        + 4 * g**2 * nu**2 * k2d / mu6
        - 128 * eta**2 * g**4 * nu * d / mu6
        + 256 * eta**4 * g**6 / mu6
    )
    k1 = (
        eta * g * k * k2d / (2 * d * mu3)
        - 64 * eta * g**3 * k * nu * d / mu6
        + 256 * eta**3 * g**5 * k / mu6
    )
    k2 = eta * g * k2d / mu3 + 32 * eta * g**3 * k**2 * nu / mu6
    k3 = eta * g / d
    k5 = (
        -8 * g**2 * nu**2 * k2d_minus / mu6
        + eta**2 * g**2 * k2d_minus / (d * mu3)
        - 256 * eta**2 * g**4 * nu * d / mu6
        + 512 * eta**4 * g**6 / mu6
    )
    k6 = -32 * g**2 * k * nu**2 * d / mu6 + 4 * eta**2 * g**2 * k / mu3 + 128 * eta**2 * g**4 * k * nu / mu6
    k7 = eta**2 * g**2 * k2d / (nu * mu3) + 32 * eta**2 * g**4 * k**2 / mu6
    m = (
        k2d / (16 * nu * d)
        + eta**2 * g**2 * (k**2 - 8 * nu**2 + 16 * nu * d + 4 * d**2) / (2 * nu * mu3)
        + nu * k2d * (nu - 2 * d) / (4 * d * mu3)
        + 16 * eta**2 * g**4 * k**2 / mu6
    )
    state = MomentState(
        k_x=0.0, k_y=ky, k_u=ku, k_w=kw, n=n,
        k1=k1, k2=k2, k3=k3, k4=0.0, k5=k5, k6=k6, k7=k7, k8=0.0, m=m,
    )
    return StationaryMoments(moments=state, mu3=mu3)


def photon_number_as_printed(p: EffectiveParams) -> float:
    """Stationary photon number with (kappa^2 + 4 nu^2) in the leading eta^2
    term. Kept only to document that this variant does not solve the
    stationary equations unless delta_eff = nu."""
    mu3 = cubic_frequency(p)
    g, d, nu, k, eta = p.g_eff, p.delta_eff, p.nu, p.kappa, p.eta
    mu6 = mu3 * mu3
    return (
        eta**2 * g**2 * (k**2 + 4 * nu**2) / (2 * d * mu3)
        + 4 * g**2 * nu**2 * (k**2 + 4 * d**2) / mu6
        - 128 * eta**2 * g**4 * nu * d / mu6
        + 256 * eta**4 * g**6 / mu6
    )


def m_ss_first_order(p: EffectiveParams) -> float:
    """Stationary phonon number to first order in eta:
    (kappa^2 + 4 (nu - delta_eff)^2) / (16 nu delta_eff)."""
    denom = 16 * p.nu * p.delta_eff
    if denom == 0:
        raise SingularFormulaError("16 nu delta_eff vanishes", denominator="nu*delta_eff")
    return (p.kappa**2 + 4 * (p.nu - p.delta_eff) ** 2) / denom


def optimal_detuning(p: EffectiveParams) -> float:
    return 0.5 * math.sqrt(p.kappa**2 + 4 * p.nu**2)


def optimal_detuning_limits(p: EffectiveParams) -> dict[str, float]:
    """Weak-confinement (kappa/2) and strong-confinement (nu) limits."""
    return {"weak": 0.5 * p.kappa, "strong": p.nu}


def rate_denominator(kappa: float, nu: float, delta: float) -> float:
    """(k^2+4nu^2)^2 + 8 d^2 (k^2-4nu^2) + 16 d^4, written as a sum of squares
    so it stays positive for kappa, nu > 0."""
    return (4 * delta**2 + kappa**2 - 4 * nu**2) ** 2 + 16 * kappa**2 * nu**2


@dataclass(frozen=True)
class CoolingRateResult:
    gamma: float
    regime: str  # general | half-kappa-limit | nu-limit
    params: EffectiveParams


def gamma_half_kappa(p: EffectiveParams) -> float:
    k, nu = p.kappa, p.nu
    return 8 * p.eta**2 * p.g_eff**2 * nu * k**2 / (k**4 + 4 * nu**4)


def gamma_at_nu(p: EffectiveParams) -> float:
    k, nu = p.kappa, p.nu
    return 64 * p.eta**2 * p.g_eff**2 * nu**2 / (k * (k**2 + 16 * nu**2))


def cooling_rate(p: EffectiveParams) -> CoolingRateResult:
    """Rate gamma of m' = -gamma m after eliminating all fast moments.

    Negative delta_eff gives gamma < 0 (heating).
    """
    k, nu, d = p.kappa, p.nu, p.delta_eff
    gamma = 64 * p.eta**2 * p.g_eff**2 * nu * d * k / rate_denominator(k, nu, d)
    regime = "general"
    if abs(d - 0.5 * k) <= REGIME_TOL * max(1.0, k):
        regime = "half-kappa-limit"
    elif abs(d - nu) <= REGIME_TOL * max(1.0, nu):
        regime = "nu-limit"
    return CoolingRateResult(gamma=gamma, regime=regime, params=p)


def k4_adiabatic(p: EffectiveParams, m: float) -> float:
    """Phonon-photon coherence slaved to m; eta*g_eff*k4 = -gamma*m."""
    k, nu, d = p.kappa, p.nu, p.delta_eff
    return -64 * p.eta * p.g_eff * nu * k * d * m / rate_denominator(k, nu, d)


@dataclass(frozen=True)
class IdentityReport:
    m_ss_half_kappa: float
    sqrt_m_ss_nu: float
    m_ss_ratio: float  # m_ss(kappa/2) / sqrt(m_ss(nu)), ideally 1
    gamma_ratio: float  # gamma(kappa/2) / gamma(nu)
    gamma_ratio_target: float  # kappa / (8 nu)
    m_ss_deviation: float
    gamma_deviation: float
    weak_confinement: bool


def identity_checks(p: EffectiveParams) -> IdentityReport:
    """Compare the two detuning choices kappa/2 and nu at fixed kappa, nu."""
    half = p.with_(delta_eff=0.5 * p.kappa)
    at_nu = p.with_(delta_eff=p.nu)
    m_half = m_ss_first_order(half)
    sqrt_m_nu = math.sqrt(m_ss_first_order(at_nu))
    g_nu = cooling_rate(at_nu).gamma
    g_ratio = cooling_rate(half).gamma / g_nu if g_nu != 0 else math.nan
    target = p.kappa / (8 * p.nu)
    return IdentityReport(
        m_ss_half_kappa=m_half,
        sqrt_m_ss_nu=sqrt_m_nu,
        m_ss_ratio=m_half / sqrt_m_nu,
        gamma_ratio=g_ratio,
        gamma_ratio_target=target,
        m_ss_deviation=abs(m_half / sqrt_m_nu - 1),
        gamma_deviation=abs(g_ratio / target - 1),
        weak_confinement=p.nu < p.kappa,
    )
