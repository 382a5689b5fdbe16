"""Physical parameters, effective parameters after eliminating the atom, and
operating-regime checks.

All rates share one frequency unit. The default unit is the cavity decay
rate, i.e. ``kappa = 1`` and times are measured in ``1/kappa``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .errors import ConfigError, InvalidParameterError

INF = math.inf

DEFAULT_CONFINEMENT_THRESHOLD = 10.0
DEFAULT_TIMESCALE_FACTOR = 100.0
DEFAULT_LAMB_DICKE_MAX = 0.2
DEFAULT_EMISSION_MARGIN = 10.0


def _check_common(kappa, nu, eta, gamma_cap):
    for name, v in (("kappa", kappa), ("nu", nu), ("eta", eta), ("gamma_cap", gamma_cap)):
        if not math.isfinite(v):
            raise InvalidParameterError(f"{name} must be finite, got {v}")
    if kappa <= 0:
        raise InvalidParameterError(f"kappa must be > 0, got {kappa}")
    if nu <= 0:
        raise InvalidParameterError(f"nu must be > 0, got {nu}")
    if eta < 0:
        raise InvalidParameterError(f"eta must be >= 0, got {eta}")
    if gamma_cap < 0:
        raise InvalidParameterError(f"gamma_cap must be >= 0, got {gamma_cap}")


@dataclass(frozen=True)
class RawParams:
    """Atom-level inputs: laser Rabi frequency, atom-cavity coupling,
    atom-cavity detuning ``delta_cap``, laser-cavity detuning ``delta``,
    decay rates and trap parameters."""

    omega: float
    g: float
    delta_cap: float
    delta: float
    nu: float
    eta: float
    kappa: float = 1.0
    gamma_cap: float = 0.0

    def __post_init__(self):
        _check_common(self.kappa, self.nu, self.eta, self.gamma_cap)
        for name in ("omega", "g", "delta_cap", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")

    def scaled(self, s: float) -> "RawParams":
        return replace(
            self,
            omega=self.omega * s,
            g=self.g * s,
            delta_cap=self.delta_cap * s,
            delta=self.delta * s,
            nu=self.nu * s,
            kappa=self.kappa * s,
            gamma_cap=self.gamma_cap * s,
        )


@dataclass(frozen=True)
class EffectiveParams:
    """Parameters of the phonon-photon model left after adiabatic elimination.

    ``g_eff`` is signed (negative for positive g, omega, delta_cap).
    ``gamma_cap`` is carried only for the spontaneous-emission checks.
    """

    g_eff: float
    delta_eff: float
    nu: float
    eta: float
    kappa: float = 1.0
    gamma_cap: float = 0.0

    def __post_init__(self):
        _check_common(self.kappa, self.nu, self.eta, self.gamma_cap)
        if not (math.isfinite(self.g_eff) and math.isfinite(self.delta_eff)):
            raise InvalidParameterError("g_eff and delta_eff must be finite")

    def with_(self, **changes) -> "EffectiveParams":
        return replace(self, **changes)


class Confinement(str, Enum):
    STRONG = "strong"
    WEAK = "weak"
    INTERMEDIATE = "intermediate"


class DetuningChoice(str, Enum):
    HALF_KAPPA = "half-kappa"
    NU = "nu"


@dataclass(frozen=True)
class RegimeReport:
    confinement: Confinement
    timescale_ok: bool
    timescale_ratio: float
    lamb_dicke_ok: bool
    eta: float
    cooperativity_required: float
    cooperativity_actual: float | None
    spontaneous_emission_ok: bool | None

    def as_dict(self) -> dict:
        return {
            "confinement": self.confinement.value,
            "timescale_ok": self.timescale_ok,
            "timescale_ratio": self.timescale_ratio,
            "lamb_dicke_ok": self.lamb_dicke_ok,
            "eta": self.eta,
            "cooperativity_required": self.cooperativity_required,
            "cooperativity_actual": self.cooperativity_actual,
            "spontaneous_emission_ok": self.spontaneous_emission_ok,
        }


def derive_effective(raw: RawParams) -> EffectiveParams:
    """Eliminate the excited atomic state: g_eff = -g*omega/(2*delta_cap),
    delta_eff = delta - g**2/delta_cap."""
    if raw.delta_cap == 0:
        raise InvalidParameterError("delta_cap must be nonzero to eliminate the atom")
    g_eff = -raw.g * raw.omega / (2.0 * raw.delta_cap)
    delta_eff = raw.delta - raw.g**2 / raw.delta_cap
    return EffectiveParams(
        g_eff=g_eff,
        delta_eff=delta_eff,
        nu=raw.nu,
        eta=raw.eta,
        kappa=raw.kappa,
        gamma_cap=raw.gamma_cap,
    )


def classify_confinement(p: EffectiveParams, threshold: float = DEFAULT_CONFINEMENT_THRESHOLD) -> Confinement:
    if threshold <= 1:
        raise InvalidParameterError("confinement threshold must be > 1")
    if p.nu >= threshold * p.kappa:
        return Confinement.STRONG
    if p.kappa >= threshold * p.nu:
        return Confinement.WEAK
    return Confinement.INTERMEDIATE


def check_timescale_separation(p: EffectiveParams, factor: float = DEFAULT_TIMESCALE_FACTOR) -> tuple[bool, float]:
    """Is the phonon number slow compared with everything else?

    Returns ``(ok, ratio)`` with ratio = min(kappa, nu) / |eta g_eff|;
    an uncoupled system gives ``(True, inf)``.
    """
    if factor <= 1:
        raise InvalidParameterError("timescale factor must be > 1")
    coupling = abs(p.eta * p.g_eff)
    if coupling == 0:
        return True, INF
    ratio = min(p.kappa, p.nu) / coupling
    return ratio > factor, ratio


def required_cooperativity(p: EffectiveParams, choice: DetuningChoice | str = DetuningChoice.HALF_KAPPA) -> float:
    """Lower bound on g**2/(kappa*Gamma) for atomic emission to stay negligible."""
    choice = DetuningChoice(choice)
    if p.eta == 0:
        raise ZeroDivisionError(
            "required cooperativity diverges for eta = 0: without phonon coupling "
            "there is no cooling to outpace spontaneous emission"
        )
    k, nu, eta = p.kappa, p.nu, p.eta
    if choice is DetuningChoice.HALF_KAPPA:
        return (k**4 + 4 * nu**4) / (8 * eta**2 * nu * k**3)
    return (k**2 + 16 * nu**2) / (64 * eta**2 * nu**2)


def check_spontaneous_emission(
    raw: RawParams, gamma: float, margin: float = DEFAULT_EMISSION_MARGIN
) -> tuple[bool, float]:
    """Compare the cooling rate with the emission rate Gamma*omega**2/(4*delta_cap**2)."""
    if raw.delta_cap == 0:
        raise InvalidParameterError("delta_cap must be nonzero")
    emission = raw.gamma_cap * raw.omega**2 / (4 * raw.delta_cap**2)
    if emission == 0:
        return True, INF
    ratio = gamma / emission
    return ratio > margin, ratio


def regime_report(
    p: EffectiveParams,
    raw: RawParams | None = None,
    *,
    confinement_threshold: float = DEFAULT_CONFINEMENT_THRESHOLD,
    timescale_factor: float = DEFAULT_TIMESCALE_FACTOR,
    lamb_dicke_max: float = DEFAULT_LAMB_DICKE_MAX,
    emission_margin: float = DEFAULT_EMISSION_MARGIN,
) -> RegimeReport:
    from .analytic import cooling_rate

    confinement = classify_confinement(p, confinement_threshold)
    ts_ok, ts_ratio = check_timescale_separation(p, timescale_factor)
    choice = DetuningChoice.NU if confinement is Confinement.STRONG else DetuningChoice.HALF_KAPPA
    coop_req = required_cooperativity(p, choice) if p.eta > 0 else INF

    coop_actual = None
    emission_ok = None
    if raw is not None:
        if raw.gamma_cap > 0:
            coop_actual = raw.g**2 / (raw.kappa * raw.gamma_cap)
        emission_ok, _ = check_spontaneous_emission(raw, cooling_rate(p).gamma, emission_margin)
    return RegimeReport(
        confinement=confinement,
        timescale_ok=ts_ok,
        timescale_ratio=ts_ratio,
        lamb_dicke_ok=p.eta <= lamb_dicke_max,
        eta=p.eta,
        cooperativity_required=coop_req,
        cooperativity_actual=coop_actual,
        spontaneous_emission_ok=emission_ok,
    )


# --- flat text config -------------------------------------------------------

CONFIG_KEYS = ("omega", "g", "delta_cap", "delta", "kappa", "gamma_cap", "nu", "eta", "g_eff", "delta_eff")
RAW_ONLY_KEYS = ("omega", "g", "delta_cap", "delta")


def parse_config(text: str) -> dict[str, float]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = float(val)
        except ValueError:
            raise ConfigError(f"line {lineno}: value for {key!r} is not a number: {val!r}") from None
    return values


def load_config(path: str | Path) -> dict[str, float]:
    return parse_config(Path(path).read_text())


def resolve_params(values: dict[str, float]) -> tuple[EffectiveParams, RawParams | None]:
    """Build parameters from a flat mapping holding either the raw or the
    effective set.

    Supplying a raw value and the effective value derived from it (omega with
    g_eff, delta with delta_eff) is an error.
    """
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown parameter(s): {sorted(unknown)}")
    if "g_eff" in values and "omega" in values:
        raise ConfigError("both g_eff and the raw drive (omega) were given; supply one")
    if "delta_eff" in values and "delta" in values:
        raise ConfigError("both delta_eff and the raw detuning (delta) were given; supply one")
    for key in ("nu", "eta"):
        if key not in values:
            raise ConfigError(f"missing required parameter {key!r}")
    kappa = values.get("kappa", 1.0)
    gamma_cap = values.get("gamma_cap", 0.0)

    raw = None
    if any(k in values for k in RAW_ONLY_KEYS):
        needed = ["g", "delta_cap"]
        if "g_eff" not in values:
            needed.append("omega")
        if "delta_eff" not in values:
            needed.append("delta")
        missing = [k for k in needed if k not in values]
        if missing:
            raise ConfigError(f"incomplete raw parameter set, missing {missing}")
        g, delta_cap = values["g"], values["delta_cap"]
        if delta_cap == 0:
            raise InvalidParameterError("delta_cap must be nonzero")
        # a partially raw set is completed from the effective values it implies
        omega = values["omega"] if "omega" in values else -2 * delta_cap * values["g_eff"] / g if g else 0.0
        delta = values["delta"] if "delta" in values else values["delta_eff"] + g**2 / delta_cap
        raw = RawParams(
            omega=omega, g=g, delta_cap=delta_cap, delta=delta,
            nu=values["nu"], eta=values["eta"], kappa=kappa, gamma_cap=gamma_cap,
        )
        eff = derive_effective(raw)
        if "g_eff" in values:
            eff = eff.with_(g_eff=values["g_eff"])
        if "delta_eff" in values:
            eff = eff.with_(delta_eff=values["delta_eff"])
        return eff, raw

    missing = [k for k in ("g_eff", "delta_eff") if k not in values]
    if missing:
        raise ConfigError(f"missing effective parameter(s) {missing}")
    eff = EffectiveParams(
        g_eff=values["g_eff"], delta_eff=values["delta_eff"], nu=values["nu"],
        eta=values["eta"], kappa=kappa, gamma_cap=gamma_cap,
    )
    return eff, None
