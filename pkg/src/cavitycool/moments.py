"""Closed linear equations for the fourteen cooling moments.

State vector ordering (index: symbol, operator expectation)::

     0  k_x   i<b - b+>            7  k3  i<(b - b+)(c + c+)>
     1  k_y   i<c - c+>            8  k4  <(b - b+)(c - c+)>
     2  k_u   <b + b+>             9  k5  <c^2 + c+^2>
     3  k_w   <c + c+>            10  k6  i<c^2 - c+^2>
     4  n     <c+ c>              11  k7  <b^2 + b+^2>
     5  k1    <(b + b+)(c + c+)>  12  k8  i<b^2 - b+^2>
     6  k2    i<(b + b+)(c - c+)> 13  m   <b+ b>

The equations are v' = A v + b with constant A and b.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import LinAlgWarning, expm, lu_factor, lu_solve

from .errors import InsufficientDecayError, InvalidParameterError, SingularSystemError
from .params import EffectiveParams

log = logging.getLogger(__name__)

NAMES = ("k_x", "k_y", "k_u", "k_w", "n", "k1", "k2", "k3", "k4", "k5", "k6", "k7", "k8", "m")
IDX = {name: i for i, name in enumerate(NAMES)}
CSV_COLUMNS = ("m", "n", "k_x", "k_y", "k_u", "k_w", "k1", "k2", "k3", "k4", "k5", "k6", "k7", "k8")


@dataclass(frozen=True)
class MomentState:
    k_x: float = 0.0
    k_y: float = 0.0
    k_u: float = 0.0
    k_w: float = 0.0
    n: float = 0.0
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0
    k5: float = 0.0
    k6: float = 0.0
    k7: float = 0.0
    k8: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise InvalidParameterError(f"moment {f.name} is not finite")

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in NAMES], dtype=float)

    @classmethod
    def from_array(cls, v) -> "MomentState":
        v = np.asarray(v, dtype=float)
        if v.shape != (14,):
            raise ValueError(f"expected 14 moments, got shape {v.shape}")
        return cls(**{name: float(x) for name, x in zip(NAMES, v)})


@dataclass(frozen=True)
class DriftSystem:
    A: np.ndarray
    b: np.ndarray
    params: EffectiveParams

    def rhs(self, v):
        return self.A @ v + self.b


@dataclass(frozen=True)
class StabilityReport:
    max_real_eigenvalue: float
    hurwitz: bool
    condition: float

    @property
    def attracting(self) -> bool:
        return self.hurwitz


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), 14)
    params: EffectiveParams
    method: str = "matrix-exponential"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")

    def __len__(self):
        return len(self.times)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.states[:, IDX[name]]

    @property
    def m(self) -> np.ndarray:
        return self.states[:, IDX["m"]]

    def state(self, i: int) -> MomentState:
        return MomentState.from_array(self.states[i])


def build_drift(p: EffectiveParams) -> DriftSystem:
    """Assemble the generator of the cooling equations."""
    g, d, nu, k = p.g_eff, p.delta_eff, p.nu, p.kappa
    e = p.eta * p.g_eff
    A = np.zeros((14, 14))
    b = np.zeros(14)

    def row(name, **coeffs):
        r = IDX[name]
        for col, val in coeffs.items():
            A[r, IDX[col]] += val

    row("k_x", k_y=-2 * e, k_u=nu)
    row("k_y", k_w=d, k_y=-k / 2)
    b[IDX["k_y"]] = 2 * g
    row("k_u", k_x=-nu)
    row("k_w", k_u=2 * e, k_y=-d, k_w=-k / 2)

    row("n", k_y=g, k1=e, n=-k)
    row("k1", k7=2 * e, m=4 * e, k3=-nu, k2=-d, k1=-k / 2)
    b[IDX["k1"]] = 2 * e
    row("k2", k_u=2 * g, k4=nu, k1=d, k2=-k / 2)
    row("k3", k6=-2 * e, k8=2 * e, k1=nu, k4=d, k3=-k / 2)
    row("k4", k_x=-2 * g, k5=-2 * e, n=4 * e, k2=-nu, k3=-d, k4=-k / 2)
    b[IDX["k4"]] = 2 * e
    row("k5", k_y=-2 * g, k1=2 * e, k6=-2 * d, k5=-k)
    row("k6", k_w=2 * g, k2=2 * e, k5=2 * d, k6=-k)
    row("k7", k4=-2 * e, k8=-2 * nu)
    row("k8", k2=-2 * e, k7=2 * nu)

    row("m", k4=e)
    A.setflags(write=False)
    b.setflags(write=False)
    return DriftSystem(A=A, b=b, params=p)


def initial_state(m0: float) -> MomentState:
    """Laser switched on at t=0: every coherence and the photon number vanish."""
    if not m0 >= 0:
        raise InvalidParameterError(f"initial phonon number must be >= 0, got {m0}")
    return MomentState(m=float(m0))


def _stability(A) -> StabilityReport:
    eig = np.linalg.eigvals(A)
    max_re = float(np.max(eig.real))
    return StabilityReport(max_real_eigenvalue=max_re, hurwitz=max_re < 0, condition=float(np.linalg.cond(A)))


def stability(sys: DriftSystem) -> StabilityReport:
    return _stability(sys.A)


def _factor(A):
    """LU factors of A, or None when a pivot vanishes exactly.

    The generator is badly scaled (cond ~ 1e19 at tiny couplings) but still
    solves accurately, so only exact zero pivots count as singular.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=True)
    if np.any(np.diag(lu) == 0):
        return None
    return lu, piv


def stationary_numeric(sys: DriftSystem) -> tuple[MomentState, StabilityReport]:
    """Solve A v = -b by LU with partial pivoting.

    A singular A is an error unless b = 0, where v = 0 is returned (the
    uncoupled system is trivially stationary there).
    """
    report = stability(sys)
    fac = _factor(sys.A)
    if fac is None and not np.any(sys.b):
        return MomentState(), report
    if fac is None:
        raise SingularSystemError(
            f"drift matrix is singular (condition estimate {report.condition:.3g}); "
            "no unique stationary state", condition=report.condition,
        )
    v = lu_solve(fac, -np.asarray(sys.b))
    if not np.all(np.isfinite(v)):
        raise SingularSystemError("stationary solve produced non-finite values", condition=report.condition)
    return MomentState.from_array(v), report


def _check_times(times):
    t = np.asarray(times, dtype=float)
    if t.ndim != 1:
        raise InvalidParameterError("times must be one-dimensional")
    if len(t) and (t[0] < 0 or np.any(np.diff(t) <= 0)):
        raise InvalidParameterError("times must be strictly increasing and start at t >= 0")
    return t


def evolve(sys: DriftSystem, v0: MomentState | np.ndarray, times) -> Trajectory:
    """Exact propagation v(t) = expm(A t) (v0 - v*) + v*, with v* = -A^-1 b.

    Each output time gets its own matrix exponential, so results do not
    depend on the spacing of the output grid. A singular A with nonzero b
    has no stationary point; that case falls back to an adaptive integrator.
    """
    t = _check_times(times)
    x0 = v0.to_array() if isinstance(v0, MomentState) else np.asarray(v0, dtype=float)
    A, b = np.asarray(sys.A), np.asarray(sys.b)
    states = np.empty((len(t), 14))
    if len(t) == 0:
        return Trajectory(t, states, sys.params)

    has_offset = np.any(b != 0)
    fac = _factor(A) if has_offset else None
    if has_offset and fac is None:
        log.warning("drift matrix singular with nonzero offset: no stationary state, using adaptive stepping")
        return _evolve_adaptive(sys, x0, t)

    vstar = lu_solve(fac, -b) if has_offset else np.zeros(14)
    dx = x0 - vstar
    for i, ti in enumerate(t):
        states[i] = vstar + (expm(A * ti) @ dx if ti > 0 else dx)
    return Trajectory(t, states, sys.params, method="matrix-exponential")


def _evolve_adaptive(sys, x0, t):
    A, b = np.asarray(sys.A), np.asarray(sys.b)
    sol = solve_ivp(
        lambda _, v: A @ v + b, (0.0, float(t[-1])), x0, method="DOP853",
        t_eval=t, rtol=1e-12, atol=1e-14,
    )
    if not sol.success:
        raise SingularSystemError(f"adaptive fallback failed: {sol.message}")
    return Trajectory(t, sol.y.T.copy(), sys.params, method="adaptive", meta={"stationary": False})


@dataclass(frozen=True)
class FitResult:
    rate: float
    r_squared: float
    n_points: int
    window: tuple[float, float]
    intercept: float


def fit_cooling_rate(
    traj: Trajectory,
    m_ss_hint: float,
    *,
    lower_factor: float = 10.0,
    lower_fraction: float = 0.01,
    upper_fraction: float = 0.9,
) -> FitResult:
    """Log-linear least-squares decay rate of m(t) - m_ss_hint.

    Only points with m in [max(lower_factor*m_ss, lower_fraction*m(0)),
    upper_fraction*m(0)] enter the fit.
    """
    t = np.asarray(traj.times)
    m = np.asarray(traj.m)
    m0 = m[0]
    floor = max(m_ss_hint, 1e-12)
    if not m0 > lower_factor * floor:
        raise InsufficientDecayError(f"m(0) = {m0:g} is not well above the stationary value {m_ss_hint:g}")
    lo = max(lower_factor * m_ss_hint, lower_fraction * m0)
    hi = upper_fraction * m0
    sel = (m >= lo) & (m <= hi)
    if sel.sum() < 2:
        raise InsufficientDecayError(f"fewer than two samples with m in [{lo:g}, {hi:g}]")
    x = t[sel]
    y = np.log(m[sel] - m_ss_hint)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(rate=float(-slope), r_squared=float(r2), n_points=int(sel.sum()), window=(lo, hi), intercept=float(intercept))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(path, traj: Trajectory, extra: dict[str, np.ndarray] | None = None) -> None:
    """One row per output time, 17 significant digits, fixed column order.

    ``path`` may also be an open text stream.
    """
    extra = extra or {}

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *CSV_COLUMNS, *extra])
        cols = [traj[name] for name in CSV_COLUMNS]
        for i, ti in enumerate(traj.times):
            w.writerow([_fmt(ti), *(_fmt(c[i]) for c in cols), *(_fmt(v[i]) for v in extra.values())])

    if hasattr(path, "write"):
        emit(path)
    else:
        with open(path, "w", newline="") as fh:
            emit(fh)


def read_trajectory_csv(path: str | Path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    cols = {name: np.atleast_1d(data[name]) for name in data.dtype.names}
    return cols.pop("t"), cols
