"""Parameter grids over (delta_eff, nu), figure presets and run manifests."""
from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analytic, moments
from .errors import CoolingError, InvalidParameterError, SingularFormulaError
from .params import EffectiveParams

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("delta_eff", "nu", "m_ss_closed", "m_ss_first_order", "gamma", "m_ss_ratio", "gamma_ratio")


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int
    scale: str = "linear"

    def __post_init__(self):
        if self.scale not in ("linear", "log"):
            raise InvalidParameterError(f"axis {self.name}: scale must be 'linear' or 'log'")
        if self.count < 1 or (self.count == 1 and self.lo != self.hi):
            raise InvalidParameterError(f"axis {self.name}: need count >= 2 (or a single point with min == max)")
        if self.hi < self.lo:
            raise InvalidParameterError(f"axis {self.name}: max < min")
        if self.scale == "log" and self.lo <= 0:
            raise InvalidParameterError(f"axis {self.name}: log axis needs positive bounds")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.lo])
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class SweepGrid:
    delta_eff: Axis
    nu: Axis
    eta: float
    g_eff: float
    kappa: float = 1.0
    numeric: bool = False

    def cells(self):
        """Grid points in output order: nu outer, delta_eff inner."""
        for nu in self.nu.values():
            for d in self.delta_eff.values():
                yield float(d), float(nu)


# Only eta, g_eff, the detuning rule and m0 are fixed; axis ranges and the
# nu pair of the trajectory presets are choices.
PRESETS = {
    "fig3": {
        "kind": "sweep", "eta": 0.1, "g_eff": 1e-4,
        "delta_eff_axis": (0.01, 2.0, 121, "log"), "nu_axis": (0.01, 0.5, 50, "linear"),
    },
    "fig4": {"kind": "trajectory", "eta": 0.1, "g_eff": 5e-4, "delta_rule": "half-kappa", "m0": 2500.0, "nu": 0.05},
    "fig5": {"kind": "trajectory", "eta": 0.1, "g_eff": 5e-4, "delta_rule": "nu", "m0": 2500.0, "nu": 0.05},
    "fig6": {
        "kind": "sweep", "eta": 0.1, "g_eff": 1e-4,
        "delta_eff_axis": (0.01, 2.0, 121, "log"), "nu_axis": (0.01, 0.5, 50, "linear"),
    },
    "fig7": {
        "kind": "sweep", "eta": 0.1, "g_eff": 1e-4,
        "delta_eff_axis": (0.01, 2.0, 121, "log"), "nu_axis": (0.01, 0.5, 50, "linear"),
    },
}
TRAJECTORY_NU_CHOICES = (0.05, 0.2)


def _safe(fn, *args):
    try:
        v = fn(*args)
    except (SingularFormulaError, ZeroDivisionError):
        return math.nan
    return v if math.isfinite(v) else math.nan


def _m_closed(p):
    return analytic.stationary_closed_form(p).m


def _m_numeric(p):
    state, _ = moments.stationary_numeric(moments.build_drift(p))
    return state.m


def evaluate_cell(grid: SweepGrid, delta_eff: float, nu: float) -> dict:
    p = EffectiveParams(g_eff=grid.g_eff, delta_eff=delta_eff, nu=nu, eta=grid.eta, kappa=grid.kappa)
    ref = p.with_(delta_eff=nu)
    m_closed = _safe(_m_closed, p)
    m_ref = _safe(_m_closed, ref)
    gamma = analytic.cooling_rate(p).gamma
    gamma_ref = analytic.cooling_rate(ref).gamma
    row = {
        "delta_eff": delta_eff,
        "nu": nu,
        "m_ss_closed": m_closed,
        "m_ss_first_order": _safe(analytic.m_ss_first_order, p),
        "gamma": gamma,
        "m_ss_ratio": m_closed / m_ref if m_ref and not math.isnan(m_ref) else math.nan,
        "gamma_ratio": gamma / gamma_ref if gamma_ref else math.nan,
    }
    if grid.numeric:
        try:
            row["m_ss_numeric"] = _m_numeric(p)
        except CoolingError:
            row["m_ss_numeric"] = math.nan
    return row


def run_sweep(grid: SweepGrid) -> tuple[list[dict], int]:
    """Evaluate every cell; singular cells become NaN and are counted."""
    rows = [evaluate_cell(grid, d, nu) for d, nu in grid.cells()]
    nan_cells = sum(1 for r in rows if math.isnan(r["m_ss_closed"]))
    if nan_cells:
        log.warning("%d grid cell(s) hit a singular closed form and were written as NaN", nan_cells)
    return rows, nan_cells


def columns_for(grid: SweepGrid) -> tuple[str, ...]:
    return SWEEP_COLUMNS + (("m_ss_numeric",) if grid.numeric else ())


def write_rows_csv(path_or_fh, columns, rows) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format(float(r[c]), ".17g") for c in columns])

    if hasattr(path_or_fh, "write"):
        emit(path_or_fh)
    else:
        with open(path_or_fh, "w", newline="") as fh:
            emit(fh)


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    outputs: list[str]
    argv: list[str] = field(default_factory=list)
    warnings: dict = field(default_factory=dict)
    version: str = __version__
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())

    def write(self, data_path: str | Path) -> Path:
        path = manifest_path(data_path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path


def manifest_path(data_path: str | Path) -> Path:
    data_path = Path(data_path)
    return data_path.with_name(data_path.name + ".manifest.json")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if hasattr(x, "value"):
        return x.value
    if hasattr(x, "__dataclass_fields__"):
        return asdict(x)
    return str(x)
