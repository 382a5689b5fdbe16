"""Density-matrix reference models on truncated Fock spaces.

Three models share one basis convention, atom (x) phonon (x) photon, with
the atom factor present only when requested:

* ``effective``: phonon + cavity mode after the atom has been eliminated;
  the moment equations are exact consequences of this model.
* ``full``: atom + phonon + cavity before elimination, with either the
  exact displacement operator or its first-order expansion.
* ``tls``: phonon + two-level atom in place of the cavity mode (ordinary
  laser cooling with the same Hamiltonian structure).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import splu

from .errors import (
    CutoffTooSmallError,
    DimensionBudgetError,
    IntegrityError,
    InvalidModelError,
    InvalidParameterError,
    StiffnessError,
)
from .moments import MomentState
from .params import EffectiveParams, RawParams

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 20000
TAIL_TOL = 1e-8


@dataclass(frozen=True)
class FockConfig:
    phonon_cutoff: int
    photon_cutoff: int | None = None
    atom_included: bool = False
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.phonon_cutoff < 1:
            raise InvalidParameterError("phonon cutoff must be >= 1")
        if self.photon_cutoff is not None and self.photon_cutoff < 1:
            raise InvalidParameterError("photon cutoff must be >= 1 (or None for no cavity mode)")

    @property
    def dims(self) -> tuple[int, ...]:
        d = ((2,) if self.atom_included else ()) + (self.phonon_cutoff + 1,)
        if self.photon_cutoff is not None:
            d += (self.photon_cutoff + 1,)
        return d

    @property
    def dimension(self) -> int:
        return math.prod(self.dims)

    def check_budget(self):
        if self.dimension > self.budget:
            raise DimensionBudgetError(
                f"Hilbert-space dimension {self.dimension} {self.dims} exceeds budget {self.budget}",
                dimension=self.dimension,
            )


def destroy(n: int) -> sp.csr_matrix:
    """Annihilation operator on the number states 0..n-1."""
    return sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, shape=(n, n), format="csr", dtype=complex)


def _embed(cfg: FockConfig, factors: dict[str, sp.spmatrix]) -> sp.csr_matrix:
    """Tensor single-mode operators into the full space (identity elsewhere)."""
    slots = (["atom"] if cfg.atom_included else []) + ["phonon"]
    if cfg.photon_cutoff is not None:
        slots.append("photon")
    out = None
    for slot, dim in zip(slots, cfg.dims):
        op = factors.get(slot, sp.identity(dim, dtype=complex, format="csr"))
        out = op if out is None else sp.kron(out, op, format="csr")
    return out


def mode_operators(cfg: FockConfig) -> dict[str, sp.csr_matrix]:
    ops = {"b": _embed(cfg, {"phonon": destroy(cfg.phonon_cutoff + 1)})}
    if cfg.photon_cutoff is not None:
        ops["c"] = _embed(cfg, {"photon": destroy(cfg.photon_cutoff + 1)})
    if cfg.atom_included:
        # sigma^- = |0><1| with |0> the ground state at index 0
        ops["sm"] = _embed(cfg, {"atom": sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))})
    return ops


@dataclass(frozen=True)
class ModelSpec:
    hamiltonian: sp.csr_matrix
    jumps: tuple[tuple[float, sp.csr_matrix], ...]  # (rate, operator); collapse op is sqrt(rate)*operator
    cfg: FockConfig
    kind: str
    params: object
    displacement: str | None = None
    ops: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        H = self.hamiltonian
        herm = abs(H - H.conj().T).max() if H.nnz else 0.0
        if herm > 1e-10:
            raise InvalidModelError(f"Hamiltonian not Hermitian (deviation {herm:.2e})")
        if any(rate < 0 for rate, _ in self.jumps):
            raise InvalidModelError("jump rates must be non-negative")

    @property
    def ladder(self) -> str:
        """Name of the operator occupying the cavity slot of the moments."""
        return "sm" if self.kind == "tls" else "c"


def _ld_coupling(cfg, ops, coupling, eta, a):
    """coupling*(a + a+) - i*eta*coupling*(b + b+) a + H.c."""
    b = ops["b"]
    x = b + b.conj().T
    ad = a.conj().T
    return coupling * (a + ad) - 1j * eta * coupling * (x @ a) + 1j * eta * coupling * (x @ ad)


def build_effective_model(p: EffectiveParams, cfg: FockConfig) -> ModelSpec:
    """Phonon-photon model in the Lamb-Dicke approximation with cavity decay."""
    if cfg.atom_included or cfg.photon_cutoff is None:
        raise InvalidParameterError("effective model needs a cavity mode and no atom")
    cfg.check_budget()
    ops = mode_operators(cfg)
    b, c = ops["b"], ops["c"]
    H = (
        _ld_coupling(cfg, ops, p.g_eff, p.eta, c)
        + p.nu * (b.conj().T @ b)
        + p.delta_eff * (c.conj().T @ c)
    )
    return ModelSpec(sp.csr_matrix(H), ((p.kappa, c),), cfg, "effective", p, ops=ops)


def displacement(eta: float, n_phonon: int, mode: str = "exact") -> np.ndarray:
    """D = exp(-i eta (b + b+)) on the truncated phonon space, or 1 - i eta (b + b+)."""
    b = destroy(n_phonon).toarray()
    x = b + b.conj().T
    if mode == "exact":
        w, v = np.linalg.eigh(x)
        return (v * np.exp(-1j * eta * w)) @ v.conj().T
    if mode == "first-order":
        return np.eye(n_phonon) - 1j * eta * x
    raise InvalidParameterError(f"unknown displacement mode {mode!r}")


def build_full_model(raw: RawParams, cfg: FockConfig, mode: str = "exact") -> ModelSpec:
    """Atom, phonon and cavity in the optical rotating frame."""
    if not cfg.atom_included or cfg.photon_cutoff is None:
        raise InvalidParameterError("full model needs the atom and a cavity mode")
    cfg.check_budget()
    ops = mode_operators(cfg)
    b, c, sm = ops["b"], ops["c"], ops["sm"]
    D = _embed(cfg, {"phonon": sp.csr_matrix(displacement(raw.eta, cfg.phonon_cutoff + 1, mode))})
    drive = 0.5 * raw.omega * (D @ sm) + raw.g * (sm @ c.conj().T)
    H = (
        drive + drive.conj().T
        + (raw.delta_cap + raw.delta) * (sm.conj().T @ sm)
        + raw.nu * (b.conj().T @ b)
        + raw.delta * (c.conj().T @ c)
    )
    # the first-order D is not unitary; drop roundoff-level anti-Hermitian parts
    H = sp.csr_matrix(0.5 * (H + H.conj().T))
    jumps = [(raw.kappa, c)]
    if raw.gamma_cap > 0:
        jumps.append((raw.gamma_cap, sm))
    return ModelSpec(H, tuple(jumps), cfg, "full", raw, displacement=mode, ops=ops)


@dataclass(frozen=True)
class TLSParams:
    omega_eff: float
    gamma_tls: float
    delta_tls: float
    eta: float
    nu: float


def build_tls_comparator(
    omega_eff: float, gamma_tls: float, delta_tls: float, eta: float, nu: float, cfg: FockConfig
) -> ModelSpec:
    """Effective model with the cavity mode replaced by a two-level atom:
    c -> sigma^-, kappa -> Gamma, g_eff -> laser Rabi frequency."""
    if not cfg.atom_included or cfg.photon_cutoff is not None:
        raise InvalidParameterError("TLS comparator needs the atom and no cavity mode")
    if gamma_tls < 0:
        raise InvalidParameterError("gamma_tls must be >= 0")
    cfg.check_budget()
    ops = mode_operators(cfg)
    b, sm = ops["b"], ops["sm"]
    H = _ld_coupling(cfg, ops, omega_eff, eta, sm) + nu * (b.conj().T @ b) + delta_tls * (sm.conj().T @ sm)
    params = TLSParams(omega_eff, gamma_tls, delta_tls, eta, nu)
    return ModelSpec(sp.csr_matrix(H), ((gamma_tls, sm),), cfg, "tls", params, ops=ops)


# --- states -----------------------------------------------------------------


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    cfg: FockConfig

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def check(self, herm_tol=1e-10, trace_tol=1e-8, pos_tol=1e-8) -> None:
        if self.hermiticity_error() > herm_tol:
            raise IntegrityError(f"density matrix not Hermitian ({self.hermiticity_error():.2e})")
        if abs(self.trace - 1) > trace_tol:
            raise IntegrityError(f"trace {self.trace!r} differs from 1")
        if self.min_eigenvalue() < -pos_tol:
            raise IntegrityError(f"negative eigenvalue {self.min_eigenvalue():.2e}")

    def expect(self, op) -> complex:
        return complex((op @ self.matrix).trace()) if sp.issparse(op) else complex(np.trace(op @ self.matrix))


def _product_state(cfg: FockConfig, phonon_probs: np.ndarray) -> DensityOperator:
    diag = {"phonon": sp.diags(phonon_probs.astype(complex))}
    if cfg.photon_cutoff is not None:
        vac = np.zeros(cfg.photon_cutoff + 1, dtype=complex)
        vac[0] = 1
        diag["photon"] = sp.diags(vac)
    if cfg.atom_included:
        diag["atom"] = sp.diags(np.array([1, 0], dtype=complex))
    return DensityOperator(_embed(cfg, diag).toarray(), cfg)


def thermal_initial(m0: float, cfg: FockConfig, tail_tol: float = TAIL_TOL) -> DensityOperator:
    """Thermal phonons with mean m0, empty cavity, atom in its ground state.

    The geometric distribution is renormalised on the truncated space; the
    discarded tail must not exceed ``tail_tol``.
    """
    if not m0 >= 0:
        raise InvalidParameterError("m0 must be >= 0")
    cfg.check_budget()
    nb = cfg.phonon_cutoff
    if m0 == 0:
        probs = np.zeros(nb + 1)
        probs[0] = 1
        return _product_state(cfg, probs)
    q = m0 / (m0 + 1)
    tail = q ** (nb + 1)
    if tail > tail_tol:
        need = math.ceil(math.log(tail_tol) / math.log(q)) - 1
        raise CutoffTooSmallError(
            f"thermal tail beyond phonon cutoff {nb} is {tail:.2e} > {tail_tol:.0e}; "
            f"use a phonon cutoff of at least {need}", required_cutoff=need,
        )
    probs = q ** np.arange(nb + 1)
    return _product_state(cfg, probs / probs.sum())


def fock_initial(m0: int, cfg: FockConfig) -> DensityOperator:
    """Phonon number state |m0>, empty cavity, atom in its ground state."""
    if m0 != int(m0) or m0 < 0 or m0 > cfg.phonon_cutoff:
        raise InvalidParameterError(f"Fock initial state needs an integer 0 <= m0 <= {cfg.phonon_cutoff}")
    cfg.check_budget()
    probs = np.zeros(cfg.phonon_cutoff + 1)
    probs[int(m0)] = 1
    return _product_state(cfg, probs)


# --- dynamics ---------------------------------------------------------------


def _generator_parts(model: ModelSpec):
    H = model.hamiltonian.toarray()
    Ls = [math.sqrt(rate) * op.toarray() for rate, op in model.jumps if rate > 0]
    Heff = H - 0.5j * sum((L.conj().T @ L for L in Ls), np.zeros_like(H))
    return Heff, Ls


def lindblad_rhs(model: ModelSpec):
    """Return f(rho) = -i[H, rho] + sum_k (L rho L+ - {L+L, rho}/2)."""
    Heff, Ls = _generator_parts(model)
    Heff_d = Heff.conj().T
    Lds = [L.conj().T for L in Ls]

    def f(rho):
        out = -1j * (Heff @ rho - rho @ Heff_d)
        for L, Ld in zip(Ls, Lds):
            out += L @ rho @ Ld
        return out

    return f


@dataclass
class EvolutionInfo:
    max_trace_drift: float = 0.0
    max_hermiticity_drift: float = 0.0
    nfev: int = 0


def evolve_density(
    model: ModelSpec,
    rho0: DensityOperator,
    times,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    max_step: float = np.inf,
    info: EvolutionInfo | None = None,
) -> list[DensityOperator]:
    """Integrate the master equation from rho0 at t=0 with an adaptive
    8th-order Runge-Kutta scheme and return the states at ``times``.

    Outputs are Hermitised and trace-renormalised; the size of those
    corrections is recorded in ``info`` and must stay below 1e-9.
    """
    t = np.asarray(times, dtype=float)
    d = model.cfg.dimension
    if rho0.matrix.shape != (d, d):
        raise InvalidParameterError(f"initial state has shape {rho0.matrix.shape}, model needs {(d, d)}")
    if len(t) and (t[0] < 0 or np.any(np.diff(t) <= 0)):
        raise InvalidParameterError("times must be strictly increasing and start at t >= 0")
    info = info if info is not None else EvolutionInfo()
    if len(t) == 0:
        return []
    if t[-1] == 0:
        return [rho0]

    f = lindblad_rhs(model)

    def rhs(_, y):
        return f(y.reshape(d, d)).ravel()

    sol = solve_ivp(
        rhs, (0.0, float(t[-1])), rho0.matrix.astype(complex).ravel(),
        method="DOP853", t_eval=t, rtol=rtol, atol=atol, max_step=max_step,
    )
    if not sol.success:
        raise StiffnessError(
            f"integration failed ({sol.message}); reduce the Fock cutoffs or the time horizon"
        )
    info.nfev += sol.nfev
    out = []
    for y in sol.y.T:
        rho = y.reshape(d, d)
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        info.max_trace_drift = max(info.max_trace_drift, abs(tr - 1))
        info.max_hermiticity_drift = max(info.max_hermiticity_drift, herm)
        out.append(DensityOperator(rho / tr, model.cfg))
    if info.max_trace_drift > 1e-9 or info.max_hermiticity_drift > 1e-9:
        log.warning(
            "density integration drift above 1e-9 (trace %.2e, hermiticity %.2e)",
            info.max_trace_drift, info.max_hermiticity_drift,
        )
    return out


def liouvillian(model: ModelSpec) -> sp.csc_matrix:
    """Sparse superoperator acting on column-stacked density matrices."""
    d = model.cfg.dimension
    eye = sp.identity(d, dtype=complex, format="csr")
    H = model.hamiltonian
    L = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
    for rate, op in model.jumps:
        if rate <= 0:
            continue
        op = op * math.sqrt(rate)
        ldl = op.conj().T @ op
        L = L + sp.kron(op.conj(), op) - 0.5 * sp.kron(eye, ldl) - 0.5 * sp.kron(ldl.T, eye)
    return sp.csc_matrix(L)


@dataclass(frozen=True)
class RelaxResult:
    state: DensityOperator
    iterations: int
    residual: float  # max |L rho|
    step: float


def phonon_labels(cfg: FockConfig) -> np.ndarray:
    """Phonon number of each basis state."""
    labels = np.arange(cfg.phonon_cutoff + 1)
    if cfg.atom_included:
        labels = np.tile(labels, 2)
    if cfg.photon_cutoff is not None:
        labels = np.repeat(labels, cfg.photon_cutoff + 1)
    return labels


def relax(
    model: ModelSpec,
    rho0: DensityOperator,
    *,
    step: float = 1e8,
    tol: float = 1e-12,
    max_iter: int = 200,
    coherence_band: int | None = None,
) -> RelaxResult:
    """Evolve to long times with large backward-Euler steps.

    Each step solves (1 - h L) rho_next = rho. The scheme is L-stable, so huge
    steps are allowed and the iteration converges to the stationary state
    reached by the dynamics from rho0. Used where the cooling time (~1/gamma)
    is far too long for explicit integration.

    With ``coherence_band=K`` only elements rho[p, q] whose phonon numbers
    differ by at most K are kept. For a Lamb-Dicke coupling the dropped
    coherences fall off quickly with K, and the reduced system is small
    enough to factor at cutoffs of several hundred. Check ``residual``.
    """
    d = model.cfg.dimension
    Lsup = liouvillian(model)
    v0 = rho0.matrix.astype(complex).ravel(order="F")
    if coherence_band is None:
        keep = np.arange(d * d)
    else:
        n = phonon_labels(model.cfg)
        rows, cols = np.meshgrid(n, n, indexing="ij")
        keep = np.flatnonzero((np.abs(rows - cols) <= coherence_band).ravel(order="F"))
    Lk = Lsup[keep][:, keep].tocsc()
    lu = splu(sp.identity(keep.size, dtype=complex, format="csc") - step * Lk)

    def normalise(x):
        full = np.zeros(d * d, dtype=complex)
        full[keep] = x
        rho = full.reshape(d, d, order="F")
        rho = 0.5 * (rho + rho.conj().T)
        return rho / np.trace(rho).real

    v = v0[keep]
    for it in range(1, max_iter + 1):
        new = normalise(lu.solve(v)).ravel(order="F")[keep]
        change = np.max(np.abs(new - v))
        v = new
        if change < tol:
            break
    else:
        log.warning("relaxation did not converge to %.1e in %d steps (last change %.2e)", tol, max_iter, change)
    rho = normalise(v)
    residual = float(np.max(np.abs(Lsup @ rho.ravel(order="F"))))
    return RelaxResult(DensityOperator(rho, model.cfg), it, residual, step)


# --- observables ------------------------------------------------------------


def _moment_operators(ops: dict, ladder: str) -> dict[str, sp.spmatrix]:
    b, a = ops["b"], ops[ladder]
    bd, ad = b.conj().T, a.conj().T
    return {
        "k_x": 1j * (b - bd),
        "k_y": 1j * (a - ad),
        "k_u": b + bd,
        "k_w": a + ad,
        "n": ad @ a,
        "k1": (b + bd) @ (a + ad),
        "k2": 1j * (b + bd) @ (a - ad),
        "k3": 1j * (b - bd) @ (a + ad),
        "k4": (b - bd) @ (a - ad),
        "k5": a @ a + ad @ ad,
        "k6": 1j * (a @ a - ad @ ad),
        "k7": b @ b + bd @ bd,
        "k8": 1j * (b @ b - bd @ bd),
        "m": bd @ b,
    }


def extract_moments(rho: DensityOperator, ladder: str | None = None) -> MomentState:
    """The fourteen cooling moments of rho.

    ``ladder`` selects the operator in the cavity slot: ``"c"`` (default when
    a cavity mode exists) or ``"sm"`` for the two-level comparator, where n,
    k_y, k_w, ... become the corresponding atomic expectation values.
    """
    cfg = rho.cfg
    if ladder is None:
        ladder = "c" if cfg.photon_cutoff is not None else "sm"
    ops = mode_operators(cfg)
    if ladder not in ops:
        raise InvalidModelError(f"state has no {ladder!r} mode")
    herm = rho.hermiticity_error()
    if herm > 1e-10:
        raise IntegrityError(f"density matrix not Hermitian ({herm:.2e})")
    vals = {}
    for name, op in _moment_operators(ops, ladder).items():
        z = rho.expect(op)
        if abs(z.imag) > 1e-10 * max(1.0, abs(z.real)):
            raise IntegrityError(f"moment {name} has imaginary part {z.imag:.2e}")
        vals[name] = z.real
    return MomentState(**vals)


def moment_array(states: list[DensityOperator], ladder: str | None = None) -> np.ndarray:
    return np.array([extract_moments(r, ladder).to_array() for r in states])


def excited_population(states: list[DensityOperator]) -> np.ndarray:
    """<sigma+ sigma-> for each state."""
    if not states:
        return np.array([])
    cfg = states[0].cfg
    if not cfg.atom_included:
        raise InvalidModelError("excited population needs a model with the atom")
    sm = mode_operators(cfg)["sm"]
    proj = sm.conj().T @ sm
    return np.array([r.expect(proj).real for r in states])
