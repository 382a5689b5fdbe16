import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitycool import oracle
from cavitycool.errors import CutoffTooSmallError, DimensionBudgetError, IntegrityError, InvalidModelError
from cavitycool.moments import build_drift, evolve, initial_state
from cavitycool.params import EffectiveParams, RawParams


def random_low_state(cfg, rng, levels=3):
    """Random mixed state supported on the lowest few number states."""
    d = cfg.dimension
    low = np.flatnonzero(oracle.phonon_labels(cfg) < levels)
    if cfg.photon_cutoff is not None:
        photon = np.arange(d) % (cfg.photon_cutoff + 1)
        low = np.intersect1d(low, np.flatnonzero(photon < 2))
    X = np.zeros((d, d), dtype=complex)
    X[np.ix_(low, low)] = rng.normal(size=(low.size, low.size)) + 1j * rng.normal(size=(low.size, low.size))
    rho = X @ X.conj().T
    return oracle.DensityOperator(rho / np.trace(rho).real, cfg)


@given(
    st.floats(-0.05, 0.05), st.floats(0.05, 2), st.floats(0.05, 2), st.floats(0, 0.3), st.floats(0.2, 3),
    st.integers(0, 2**31),
)
@settings(max_examples=25)
def test_moment_derivatives_match_generator(g, delta, nu, eta, kappa, seed):
    # the cooling equations are exact consequences of the master equation:
    # d<O>/dt from the Lindblad generator equals A v + b for any state
    p = EffectiveParams(g_eff=g, delta_eff=delta, nu=nu, eta=eta, kappa=kappa)
    cfg = oracle.FockConfig(8, 5)
    model = oracle.build_effective_model(p, cfg)
    rho = random_low_state(cfg, np.random.default_rng(seed))
    drho = oracle.lindblad_rhs(model)(rho.matrix)
    lhs = oracle.extract_moments(oracle.DensityOperator(drho, cfg)).to_array()
    s = build_drift(p)
    v = oracle.extract_moments(rho).to_array()
    np.testing.assert_allclose(lhs, s.A @ v + s.b, atol=1e-12)


def test_oracle_trajectory_matches_moment_equations():
    p = EffectiveParams(g_eff=1e-2, delta_eff=0.5, nu=0.2, eta=0.1)
    cfg = oracle.FockConfig(30, 4)
    model = oracle.build_effective_model(p, cfg)
    times = np.linspace(0, 5, 11)
    info = oracle.EvolutionInfo()
    rhos = oracle.evolve_density(model, oracle.fock_initial(3, cfg), times, info=info)
    got = oracle.moment_array(rhos)
    ref = evolve(build_drift(p), initial_state(3), times).states
    np.testing.assert_allclose(got, ref, atol=1e-6)
    assert info.max_trace_drift <= 1e-8
    for r in rhos[::5]:
        assert r.min_eigenvalue() >= -1e-8


def test_thermal_initial_moments():
    cfg = oracle.FockConfig(60, 2)
    rho = oracle.thermal_initial(2.0, cfg)
    v = oracle.extract_moments(rho)
    assert v.m == pytest.approx(2.0, abs=1e-8)
    assert v.n == 0 and v.k7 == 0 and v.k_x == 0
    rho.check()


def test_thermal_zero_is_vacuum():
    cfg = oracle.FockConfig(5, 2)
    rho = oracle.thermal_initial(0.0, cfg)
    assert rho.matrix[0, 0] == 1 and np.count_nonzero(rho.matrix) == 1


def test_thermal_cutoff_too_small():
    with pytest.raises(CutoffTooSmallError) as info:
        oracle.thermal_initial(3.0, oracle.FockConfig(10, 2))
    assert info.value.required_cutoff > 10


def test_vacuum_and_fock_moments():
    cfg = oracle.FockConfig(4, 3)
    assert not np.any(oracle.extract_moments(oracle.fock_initial(0, cfg)).to_array())
    v = oracle.extract_moments(oracle.fock_initial(1, cfg))
    assert v.m == 1
    assert not np.any(np.delete(v.to_array(), 13))


def test_non_hermitian_rejected():
    cfg = oracle.FockConfig(3, 2)
    bad = oracle.fock_initial(0, cfg).matrix.copy()
    bad[0, 1] = 0.3
    with pytest.raises(IntegrityError):
        oracle.extract_moments(oracle.DensityOperator(bad, cfg))


def test_zero_time_list_returns_initial():
    p = EffectiveParams(g_eff=1e-2, delta_eff=0.5, nu=0.2, eta=0.1)
    cfg = oracle.FockConfig(6, 2)
    rho0 = oracle.fock_initial(1, cfg)
    out = oracle.evolve_density(oracle.build_effective_model(p, cfg), rho0, [0.0])
    assert len(out) == 1
    np.testing.assert_array_equal(out[0].matrix, rho0.matrix)


def test_phonon_number_conserved_without_coupling():
    p = EffectiveParams(g_eff=0.05, delta_eff=0.5, nu=0.2, eta=0.0)
    cfg = oracle.FockConfig(5, 3)
    model = oracle.build_effective_model(p, cfg)
    b = model.ops["b"]
    num = b.conj().T @ b
    comm = model.hamiltonian @ num - num @ model.hamiltonian
    assert abs(comm).max() < 1e-14


@given(st.floats(0, 0.3), st.integers(2, 40))
def test_displacement_unitary(eta, n):
    D = oracle.displacement(eta, n)
    np.testing.assert_allclose(D.conj().T @ D, np.eye(n), atol=1e-12)


def test_displacement_identity_and_first_order():
    np.testing.assert_array_equal(oracle.displacement(0.0, 6, "first-order"), np.eye(6))
    np.testing.assert_allclose(oracle.displacement(0.0, 6), np.eye(6), atol=1e-15)
    # exact minus first order is second order in eta on low levels
    errs = []
    for eta in (0.02, 0.04):
        diff = oracle.displacement(eta, 30) - oracle.displacement(eta, 30, "first-order")
        errs.append(np.abs(diff[:5, :5]).max())
    assert errs[1] / errs[0] == pytest.approx(4, rel=0.05)


def test_full_model_ground_state_without_drive():
    raw = RawParams(omega=0.0, g=0.05, delta_cap=30, delta=0.5, nu=0.2, eta=0.1)
    cfg = oracle.FockConfig(3, 2, atom_included=True)
    rhos = oracle.evolve_density(oracle.build_full_model(raw, cfg), oracle.fock_initial(1, cfg), [0, 1, 2])
    np.testing.assert_allclose(oracle.excited_population(rhos), 0, atol=1e-14)


def test_excited_population_needs_atom():
    cfg = oracle.FockConfig(3, 2)
    with pytest.raises(InvalidModelError):
        oracle.excited_population([oracle.fock_initial(0, cfg)])


def test_budget_enforced():
    p = EffectiveParams(g_eff=1e-2, delta_eff=0.5, nu=0.2, eta=0.1)
    with pytest.raises(DimensionBudgetError) as info:
        oracle.build_effective_model(p, oracle.FockConfig(999, 30, budget=20000))
    assert info.value.dimension == 1000 * 31


def test_truncation_convergence():
    p = EffectiveParams(g_eff=1e-2, delta_eff=0.5, nu=0.2, eta=0.1)
    times = np.linspace(0, 3, 4)
    runs = []
    for nb, nc in ((20, 4), (30, 6)):
        cfg = oracle.FockConfig(nb, nc)
        rhos = oracle.evolve_density(oracle.build_effective_model(p, cfg), oracle.fock_initial(2, cfg), times)
        runs.append(oracle.moment_array(rhos))
    np.testing.assert_allclose(runs[0], runs[1], atol=1e-7)


def test_liouvillian_matches_rhs():
    p = EffectiveParams(g_eff=0.03, delta_eff=0.4, nu=0.3, eta=0.1)
    cfg = oracle.FockConfig(4, 2)
    model = oracle.build_effective_model(p, cfg)
    rho = random_low_state(cfg, np.random.default_rng(1))
    L = oracle.liouvillian(model)
    via_super = (L @ rho.matrix.ravel(order="F")).reshape(cfg.dimension, cfg.dimension, order="F")
    np.testing.assert_allclose(via_super, oracle.lindblad_rhs(model)(rho.matrix), atol=1e-13)


def test_banded_relaxation_matches_full():
    cfg = oracle.FockConfig(30, None, atom_included=True, budget=10**6)
    model = oracle.build_tls_comparator(0.05, 1.0, 0.5, 0.1, 0.125, cfg)
    full = oracle.relax(model, oracle.fock_initial(0, cfg))
    banded = oracle.relax(model, oracle.fock_initial(0, cfg), coherence_band=4)
    assert full.residual < 1e-10
    m_full = oracle.extract_moments(full.state, "sm").m
    assert oracle.extract_moments(banded.state, "sm").m == pytest.approx(m_full, rel=1e-10)


def test_relaxed_state_matches_closed_form():
    from cavitycool import analytic

    p = EffectiveParams(g_eff=1e-2, delta_eff=0.5, nu=0.2, eta=0.1)
    cfg = oracle.FockConfig(40, 4, budget=10**6)
    res = oracle.relax(oracle.build_effective_model(p, cfg), oracle.fock_initial(0, cfg), coherence_band=6)
    m = oracle.extract_moments(res.state).m
    assert m == pytest.approx(analytic.stationary_closed_form(p).m, rel=0.01)


def test_hamiltonians_hermitian():
    cfg = oracle.FockConfig(5, 3, atom_included=True)
    raw = RawParams(omega=0.1, g=0.05, delta_cap=25, delta=0.5, nu=0.2, eta=0.1, gamma_cap=0.2)
    for mode in ("exact", "first-order"):
        H = oracle.build_full_model(raw, cfg, mode).hamiltonian
        assert abs(H - H.conj().T).max() < 1e-14
    with pytest.raises(InvalidModelError):
        oracle.ModelSpec(sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex)), (), cfg, "x", None)
