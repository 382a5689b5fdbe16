import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavitycool import analytic
from cavitycool.errors import SingularFormulaError
from cavitycool.moments import IDX, build_drift, stationary_numeric
from cavitycool.params import EffectiveParams


def eff(**kw):
    base = dict(g_eff=1e-4, delta_eff=0.5, nu=0.05, eta=0.1, kappa=1.0)
    base.update(kw)
    return EffectiveParams(**base)


def test_fig_working_point(fig_params):
    closed = analytic.stationary_closed_form(fig_params)
    assert analytic.m_ss_first_order(fig_params) == pytest.approx(4.525, rel=1e-14)
    assert closed.m == pytest.approx(4.525, rel=1e-6)
    numeric, _ = stationary_numeric(build_drift(fig_params))
    assert closed.m == pytest.approx(numeric.m, rel=1e-9)


def test_strong_confinement_floor():
    p = eff(nu=10, delta_eff=10)
    assert analytic.stationary_closed_form(p).m == pytest.approx(6.25e-4, rel=1e-3)
    assert analytic.m_ss_first_order(p) == pytest.approx(1 / (16 * 100), rel=1e-14)


@given(st.floats(0.01, 10), st.floats(0.1, 10))
def test_first_order_at_delta_nu(nu, kappa):
    p = eff(nu=nu, delta_eff=nu, kappa=kappa)
    assert analytic.m_ss_first_order(p) == pytest.approx(kappa**2 / (16 * nu**2), rel=1e-12)


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.2, 5), st.floats(0.0, 0.2), st.floats(1e-4, 1e-2))
def test_zero_coherences(nu, delta, kappa, eta, g):
    st_ = analytic.stationary_closed_form(eff(nu=nu, delta_eff=delta, kappa=kappa, eta=eta, g_eff=g * min(nu, kappa)))
    assert st_.k_x == st_.k4 == st_.k8 == 0


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.2, 5), st.floats(0.01, 0.2), st.floats(1e-4, 1e-2))
def test_closed_form_solves_stationary_equations(nu, delta, kappa, eta, g):
    p = eff(nu=nu, delta_eff=delta, kappa=kappa, eta=eta, g_eff=g * min(nu, kappa))
    s = build_drift(p)
    v = analytic.stationary_closed_form(p).to_array()
    scale = np.abs(s.A) @ np.abs(v) + np.abs(s.b)
    assert np.all(np.abs(s.A @ v + s.b) <= 1e-9 * scale + 1e-300)


def test_printed_photon_number_only_solves_at_delta_nu():
    p = eff(g_eff=1e-2, nu=0.2, delta_eff=0.7)
    exact = analytic.stationary_closed_form(p).n
    assert abs(analytic.photon_number_as_printed(p) / exact - 1) > 1e-3
    q = p.with_(delta_eff=p.nu)
    assert analytic.photon_number_as_printed(q) == pytest.approx(analytic.stationary_closed_form(q).n, rel=1e-12)


def test_singular_denominators():
    with pytest.raises(SingularFormulaError) as info:
        analytic.stationary_closed_form(eff(delta_eff=0.0))
    assert info.value.denominator == "delta_eff"
    # choose nu so that mu^3 vanishes exactly
    g, d, eta = 0.5, 0.25, 0.5
    nu = 16 * eta**2 * g**2 * d / (1 + 4 * d**2)
    p = eff(g_eff=g, delta_eff=d, eta=eta, nu=nu)
    assert analytic.cubic_frequency(p) == 0
    with pytest.raises(SingularFormulaError) as info:
        analytic.stationary_closed_form(p)
    assert info.value.denominator == "mu3"


@pytest.mark.parametrize("nu, expected", [(1.0, math.sqrt(5) / 2)])
def test_optimal_detuning_value(nu, expected):
    assert analytic.optimal_detuning(eff(nu=nu)) == pytest.approx(expected, rel=1e-12)


def test_optimal_detuning_limits():
    assert analytic.optimal_detuning(eff(nu=1e-6)) == pytest.approx(0.5, rel=1e-9)
    assert analytic.optimal_detuning(eff(nu=10)) == pytest.approx(10, rel=1.3e-3)
    assert analytic.optimal_detuning_limits(eff(nu=0.3)) == {"weak": 0.5, "strong": 0.3}


@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_optimal_detuning_is_argmin(kappa, nu):
    p = eff(kappa=kappa, nu=nu)
    d = analytic.optimal_detuning(p)
    best = analytic.m_ss_first_order(p.with_(delta_eff=d))
    for shifted in (d * (1 - 1e-4), d * (1 + 1e-4)):
        assert analytic.m_ss_first_order(p.with_(delta_eff=shifted)) >= best * (1 - 1e-14)


def test_cooling_rate_examples():
    r = analytic.cooling_rate(eff(g_eff=5e-4, nu=0.1, delta_eff=0.5))
    assert r.regime == "half-kappa-limit"
    assert r.gamma == pytest.approx(8 * 0.01 * 25e-8 * 0.1 / (1 + 4e-4), rel=1e-12)
    assert r.gamma == pytest.approx(1.9992e-9, rel=1e-4)
    r = analytic.cooling_rate(eff(nu=10, delta_eff=10))
    assert r.regime == "nu-limit"
    assert r.gamma == pytest.approx(64 * 0.01 * 1e-8 * 100 / 1601, rel=1e-12)
    assert analytic.cooling_rate(eff(eta=0)).gamma == 0


def test_limits_agree_with_general_rate():
    for p in (eff(g_eff=5e-4, nu=0.1), eff(nu=0.3, delta_eff=0.3)):
        general = 64 * p.eta**2 * p.g_eff**2 * p.nu * p.delta_eff * p.kappa / analytic.rate_denominator(p.kappa, p.nu, p.delta_eff)
        assert analytic.cooling_rate(p).gamma == pytest.approx(general, rel=1e-14)
    assert analytic.gamma_half_kappa(eff(g_eff=5e-4, nu=0.1)) == pytest.approx(
        analytic.cooling_rate(eff(g_eff=5e-4, nu=0.1)).gamma, rel=1e-12)
    assert analytic.gamma_at_nu(eff(nu=0.3, delta_eff=0.3)) == pytest.approx(
        analytic.cooling_rate(eff(nu=0.3, delta_eff=0.3)).gamma, rel=1e-12)


def test_negative_detuning_heats():
    assert analytic.cooling_rate(eff(delta_eff=-0.3)).gamma < 0


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(-100, 100))
def test_denominator_identity(kappa, nu, delta):
    expanded = (kappa**2 + 4 * nu**2) ** 2 + 8 * delta**2 * (kappa**2 - 4 * nu**2) + 16 * delta**4
    squares = analytic.rate_denominator(kappa, nu, delta)
    assert squares > 0
    # cancellation in the expanded form limits the comparison
    size = (kappa**2 + 4 * nu**2) ** 2 + 8 * delta**2 * (kappa**2 + 4 * nu**2) + 16 * delta**4
    assert abs(expanded - squares) <= 1e-12 * size


@given(st.floats(1e-6, 1e-2), st.floats(0.01, 5), st.floats(0.01, 5))
def test_rate_even_in_coupling(g, nu, delta):
    assert analytic.cooling_rate(eff(g_eff=g, nu=nu, delta_eff=delta)).gamma == \
        analytic.cooling_rate(eff(g_eff=-g, nu=nu, delta_eff=delta)).gamma


def test_k4_adiabatic():
    p = eff(g_eff=5e-4, nu=0.1)
    assert analytic.k4_adiabatic(p, 0) == 0
    gamma = analytic.cooling_rate(p).gamma
    assert analytic.k4_adiabatic(p, 2500) == pytest.approx(-gamma * 2500 / (0.1 * 5e-4), rel=1e-12)
    assert analytic.k4_adiabatic(p, 2500) == pytest.approx(-0.09996, rel=1e-4)


def test_k4_follows_slaved_value_during_cooldown():
    from cavitycool.moments import evolve, initial_state

    p = eff(g_eff=5e-4, nu=0.05)
    gamma = analytic.cooling_rate(p).gamma
    tr = evolve(build_drift(p), initial_state(2500), [1 / gamma])
    m, k4 = tr.states[0, IDX["m"]], tr.states[0, IDX["k4"]]
    assert k4 == pytest.approx(analytic.k4_adiabatic(p, m), rel=0.01)


def test_first_order_close_to_full_over_fig_grid():
    worst = 0.0
    for nu in np.linspace(0.01, 0.5, 12):
        for d in np.geomspace(0.01, 2, 15):
            p = eff(g_eff=1e-3, nu=nu, delta_eff=d)
            first = analytic.m_ss_first_order(p)
            worst = max(worst, abs(first - analytic.stationary_closed_form(p).m) / first)
    assert worst <= 0.05


def test_identity_report_weak_confinement():
    rep = analytic.identity_checks(eff(nu=0.05))
    assert rep.weak_confinement
    assert rep.m_ss_deviation <= 0.15 and rep.gamma_deviation <= 0.15
    assert rep.gamma_ratio_target == pytest.approx(2.5)
