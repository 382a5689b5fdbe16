import io

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from cavitycool import analytic
from cavitycool.errors import InsufficientDecayError, InvalidParameterError, SingularSystemError
from cavitycool.moments import (
    CSV_COLUMNS,
    IDX,
    NAMES,
    MomentState,
    Trajectory,
    build_drift,
    evolve,
    fit_cooling_rate,
    initial_state,
    read_trajectory_csv,
    stability,
    stationary_numeric,
    write_trajectory_csv,
)
from cavitycool.params import EffectiveParams

PHONON = ["k_x", "k_u", "k7", "k8", "m"]
PHOTON = ["k_y", "k_w", "n", "k5", "k6"]


@st.composite
def physical(draw):
    kappa = draw(st.floats(0.2, 5))
    nu = draw(st.floats(0.02, 5))
    eta = draw(st.floats(0.01, 0.2))
    g = draw(st.sampled_from([-1, 1])) * draw(st.floats(1e-5, 1e-2)) * min(kappa, nu)
    delta = draw(st.floats(0.01, 5))
    return EffectiveParams(g_eff=g, delta_eff=delta, nu=nu, eta=eta, kappa=kappa)


def test_ordering_is_fixed():
    assert NAMES[0] == "k_x" and NAMES[13] == "m" and len(NAMES) == 14
    assert CSV_COLUMNS[:2] == ("m", "n")


def test_drift_entries(fig_params):
    s = build_drift(fig_params)
    assert s.A[IDX["k_y"], IDX["k_w"]] == 0.5
    assert s.A[IDX["k_y"], IDX["k_y"]] == -0.5
    assert s.b[IDX["k_y"]] == pytest.approx(2e-4)


@given(physical())
def test_m_row_and_offset_structure(p):
    s = build_drift(p)
    e = p.eta * p.g_eff
    m_row = s.A[IDX["m"]]
    assert m_row[IDX["k4"]] == e
    assert np.count_nonzero(np.delete(m_row, IDX["k4"])) == 0
    assert s.b[IDX["m"]] == 0
    expected = np.zeros(14)
    expected[IDX["k_y"]] = 2 * p.g_eff
    expected[IDX["k1"]] = expected[IDX["k4"]] = 2 * e
    np.testing.assert_array_equal(s.b, expected)


def test_spelled_out_rows(fig_params):
    p = fig_params
    s = build_drift(p)
    e = p.eta * p.g_eff
    v = np.arange(1.0, 15.0)
    d = s.A @ v + s.b
    x = dict(zip(NAMES, v))
    assert d[IDX["k_x"]] == pytest.approx(-2 * e * x["k_y"] + p.nu * x["k_u"])
    assert d[IDX["k_y"]] == pytest.approx(2 * p.g_eff + p.delta_eff * x["k_w"] - 0.5 * p.kappa * x["k_y"])
    assert d[IDX["k1"]] == pytest.approx(
        2 * e * (x["k7"] + 2 * x["m"] + 1) - p.nu * x["k3"] - p.delta_eff * x["k2"] - 0.5 * p.kappa * x["k1"]
    )


def test_uncoupled_blocks():
    s = build_drift(EffectiveParams(g_eff=0.0, delta_eff=0.3, nu=0.2, eta=0.1))
    assert not np.any(s.b)
    ph, pt = [IDX[n] for n in PHONON], [IDX[n] for n in PHOTON]
    assert not np.any(s.A[np.ix_(ph, pt)]) and not np.any(s.A[np.ix_(pt, ph)])


def test_arrays_read_only(fig_params):
    s = build_drift(fig_params)
    with pytest.raises(ValueError):
        s.A[0, 0] = 1.0


def test_initial_state():
    assert initial_state(2500).m == 2500
    assert not np.any(initial_state(0).to_array())
    v = initial_state(3).to_array()
    assert v[IDX["m"]] == 3 and np.count_nonzero(v) == 1
    with pytest.raises(InvalidParameterError):
        initial_state(-1)


def test_state_rejects_nonfinite():
    with pytest.raises(InvalidParameterError):
        MomentState(m=np.inf)


def test_stationary_matches_closed_form(fig_params):
    st_, rep = stationary_numeric(build_drift(fig_params))
    assert rep.hurwitz
    assert st_.m == pytest.approx(analytic.stationary_closed_form(fig_params).m, rel=1e-9)


def test_uncoupled_stationary_is_zero():
    st_, _ = stationary_numeric(build_drift(EffectiveParams(g_eff=0.0, delta_eff=0.3, nu=0.2, eta=0.1)))
    assert not np.any(st_.to_array())


def test_singular_system_reported():
    # uncoupled phonons: A singular, b = 0 when g_eff = 0; with eta = 0 and g != 0 the
    # phonon block is still singular but b only feeds the photon block
    s = build_drift(EffectiveParams(g_eff=1e-3, delta_eff=0.3, nu=0.2, eta=0.0))
    with pytest.raises(SingularSystemError) as info:
        stationary_numeric(s)
    assert info.value.condition > 1e10


def test_singular_with_offset_falls_back():
    s = build_drift(EffectiveParams(g_eff=1e-3, delta_eff=0.3, nu=0.2, eta=0.0))
    tr = evolve(s, initial_state(2), np.linspace(0, 50, 11))
    assert tr.method == "adaptive"
    np.testing.assert_allclose(tr.m, 2.0)


def test_evolve_identity_at_zero(fig_params):
    v0 = initial_state(7)
    tr = evolve(build_drift(fig_params), v0, [0.0])
    np.testing.assert_array_equal(tr.states[0], v0.to_array())


def test_decoupled_phonons_stay_put():
    s = build_drift(EffectiveParams(g_eff=0.0, delta_eff=0.3, nu=0.2, eta=0.1))
    tr = evolve(s, initial_state(5), np.linspace(0, 1e3, 7))
    np.testing.assert_array_equal(tr.m, 5.0)


def test_bad_times(fig_params):
    s = build_drift(fig_params)
    with pytest.raises(InvalidParameterError):
        evolve(s, initial_state(1), [0.0, 2.0, 1.0])
    with pytest.raises(InvalidParameterError):
        evolve(s, initial_state(1), [-1.0, 0.0])


def resolvable(p):
    # slowest rate must sit well above eigenvalue roundoff ~ eps * |A|
    scale = max(p.kappa, p.nu, p.delta_eff)
    return analytic.cooling_rate(p).gamma > 1e-10 * scale


@given(physical())
def test_long_time_limit_is_stationary(p):
    assume(resolvable(p))
    s = build_drift(p)
    rep = stability(s)
    assert rep.hurwitz
    t = 20.0 / abs(rep.max_real_eigenvalue)
    end = evolve(s, initial_state(3.0), [t]).states[-1]
    st_, _ = stationary_numeric(s)
    np.testing.assert_allclose(end, st_.to_array(), rtol=0, atol=1e-8)


@given(physical(), st.floats(0.1, 100))
def test_output_spacing_does_not_matter(p, t_end):
    s = build_drift(p)
    coarse = evolve(s, initial_state(10), np.linspace(0, t_end, 5)).states
    fine = evolve(s, initial_state(10), np.linspace(0, t_end, 9)).states[::2]
    np.testing.assert_allclose(fine, coarse, rtol=1e-12, atol=1e-15 * np.abs(coarse).max())


@given(physical(), st.floats(0, 1))
def test_homogeneous_part_is_linear(p, alpha):
    s = build_drift(p)
    t = np.linspace(0, 50, 6)
    rng = np.random.default_rng(0)
    v, w = rng.normal(size=14), rng.normal(size=14)
    mix = evolve(s, alpha * v + (1 - alpha) * w, t).states
    sep = alpha * evolve(s, v, t).states + (1 - alpha) * evolve(s, w, t).states
    np.testing.assert_allclose(mix, sep, atol=1e-10)


@given(physical(), st.floats(0.5, 1e4))
def test_m_stays_in_physical_range(p, m0):
    assume(resolvable(p))
    s = build_drift(p)
    assert stability(s).hurwitz
    gamma = analytic.cooling_rate(p).gamma
    m = evolve(s, initial_state(m0), np.linspace(0, 5 / gamma, 40)).m
    top = max(m0, stationary_numeric(s)[0].m)
    assert m.min() >= -1e-9
    assert m.max() <= top * (1 + 1e-9)


def synthetic(rate, m0, floor, times):
    m = m0 * np.exp(-rate * times) + floor
    states = np.zeros((len(times), 14))
    states[:, IDX["m"]] = m
    return Trajectory(times, states, None)


def test_fit_recovers_synthetic_rate():
    t = np.linspace(0, 4e9, 400)
    res = fit_cooling_rate(synthetic(2e-9, 2500, 4.5, t), 4.5)
    assert res.rate == pytest.approx(2e-9, abs=1e-12)
    assert res.r_squared > 0.999999


def test_fit_refuses_flat_trajectory():
    with pytest.raises(InsufficientDecayError):
        fit_cooling_rate(synthetic(0.0, 0.0, 4.5, np.linspace(0, 10, 20)), 4.5)


def test_fit_matches_rate_formula():
    p = EffectiveParams(g_eff=5e-4, delta_eff=0.5, nu=0.05, eta=0.1)
    gamma = analytic.cooling_rate(p).gamma
    t = np.linspace(0, 6 / gamma, 300)
    tr = evolve(build_drift(p), initial_state(2500), t)
    res = fit_cooling_rate(tr, analytic.stationary_closed_form(p).m)
    assert res.rate == pytest.approx(gamma, rel=0.05)


def test_csv_roundtrip_and_determinism(fig_params, tmp_path):
    tr = evolve(build_drift(fig_params), initial_state(3), np.linspace(0, 10, 4))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trajectory_csv(a, tr)
    write_trajectory_csv(b, tr)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "t," + ",".join(CSV_COLUMNS)
    times, cols = read_trajectory_csv(a)
    np.testing.assert_array_equal(times, tr.times)
    np.testing.assert_array_equal(cols["k4"], tr["k4"])
    buf = io.StringIO()
    write_trajectory_csv(buf, tr)
    assert buf.getvalue() == a.read_text()
