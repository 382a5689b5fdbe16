"""Cool-down from m(0) = 2500 at the two detuning choices.

For each trap frequency the trajectory is integrated exactly, the cooling
rate is fitted and compared with the closed form.
"""
import argparse
from pathlib import Path

import numpy as np

from cavitycool import analytic, moments
from cavitycool.params import EffectiveParams
from cavitycool.sweep import PRESETS, TRAJECTORY_NU_CHOICES, RunManifest


def cooldown(preset, nu, n_times, outdir):
    pre = PRESETS[preset]
    delta = 0.5 if pre["delta_rule"] == "half-kappa" else nu
    p = EffectiveParams(g_eff=pre["g_eff"], delta_eff=delta, nu=nu, eta=pre["eta"])
    gamma = analytic.cooling_rate(p).gamma
    m_ss = analytic.stationary_closed_form(p).m
    times = np.linspace(0, 8 / gamma, n_times)
    traj = moments.evolve(moments.build_drift(p), moments.initial_state(pre["m0"]), times)
    fit = moments.fit_cooling_rate(traj, m_ss)
    path = outdir / f"{preset}_nu{nu:g}.csv"
    offset_curve = (pre["m0"] - m_ss) * np.exp(-gamma * times) + m_ss
    moments.write_trajectory_csv(path, traj, {"m_exp": pre["m0"] * np.exp(-gamma * times), "m_exp_offset": offset_curve})
    RunManifest("fig4_cooldown", {"preset": preset, "params": p, "n_times": n_times}, [str(path)]).write(path)
    print(f"{preset} nu={nu:g} delta_eff={delta:g}: gamma={gamma:.5e} fitted={fit.rate:.5e} "
          f"(rel {abs(fit.rate / gamma - 1):.1e}, R^2={fit.r_squared:.8f}), m_ss={m_ss:.5g}, m(end)={traj.m[-1]:.5g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--n-times", type=int, default=400)
    ap.add_argument("--nu", type=float, nargs="+", default=list(TRAJECTORY_NU_CHOICES))
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for preset in ("fig4", "fig5"):
        for nu in args.nu:
            cooldown(preset, nu, args.n_times, out)


if __name__ == "__main__":
    main()
