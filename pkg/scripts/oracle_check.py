"""Density-matrix checks of the cooling equations.

1. effective model vs moment equations at small m0 (thermal and Fock start);
2. full atom-phonon-cavity model vs effective model as delta_cap grows;
3. two-level comparator scaling with Gamma/nu.
"""
import argparse

import numpy as np

from cavitycool import moments, oracle, validation
from cavitycool.params import EffectiveParams


def effective_check(nb, nc, t_max):
    p = EffectiveParams(g_eff=1e-2, delta_eff=0.5, nu=0.2, eta=0.1)
    cfg = oracle.FockConfig(nb, nc)
    model = oracle.build_effective_model(p, cfg)
    times = np.linspace(0, t_max, 41)
    ref_sys = moments.build_drift(p)
    for label, rho0 in (("fock m0=3", oracle.fock_initial(3, cfg)), ("thermal m0=2", oracle.thermal_initial(2.0, cfg))):
        rhos = oracle.evolve_density(model, rho0, times)
        got = oracle.moment_array(rhos)
        ref = moments.evolve(ref_sys, oracle.extract_moments(rho0), times).states
        print(f"effective model, {label}: max |moment deviation| = {np.max(np.abs(got - ref)):.2e}")


def elimination_check():
    print("full model vs effective model:")
    for D in validation.ELIMINATION_DELTAS:
        dev, p1 = validation.full_vs_effective(D)
        print(f"  delta_cap={D:6g}: max |m_full - m_eff| = {dev:.3e}, mean P1 = {p1:.3e}")


def tls_check():
    print("two-level comparator:")
    for r in validation.WEAK_RATIOS:
        print(f"  weak   Gamma/nu={r:6g}: m_ss = {validation.tls_stationary_m(1.0, 1 / r, 0.5):.5g}  (Gamma/4nu = {r / 4:.5g})")
    for r in validation.STRONG_RATIOS:
        m = validation.tls_stationary_m(1.0, 1 / r, 1 / r)
        print(f"  strong Gamma/nu={r:6g}: m_ss = {m:.5g}  ((Gamma/4nu)^2 = {(r / 4) ** 2:.5g})")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nb", type=int, default=50)
    ap.add_argument("--nc", type=int, default=4)
    ap.add_argument("--t-max", type=float, default=5.0)
    ap.add_argument("--skip-full", action="store_true")
    args = ap.parse_args()
    effective_check(args.nb, args.nc, args.t_max)
    if not args.skip_full:
        elimination_check()
    tls_check()


if __name__ == "__main__":
    main()
