#!/usr/bin/env python3
"""Solve one orbit equation on the identity-base germ and show the trace.

Builds the instance (measuring its constants), draws a random state of
norm f * eps, runs the certified solver, and prints the per-step bounds
next to the measured quantities, then the certificate table.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kamact import (
    SolveConfig,
    TAYLOR,
    SplitMix64,
    build_germ_instance,
    epsilon_closed_form,
    identity_germ_spec,
    random_series,
    reversion_oracle,
    max_coeff_diff,
    solve,
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--order", type=int, default=32)
    ap.add_argument("--s", type=float, default=0.9)
    ap.add_argument("--delta", type=float, default=0.5)
    ap.add_argument("--f", type=float, default=0.5, help="state norm as a fraction of eps")
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    print(f"measuring constants for the a = id germ at order {args.order} ...")
    inst = build_germ_instance(identity_germ_spec(args.order), seed=args.seed)
    print(f"  c = {inst.measured_c:.6g}   N(j) = {inst.measured_Nj:.9g}   "
          f"kappa = {inst.measured_kappa:.6g}")

    cfg = SolveConfig(s=args.s, delta=args.delta)
    c_used, nj_used, _ = inst.inflated(cfg.safety_factor)
    eps = epsilon_closed_form(inst.k, max(1.0, c_used), nj_used, args.delta)
    print(f"  certified ball radius eps = {eps:.6e} (safety x{cfg.safety_factor})")

    rng = SplitMix64(args.seed).spawn(1)
    x = random_series(rng, TAYLOR, args.order, min_index=1,
                      target_norm=args.f * eps, at_scale=args.s)
    result = solve(inst, x, cfg)

    print(f"\nstatus = {result.status.value}   certified ball = {result.certified}")
    print(f"residual |act(g,0) - x| at scale {(args.s - args.delta) / 2:.3g} "
          f"= {result.residual:.3e}\n")
    print("  n    s_n      sigma_n    |xi_n|        step bound    |gamma_n|     g_n")
    for r in result.trace.rows:
        print(f"  {r.n}  {r.s_n:.5f}  {r.sigma_n:.6f}  {r.xi_norm:.6e}  "
              f"{r.lemma1_bound:.6e}  {r.gamma_norm:.6e}  {r.g_n:.6f}")

    print("\ncertificates:")
    for c in result.certificates.checks:
        print(f"  {'PASS' if c.passed else 'FAIL'}  {c.name:32s} margin {c.margin:+.3e}")

    oracle = reversion_oracle(x)
    print(f"\nreversion-oracle coefficient error: "
          f"{max_coeff_diff(result.g.displacement, oracle.displacement):.3e}")
    return 0 if result.certificates.passed else 1


if __name__ == "__main__":
    sys.exit(main())
