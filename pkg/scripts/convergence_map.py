#!/usr/bin/env python3
"""Map the empirical convergence domain against the certified ball.

Sweeps (delta, f) where f scales the state norm in units of the
certified radius eps(delta), and records status, iteration count,
residual, and the measured convergence rate.  Points with f <= 1 are
inside the certified ball and must converge; larger f probes how far
the plain dynamics keep working without a certificate.
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
    quadratic_rate,
    random_series,
    solve,
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--order", type=int, default=32)
    ap.add_argument("--s", type=float, default=0.9)
    ap.add_argument("--deltas", type=str, default="0.2,0.4,0.6,0.8")
    ap.add_argument("--fs", type=str, default="0.25,0.5,1.0,5,25,125")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", type=Path, default=Path("results/convergence_map.csv"))
    args = ap.parse_args()

    inst = build_germ_instance(identity_germ_spec(args.order), seed=args.seed)
    deltas = [float(t) for t in args.deltas.split(",")]
    fs = [float(t) for t in args.fs.split(",")]

    lines = ["delta,f,eps,status,iterations,residual,rate"]
    for delta in deltas:
        cfg = SolveConfig(s=args.s, delta=delta)
        c_used, nj_used, _ = inst.inflated(cfg.safety_factor)
        eps = epsilon_closed_form(inst.k, max(1.0, c_used), nj_used, delta)
        for f in fs:
            rng = SplitMix64(args.seed).spawn(hash((delta, f)) & 0xFFFF)
            x = random_series(rng, TAYLOR, args.order, min_index=1,
                              target_norm=f * eps, at_scale=args.s)
            res = solve(inst, x, cfg)
            try:
                rate = f"{quadratic_rate(res.trace):.4f}"
            except ValueError:
                rate = "nan"
            lines.append(f"{delta:.17g},{f:.17g},{eps:.17g},{res.status.value},"
                         f"{res.iterations},{res.residual:.17g},{rate}")
            print(lines[-1])

    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("\n".join(lines) + "\n")
    print(f"\nwrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
