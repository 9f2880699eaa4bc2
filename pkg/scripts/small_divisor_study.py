#!/usr/bin/env python3
"""Loss-of-regularity study for the small-divisor operator.

Measures the operator norm of the cohomological solver (divide Fourier
mode m by e^{2 pi i m alpha} - 1) across mode-count doublings and loss
exponents k.  For a Diophantine rotation number the k = 0 estimate keeps
growing with the truncation while some finite k saturates; the smallest
such k is the operator's loss exponent.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kamact import GOLDEN_MEAN, diophantine_margin, measure_kboundedness


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=GOLDEN_MEAN)
    ap.add_argument("--tau", type=float, default=1.0)
    ap.add_argument("--C", type=float, default=1.0)
    ap.add_argument("--modes", type=str, default="32,64,128,256,512")
    ap.add_argument("--kmax", type=int, default=3)
    ap.add_argument("--out", type=Path, default=Path("results/small_divisor_norms.csv"))
    args = ap.parse_args()

    mode_list = tuple(int(t) for t in args.modes.split(","))
    print(f"alpha = {args.alpha!r}  Diophantine margin (tau={args.tau}, "
          f"M={mode_list[-1]}): {diophantine_margin(args.alpha, args.tau, mode_list[-1]):.6f}")

    study = measure_kboundedness(args.alpha, args.tau, args.C,
                                 mode_list=mode_list,
                                 k_values=tuple(range(args.kmax + 1)))
    header = "k," + ",".join(f"M{m}" for m in mode_list) + ",growth,variation"
    lines = [header]
    print("\n" + header)
    for k in study.k_values:
        vals = ",".join(f"{v:.17g}" for v in study.estimates[k])
        row = f"{k},{vals},{study.growth(k):.17g},{study.variation(k):.17g}"
        lines.append(row)
        pretty = "  ".join(f"{v:10.4g}" for v in study.estimates[k])
        print(f"k={k}:  {pretty}   growth {study.growth(k):6.2f}x  "
              f"variation {100 * study.variation(k):6.2f}%")
    print(f"\nsmallest stabilizing loss exponent: k = {study.stabilizing_k}")

    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0 if study.stabilizing_k is not None else 1


if __name__ == "__main__":
    sys.exit(main())
