"""Interface mismatch |u1 - u3| over eps for the default matching constants,
for a3 shifted by the integrated layer tail -(N-1) pi^2 / (6 sqrt2 r0), and
for the a2 + 1 negative control. Also prints the size of the layer tail
e^{sqrt2 s} at the inner interface edge s = -2 delta / eps."""

from __future__ import annotations

import argparse
import math
from dataclasses import replace

from kslayer.matching import build_construction, gluing_mismatch
from kslayer.outer import ProblemParams


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=2)
    ap.add_argument("--r0", type=float, default=1.0)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.08, 0.04, 0.02, 0.01, 0.005])
    args = ap.parse_args()

    params = ProblemParams(args.N, args.r0)
    base = build_construction(params)
    shift = -(params.N - 1) * math.pi ** 2 / (6 * math.sqrt(2) * params.r0)
    shifted = replace(base, constants=replace(base.constants, a3=base.constants.a3 + shift))
    control = build_construction(params, override_a2=base.constants.a2 + 1.0)
    variants = {"default": base, "a3 shifted": shifted, "a2 + 1": control}

    eps_values = sorted(args.eps, reverse=True)
    print(f"a3 default {base.constants.a3:.6f}, shifted {shifted.constants.a3:.6f}")
    print(f"{'eps':>7} {'tail':>10} " + " ".join(f"{k:>12}" for k in variants))
    prev: dict[str, float] = {}
    for eps in eps_values:
        approx = base.approx(eps)
        tail = math.exp(-2 * math.sqrt(2) * approx.delta / eps)
        row = {k: gluing_mismatch(c.approx(eps))[0] for k, c in variants.items()}
        cells = " ".join(f"{row[k]:12.4e}" for k in variants)
        ratios = " ".join(f"{prev[k] / row[k]:6.2f}" for k in variants) if prev else ""
        print(f"{eps:7.3f} {tail:10.2e} {cells}  {ratios}")
        prev = row


if __name__ == "__main__":
    main()
