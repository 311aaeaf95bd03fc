"""Newton-corrected solutions over eps: scaled and full mass, layer and outer
deviations, the correction size, and the inverse-bound probe."""

from __future__ import annotations

import argparse
import math

from kslayer.matching import assemble_ubar, build_construction
from kslayer.outer import ProblemParams
from kslayer.residual import default_grid
from kslayer.solver import build_linearized, inverse_bound_probe, newton_solve


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=2)
    ap.add_argument("--r0", type=float, default=1.0)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.08, 0.04, 0.02])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = ProblemParams(args.N, args.r0)
    con = build_construction(params)
    print(f"half-line mass sqrt2 = {math.sqrt(2):.4f}, full-line mass 2 sqrt2 = {2 * math.sqrt(2):.4f}")
    print(f"{'eps':>7} {'mass_sc':>9} {'mass_full':>10} {'layer':>8} {'outer':>8} {'phi/eps':>8} {'L^-1':>8}")
    for eps in sorted(args.eps, reverse=True):
        approx = con.approx(eps)
        ubar = assemble_ubar(default_grid(params, eps), approx)
        sol = newton_solve(ubar, approx.log_lam, eps, params, con.outer)
        probe = inverse_bound_probe(build_linearized(ubar, approx.log_lam, params), seed=args.seed)
        print(f"{eps:7.3f} {sol.mass_scaled:9.4f} {sol.mass_full:10.2f} {sol.layer_dev:8.4f} "
              f"{sol.outer_dev:8.4f} {sol.phi_sup / eps:8.4f} {probe:8.4f}")


if __name__ == "__main__":
    main()
