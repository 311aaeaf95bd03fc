"""L1 residual of the glued approximation over an eps sweep, split by region,
with the log-log scaling fit and a grid-refinement check."""

from __future__ import annotations

import argparse

from kslayer.matching import build_construction
from kslayer.outer import ProblemParams
from kslayer.residual import default_grid, residual_report, scaling_fit


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=2)
    ap.add_argument("--r0", type=float, default=1.0)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.07, 0.05, 0.035, 0.025])
    args = ap.parse_args()

    params = ProblemParams(args.N, args.r0)
    con = build_construction(params)
    eps_values = sorted(args.eps, reverse=True)
    print(f"{'eps':>7} {'total':>10} {'layer':>10} {'interface':>10} {'outer':>10} {'refined':>10}")
    points = []
    for eps in eps_values:
        approx = con.approx(eps)
        rep = residual_report(approx, default_grid(params, eps))
        fine = residual_report(approx, default_grid(params, eps, per_layer=400, n_outer=4000))
        points.append((eps, rep.l1_total))
        print(f"{eps:7.3f} {rep.l1_total:10.4f} {rep.l1_layer:10.4f} {rep.l1_interface:10.4f} "
              f"{rep.l1_outer:10.4f} {fine.l1_total:10.4f}")
    if len(points) >= 4:
        sigma = scaling_fit(points)
        print(f"slope {sigma + 1:.4f}  sigma {sigma:.4f}")


if __name__ == "__main__":
    main()
