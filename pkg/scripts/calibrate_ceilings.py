"""One-off sweep that measured the ceilings frozen in anisolp.inequalities.

Runs each inequality over a battery wider than the regression suite
(full-band, shell-constrained and single-cell fields) on the 64^3 reference
grid and prints the observed maxima.  Frozen ceilings are these maxima plus
a 50% margin, rounded up; rerun after changing the cutoff construction.
"""

import argparse
import math

import numpy as np

from anisolp.inequalities import (
    check_bernstein,
    check_duality,
    check_embedding,
    check_interpolation,
    check_product_law,
)
from anisolp.sampling import FieldSampler, plateau_mask
from anisolp.spectral import make_grid


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=64)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20240801)
    args = ap.parse_args()

    g = make_grid(args.grid)
    rng = np.random.default_rng(args.seed)
    beta = rng.normal(size=3)
    beta /= np.linalg.norm(beta)
    e3 = np.array([0.0, 0.0, 1.0])
    n = args.trials

    print(f"# grid {args.grid}^3, {n} trials per point, seed {args.seed}")

    worst = 0.0
    for s1, s2 in [(1.0, 0.5), (0.5, 0.5), (1.5, 0.0), (0.0, 1.0)]:
        r = check_embedding(s1, s2, g, beta, n_trials=n, seed=args.seed)
        worst = max(worst, r.max_ratio)
        print(f"embedding {s1},{s2}: {r.max_ratio:.6f}")
    print(f"embedding worst: {worst:.6f}")

    worst = 0.0
    for s1, s2, q1, q2 in [(1.0, 0.5, 2, 2), (1.0, 0.5, 2, 1), (0.5, -0.5, 1, 2), (2.0, 1.0, 2, 2)]:
        r = check_duality(s1, s2, q1, q2, g, beta, n_trials=n, seed=args.seed + 1)
        worst = max(worst, r.max_ratio)
        print(f"duality {s1},{s2},{q1},{q2}: {r.max_ratio:.6f}")
    rs = check_duality(1.0, 0.5, 2, 2, g, beta, n_trials=n, seed=args.seed + 2, single_band=True)
    print(f"duality single-band: {rs.max_ratio:.12f}")
    print(f"duality worst (multi-band): {worst:.6f}")

    worst = 0.0
    for sigma in (0.01, 0.05, 0.1, 0.15, 0.2, 0.24):
        for eta in (0.0, 0.25):
            if sigma >= 0.25 - eta / 2:
                continue
            r = check_interpolation(sigma, eta, g, beta, n_trials=n, seed=args.seed + 3)
            worst = max(worst, r.max_ratio)
            print(f"interpolation sigma={sigma} eta={eta}: {r.max_ratio:.6f}")
    # single-cell battery
    for k0, l0 in [(2, 0), (3, 1), (3, 3), (4, -1)]:
        mask = plateau_mask(g, beta, "perp", k0) & plateau_mask(g, beta, "par", l0)
        if not mask.any():
            continue
        s = FieldSampler(g, seed=args.seed + 4, beta=beta, extra_mask=mask)
        r = check_interpolation(0.1, 0.0, g, beta, n_trials=50, seed=args.seed + 4, sampler=s)
        worst = max(worst, r.max_ratio)
        print(f"interpolation cell ({k0},{l0}): {r.max_ratio:.6f}")
    print(f"interpolation worst: {worst:.6f}")

    worst = 0.0
    for s1, s2, r1, r2 in [
        (0.5, 0.5, 0.0, 0.0),
        (0.9, -0.2, 0.25, 0.2),
        (0.95, 0.04, 0.45, -0.4),
        (0.05, 0.05, 0.0, 0.0),
        (0.9, 0.05, 0.45, 0.04),
    ]:
        r = check_product_law(s1, s2, r1, r2, g, beta, n_trials=n, seed=args.seed + 5)
        worst = max(worst, r.max_ratio)
        print(f"product {s1},{s2},{r1},{r2}: {r.max_ratio:.6f}")
    print(f"product worst: {worst:.6f}")

    print("bernstein:")
    pts = [
        (1, {"N": 1, "k": 2, "support": "ring", "p1": 2, "p2": 2}, beta),
        (1, {"N": 0, "k": 2, "support": "ball", "p1": math.inf, "p2": 2}, e3),
        (2, {"N": 0, "k": 1, "support": "ball", "p1": 2, "q1": 2, "q2": 1}, e3),
        (2, {"N": 1, "k": 2, "support": "ring", "p1": 2, "q1": 2, "q2": 2}, beta),
        (3, {"N": 1, "k": 2, "support": "ring", "p1": 2}, beta),
        (4, {"N": 1, "k": 1, "support": "ring", "p1": 2}, beta),
        (4, {"N": 2, "k": 1, "support": "ring", "p1": 2}, beta),
    ]
    for case, params, b in pts:
        r = check_bernstein(case, params, g, b, n_trials=n, seed=args.seed + 6)
        print(f"  case {case} {params}: {r.max_ratio:.6f} (registered {r.ceiling:.6f})")


if __name__ == "__main__":
    main()
