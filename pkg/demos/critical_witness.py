"""
At the critical coupling the shell domain is larger than H^1. Take rough
boundary data whose H^(-1/2) norm stays bounded as the harmonic cutoff L
grows, and watch the H^(1/2) norm of the inner trace keep growing.

Level 2 (band limit 19) is enough for L up to 16 and runs in seconds;
use --level 3 --cutoffs 8 16 32 for the full study.

    python3 demos/critical_witness.py
"""

import argparse

import numpy as np

from diracbie import critical_witness, rough_spectrum
from diracbie.surface import Sphere, build_surface


def main():
    parser = argparse.ArgumentParser(description="critical delta-shell witness")
    parser.add_argument("--level", type=int, default=2)
    parser.add_argument("--cutoffs", nargs="+", type=int, default=[4, 8, 16])
    parser.add_argument("--epsilon", type=int, choices=[1, -1], default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    grid = build_surface(Sphere(1.0), args.level)
    spec = rough_spectrum(max(args.cutoffs), np.random.default_rng(args.seed))
    rows = critical_witness(grid, 1.0, args.epsilon, spec, args.cutoffs)
    print("   L   transmission   |t u|_(1/2)   |f_L|_(-1/2)")
    for r in rows:
        print(f"{r.L:4d} {r.transm_residual:14.2e} {r.h_half_norm:13.4f} {r.f_minus_half_norm:14.4f}")


if __name__ == "__main__":
    main()
