"""
Build the boundary operators on a refined unit sphere and watch the
Calderon identity residuals shrink.

    python3 demos/calderon_identities.py --levels 0 1 --mu 1
"""

import argparse

from diracbie import CalderonSuite, identity_residuals
from diracbie.surface import Sphere, build_surface


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--levels", nargs=2, type=int, default=[0, 1])
    parser.add_argument("--mu", type=float, default=1.0)
    parser.add_argument("--method", choices=["offsurface", "pv_direct"], default="offsurface")
    args = parser.parse_args()

    rows = []
    for level in range(args.levels[0], args.levels[1] + 1):
        grid = build_surface(Sphere(1.0), level)
        suite = CalderonSuite.build(grid, args.mu, args.method)
        res = identity_residuals(grid, args.mu, suite=suite)
        rows.append((level, grid.n_nodes, res))

    print(f"{'level':<32}" + "".join(f"{level:>11}" for level, _, _ in rows))
    print(f"{'nodes':<32}" + "".join(f"{n:>11}" for _, n, _ in rows))
    for name in rows[0][2]:
        print(f"{name:<32}" + "".join(f"{res[name]:>11.2e}" for _, _, res in rows))


if __name__ == "__main__":
    main()
