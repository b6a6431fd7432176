#!/usr/bin/env python3
"""Compare the stochastic estimator against the deterministic solver.

Solves a short transverse-cosine relaxation on a mesh, then estimates
the solution at randomly chosen (cell center, lattice velocity) probes
with the backward Monte Carlo sampler and prints a per-probe table of
values, error bars and z-scores.

Example:
    python scripts/compare_backends.py --probes 12 --samples 4000
"""

import argparse
import sys
import time

import numpy as np

from kinetic_slab.collision import KernelTable, VelocityGrid, sqrt_maxwellian
from kinetic_slab.duhamel_mc import EstimatorConfig, estimate_f
from kinetic_slab.dvm_solver import RunConfig, run
from kinetic_slab.geometry import Domain


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=float, default=0.45,
                    help="axial half-width and transverse height")
    ap.add_argument("--t", type=float, default=0.25, help="evaluation time")
    ap.add_argument("--n-v", type=int, default=12)
    ap.add_argument("--nx2", type=int, default=24,
                    help="transverse mesh cells for the reference")
    ap.add_argument("--probes", type=int, default=12)
    ap.add_argument("--samples", type=int, default=4000)
    ap.add_argument("--depth", type=int, default=20)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    grid = VelocityGrid.midpoint(n_per_axis=args.n_v, v_max=6.0)
    table = KernelTable.build(grid)
    dom = Domain.rect(L=args.size, H=args.size)
    H = args.size

    def f0(x, v):
        return np.cos(np.pi * x[1] / H) * sqrt_maxwellian(v)

    print("building mesh reference ...", flush=True)
    ref = run(RunConfig(L=args.size, H=H, nx1=8, nx2=args.nx2, n_v=args.n_v,
                        t_end=args.t, ic="cos-chi0", ic_amplitude=1.0,
                        scheme="minmod", output_every=1000),
              grid=grid, table=table)

    est = EstimatorConfig(domain=dom, depth_max=args.depth,
                          samples=args.samples, collisions=True,
                          source=False, table=table, grid=grid, alpha=1.0)
    rng = np.random.default_rng(args.seed)
    speeds = np.linalg.norm(grid.nodes, axis=1)
    candidates = np.flatnonzero(speeds < 4.0)

    print(f"{'x2':>7} {'v':>20} {'mesh':>11} {'sampled':>11} "
          f"{'stderr':>9} {'z':>6}")
    start = time.perf_counter()
    hits = 0
    for k in range(args.probes):
        i2 = int(rng.integers(2, args.nx2 - 2))
        jv = int(rng.choice(candidates))
        x = np.array([ref.mesh.x1_centers[3], ref.mesh.x2_centers[i2]])
        v = grid.nodes[jv]
        pe = estimate_f(args.t, x, v, f0, None, est, args.seed * 1000 + k)
        mesh_val = ref.state.f[jv, 3, i2]
        z = (pe.mean - mesh_val) / pe.stderr
        hits += abs(z) <= 3.0
        vtxt = "({:+.1f},{:+.1f},{:+.1f})".format(*v)
        print(f"{x[1]:7.3f} {vtxt:>20} {mesh_val:11.4e} {pe.mean:11.4e} "
              f"{pe.stderr:9.1e} {z:6.2f}")
    elapsed = time.perf_counter() - start
    print(f"{hits}/{args.probes} probes within 3 sigma "
          f"({elapsed:.1f} s of sampling)")
    return 0 if hits >= int(np.ceil(0.95 * args.probes)) else 1


if __name__ == "__main__":
    sys.exit(main())
