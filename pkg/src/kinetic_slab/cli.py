"""Command-line front end.

Five subcommands: ``simulate-dvm``, ``sample-duhamel``, ``trace-cycles``,
``kernel-table`` and ``verify``.  Every command reads the same flat
key-value configuration format, derives a 12-digit hash from the canonical
serialization, and writes its outputs into a run directory named by that
hash with hash-prefixed file names, next to a JSON manifest.

Exit codes: 0 success, 1 configuration/usage problems, 2 runtime failures,
3 verification-battery failures.

Numpy is imported lazily so that ``KINETIC_SLAB_THREADS`` can pin the BLAS
thread pools before the first numerical import.  All primary outputs
(CSV/JSONL) are written with full-precision ``repr`` floats and are
byte-identical for a fixed (config, seed) at any thread count, because
every stochastic path uses counter-based per-sample streams and all
reductions are sequential.
"""

import argparse
import json
import os
import struct
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__

_COMMANDS = ("simulate-dvm", "sample-duhamel", "trace-cycles",
             "kernel-table", "verify")

MAGIC = b"KSLB"
DUMP_VERSION = 1


class UnknownSubcommand(ValueError):
    pass


def _apply_thread_env():
    n = os.environ.get("KINETIC_SLAB_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, n)


@dataclass
class ExperimentManifest:
    config_hash: str
    tool_version: str
    seed: int
    started: str
    finished: str
    tolerances: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def validate(self):
        for name in self.outputs:
            if self.config_hash not in name:
                raise ValueError(
                    f"output {name!r} lacks the config hash prefix")


def _now():
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())


def _run_dir(out_dir, run_hash):
    rd = Path(out_dir) / run_hash
    rd.mkdir(parents=True, exist_ok=True)
    return rd


def _fmt(x):
    if isinstance(x, float):
        return repr(float(x))
    return str(int(x)) if hasattr(x, "item") else str(x)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_manifest(run_dir, run_hash, seed, outputs, started,
                    tolerances=None):
    man = ExperimentManifest(config_hash=run_hash, tool_version=__version__,
                             seed=seed, started=started, finished=_now(),
                             tolerances=tolerances or {}, outputs=outputs)
    man.validate()
    path = run_dir / f"{run_hash}_manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(man), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_field_dump(path, f, dims):
    """Versioned binary dump: magic, version, dims, row-major float64."""
    import numpy as np

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", DUMP_VERSION, len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes())


def read_field_dump(path):
    import numpy as np

    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path} is not a field dump")
        version, rank = struct.unpack("<II", fh.read(8))
        dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        payload = np.frombuffer(fh.read(), dtype="<f8")
    return payload.reshape(dims), version


# ------------------------------------------------------------- subcommands


def _cmd_simulate_dvm(args):
    from .config import config_hash, parse_config

    cfg = parse_config(args.config)
    run_hash = config_hash(cfg)
    rd = _run_dir(args.out_dir, run_hash)
    started = _now()

    from . import dvm_solver

    out = dvm_solver.run(cfg)
    csv_path = rd / f"{run_hash}_diagnostics.csv"
    _write_csv(csv_path, out.columns, out.series.tolist())
    outputs = [csv_path.name]
    if args.dump_final:
        dims = (cfg.n_v, cfg.n_v, cfg.n_v, cfg.nx1, cfg.nx2)
        bin_path = rd / f"{run_hash}_final_state.bin"
        write_field_dump(bin_path, out.state.f.reshape(dims), dims)
        outputs.append(bin_path.name)
    _write_manifest(rd, run_hash, cfg.seed, outputs, started,
                    tolerances={"mass_drift_rel": 1e-9})
    print(csv_path)
    return 0


def _mc_initial_data(cfg):
    """Continuum initial data matching the solver's lattice IC."""
    import numpy as np

    from .collision import sqrt_maxwellian

    if cfg.ic == "zero":
        return None
    amp, H = cfg.ic_amplitude, cfg.H
    if cfg.kind != "rect":
        raise ValueError("profile initial data is defined on the "
                         "rectangular analog; use ic.kind = zero")
    if cfg.ic == "cos-chi0":
        return lambda x, v: (amp * np.cos(np.pi * x[1] / H)
                             * sqrt_maxwellian(v))
    if cfg.ic == "cos-chi4":
        return lambda x, v: (amp * np.cos(np.pi * x[1] / H)
                             * (v @ v - 3.0) / np.sqrt(6.0)
                             * sqrt_maxwellian(v))
    raise ValueError(f"no continuum form for ic.kind = {cfg.ic!r}")


def _cmd_sample_duhamel(args):
    import numpy as np

    from .config import config_hash, domain_of, parse_config
    from .duhamel_mc import EstimatorConfig, field_scan

    cfg = parse_config(args.config)
    if cfg.alpha_specular != 0.0:
        raise ValueError("the stochastic estimator treats the caps as "
                         "purely specular; set wall.alpha_specular = 0")
    run_hash = config_hash(cfg)
    rd = _run_dir(args.out_dir, run_hash)
    started = _now()
    dom = domain_of(cfg)

    probes = np.loadtxt(args.probes, delimiter=",", skiprows=1, ndmin=2)
    if probes.shape[1] != 6:
        raise ValueError("probe file needs columns x1,x2,x3,v1,v2,v3")

    grid = table = None
    if not args.collisionless:
        from .collision import KernelTable, VelocityGrid

        grid = VelocityGrid.midpoint(n_per_axis=cfg.n_v, v_max=cfg.v_max)
        table = KernelTable.build(grid, theta=cfg.theta)
    # theta stays 0: the CSV reports the plain solution value at each
    # probe, not the e^{theta |v|^2}-weighted one
    est = EstimatorConfig(domain=dom, depth_max=args.depth,
                          samples=args.samples,
                          collisions=not args.collisionless, source=False,
                          table=table, grid=grid, alpha=cfg.alpha_diffuse)
    f0 = _mc_initial_data(cfg)
    seed = cfg.seed if args.seed is None else args.seed
    pairs = [(row[:dom.ndim], row[3:6]) for row in probes]
    results = field_scan(args.t, pairs, est, seed, f0=f0, g=None)

    rows = [tuple(p) + (r.mean, r.stderr, r.n_effective)
            for p, r in zip(probes, results)]
    csv_path = rd / f"{run_hash}_duhamel.csv"
    _write_csv(csv_path, ("x1", "x2", "x3", "v1", "v2", "v3",
                          "mean", "stderr", "n_effective"), rows)
    _write_manifest(rd, run_hash, seed, [csv_path.name], started,
                    tolerances={"mc_depth_max": args.depth})
    print(csv_path)
    return 0


def _cmd_trace_cycles(args):
    import numpy as np

    from .config import config_hash, domain_of, parse_config
    from .cycles import as_jsonable, trace_cycles

    cfg = parse_config(args.config)
    run_hash = config_hash(cfg)
    rd = _run_dir(args.out_dir, run_hash)
    started = _now()
    dom = domain_of(cfg)
    base = cfg.seed if args.seed is None else args.seed

    path = rd / f"{run_hash}_cycles.jsonl"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(args.samples):
            seed_i = base + i
            rng = np.random.default_rng(seed_i)
            x1 = rng.uniform(-dom.L, dom.L)
            if dom.kind == "cylinder3d":
                r = dom.R * np.sqrt(rng.random())
                phi = 2.0 * np.pi * rng.random()
                x0 = np.array([x1, r * np.cos(phi), r * np.sin(phi)])
            else:
                x0 = np.array([x1, rng.uniform(0.0, dom.H)])
            v0 = rng.standard_normal(3)
            rec = trace_cycles(dom, x0, v0, args.t0, rng, k_max=args.k_max)
            fh.write(json.dumps(as_jsonable(rec, seed=seed_i)) + "\n")
    _write_manifest(rd, run_hash, base, [path.name], started)
    print(path)
    return 0


def _cmd_kernel_table(args):
    import numpy as np

    from .collision import VelocityGrid, collision_frequency, ktheta_integral
    from .config import config_hash, parse_config

    cfg = parse_config(args.config)
    run_hash = config_hash(cfg)
    rd = _run_dir(args.out_dir, run_hash)
    started = _now()
    grid = VelocityGrid.midpoint(n_per_axis=cfg.n_v, v_max=cfg.v_max)

    radii = np.linspace(0.0, cfg.v_max, args.n_samples)
    nus, iks = [], []
    for r in radii:
        v = np.array([r, 0.0, 0.0])
        nus.append(float(collision_frequency(v)))
        iks.append(float(ktheta_integral(v, theta=cfg.theta, grid=grid)))
    # (1+|v|) * integral relative to its sup over the sweep: the weighted
    # kernel integral obeys a 1/(1+|v|) envelope, so this stays in (0, 1]
    env = [(1.0 + r) * ik for r, ik in zip(radii, iks)]
    sup = max(env)
    rows = [
        (float(r), 0.0, 0.0, nu, ik, e / sup)
        for r, nu, ik, e in zip(radii, nus, iks, env)
    ]
    csv_path = rd / f"{run_hash}_kernel_table.csv"
    _write_csv(csv_path, ("vx", "vy", "vz", "nu", "int_ktheta",
                          "bound_ratio"), rows)
    _write_manifest(rd, run_hash, cfg.seed, [csv_path.name], started)
    print(csv_path)
    return 0


def _cmd_verify(args):
    import hashlib

    from .verify import run_battery

    label = "quick" if args.quick else "full"
    run_hash = hashlib.sha256(
        f"verify {label} {__version__}".encode()).hexdigest()[:12]
    rd = _run_dir(args.out_dir, run_hash)
    started = _now()
    results = run_battery(quick=args.quick)
    rows = [(r.check_id, r.value, r.bound, r.status) for r in results]
    csv_path = rd / f"{run_hash}_checks.csv"
    _write_csv(csv_path, ("check_id", "value", "bound", "status"), rows)
    _write_manifest(rd, run_hash, 0, [csv_path.name], started)
    width = max(len(r.check_id) for r in results)
    for r in results:
        print(f"{r.check_id:<{width}}  {r.value:>12.5g}  "
              f"{r.bound:>12.5g}  {r.status}")
    n_fail = sum(r.status != "pass" for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed "
          f"({csv_path})")
    return 3 if n_fail else 0


# ---------------------------------------------------------------- dispatch


def _build_parser():
    p = argparse.ArgumentParser(
        prog="kinetic-slab",
        description="Kinetic slab: deterministic and stochastic solvers "
                    "for the linearized Boltzmann equation with mixed "
                    "specular/diffuse walls.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="run config file")
        sp.add_argument("--out-dir", default="runs",
                        help="parent of the hash-named run directory")

    sp = sub.add_parser("simulate-dvm",
                        help="deterministic lattice run; diagnostics CSV")
    common(sp)
    sp.add_argument("--dump-final", action="store_true",
                    help="also write the final state as a binary dump")
    sp.set_defaults(func=_cmd_simulate_dvm)

    sp = sub.add_parser("sample-duhamel",
                        help="Monte Carlo point estimates at probes")
    common(sp)
    sp.add_argument("--t", type=float, required=True, help="evaluation time")
    sp.add_argument("--probes", required=True,
                    help="CSV of probes: x1,x2,x3,v1,v2,v3")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--depth", type=int, default=20)
    sp.add_argument("--seed", type=int, default=None,
                    help="override run.seed")
    sp.add_argument("--collisionless", action="store_true",
                    help="transport + walls only, no collision operator")
    sp.set_defaults(func=_cmd_sample_duhamel)

    sp = sub.add_parser("trace-cycles",
                        help="backward trajectory records as JSONL")
    common(sp)
    sp.add_argument("--t0", type=float, required=True, help="time horizon")
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--k-max", type=int, default=100)
    sp.set_defaults(func=_cmd_trace_cycles)

    sp = sub.add_parser("kernel-table",
                        help="collision frequency and kernel-bound sweep")
    common(sp)
    sp.add_argument("--n-samples", type=int, default=33)
    sp.set_defaults(func=_cmd_kernel_table)

    sp = sub.add_parser("verify", help="property battery; exit 3 on failure")
    sp.add_argument("--quick", action="store_true",
                    help="smaller sample sizes, same checks")
    sp.add_argument("--out-dir", default="runs")
    sp.set_defaults(func=_cmd_verify)
    return p


def main(argv=None):
    _apply_thread_env()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def dispatch(subcommand, args=()):
    """Programmatic entry point; returns the exit code."""
    try:
        if subcommand not in _COMMANDS:
            raise UnknownSubcommand(
                f"unknown subcommand {subcommand!r}; "
                f"choose from {', '.join(_COMMANDS)}")
    except UnknownSubcommand as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return main([subcommand, *list(args)])


if __name__ == "__main__":
    sys.exit(main())
