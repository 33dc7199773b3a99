"""Command line entry points: run, leja, solve, oracle."""

import argparse
import logging
import os
import sys

import numpy as np

from .harness import ExperimentConfig, legendre_coefficient_norms, run_experiment
from .interp import FLOAT_FMT
from .leja import LejaSequence
from .vfp import initial_condition, solve_to_time


def _cmd_leja(args):
    seq = LejaSequence()
    seq.extend(args.depth)
    print("k,beta_k")
    for k in range(args.depth):
        print(f"{k},{FLOAT_FMT % seq.points[k]}")


def _cmd_run(args):
    config = ExperimentConfig.from_file(args.config)
    if args.out_dir:
        config.out_dir = args.out_dir
    out = run_experiment(config)
    print(f"wrote {out}")


def _read_z(path, dim):
    raw = np.loadtxt(path, delimiter=",", ndmin=1).ravel()
    z = np.zeros(dim)
    z[: min(dim, raw.size)] = raw[:dim]
    return z


def _cmd_solve(args):
    config = ExperimentConfig.from_file(args.config)
    grid = config.build_grid()
    spec = config.build_field()
    z = _read_z(args.z_file, spec.dim)
    f = solve_to_time(grid, initial_condition(grid, spec, z), spec, z,
                      config.t_final, krylov_rtol=config.krylov_rtol)
    os.makedirs(args.out, exist_ok=True)
    bin_path = os.path.join(args.out, "f.bin")
    with open(bin_path, "wb") as fh:
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    with open(os.path.join(args.out, "f.csv"), "w") as fh:
        fh.write("key,value\n")
        for key, value in (("nx", grid.nx), ("nv", grid.nv),
                           ("dx", grid.dx), ("dv", grid.dv),
                           ("eps", grid.eps), ("dt", grid.dt),
                           ("t_final", config.t_final),
                           ("family", spec.family), ("dim", spec.dim),
                           ("time_dependent", spec.time_dependent),
                           ("layout", "row-major float64 little-endian")):
            fh.write(f"{key},{FLOAT_FMT % value if isinstance(value, float) else value}\n")
    print(f"wrote {bin_path}")


def _cmd_oracle(args):
    config = ExperimentConfig.from_file(args.config)
    if config.dim > 3:
        raise SystemExit("oracle needs field.dim <= 3 (tensor quadrature)")
    model = config.build_model()

    def model_fn(z):
        return model.solve(z)

    def vector_norm(vec):
        return model.norm(vec, "l2")

    print("n,best_n_error")
    norms = legendre_coefficient_norms(model_fn, config.dim, args.degree, vector_norm)
    for n in range(args.n_max + 1):
        tail = float(np.sqrt(np.sum(norms[n:] ** 2)))
        print(f"{n},{FLOAT_FMT % tail}")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="kinetic-uq",
                                     description="Adaptive sparse interpolation "
                                                 "for parametric kinetic solves")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("leja", help="print the Leja sequence as CSV")
    p.add_argument("--depth", type=int, required=True)
    p.set_defaults(fn=_cmd_leja)

    p = sub.add_parser("run", help="run a configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default="")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("solve", help="single deterministic solve at a parameter point")
    p.add_argument("--z-file", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="solve_out")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("oracle", help="best-N Legendre truncation benchmark (dim <= 3)")
    p.add_argument("--config", required=True)
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--degree", type=int, default=6)
    p.set_defaults(fn=_cmd_oracle)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
