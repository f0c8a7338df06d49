"""Command line entry point: ``lcrip <subcommand> [options]``.

Exit codes: 0 success, 1 computational error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import metrics, xp
from .sampler import DistributionSpec, InvalidSpecError
from .selftest import run_selftest

SUBCOMMANDS = ("run", "sample", "delta", "gamma", "sigma", "tails", "recover", "bounds", "selftest")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _floats(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str):
    return [int(v) for v in text.split(",") if v.strip()]


def _common(p):
    p.add_argument("--config", help="experiment config file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--workers", type=int, help="worker threads (never changes results)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--trials", type=int)


def _spec_args(p):
    p.add_argument("--kind", default="gaussian", help="gaussian, laplace, cube, ball, l1ball")
    p.add_argument("--N", type=int, help="ambient dimension")


def _sizes(p, *names):
    for name in names:
        p.add_argument(f"--{name}", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lcrip", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run an experiment from a config file")
    _common(p)

    p = sub.add_parser("sample", help="sample a matrix with independent isotropic rows")
    _common(p)
    _spec_args(p)
    _sizes(p, "n")

    p = sub.add_parser("delta", help="RIP constant delta_m of a (normalised) matrix")
    _common(p)
    _sizes(p, "n", "N", "m")
    p.add_argument("--matrix", help="dense CSV matrix (already normalised)")
    p.add_argument("--kind", default="gaussian")
    p.add_argument("--method", default="exact", choices=("exact", "support_sampled"))

    p = sub.add_parser("gamma", help="Gamma_{k,m} with a certificate")
    _common(p)
    _spec_args(p)
    _sizes(p, "n", "k", "m")
    p.add_argument("--matrix", help="dense CSV matrix")
    p.add_argument("--method", default="exact", choices=("exact", "heuristic"))
    p.add_argument("--restarts", type=int, default=20)

    p = sub.add_parser("sigma", help="sigma_X(p) profile")
    _common(p)
    _spec_args(p)
    p.add_argument("--p", type=_floats, help="comma-separated p grid")
    p.add_argument("--search", default="canonical_plus_random", choices=("canonical_plus_random", "sphere_ascent"))

    p = sub.add_parser("tails", help="tail curve of a projection / order / Gamma statistic")
    _common(p)
    _spec_args(p)
    _sizes(p, "n", "k", "m", "ell")
    p.add_argument("--statistic", default="projection_sup", choices=xp.STATISTICS)
    p.add_argument("--t", type=_floats, help="comma-separated t grid")

    p = sub.add_parser("recover", help="basis pursuit recovery experiment")
    _common(p)
    _spec_args(p)
    _sizes(p, "n")
    p.add_argument("--m", type=_ints, help="comma-separated sparsity levels")

    p = sub.add_parser("bounds", help="evaluate a closed-form bound")
    _common(p)
    p.add_argument("--id", required=True, dest="bound_id")
    for name in ("n", "N", "m", "k", "ell", "T"):
        p.add_argument(f"--{name}", type=int)
    for name in ("t", "p", "theta", "B", "b", "C", "c"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--x", type=_floats, help="comma-separated weight vector")
    p.add_argument("--sigma-mode", default=None, choices=("profile", "paper_upper"))
    p.add_argument("--kind", default=None, help="distribution for a sigma profile")

    sub.add_parser("selftest", help="run the built-in exact checks")
    return parser


def _pick(args, *names):
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def _config_from_args(args) -> xp.ExperimentConfig:
    cmd = args.command
    if args.config:
        cfg = xp.load_config(args.config)
    else:
        spec = None
        if getattr(args, "kind", None) and getattr(args, "N", None):
            spec = DistributionSpec(args.kind, args.N)
        if cmd == "gamma":
            opts = {"method": args.method, "restarts": args.restarts}
            if args.matrix:
                opts["matrix"] = args.matrix
            cfg = xp.ExperimentConfig("gamma", spec, _pick(args, "n", "k", "m"), options=opts)
        elif cmd == "sigma":
            grids = {"p": args.p} if args.p else {}
            cfg = xp.ExperimentConfig("sigma", spec, grids=grids, options={"search": args.search})
        elif cmd == "tails":
            grids = {"t": args.t} if args.t else {}
            cfg = xp.ExperimentConfig("tails", spec, _pick(args, "n", "k", "m", "ell"), grids,
                                      options={"statistic": args.statistic})
        elif cmd == "recover":
            opts = {"m_list": args.m} if args.m else {}
            cfg = xp.ExperimentConfig("recovery", spec, _pick(args, "n"), options=opts)
        elif cmd == "bounds":
            opts = {"bound_id": args.bound_id}
            opts.update(_pick(args, "t", "p", "x"))
            if args.sigma_mode:
                opts["sigma_mode"] = args.sigma_mode
            sizes = _pick(args, "n", "N", "m", "k", "ell", "T")
            if args.kind and args.N:
                spec = DistributionSpec(args.kind, args.N)
            else:
                spec = None
            cfg = xp.ExperimentConfig("bounds", spec, sizes, constants=_pick(args, "theta", "B", "b", "C", "c"),
                                      options=opts)
        else:
            raise xp.ConfigError("config", f"'{cmd}' needs --config")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.out = args.out
    if args.trials is not None:
        cfg.trials = args.trials
    return cfg


def _sample(args) -> int:
    if not args.N or not args.n:
        raise xp.ConfigError("sizes", "sample needs --N and --n")
    from .sampler import RandomStream, sample_matrix

    A = sample_matrix(DistributionSpec(args.kind, args.N), args.n, RandomStream(args.seed or 0), args.workers or 1)
    text = "".join(",".join(format(float(v), ".17g") for v in row) + "\n" for row in A)
    if args.out:
        from pathlib import Path

        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "matrix.csv").write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _delta(args) -> int:
    if args.matrix:
        A = metrics.read_matrix_csv(args.matrix)
        if args.m is None:
            raise xp.ConfigError("m", "delta needs --m")
        rep = metrics.delta_m_exact(A, args.m)
        print(repr(rep.value))
        print(json.dumps(rep.to_dict(), sort_keys=True))
        return 0
    if not (args.N and args.n and args.m):
        raise xp.ConfigError("sizes", "delta needs --matrix or --n/--N/--m")
    cfg = xp.ExperimentConfig("rip", DistributionSpec(args.kind, args.N), {"m": args.m},
                              options={"n_list": [args.n], "method": args.method})
    cfg.seed = args.seed or 0
    cfg.workers = args.workers or 1
    cfg.out = args.out
    if args.trials is not None:
        cfg.trials = args.trials
    res = xp.run(cfg)
    print(json.dumps(res["summary"], sort_keys=True))
    return 0


def _report(cmd, res) -> None:
    s = res["summary"]
    if cmd == "bounds":
        print(repr(s["value"]))
        print(json.dumps(s, sort_keys=True))
    elif cmd == "gamma" and s.get("certificate"):
        print(repr(s["certificate"]["value"]))
        print(json.dumps(s["certificate"], sort_keys=True))
    else:
        print(json.dumps(s, sort_keys=True))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "selftest":
        return 1 if run_selftest() else 0
    try:
        if args.command == "sample" and not args.config:
            return _sample(args)
        if args.command == "delta" and not args.config:
            return _delta(args)
        cfg = _config_from_args(args)
        res = xp.run(cfg)
    except (xp.ConfigError, InvalidSpecError) as exc:
        print(f"lcrip: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"lcrip: error: {exc}", file=sys.stderr)
        return 1
    _report(args.command, res)
    return 0


if __name__ == "__main__":
    sys.exit(main())
