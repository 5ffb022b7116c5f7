"""Command line: benchmarks, sampler checks, the c table and ES training.

Every subcommand writes CSV to ``--out`` (standard output by default).
Exit status is 0 on success, 2 on usage errors and 1 on runtime failures.
"""

import argparse
import os
import sys

from . import analysis, bench
from . import distributions as dist
from .errors import ConfigError, SlicegradError
from .estimators import EstimatorKind
from .streams import substream

SEED_ENV = "SLICEGRAD_SEED"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return vals


def _estimators(text):
    try:
        return [EstimatorKind.parse(t) for t in text.split(",") if t.strip()]
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _common(p):
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--seed", type=_seed, help=f"RNG seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")


def _bench_args(p, default_estimators, default_center):
    _common(p)
    p.add_argument("--dims", type=_int_list, default=[1, 10, 100, 1000])
    p.add_argument("--noise", type=float, default=1.0, help="noise std on each evaluation")
    p.add_argument("--estimators", type=_estimators, default=_estimators(default_estimators))
    p.add_argument("--center", type=float, default=default_center,
                   help="quadratic center a = center * ones")
    p.add_argument("--samples", type=int, default=100, help="samples per gradient estimate")
    p.add_argument("--repeats", type=int, help="estimates per (estimator, dim)")
    p.add_argument("--bootstrap", type=int, default=1000, help="bootstrap resamples")


def build_parser():
    parser = _Parser(prog="slicegrad", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("bench-quad", help="variance of mu-gradient estimators on the quadratic")
    _bench_args(p, ",".join(bench.DEFAULT_ESTIMATORS), 1.0)
    p = sub.add_parser("bench-sigma", help="variance of sigma-gradient estimators")
    _bench_args(p, ",".join(bench.SIGMA_ESTIMATORS), 1.0)
    p = sub.add_parser("bench-alt", help="variance including LRG, DRG and DLRG")
    _bench_args(p, ",".join(bench.ALT_ESTIMATORS), 1.0)

    p = sub.add_parser("dist-check", help="histogram of direct samples against the pdf")
    _common(p)
    p.add_argument("--dist", required=True, choices=[t.value for t in dist.DistTag])
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--c", type=float, default=0.5, help="truncratio offset")
    p.add_argument("--alpha", type=float, default=1.5, help="symbeta / betaslice shape")
    p.add_argument("--k", type=float, help="beta stretch (default: match --sigma) or chi dof")
    p.add_argument("--n", type=int, default=100000)
    p.add_argument("--bins", type=int, default=100)

    p = sub.add_parser("c-table", help="guideline table for the truncated-ratio offset")
    _common(p)

    p = sub.add_parser("es-train", help="evolution strategies training log")
    _common(p)
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--objective", choices=["cartpole", "sphere"], default=None)
    p.add_argument("--estimator")
    p.add_argument("--popsize", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=["sgd", "adam"])
    p.add_argument("--iterations", type=int)
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--eval-samples", type=int, dest="eval_samples")
    p.add_argument("--normalize", dest="reward_normalize", action="store_const", const="true")
    p.add_argument("--no-normalize", dest="reward_normalize", action="store_const", const="false")
    p.add_argument("--horizon", type=int)
    p.add_argument("--dim", type=int, help="sphere dimension (default 71)")
    p.add_argument("--noise", type=float, help="sphere evaluation noise std")
    p.add_argument("--timing", action="store_const", const="true",
                   help="record wall-clock ms (output is then not reproducible)")
    return parser


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return _seed(env)
    except argparse.ArgumentTypeError as exc:
        raise _UsageError(f"{SEED_ENV}: {exc}")


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _cmd_bench(args, seed, runner):
    cfg = bench.BenchConfig(dims=args.dims, samples_per_estimate=args.samples,
                            repeats=args.repeats, estimators=args.estimators, seed=seed,
                            bootstrap_resamples=args.bootstrap, threads=args.threads)
    family = lambda d: bench.QuadraticProblem.standard(d, args.noise, args.center)
    _emit(bench.write_variance_csv(runner(cfg, family)), args.out)


def _dist_spec(args):
    tag = dist.DistTag(args.dist)
    if tag is dist.DistTag.Chi:
        return dist.chi(int(args.k) if args.k is not None else 3)
    if tag in (dist.DistTag.SymBeta, dist.DistTag.BetaSlice):
        if args.k is not None:
            params = dist.SymBetaParams(args.alpha, args.mu, args.k)
        else:
            params = dist.SymBetaParams.matched(args.alpha, args.mu, args.sigma)
        return dist.DistSpec(tag, params)
    if tag is dist.DistTag.TruncRatio:
        return dist.trunc_ratio(args.c, args.mu, args.sigma)
    return dist.DistSpec(tag, dist.GaussianParams(args.mu, args.sigma))


def _cmd_dist(args, seed):
    spec = _dist_spec(args)
    rng = substream(seed, "dist-check", args.dist)
    rep = bench.dist_conformance_report(spec, args.n, args.bins, rng)
    _emit(bench.write_conformance_csv(rep), args.out)
    print(f"chi-square {rep.chi_square:.3f} on {rep.dof} dof, p = {rep.p_value:.4g}",
          file=sys.stderr)


def _cmd_ctable(args):
    rows = [(r.c, r.dim_minus_one, r.accuracy_t, int(round(r.dim_minus_one)))
            for r in analysis.guideline_table()]
    _emit(bench.write_csv(rows, ("c", "dim_minus_one", "accuracy_t", "dim_minus_one_rounded"),
                       None), args.out)


def _read_config(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise _UsageError(f"{path}:{n}: expected key=value")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


_ES_FLAGS = ("estimator", "popsize", "sigma", "lr", "optimizer", "iterations", "eval_every",
             "eval_samples", "reward_normalize", "timing")
_TASK_FLAGS = ("objective", "horizon", "dim", "noise")


def _cmd_es(args, seed):
    from . import es

    values = _read_config(args.config) if args.config else {}
    for name in _ES_FLAGS + _TASK_FLAGS:
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    if args.seed is not None or "seed" not in values:
        values["seed"] = seed
    task = {name: values.pop(name) for name in _TASK_FLAGS if name in values}
    cfg = es.ESConfig.from_mapping(values)
    objective = task.get("objective", "cartpole")
    if objective == "cartpole":
        obj = es.CartPoleObjective(horizon=int(task.get("horizon", es.HORIZON)))
    elif objective == "sphere":
        obj = es.SphereObjective(int(task.get("dim", 71)), center=0.5,
                                 noise_sigma=float(task.get("noise", 1.0)))
    else:
        raise _UsageError(f"unknown objective {objective!r}")
    _emit(es.es_train(cfg, obj).to_csv(), args.out)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        seed = _resolve_seed(args)
        if getattr(args, "threads", 1) < 1:
            raise _UsageError("--threads must be positive")
        if args.command == "bench-quad":
            _cmd_bench(args, seed, bench.run_variance_bench)
        elif args.command == "bench-sigma":
            _cmd_bench(args, seed, bench.run_sigma_bench)
        elif args.command == "bench-alt":
            _cmd_bench(args, seed, bench.run_alternatives_bench)
        elif args.command == "dist-check":
            _cmd_dist(args, seed)
        elif args.command == "c-table":
            _cmd_ctable(args)
        elif args.command == "es-train":
            _cmd_es(args, seed)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"slicegrad: configuration error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (SlicegradError, ArithmeticError, ValueError, OSError) as exc:
        print(f"slicegrad: {exc}", file=sys.stderr)
        return 1
    return 0
