"""Command-line interface: ``plateau-ns <subcommand> [flags]``.

Data goes to standard output or ``--out`` files; diagnostics and errors go
to standard error. Every subcommand is fully determined by its flags.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import figures
from .compression import CompressionMethod, DEFAULT_METHOD, evaluate
from .ensemble import EnsembleSpec, ensemble_table, run_ensemble
from .run_record import ChainFormatError, StructureError, canonical_order, deserialize, serialize
from .samplers import (DEFAULT_MAX_REJECTIONS, CapabilityError, ContourExhausted,
                       SamplerConfig, StopCondition, sample_with_trace)
from .testbeds import (ConvergenceError, WeddingCakeModel,
                       base_plateau_bias, model_from_id, peak_plateau_deficit,
                       quadrature_evidence_oracle, wedding_cake_log_Z)
from .uncertainty import classic_error, shannon_entropy, simulate_logZ

log = logging.getLogger("plateau_ns")

# model flag -> identifier key
_PARAM_FLAGS = {"mu": "mu", "sigma": "sigma", "D": "D", "alpha": "alpha", "f": "f",
                "s": "s", "cap": "cap", "L_P": "L_P", "log_c": "log_c"}


class CLIError(Exception):
    pass


def _add_model_flags(p):
    p.add_argument("--model", default="gauss",
                   help="model name (gauss, plateau-gauss, wedding-cake, scenario-base, "
                        "scenario-peak, constant) or a full identifier name:key=value,...")
    g = p.add_argument_group("model parameters")
    g.add_argument("--mu", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--D", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--f", type=float)
    g.add_argument("--s", type=float)
    g.add_argument("--cap", type=float, help="log-likelihood of the peak plateau")
    g.add_argument("--L-P", dest="L_P", type=float, help="plateau level of plateau-gauss")
    g.add_argument("--log-c", dest="log_c", type=float)


def model_id_from_args(args) -> str:
    given = {key: getattr(args, flag) for flag, key in _PARAM_FLAGS.items()
             if getattr(args, flag, None) is not None}
    if ":" in args.model:
        if given:
            raise CLIError("give parameters either in the identifier or as flags, not both")
        return args.model
    if not given:
        return args.model
    body = ",".join(f"{k}={v!r}" for k, v in given.items())
    return f"{args.model}:{body}"


def _build_model(args):
    try:
        return model_from_id(model_id_from_args(args))
    except ValueError as exc:
        raise CLIError(str(exc)) from None


def _stop(args):
    if args.stop == "remainder":
        return StopCondition.remainder_fraction(args.epsilon)
    if args.stop == "iterations":
        return StopCondition.fixed_iterations(args.iterations)
    return StopCondition.all_live_equal()


def _add_run_flags(p):
    p.add_argument("--n-live", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=[m.value for m in CompressionMethod],
                   default=DEFAULT_METHOD.value)
    p.add_argument("--n-sim", type=int, default=1000,
                   help="simulated compression sequences for the sd (0 to skip)")


def _trace_table(log_like, trace):
    rows = ["# live-count trace", "iteration,logL,n_live"]
    rows += [f"{i},{float(l)!r},{int(n)}" for i, (l, n) in enumerate(zip(log_like, trace))]
    return "\n".join(rows) + "\n"


def cmd_run(args, out):
    model = _build_model(args)
    config = SamplerConfig(args.n_live, args.seed, _stop(args), args.max_rejections)
    record, trace = sample_with_trace(model, config, args.algorithm,
                                      progress_every=args.progress_every)
    if args.out:
        serialize(record, args.out)
    # original NS reports a constant live count; modified NS the dynamic one
    nlive = "modified" if args.algorithm == "modified" else "naive"
    res = evaluate(record, args.method, nlive=nlive, n_sim=args.n_sim)
    out.write(f"model = {record.meta.likelihood_id}\n")
    out.write(f"algorithm = {args.algorithm}\n")
    out.write(f"n_points = {len(record)}\n")
    out.write(f"termination = {record.meta.termination}\n")
    out.write(res.report())
    if args.algorithm == "modified":
        out.write(_trace_table(record.log_like, trace))
    return 0


def _report_block(title, res, out):
    out.write(f"# {title}\n")
    out.write(res.report())


def cmd_resum(args, out):
    record = deserialize(args.chain, births=args.births)
    if len(record) == 0:
        raise CLIError(f"{args.chain}: chain has no dead points")
    res = evaluate(record, args.method, nlive="modified", drop_final=args.drop_final,
                   n_sim=args.n_sim, rng=args.seed)
    _report_block("modified resummation", res, out)
    if args.compare_naive:
        naive = evaluate(record, args.method, nlive="naive", drop_final=args.drop_final)
        _report_block("naive resummation", naive, out)
        out.write(f"delta_naive_minus_modified = {naive.log_Z - res.log_Z!r}\n")
    if args.weights:
        with open(args.weights, "w", newline="") as fh:
            fh.write(res.weights_table())
    return 0


def cmd_error_sim(args, out):
    record = deserialize(args.chain, births=args.births)
    if len(record) == 0:
        raise CLIError(f"{args.chain}: chain has no dead points")
    ordered, groups = canonical_order(record)
    res = evaluate(record, args.method)
    counts = res.volumes.n_live
    est = simulate_logZ(counts, ordered.log_like, args.n_sim,
                        rng=args.seed if args.seed is not None else ordered.meta.seed,
                        shrinkage=args.shrinkage,
                        groups=groups if args.block else None)
    est.H = shannon_entropy(res.weights, ordered.log_like, res.log_Z)
    out.write(f"log_Z = {res.log_Z!r}\n")
    out.write(est.report())
    out.write(f"classic_error = {classic_error(max(est.H, 0.0), ordered.meta.n_live_target)!r}\n")
    out.write(f"min_n_live = {int(np.min(counts))}\n")
    return 0


def cmd_series(args, out):
    model = _build_model(args)
    out.write(f"model = {model.likelihood_id}\n")
    if isinstance(model, WeddingCakeModel):
        p = model.params
        out.write(f"log_Z_series = {wedding_cake_log_Z(p, args.rel_tol)!r}\n")
        out.write(f"log_Z_window = {wedding_cake_log_Z(p, args.rel_tol, window=True)!r}\n")
    else:
        try:
            out.write(f"log_Z_exact = {model.exact_log_Z()!r}\n")
        except CapabilityError:
            pass
    try:
        Z = quadrature_evidence_oracle(model, args.abs_tol)
        out.write(f"log_Z_quadrature = {math.log(Z)!r}\n")
    except CapabilityError:
        pass
    name = model.likelihood_id.partition(":")[0]
    if name == "scenario-base":
        out.write(f"naive_bias = {base_plateau_bias(model.f)!r}\n")
    if name == "scenario-peak":
        Z = quadrature_evidence_oracle(model, args.abs_tol)
        deficient = math.log(Z - model.f * math.exp(model.cap))
        out.write(f"deficient_log_Z = {deficient!r}\n")
        out.write(f"final_live_deficit = "
                  f"{peak_plateau_deficit(model.f, model.cap, deficient)!r}\n")
    return 0


def cmd_figdata(args, out):
    options = {}
    if args.figure in (1, 5) and args.grid is not None:
        options["grid"] = args.grid
    if args.figure == 3:
        options["prior"] = args.prior
    if args.figure == 4:
        options.update(runs=args.runs, n_live=args.n_live, seed=args.seed,
                       jobs=args.jobs, n_sim=args.n_sim)
    if args.figure == 5:
        options.update(n_live=args.n_live, seed=args.seed)
    panels = figures.figure(args.figure, **options)
    if args.out:
        for path in figures.write_panels(panels, args.out, f"fig{args.figure}"):
            log.info("wrote %s", path)
    else:
        out.write(figures.render(panels))
    return 0


def cmd_repeat(args, out):
    model = _build_model(args)
    spec = EnsembleSpec(model.likelihood_id, args.n_live, args.algorithm, args.seed,
                        args.runs, args.epsilon, args.method, args.n_sim,
                        os.path.join(args.out, "chains") if args.out else None)
    members = run_ensemble(spec, args.jobs)
    table = ensemble_table(members)
    if args.out:
        with open(os.path.join(args.out, "ensemble.csv"), "w", newline="") as fh:
            fh.write(table)
    else:
        out.write(table)
    reported = np.array([m.log_Z if args.algorithm == "modified" else m.log_Z_naive
                         for m in members])
    delta = np.array([m.log_Z_naive - m.log_Z for m in members])
    out.write("# summary\n")
    out.write(f"runs = {len(members)}\n")
    out.write(f"mean_log_Z = {float(reported.mean())!r}\n")
    if len(members) > 1:
        out.write(f"sd_log_Z = {float(reported.std(ddof=1))!r}\n")
        out.write(f"sem_log_Z = {float(reported.std(ddof=1) / math.sqrt(len(members)))!r}\n")
    out.write(f"mean_delta_naive_minus_modified = {float(delta.mean())!r}\n")
    if args.n_sim >= 2:
        out.write(f"mean_simulated_sd = {float(np.mean([m.log_Z_sd for m in members]))!r}\n")
    try:
        out.write(f"exact_log_Z = {math.log(quadrature_evidence_oracle(model))!r}\n")
    except (CapabilityError, ConvergenceError):
        pass
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="plateau-ns", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="progress on standard error (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a sampler and report the evidence")
    _add_model_flags(p)
    _add_run_flags(p)
    p.add_argument("--algorithm", choices=["original", "modified"], default="modified")
    p.add_argument("--stop", choices=["remainder", "iterations", "all-equal"],
                   default="remainder")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--iterations", type=int, default=0)
    p.add_argument("--progress-every", type=int, default=0)
    p.add_argument("--max-rejections", type=int, default=DEFAULT_MAX_REJECTIONS,
                   help="rejected candidates allowed per constrained draw")
    p.add_argument("--out", help="chain file to write (sidecar alongside)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resum", help="resum a chain file with plateau-aware live counts")
    p.add_argument("chain")
    p.add_argument("--method", choices=[m.value for m in CompressionMethod],
                   default=DEFAULT_METHOD.value)
    p.add_argument("--births", choices=["require", "assume-prior"], default="require")
    p.add_argument("--compare-naive", action="store_true")
    p.add_argument("--drop-final", action="store_true",
                   help="discard the live points left at termination")
    p.add_argument("--n-sim", type=int, default=1000)
    p.add_argument("--seed", type=int, help="error-simulation seed (default: chain seed)")
    p.add_argument("--weights", help="write the per-point weights table here")
    p.set_defaults(func=cmd_resum)

    p = sub.add_parser("error-sim", help="simulate the evidence uncertainty of a chain")
    p.add_argument("chain")
    p.add_argument("--method", choices=[m.value for m in CompressionMethod],
                   default=DEFAULT_METHOD.value)
    p.add_argument("--births", choices=["require", "assume-prior"], default="require")
    p.add_argument("--n-sim", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--shrinkage", choices=["beta", "mean"], default="beta")
    p.add_argument("--block", action="store_true",
                   help="one Beta(n+1-q, q) factor per tie group")
    p.set_defaults(func=cmd_error_sim)

    p = sub.add_parser("series", help="analytic and quadrature evidences of a model")
    _add_model_flags(p)
    p.set_defaults(model="wedding-cake")
    p.add_argument("--rel-tol", type=float, default=1e-12)
    p.add_argument("--abs-tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("figdata", help="figure data as delimited tables")
    p.add_argument("--figure", type=int, required=True)
    p.add_argument("--grid", type=int)
    p.add_argument("--prior", choices=["flat", "logarithmic"], default="flat")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--n-live", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--n-sim", type=int, default=1000)
    p.add_argument("--out", help="directory for one CSV file per panel")
    p.set_defaults(func=cmd_figdata)

    p = sub.add_parser("repeat", help="ensemble of runs with seeds seed+k")
    _add_model_flags(p)
    _add_run_flags(p)
    p.add_argument("--algorithm", choices=["original", "modified"], default="modified")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--out", help="directory for per-member chains and ensemble.csv")
    p.set_defaults(func=cmd_repeat)
    return parser


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "figdata":
        if args.figure not in figures.FIGURES:
            err.write(f"error: unknown figure {args.figure}; choose from "
                      f"{', '.join(map(str, figures.FIGURES))}\n")
            return 2
        if args.n_live is None:
            args.n_live = 500 if args.figure == 4 else 100
    handler = logging.StreamHandler(err)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.WARNING - 10 * min(args.verbose, 2))
    if getattr(args, "progress_every", 0) == 0 and args.verbose and args.command == "run":
        args.progress_every = 1000
    try:
        return args.func(args, out)
    except ContourExhausted as exc:
        err.write(f"error: {exc} (L* = {exc.threshold!r})\n")
    except (ChainFormatError, StructureError, CLIError, CapabilityError,
            ConvergenceError, ValueError, OSError) as exc:
        err.write(f"error: {exc}\n")
    return 1


if __name__ == "__main__":
    sys.exit(main())
