"""Command-line entry point.

Exit status is 0 on success, 1 on invalid input and 2 on numerical
failure (including a failed ``verify`` run).
"""

import argparse
import sys

import numpy as np

from ._errors import NumericalError, ValidationError
from .adversary import AdversaryConfig, monte_carlo_levels
from .diagnostics import (
    GaussianConditionalEvaluator,
    default_epsilon_grid,
    delta_theta,
    exceedance_from_samples,
    inflation_bound,
    lemma2_bound,
    lemma4_bound,
    observed_kl,
    realized_delta,
)
from .discrete import run_oracle_suite
from .filter import select
from .gaussian import GaussianModel, PrecisionEstimate, build_mechanism, gaussian_mechanism, sample_knockoffs
from .io import load_config, read_json, parse_config, read_matrix_csv, read_vector_csv, write_matrix_csv, write_report_json
from .simulator import ScenarioConfig, resolve_threads, rng_for, simulate
from .statistics import AugmentedDesign, compute_w


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _common():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default="-", help="output path ('-' for stdout)")
    common.add_argument("--seed", type=int, help="RNG seed (required by randomized commands)")
    common.add_argument("--q", type=float, help="target FDR level")
    common.add_argument("--variant", choices=["knockoff", "knockoff+"], help="filter variant")
    common.add_argument("--statistic", choices=["marginal", "lcd"], help="feature statistic")
    common.add_argument("--threads", type=int, help="worker count (default: $KNOCKOFF_THREADS or 1)")
    return common


def build_parser():
    common = _common()
    parser = _Parser(prog="robust-knockoffs", description="Approximate model-X knockoffs toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", parents=[common], help="draw Gaussian knockoffs for X")
    p.add_argument("--x", required=True, help="feature matrix CSV")
    p.add_argument("--theta-tilde", required=True, help="estimated precision matrix CSV")

    p = sub.add_parser("filter", parents=[common], help="compute W and run the knockoff filter")
    p.add_argument("--x", required=True)
    p.add_argument("--xt", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--lambda-fraction", type=float, default=0.1)

    sub.add_parser("simulate", parents=[common], help="Monte Carlo FDR / power study")

    p = sub.add_parser("diagnose", parents=[common], help="observed KL and inflation bounds")
    p.add_argument("--x", required=True)
    p.add_argument("--xt", required=True)
    p.add_argument("--theta", required=True, help="reference (true) precision matrix CSV")
    p.add_argument("--theta-tilde", required=True)
    p.add_argument("--reps", type=int, default=200, help="re-simulations for the exceedance curve")

    sub.add_parser("adversary", parents=[common], help="randomized test level comparison")

    p = sub.add_parser("verify", parents=[common], help="exact discrete-oracle checks")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--max-p", type=int, default=3)
    return parser


def _need_seed(args):
    if args.seed is None:
        raise ValidationError(f"{args.command} is randomized and needs an explicit --seed")
    return args.seed


def cmd_sample(args):
    seed = _need_seed(args)
    X = read_matrix_csv(args.x)
    tt = PrecisionEstimate(read_matrix_csv(args.theta_tilde))
    if X.shape[1] != tt.p:
        raise ValidationError(f"X has {X.shape[1]} columns but theta_tilde is {tt.p}x{tt.p}")
    cfg = load_config(args.config) if args.config else {}
    unknown = set(cfg) - {"diag_d"}
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    if "diag_d" in cfg:
        mech = build_mechanism(tt, np.broadcast_to(np.asarray(cfg["diag_d"], dtype=float), (tt.p,)))
    else:
        mech = gaussian_mechanism(tt)
    Xt = sample_knockoffs(mech, X, seed)
    if args.out == "-":
        write_matrix_csv(sys.stdout, Xt, prefix="xt")
    else:
        write_matrix_csv(args.out, Xt, prefix="xt")


def cmd_filter(args):
    X, Xt, Y = read_matrix_csv(args.x), read_matrix_csv(args.xt), read_vector_csv(args.y)
    statistic = args.statistic or "lcd"
    seed = _need_seed(args) if statistic == "lcd" else args.seed
    q = 0.1 if args.q is None else args.q
    variant = args.variant or "knockoff+"
    stats = compute_w(statistic, AugmentedDesign.from_pair(X, Xt), Y, args.lambda_fraction, seed or 0)
    res = select(stats.w, q, variant)
    report = {
        "threshold": res.threshold,
        "selected": sorted(res.selected),
        "variant": res.variant,
        "q": res.q,
        "statistic": stats.statistic_kind,
        "lambda_used": stats.lambda_used,
        "w": stats.w,
    }
    config = {"q": q, "variant": variant, "statistic": statistic, "lambda_fraction": args.lambda_fraction}
    write_report_json(args.out, report, "filter", config, seed)


def cmd_simulate(args):
    if not args.config:
        raise ValidationError("simulate needs --config")
    doc = read_json(args.config)
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    overrides = {"seed": args.seed, "q": args.q, "variant": args.variant, "statistic_kind": args.statistic}
    doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
    if "seed" not in doc:
        raise ValidationError("simulate needs a seed in the config or via --seed")
    config = parse_config(doc, ScenarioConfig)
    scenario, _, report = simulate(config, resolve_threads(args.threads))
    out = report.to_dict()
    out["delta_theta"] = scenario.delta_theta
    out["theta_tilde_is_psd"] = scenario.theta_tilde.is_psd
    write_report_json(args.out, out, "simulate", config.to_dict(), config.seed)


def cmd_diagnose(args):
    seed = _need_seed(args)
    X, Xt = read_matrix_csv(args.x), read_matrix_csv(args.xt)
    model = GaussianModel(read_matrix_csv(args.theta))
    tt = PrecisionEstimate(read_matrix_csv(args.theta_tilde))
    n, p = X.shape
    if model.p != p or tt.p != p:
        raise ValidationError("precision matrices must be p x p with p = number of columns of X")
    q = 0.1 if args.q is None else args.q
    p_eval, q_eval = GaussianConditionalEvaluator(model), GaussianConditionalEvaluator(tt)
    diag = observed_kl(X, Xt, p_eval, q_eval)
    # exceedance curve from fresh draws of the same size under the reference model
    mech = gaussian_mechanism(tt)
    max_kl = np.empty(args.reps)
    for r in range(args.reps):
        Xr = model.sample(n, rng_for(seed, r, 0))
        max_kl[r] = observed_kl(Xr, sample_knockoffs(mech, Xr, rng_for(seed, r, 1)), p_eval, q_eval).max_kl
    grid = default_epsilon_grid()
    exc, ci = exceedance_from_samples(max_kl, grid)
    dth = delta_theta(model, tt)
    extra = {"delta_theta": dth}
    if p >= 2:
        extra["lemma2_bound"] = float(lemma2_bound(n, p, realized_delta(diag.per_observation_terms)))
        if dth < 1 and n > 0:
            extra["lemma4_bound"] = float(lemma4_bound(n, p, dth))
    bounds = inflation_bound(q, grid, exc, ci, **extra)
    report = {
        "kl_hat": diag.kl_hat,
        "max_kl": diag.max_kl,
        "realized_delta": realized_delta(diag.per_observation_terms),
        "bound_report": bounds.to_dict(),
    }
    write_report_json(args.out, report, "diagnose", {"q": q, "reps": args.reps}, seed)


def cmd_adversary(args):
    doc = read_json(args.config) if args.config else {"format_version": 1}
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    doc = {**doc, **{k: v for k, v in {"seed": args.seed, "q": args.q}.items() if v is not None}}
    if "seed" not in doc:
        raise ValidationError("adversary needs a seed in the config or via --seed")
    config = parse_config(doc, AdversaryConfig)
    scenario = config.scenario()
    levels = monte_carlo_levels(scenario, config.replicates, config.seed, resolve_threads(args.threads))
    out = levels.to_dict()
    out["delta_theta"] = scenario.delta_theta
    out["q"] = config.q
    write_report_json(args.out, out, "adversary", config.to_dict(), config.seed)


def cmd_verify(args):
    seed = _need_seed(args)
    res = run_oracle_suite(args.instances, seed, args.max_p)
    res["pass"] = bool(res["swap_pass"] and res["likelihood_ratio_pass"])
    write_report_json(args.out, res, "verify", {"instances": args.instances, "max_p": args.max_p}, seed)
    if not res["pass"]:
        raise NumericalError("discrete oracle checks failed")


COMMANDS = {
    "sample": cmd_sample,
    "filter": cmd_filter,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
    "adversary": cmd_adversary,
    "verify": cmd_verify,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
