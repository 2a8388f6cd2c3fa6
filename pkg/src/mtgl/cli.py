"""Command line interface: ``mtgl <group> <command> [flags]``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_model
from .connectivity import p_conn_bounds, p_conn_brute, p_conn_exact
from .cpp import jump_law, terminal_prob_convolution, terminal_prob_formula, verify_representation
from .errors import Explosion, InsufficientReplicates, InvalidModel, LimitExceeded, MTGLError, NumericalError
from .experiments import fluctuation_report, make_manifest
from .graphsim import run_batch
from .model import criticality, make_model, solve_dual
from .rates import (
    build_context,
    cgf_check,
    coef_i_sub,
    coef_J_sub,
    cpp_rates,
    predicted_covariances,
    rate_I,
    rate_i,
    rate_i_sub,
    rate_J,
    rate_J_sub,
)
from .rng import PRNG_NAME, SEED_ENV, resolve_seed
from .trees import h_value, mass_identities, phi_closed, tau_log
from .typevec import format_typevec, parse_typevec

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True)


def _text_rows(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _text_rows(v, f"{prefix}{k}.")
    else:
        yield prefix.rstrip("."), obj


def emit(args, obj):
    obj = _plain(obj)
    if args.format == "text":
        rows = list(_text_rows(obj))
        width = max((len(k) for k, _ in rows), default=0)
        for k, v in rows:
            print(f"{k:<{width}}  {v}")
    else:
        print(dumps(obj))


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",")]


def _ks(text: str | None):
    if not text:
        return []
    return [parse_typevec(part) for part in text.split(";") if part.strip()]


def _model(args):
    model = load_model(args.model)
    if getattr(args, "n", None):
        model = make_model(model.kappa, model.mu, args.n, model.type_labels)
    return model


def _seed(args) -> tuple[int, str]:
    seed, from_env = resolve_seed(args.seed)
    return seed, SEED_ENV if from_env else "argument"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_model_validate(args):
    model = load_model(args.model)
    emit(args, {"valid": True, **model.to_dict()})


def cmd_model_criticality(args):
    emit(args, criticality(_model(args)).to_dict())


def cmd_dual_solve(args):
    model = _model(args)
    emit(args, solve_dual(model.kappa, model.mu, tol=args.tol).to_dict())


def cmd_tree_tau(args):
    model = _model(args)
    k = parse_typevec(args.k)
    lt = tau_log(k, model.kappa)
    emit(args, {"k": list(k), "log_tau": lt, "tau": math.exp(lt) if lt < 700 else math.inf})


def cmd_tree_h(args):
    model = _model(args)
    k = parse_typevec(args.k)
    c = solve_dual(model.kappa, model.mu).c
    w = h_value(k, model.kappa, model.mu, c)
    emit(args, {"k": list(k), "log_tau": w.log_tau, "h": w.h, "h_c": w.h_c, "form": w.form})


def cmd_tree_identities(args):
    model = _model(args)
    c = solve_dual(model.kappa, model.mu).c
    mi = mass_identities(model.kappa, c, tol=args.tol)
    emit(args, {
        "sum_h": mi.sum_h, "sum_kh": mi.sum_kh, "phi_truncated": mi.phi_truncated,
        "truncation_radius": mi.truncation_radius, "tail_estimate": mi.tail_estimate,
        "targets": {"sum_h": float(c.sum() - 0.5 * c @ model.kappa @ c), "sum_kh": c,
                    "phi": phi_closed(model.kappa, c)},
    })


def cmd_conn(args):
    model = _model(args)
    k = parse_typevec(args.k)
    if args.command == "exact":
        r = p_conn_exact(k, model.n, model.kappa)
    elif args.command == "brute":
        r = p_conn_brute(k, model.n, model.kappa)
    else:
        m = parse_typevec(args.m) if args.m else None
        emit(args, p_conn_bounds(k, model.n, model.kappa, r=args.anchor, m=m).__dict__)
        return
    emit(args, {"k": list(k), "n": model.n, **r.__dict__})


def _write_replicates(path: Path, model, stats):
    labels = model.type_labels
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "seed"] + [f"giant_{x}" for x in labels] + ["C_n"]
                   + [f"t_{format_typevec(k)}" for k in stats.tracked])
        for i in range(stats.R):
            w.writerow([i, int(stats.seeds[i])] + [int(x) for x in stats.giant[i]] + [int(stats.total[i])]
                       + [int(x) for x in stats.t[i]])


def cmd_sim_run(args):
    model = _model(args)
    seed, source = _seed(args)
    manifest = make_manifest(model, ["sim", "run", f"R={args.replicates}",
                                     f"track={args.track_k or ''}"], seed, source)
    stats = run_batch(model, args.replicates, seed, _ks(args.track_k), workers=args.workers)
    cov = stats.covariances()
    summary = {
        "manifest": manifest.to_dict(),
        "model": model.to_dict(),
        "R": stats.R,
        "tracked": [format_typevec(k) for k in stats.tracked],
        "centers": {k: v for k, v in stats.centers.items()},
        "mean_scaled": stats.means(),
        "cov_scaled": cov,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_replicates(out / "replicates.csv", model, stats)
        (out / "summary.json").write_text(dumps(summary) + "\n")
    emit(args, summary)


def cmd_cpp_law(args):
    model = _model(args)
    alpha = _floats(args.alpha) if args.alpha else None
    emit(args, jump_law(model, alpha, cap_mass=args.cap_mass).to_dict())


def cmd_cpp_terminal(args):
    model = _model(args)
    alpha = _floats(args.alpha) if args.alpha else None
    law = jump_law(model, alpha)
    f = terminal_prob_formula(model, alpha, law)
    c = terminal_prob_convolution(model, alpha, law)
    emit(args, {"Z": law.Z, "formula": f.value, "convolution": c.value, "cond_prob": f.cond_prob})


def cmd_cpp_verify(args):
    model = _model(args)
    alpha = _floats(args.alpha) if args.alpha else None
    report = verify_representation(model, alpha, tol=args.tol)
    emit(args, report.to_dict())
    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_rates_eval(args):
    model = _model(args)
    x = _floats(args.x)
    which = args.which
    k = parse_typevec(args.k) if args.k else None
    if which in ("J", "Jsub", "j3") and k is None:
        raise UsageError(f"--k is required for {which}")
    if which == "Jsub":
        val = rate_J_sub(model.kappa, model.mu, k, x[0], args.published)
        coef = coef_J_sub(model.kappa, model.mu, k, args.published)
    elif which == "isub":
        val = rate_i_sub(model.kappa, model.mu, x[0], args.published)
        coef = coef_i_sub(model.kappa, model.mu, args.published)
    elif which in ("j1", "j2", "j3"):
        if which == "j1":
            phi = phi_closed(model.kappa, solve_dual(model.kappa, model.mu).c)
            val = cpp_rates(phi, "j1", x)
        else:
            val = cpp_rates(build_context(model.kappa, model.mu), which, x, k=k)
        coef = None
    else:
        ctx = build_context(model.kappa, model.mu)
        if which == "I":
            val, coef = rate_I(ctx, x), None
        elif which == "J":
            val = rate_J(ctx, k, x[0], args.published)
            coef = 2 * val / x[0] ** 2 if x[0] else None
        elif which == "i":
            val = rate_i(ctx, x[0])
            coef = 2 * val / x[0] ** 2 if x[0] else None
        else:
            raise UsageError(f"unknown rate {which!r}")
    emit(args, {"which": which, "x": x, "k": None if k is None else list(k), "value": val,
                "coefficient": coef, "published": args.published})


def cmd_rates_covariance(args):
    model = _model(args)
    ctx = build_context(model.kappa, model.mu)
    pred = predicted_covariances(ctx, _ks(args.track_k), published=args.published)
    emit(args, {"context": ctx.to_dict(), "predicted": pred.to_dict()})


def cmd_mc_fluctuations(args):
    model = _model(args)
    seed, source = _seed(args)
    ks = _ks(args.track_k)
    manifest = make_manifest(model, ["mc", "fluctuations", f"R={args.replicates}",
                                     f"track={args.track_k or ''}"], seed, source)
    if args.replicates < args.min_replicates:
        raise InsufficientReplicates(f"R = {args.replicates} < {args.min_replicates}")
    stats = run_batch(model, args.replicates, seed, ks, workers=args.workers)
    report = fluctuation_report(stats, model, published=args.published, manifest=manifest)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_replicates(out / "replicates.csv", model, stats)
        (out / "fluctuations.json").write_text(dumps(report.to_dict()) + "\n")
    emit(args, report.to_dict())


def cmd_mc_cgf(args):
    model = _model(args)
    law = jump_law(model)
    out = {}
    for variant in ("poisson", "fixed"):
        out[variant] = cgf_check(law.ks, law.probs, law.Z, model.n, args.theta, _floats(args.z),
                                 variant, u=args.u).to_dict()
    out["passed"] = all(out[v]["gap"] <= out[v]["bound"] for v in ("poisson", "fixed"))
    emit(args, out)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> Parser:
    p = Parser(prog="mtgl", description="Sparse multi-type random graph toolkit.")
    p.add_argument("--version", action="version", version=f"mtgl {__version__} ({PRNG_NAME})")
    p.add_argument("--format", choices=("json", "text"), default="json")
    groups = p.add_subparsers(dest="group", required=True, parser_class=Parser)

    def command(group, name, func, model=True):
        sp = group.add_parser(name)
        sp.set_defaults(func=func)
        if model:
            sp.add_argument("--model", required=True, help="model file")
            sp.add_argument("--n", type=int, help="override the vertex count")
        return sp

    g = groups.add_parser("model").add_subparsers(dest="command", required=True, parser_class=Parser)
    command(g, "validate", cmd_model_validate)
    command(g, "criticality", cmd_model_criticality)

    g = groups.add_parser("dual").add_subparsers(dest="command", required=True, parser_class=Parser)
    command(g, "solve", cmd_dual_solve).add_argument("--tol", type=float, default=1e-14)

    g = groups.add_parser("tree").add_subparsers(dest="command", required=True, parser_class=Parser)
    command(g, "tau", cmd_tree_tau).add_argument("--k", required=True)
    command(g, "h", cmd_tree_h).add_argument("--k", required=True)
    command(g, "identities", cmd_tree_identities).add_argument("--tol", type=float, default=1e-7)

    g = groups.add_parser("conn").add_subparsers(dest="command", required=True, parser_class=Parser)
    for name in ("exact", "brute", "bounds"):
        sp = command(g, name, cmd_conn)
        sp.add_argument("--k", required=True)
        if name == "bounds":
            sp.add_argument("--anchor", type=int)
            sp.add_argument("--m", help="enclosing configuration for the binomial bound")

    g = groups.add_parser("sim").add_subparsers(dest="command", required=True, parser_class=Parser)
    sp = command(g, "run", cmd_sim_run)
    sp.add_argument("--replicates", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--track-k", help="type vectors separated by ';', e.g. '1,0;2,1'")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", help="output directory for replicates.csv and summary.json")

    g = groups.add_parser("cpp").add_subparsers(dest="command", required=True, parser_class=Parser)
    sp = command(g, "law", cmd_cpp_law)
    sp.add_argument("--alpha")
    sp.add_argument("--cap-mass", type=float, default=1e-12)
    command(g, "terminal", cmd_cpp_terminal).add_argument("--alpha")
    sp = command(g, "verify", cmd_cpp_verify)
    sp.add_argument("--alpha")
    sp.add_argument("--tol", type=float, default=1e-12)

    g = groups.add_parser("rates").add_subparsers(dest="command", required=True, parser_class=Parser)
    sp = command(g, "eval", cmd_rates_eval)
    sp.add_argument("--which", required=True, choices=("I", "J", "i", "Jsub", "isub", "j1", "j2", "j3"))
    sp.add_argument("--k")
    sp.add_argument("--x", required=True, help="comma-separated point")
    sp.add_argument("--published", action="store_true", help="use the printed sign conventions")
    sp = command(g, "covariance", cmd_rates_covariance)
    sp.add_argument("--track-k")
    sp.add_argument("--published", action="store_true")

    g = groups.add_parser("mc").add_subparsers(dest="command", required=True, parser_class=Parser)
    sp = command(g, "fluctuations", cmd_mc_fluctuations)
    sp.add_argument("--replicates", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--track-k")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out")
    sp.add_argument("--min-replicates", type=int, default=1000)
    sp.add_argument("--published", action="store_true")
    sp = command(g, "cgf", cmd_mc_cgf)
    sp.add_argument("--theta", type=float, default=0.25)
    sp.add_argument("--z", default="0.3")
    sp.add_argument("--u", type=float, default=0.0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"mtgl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            code = args.func(args)
        return EXIT_OK if code is None else code
    except UsageError as exc:
        print(f"mtgl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"mtgl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, InvalidModel, LimitExceeded) as exc:
        print(f"mtgl: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, Explosion) as exc:
        print(f"mtgl: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MTGLError as exc:
        print(f"mtgl: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"mtgl: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
