"""Command-line front end.

Exit status: 0 success, 1 failed verification, 2 usage error, 3 domain error.
Outputs depend only on the arguments and the seed, so repeated runs are
byte-identical (timings are left out unless ``--timing`` is given).
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import asymptotics, identities, models, samplers, specfn

DEFAULT_SEED = samplers.DEFAULT_SEED

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def _provenance(args):
    return {"command": args.command, "target": getattr(args, "target", None), "seed": args.seed}


def write_csv(args, header, rows):
    buf = io.StringIO()
    prov = _provenance(args)
    buf.write("# " + " ".join(f"{k}={v}" for k, v in prov.items() if v is not None) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_json(args, payload):
    doc = {**_provenance(args), **payload}
    return json.dumps(doc, sort_keys=True, indent=1, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _table_out(args, header, rows):
    if args.format == "json":
        return write_json(args, {"columns": header, "rows": [[_cast(v) for v in r] for r in rows]})
    return write_csv(args, header, rows)


def _cast(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _reports_out(args, reports):
    dicts = [r.to_dict(include_runtime=args.timing) for r in reports]
    if args.format == "json":
        return write_json(args, {"passed": all(r.passed for r in reports), "reports": dicts})
    header = ["check", "params", "passed", "max_residual", "tolerance"]
    rows = [[r.check, json.dumps(d["params"], sort_keys=True), r.passed, r.max_residual,
             min(r.tolerance.values(), default=0.0)] for r, d in zip(reports, dicts)]
    return write_csv(args, header, rows)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"{args.command} {getattr(args, 'target', '') or ''} needs "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))


def _model_params(args):
    if args.model in ("ep", "crp", "ep-rand-nb"):
        _need(args, "alpha", "theta")
        return {"alpha": args.alpha, "theta": args.theta}
    if args.model == "ls":
        _need(args, "z")
        return {"z": args.z}
    _need(args, "alpha", "z")
    params = {"alpha": args.alpha, "z": args.z}
    if args.model == "nb-reject":
        params["q"] = args.q
    return params


def cmd_pmf_k(args):
    _need(args, "n")
    params = _model_params(args)
    if args.model == "ep":
        p = models.ep_k_pmf(models.validate_ep(**params), args.n)
    elif args.model == "ls":
        p = models.ep_k_pmf(models.validate_ep(0.0, params["z"]), args.n)
    else:
        p = models.nb_k_pmf(models.validate_nb(**params), args.n)
    return _table_out(args, ["k", "pmf"], [[k, float(v)] for k, v in enumerate(p, start=1)]), True


PARTITION_MAX_N = 15


def cmd_pmf_partition(args):
    _need(args, "n")
    if args.n > PARTITION_MAX_N:
        raise models.DomainError(f"pmf-partition supports n <= {PARTITION_MAX_N}")
    params = _model_params(args)
    table = identities.enumerate_partitions(args.n).table
    probs = identities._pmf_for(args.model, params)(table)
    header = [f"m{i}" for i in range(1, args.n + 1)] + ["k", "pmf"]
    rows = [list(row) + [int(row.sum()), float(p)] for row, p in zip(table, probs)]
    return _table_out(args, header, rows), True


def cmd_sample(args):
    _need(args, "n")
    params = _model_params(args)
    batch = samplers.sample_batch(args.model, params, args.n, args.reps, args.seed, args.shards,
                                  workers=args.workers)
    header = ["rep"] + [f"m{i}" for i in range(1, args.n + 1)]
    rows = [[i] + list(row) for i, row in enumerate(batch.samples)]
    return _table_out(args, header, rows), True


def _grid(text, default):
    if text is None:
        return list(default)
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}") from exc


def cmd_verify(args):
    t = args.target
    reports = []
    if t == "normalization":
        n_max = args.n or 12
        grid = {
            "ep": [{"alpha": a, "theta": th} for a, th in [(0.5, 1.0), (0.25, -0.2), (0.0, 2.0), (-1.0, 3.0)]],
            "ls": [{"z": z} for z in (0.5, 1.0, 3.0)],
            "nb": [{"alpha": a, "z": z} for a, z in [(0.5, 1.0), (0.25, 4.0), (-1.0, -1.0), (-2.0, -0.5)]],
        }
        if args.model:
            grid = {args.model: [_model_params(args)]}
        for model, points in grid.items():
            for params in points:
                for n in range(1, n_max + 1):
                    reports.append(identities.check_normalization(model, params, n, tol=args.tol or 1e-10))
    elif t == "thm2ii":
        _need(args, "alpha", "z", "n")
        reports.append(identities.check_thm2_ii(args.alpha, args.z, args.n, tol=args.tol or 1e-8))
    elif t == "thm2i":
        _need(args, "alpha", "theta", "n")
        if args.method == "mc":
            reports.append(identities.check_thm2_i_mc(args.alpha, args.theta, args.n, args.reps, args.seed,
                                                      args.shards))
        else:
            reports.append(identities.check_thm2_i_quad(args.alpha, args.theta, args.n, tol=args.tol or 1e-3))
    elif t == "moments":
        _need(args, "alpha", "z")
        params = models.validate_nb(args.alpha, args.z)
        ns = [args.n] if args.n else range(1, 11)
        rs = [args.r] if args.r else range(1, 4)
        ss = [args.s] if args.s is not None else range(0, 3)
        for n in ns:
            for r in rs:
                for s in ss:
                    if r * s <= n:
                        reports.append(identities.check_mr_moments(params, n, r, s, tol=args.tol or 1e-10))
    elif t == "samplers":
        reports.extend(identities.check_samplers(args.reps, args.seed, args.shards))
    return _reports_out(args, reports), all(r.passed for r in reports)


def cmd_asym(args):
    t = args.target
    if t == "thm1pos":
        _need(args, "alpha", "z")
        table = asymptotics.thm1_pos_table(args.alpha, args.z, _grid(args.n_grid, asymptotics.POS_GRID))
    elif t == "thm1neg":
        _need(args, "alpha", "z")
        table = asymptotics.thm1_neg_table(args.alpha, args.z, _grid(args.n_grid, asymptotics.NEG_GRID))
    elif t == "thm1mr":
        _need(args, "alpha", "z", "r", "s")
        table = asymptotics.thm1_mr_table(models.validate_nb(args.alpha, args.z), args.r, args.s,
                                          _grid(args.n_grid, asymptotics.POS_GRID))
    elif t == "diversity":
        _need(args, "alpha", "theta")
        table = asymptotics.diversity_table(args.alpha, args.theta, _grid(args.n_grid, (100, 1000, 5000)))
    else:
        _need(args, "alpha", "t")
        table = asymptotics.poissonization_table(args.alpha, args.t, _grid(args.n_grid, asymptotics.POS_GRID),
                                                 refined=args.refined)
    rows = list(table.rows())
    if args.format == "json":
        out = write_json(args, {"params": table.params, "target": table.target, "columns": rows[0],
                                "rows": rows[1:], "decreases": table.decreases})
    else:
        out = write_csv(args, rows[0], rows[1:])
    return out, table.decreases


def cmd_specfn(args):
    t = args.target
    if t == "gfc":
        _need(args, "alpha", "n")
        tab = specfn.gfc_table(args.alpha, args.n)
        ks = [args.k] if args.k is not None else range(0, args.n + 1)
        rows = []
        for k in ks:
            v = tab[args.n, k]
            rows.append([args.n, k, v.sign, v.logmag, float(v)])
        return _table_out(args, ["n", "k", "sign", "log_abs", "value"], rows), True
    xs = [float(v) for v in str(args.x).split(",")] if args.x is not None else None
    if xs is None:
        raise UsageError("specfn needs --x (comma-separated points)")
    if t == "stable":
        _need(args, "alpha")
        ev = specfn.StableDensityEvaluator(args.alpha)
        rows = [[x, float(ev.pdf(x)), float(ev.cdf(x))] for x in xs]
        return _table_out(args, ["x", "pdf", "cdf"], rows), True
    if t == "sml":
        _need(args, "alpha", "theta")
        rows = [[x, float(specfn.sml_density(args.alpha, args.theta, x)),
                 float(specfn.sml_cdf(args.alpha, args.theta, x))] for x in xs]
        return _table_out(args, ["s", "pdf", "cdf"], rows), True
    _need(args, "sigma")
    tau = args.tau or 0.0
    rows = [[x, specfn.wright_log_series(args.sigma, tau, x), specfn.wright_series(args.sigma, tau, x)]
            for x in xs]
    return _table_out(args, ["y", "log_value", "value"], rows), True


COMMANDS = {
    "pmf-k": cmd_pmf_k,
    "pmf-partition": cmd_pmf_partition,
    "sample": cmd_sample,
    "verify": cmd_verify,
    "asym": cmd_asym,
    "specfn": cmd_specfn,
}


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p, fmt="csv"):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")
    p.add_argument("--format", choices=("csv", "json"), default=fmt)
    p.add_argument("--output", "-o", help="write here instead of stdout")
    p.add_argument("--config", help="file of key=value lines; flags take precedence")
    p.add_argument("--timing", action="store_true", help="include runtimes in reports")
    for name in ("alpha", "theta", "z", "q", "t", "sigma", "tau", "tol"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--x", help="comma-separated evaluation points")
    p.add_argument("--n-grid", help="comma-separated n values")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--workers", type=int, help="worker threads (default: CPSM_WORKERS or CPU count)")


def build_parser():
    parser = _Parser(prog="cpsm", description="Compound Poisson and Ewens-Pitman sampling models")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}
    p = subs["pmf-k"] = sub.add_parser("pmf-k", help="law of the number of blocks")
    p.add_argument("--model", choices=("ep", "ls", "nb"), required=True)
    p = subs["pmf-partition"] = sub.add_parser("pmf-partition", help="pmf of every partition of n")
    p.add_argument("--model", choices=("ep", "ls", "nb"), required=True)
    p = subs["sample"] = sub.add_parser("sample", help="draw multiplicity vectors")
    p.add_argument("--model", choices=samplers.SAMPLE_MODELS, required=True)
    p = subs["verify"] = sub.add_parser("verify", help="identity checks")
    p.add_argument("target", choices=("normalization", "thm2i", "thm2ii", "moments", "samplers"))
    p.add_argument("--model", choices=("ep", "ls", "nb"))
    p.add_argument("--method", choices=("quad", "mc"), default="quad")
    p = subs["asym"] = sub.add_parser("asym", help="convergence tables")
    p.add_argument("target", choices=("thm1pos", "thm1neg", "thm1mr", "diversity", "poissonization"))
    p.add_argument("--refined", action="store_true", help="also report the refined Poisson center")
    p = subs["specfn"] = sub.add_parser("specfn", help="special function point values")
    p.add_argument("target", choices=("gfc", "stable", "sml", "wright"))
    for name, p in subs.items():
        _common(p, fmt="json" if name == "verify" else "csv")
    parser._subs = subs
    return parser


def read_config(path):
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        sp = parser._subs[args.command]
        known = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, value in cfg.items():
            if key not in known or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r}")
            action = known[key]
            if action.type is not None:
                try:
                    value = action.type(value)
                except ValueError as exc:
                    raise UsageError(f"bad value for {key}: {value!r}") from exc
            elif action.const is True:
                value = value.lower() in ("1", "true", "yes", "on")
            defaults[key] = value
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if args.reps < 1 or args.shards < 1:
        raise UsageError("--reps and --shards must be positive")
    return args


def run(argv=None):
    """Execute one command; returns the exit status."""
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        text, ok = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cpsm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (models.DomainError, specfn.UnsupportedSizeError) as exc:
        print(f"cpsm: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"cpsm: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAILED


def main():
    sys.exit(run())
