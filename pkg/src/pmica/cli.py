"""Command-line interface: ``pmica <subcommand> ...``.

Exit codes: 0 success, 1 bad input or usage, 2 tensor not generic
(``genericity``), 3 unsupported order, 4 rank-deficient covariance.
Every JSON document carries ``schema_version`` and a run ``manifest``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .cumulants import RankDeficiencyError, cumulant_tensor, pca_reduce, whiten
from .genericity import PatternMembershipError, UnsupportedOrderError, is_generic_diag, is_generic_pmi
from .harness import PRESETS, SweepSpec, preset, run_sweep, write_csv
from .metrics import distance_to_subspace, scorecard
from .optim import FitConfig, as_orthogonal, rgd_fit
from .samplers import SourceSpec, mix, pilot_scales
from .subspace import DIAG, PMI, ZeroPattern, project
from .symtensor import MAX_ORDER, frobenius, orthogonal_action, read_symtensor, write_symtensor

SCHEMA_VERSION = "1"

EXIT_OK, EXIT_INPUT, EXIT_NOT_GENERIC, EXIT_UNSUPPORTED, EXIT_RANK = 0, 1, 2, 3, 4


class CLIError(Exception):
    """Bad input detected by the CLI itself (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # usage errors exit with 1 so that 2 keeps its meaning for genericity
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------- helpers

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _strip_at(path):
    return path[1:] if path.startswith("@") else path


def _read_csv(path, header=False):
    path = _strip_at(path)
    try:
        X = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except (OSError, ValueError) as exc:
        raise CLIError(f"cannot read CSV {path}: {exc}") from None
    if X.size == 0:
        raise CLIError(f"{path} holds no data")
    return X


def _write_matrix(M, path):
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g")


def _pattern(text):
    try:
        return ZeroPattern.parse(text)
    except (OSError, ValueError) as exc:
        raise CLIError(str(exc)) from None


def _manifest(args, inputs, t0, extra=None):
    config = {k: v for k, v in vars(args).items() if k not in ("func", "seed_given")}
    out = {"command": args.command, "config": config,
           "inputs": {p: _sha256(p) for p in inputs},
           "seed": args.seed, "version": __version__,
           "duration_s": round(time.perf_counter() - t0, 6)}
    if extra:
        out.update(extra)
    return out


def _emit(doc, out):
    doc = {"schema_version": SCHEMA_VERSION, **doc}
    text = json.dumps(doc, indent=2, sort_keys=False, default=_json_default)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return str(obj)


def _prepared(args):
    """Read, optionally PCA-reduce, and whiten the input data."""
    X = _read_csv(args.input, args.header)
    ratio = None
    if args.pca is not None:
        X, ratio = pca_reduce(X, args.pca)
    return whiten(X), ratio


# ------------------------------------------------------------- commands

def cmd_whiten(args):
    t0 = time.perf_counter()
    W, ratio = _prepared(args)
    Z = W.whitened
    dev = float(np.abs(Z.T @ Z / len(Z) - np.eye(Z.shape[1])).max())
    files = {}
    if args.out:
        base = os.path.splitext(args.out)[0]
        files = {"whitened": base + ".whitened.csv", "transform": base + ".transform.csv",
                 "covariance_sqrt": base + ".covsqrt.csv"}
        _write_matrix(Z, files["whitened"])
        _write_matrix(W.transform, files["transform"])
        _write_matrix(W.covariance_sqrt, files["covariance_sqrt"])
    doc = {"n_samples": len(Z), "dim": Z.shape[1], "mean": W.mean,
           "transform": W.transform, "covariance_sqrt": W.covariance_sqrt,
           "covariance_deviation": dev, "explained_variance_ratio": ratio, "files": files,
           "manifest": _manifest(args, [_strip_at(args.input)], t0)}
    _emit(doc, args.out)
    return EXIT_OK


def cmd_cumulant(args):
    t0 = time.perf_counter()
    if args.raw:
        X = _read_csv(args.input, args.header)
    else:
        X = _prepared(args)[0].whitened
    K = cumulant_tensor(X, args.order)
    tensor_path = None
    if args.out:
        tensor_path = os.path.splitext(args.out)[0] + ".symtensor"
        write_symtensor(K, tensor_path)
    doc = {"order": K.order, "dim": K.dim, "whitened": not args.raw,
           "entries": [{"index": [i + 1 for i in idx], "value": float(v)}
                       for idx, v in zip(K.indices, K.values)],
           "tensor_file": tensor_path,
           "manifest": _manifest(args, [_strip_at(args.input)], t0)}
    _emit(doc, args.out)
    return EXIT_OK


def _fit_config(args, pattern):
    return FitConfig(pattern=pattern, max_iters=args.max_iters, grad_tol=args.grad_tol,
                     step_init=args.step_init, backtrack_ratio=args.backtrack_ratio,
                     armijo_c=args.armijo_c, n_inits=args.n_inits, seed=args.seed)


def cmd_fit(args):
    t0 = time.perf_counter()
    W, ratio = _prepared(args)
    K = cumulant_tensor(W.whitened, args.order)
    V = _pattern(args.pattern)
    cfg = _fit_config(args, V)
    fit = rgd_fit(K, V, cfg)
    inputs = [_strip_at(args.input)]
    Q_true = None
    if args.truth:
        Q_true = as_orthogonal(_read_csv(args.truth), repair_tol=1e-2)
        inputs.append(_strip_at(args.truth))
    card = scorecard(fit.best_Q, K, Q_true)
    if args.sources:
        _write_matrix(W.whitened @ fit.best_Q, args.sources)
    doc = {"Q_hat": fit.best_Q, "A_hat": W.mixing(fit.best_Q),
           "scorecard": card.to_dict(),
           "distance_to_pattern": distance_to_subspace(fit.best_Q, K, V),
           "fit": fit.to_dict(), "config": cfg.to_dict(),
           "explained_variance_ratio": ratio,
           "manifest": _manifest(args, inputs, t0)}
    _emit(doc, args.out)
    return EXIT_OK


def cmd_genericity(args):
    t0 = time.perf_counter()
    if (args.tensor is None) == (args.from_data is None):
        raise CLIError("give exactly one of a tensor file or --from-data CSV")
    tests = {"pmi": (is_generic_pmi, PMI), "diag": (is_generic_diag, DIAG)}
    if args.pattern not in tests:
        raise CLIError("genericity supports --pattern pmi or diag")
    test, V = tests[args.pattern]
    residual = None
    if args.tensor is not None:
        path = _strip_at(args.tensor)
        try:
            T = read_symtensor(path)
        except OSError as exc:
            raise CLIError(f"cannot read tensor {path}: {exc}") from None
    else:
        # unmix first; a sample cumulant is then only near the pattern, so
        # the certificate is for its projection
        path = _strip_at(args.from_data)
        K = cumulant_tensor(whiten(_read_csv(path, args.header)).whitened, args.order)
        Q = rgd_fit(K, V, FitConfig(pattern=V, seed=args.seed)).best_Q
        R = orthogonal_action(Q.T, K, atol=1e-6)
        T = project(R, V)
        residual = frobenius(R - T) / max(frobenius(R), 1e-300)
    report = test(T, tol=args.tol, membership_tol=args.membership_tol)
    doc = {**report.to_dict(), "pattern": args.pattern, "projection_residual": residual,
           "manifest": _manifest(args, [path], t0)}
    _emit(doc, args.out)
    return EXIT_OK if report.generic else EXIT_NOT_GENERIC


def cmd_simulate(args):
    t0 = time.perf_counter()
    try:
        spec = SourceSpec.parse(args.dist, standardize=args.standardize)
    except (OSError, ValueError) as exc:
        raise CLIError(str(exc)) from None
    S = spec.sample(args.n_samples, np.random.default_rng(args.seed))
    inputs = [p for p in [_tree_path(args.dist)] if p]
    X = S
    if args.mix:
        A = _read_csv(args.mix)
        X = mix(S, A)
        inputs.append(_strip_at(args.mix))
    out = args.out or "simulated.csv"
    _write_matrix(X, out)
    extra = {"source": spec.describe(), "output": out, "output_sha256": _sha256(out)}
    if spec.kind == "alpha" and spec.standardize is not False:
        extra["source_scales"] = pilot_scales("alpha", (spec.alpha,)).tolist()
    manifest = _manifest(args, inputs, t0, extra)
    _emit({"manifest": manifest}, out + ".json")
    return EXIT_OK


def _tree_path(dist):
    if dist.startswith("tree:"):
        return _strip_at(dist.split(":", 1)[1])
    return None


def cmd_metrics(args):
    t0 = time.perf_counter()
    X = _read_csv(args.input, args.header)
    if not args.raw:
        X = whiten(X).whitened
    K = cumulant_tensor(X, args.order)
    Q = as_orthogonal(_read_csv(args.rotation))
    if Q.shape != (K.dim, K.dim):
        raise CLIError(f"rotation shape {Q.shape} does not match data dimension {K.dim}")
    inputs = [_strip_at(args.input), _strip_at(args.rotation)]
    Q_true = None
    if args.truth:
        Q_true = as_orthogonal(_read_csv(args.truth), repair_tol=1e-2)
        inputs.append(_strip_at(args.truth))
    V = _pattern(args.pattern)
    doc = {"scorecard": scorecard(Q, K, Q_true).to_dict(),
           "pattern": str(V), "distance_to_pattern": distance_to_subspace(Q, K, V),
           "manifest": _manifest(args, inputs, t0)}
    _emit(doc, args.out)
    return EXIT_OK


def cmd_experiment(args):
    t0 = time.perf_counter()
    inputs = []
    if args.spec.startswith("@") or os.path.isfile(args.spec):
        path = _strip_at(args.spec)
        try:
            with open(path) as fh:
                spec = SweepSpec.from_dict(json.load(fh))
        except (OSError, ValueError, TypeError) as exc:
            raise CLIError(f"cannot load sweep spec {path}: {exc}") from None
        inputs.append(path)
    elif args.spec in PRESETS:
        spec = preset(args.spec)
    else:
        raise CLIError(f"unknown preset {args.spec!r}; choose from {sorted(PRESETS)} or @file")
    over = {}
    if args.replicates is not None:
        over["replicates"] = args.replicates
    if args.n_samples is not None:
        over["n_samples"] = args.n_samples
    if args.seed_given:
        over["seed"] = args.seed
    if over:
        spec = SweepSpec.from_dict({**spec.to_dict(), **over})
    result = run_sweep(spec, threads=args.threads)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{spec.experiment}.csv")
    write_csv(result.rows, csv_path)
    manifest = _manifest(args, inputs, t0, {"sweep": result.manifest, "table": csv_path,
                                            "table_sha256": _sha256(csv_path)})
    _emit({"spec": spec.to_dict(), "summary": result.summary, "manifest": manifest},
          os.path.join(out_dir, f"{spec.experiment}.json"))
    return EXIT_OK


# --------------------------------------------------------------- parser

def _order(text):
    d = int(text)
    if not 2 <= d <= MAX_ORDER:
        raise argparse.ArgumentTypeError(f"order must be in [2, {MAX_ORDER}]")
    return d


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker processes for experiments (results do not depend on it)")
    common.add_argument("--out", default=None, help="output path (JSON unless noted)")
    common.add_argument("--order", type=_order, default=4)
    common.add_argument("--pattern", default="pmi",
                        help="diag, pmi, mi, refl, kindep:<k> or custom:@file")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("input", help="CSV data file, one sample per row")
    data.add_argument("--header", action="store_true", help="skip a header row")
    data.add_argument("--pca", type=int, default=None, metavar="K",
                      help="reduce to the top K principal components before whitening")

    p = _Parser(prog="pmica", description="Blind source separation under pairwise mean "
                                          "independence.")
    p.add_argument("--version", action="version", version=f"pmica {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("whiten", parents=[common, data], help="center and whiten a CSV")
    s.set_defaults(func=cmd_whiten)

    s = sub.add_parser("cumulant", parents=[common, data], help="sample cumulant tensor")
    s.add_argument("--raw", action="store_true", help="skip whitening")
    s.set_defaults(func=cmd_cumulant)

    s = sub.add_parser("fit", parents=[common, data], help="estimate the unmixing rotation")
    d = FitConfig()
    s.add_argument("--max-iters", type=int, default=d.max_iters)
    s.add_argument("--grad-tol", type=float, default=d.grad_tol)
    s.add_argument("--step-init", type=float, default=d.step_init)
    s.add_argument("--backtrack-ratio", type=float, default=d.backtrack_ratio)
    s.add_argument("--armijo-c", type=float, default=d.armijo_c)
    s.add_argument("--n-inits", type=int, default=d.n_inits)
    s.add_argument("--truth", default=None, help="CSV of the true whitened rotation")
    s.add_argument("--sources", default=None, help="write recovered sources X_w Q to this CSV")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("genericity", parents=[common], help="identifiability certificate")
    s.add_argument("tensor", nargs="?", default=None, help="tensor in symtensor text format")
    s.add_argument("--from-data", default=None,
                   help="CSV data: whiten, fit the rotation, certify the projected cumulant")
    s.add_argument("--header", action="store_true")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--membership-tol", type=float, default=1e-8)
    s.set_defaults(func=cmd_genericity)

    s = sub.add_parser("simulate", parents=[common], help="draw seeded source samples")
    s.add_argument("--dist", required=True,
                   help="square, l1, alpha:<a>, dirichlet:<n>, energy[:<n>] or tree:@file")
    s.add_argument("--n-samples", type=int, default=10_000)
    s.add_argument("--mix", default=None, help="@matrix.csv; rows become A s")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--standardize", dest="standardize", action="store_true", default=None)
    g.add_argument("--no-standardize", dest="standardize", action="store_false")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("metrics", parents=[common], help="score a rotation on data")
    s.add_argument("input", help="CSV data file")
    s.add_argument("rotation", help="CSV of the rotation Q")
    s.add_argument("--header", action="store_true")
    s.add_argument("--raw", action="store_true", help="skip whitening")
    s.add_argument("--truth", default=None)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("experiment", parents=[common], help="run a seeded sweep")
    s.add_argument("--spec", required=True, help=f"@file.json or a preset: {' '.join(PRESETS)}")
    s.add_argument("--replicates", type=int, default=None)
    s.add_argument("--n-samples", type=int, default=None)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    try:
        return args.func(args)
    except UnsupportedOrderError as exc:
        print(f"pmica: unsupported order: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except RankDeficiencyError as exc:
        print(f"pmica: {exc}", file=sys.stderr)
        return EXIT_RANK
    except (CLIError, PatternMembershipError, ValueError, OSError) as exc:
        print(f"pmica: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
