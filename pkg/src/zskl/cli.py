"""``zskl`` command line: gen-synth, train, eval, cv and diagnose.

Exit codes: 0 success, 1 runtime error (data or numerics), 2 usage error.
Files store fractions; the console summary shows percentages.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import _accel
from .data import apply_preprocess, apply_split, load_dataset, prepare, write_synthetic
from .errors import ZsklError
from .evaluation import evaluate_generalized, evaluate_standard, incoherence, normalized_gram
from .modelselect import HyperGrid, grid_search, objective_for, refit_best
from .optimizer import Projection, TrainConfig, train

VARIANT_KERNELS = {"ort": ("gaussian", "cauchy"), "plain": ("gaussian", "cauchy"), "poly": ("polynomial",)}
INIT_NAMES = {"gauss": "gauss", "lsq": "lsq"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _training_flags(p, require_hyper=True):
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--kernel", choices=["gaussian", "cauchy", "polynomial"], default="gaussian")
    p.add_argument("--variant", choices=["ort", "plain", "poly"], default="ort")
    if require_hyper:
        p.add_argument("--sigma", type=float, default=0.6)
        p.add_argument("--lambda", dest="lam", type=float, default=1.0)
        p.add_argument("--degree", type=int, default=2)
        p.add_argument("--bias", type=float, default=1.0)
        p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--transform", choices=["squared", "linear"], default=None)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--beta0", type=float, default=0.01)
    p.add_argument("--decay", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=sorted(INIT_NAMES), default="gauss")
    p.add_argument("--no-center-attributes", action="store_true",
                   help="only l2-normalise attributes instead of centring them first")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zskl", description="Zero-shot kernel learning")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen-synth", help="write a synthetic dataset directory")
    g.add_argument("--out", required=True)
    g.add_argument("--classes", type=int, required=True)
    g.add_argument("--per-class", type=int, required=True)
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--attr-dim", type=int, required=True)
    g.add_argument("--noise", type=float, default=0.05)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--train-frac", type=float, default=0.6)
    g.add_argument("--val-frac", type=float, default=0.2)
    g.add_argument("--seen-test-frac", type=float, default=0.2)

    t = sub.add_parser("train", help="fit a projection on the train classes")
    _training_flags(t)
    t.add_argument("--out", required=True, help="model.json path")
    t.add_argument("--trace", help="optional trace.csv path")
    t.add_argument("--include-val", action="store_true", help="train on train + val classes")

    e = sub.add_parser("eval", help="evaluate a model")
    e.add_argument("--data", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--protocol", choices=["standard", "generalized"], default="standard")
    e.add_argument("--out", required=True, help="report.json path")
    e.add_argument("--csv", help="optional report.csv path")

    c = sub.add_parser("cv", help="grid-search cross-validation over val classes")
    _training_flags(c, require_hyper=False)
    c.add_argument("--grid", help="grid.json (defaults to the built-in grids)")
    c.add_argument("--out", required=True, help="cv_result.json path")
    c.add_argument("--csv", help="optional cv_result.csv path")
    c.add_argument("--refit", help="write a model refit on the best point to this path")
    c.add_argument("--refit-train-only", action="store_true", help="refit on train samples only")

    d = sub.add_parser("diagnose", help="incoherence diagnostics of a model")
    d.add_argument("--model", required=True)
    d.add_argument("--out-dir", required=True)
    return parser


def _config(args) -> TrainConfig:
    return TrainConfig(batch_size=args.batch, gamma=args.gamma, epochs=args.epochs, beta0=args.beta0,
                       decay=args.decay, seed=args.seed, init=INIT_NAMES[args.init])


def _check_kernel(args):
    if args.kernel not in VARIANT_KERNELS[args.variant]:
        raise UsageError(f"variant {args.variant!r} needs kernel in {VARIANT_KERNELS[args.variant]}")


def _prepared(args):
    ds = load_dataset(args.data)
    if ds.split is None:
        raise ZsklError(f"{args.data} has no splits.json")
    return prepare(ds, center_attributes=not args.no_center_attributes)


def _pct(v):
    return "n/a" if v is None else f"{100.0 * v:.1f}"


def cmd_gen_synth(args):
    ds = write_synthetic(args.out, args.classes, args.per_class, args.dim, args.attr_dim, args.noise,
                         args.seed, args.train_frac, args.val_frac, args.seen_test_frac)
    print(f"wrote {ds.n_samples} samples of {ds.n_classes} classes to {args.out}")


def cmd_train(args):
    _check_kernel(args)
    pds, stats, part = _prepared(args)
    params = {"sigma": args.sigma, "lambda": args.lam, "degree": args.degree, "bias": args.bias,
              "alpha": args.alpha if args.variant == "poly" else 0.0}
    ospec = objective_for(args.variant, args.kernel, params, args.transform)
    samples = part.train
    probe = part.val if len(part.val) else None
    if args.include_val:
        samples = np.sort(np.concatenate([part.train, part.val]))
        probe = None
    model, trace = train(pds, samples, ospec, _config(args), probe_samples=probe, stats=stats)
    model.save(args.out)
    if args.trace:
        trace.to_csv(args.trace)
    print(f"trained {args.variant}/{args.kernel} on {len(samples)} samples; "
          f"incoherence {incoherence(model.W):.4f}")


def cmd_eval(args):
    model = Projection.load(args.model)
    if model.preprocess is None:
        raise ZsklError("model has no preprocessing statistics")
    ds = load_dataset(args.data)
    if ds.split is None:
        raise ZsklError(f"{args.data} has no splits.json")
    part = apply_split(ds)
    pds = apply_preprocess(ds, model.preprocess)
    if args.protocol == "standard":
        report = evaluate_standard(model, pds, part.unseen_test, sorted(part.spec.unseen_classes))
    else:
        classes = sorted(part.spec.train_classes | part.spec.unseen_classes)
        report = evaluate_generalized(model, pds, part.seen_test, part.unseen_test, classes)
    report.save(args.out)
    if args.csv:
        report.save_csv(args.csv)
    print(f"{args.protocol}: top-1 {_pct(report.top1_mean)}%  Acc_S {_pct(report.acc_seen)}  "
          f"Acc_U {_pct(report.acc_unseen)}  H {_pct(report.harmonic_h)}  "
          f"incoherence {report.incoherence:.4f}")


def cmd_cv(args):
    _check_kernel(args)
    grid = HyperGrid()
    if args.grid:
        try:
            grid = HyperGrid.from_json(json.loads(Path(args.grid).read_text()))
        except FileNotFoundError:
            raise ZsklError(f"grid file not found: {args.grid}") from None
        except json.JSONDecodeError as exc:
            raise ZsklError(f"invalid grid file: {exc}") from exc
    pds, stats, part = _prepared(args)
    cfg = _config(args)
    result = grid_search(pds, part, args.variant, args.kernel, grid, cfg,
                         threads=_accel.thread_count(args.threads), transform_style=args.transform)
    if args.refit:
        model = refit_best(pds, part, args.variant, args.kernel, result.best, cfg, stats=stats,
                           include_val=not args.refit_train_only, transform_style=args.transform)
        model.save(args.refit)
    result.save(args.out)
    if args.csv:
        result.save_csv(args.csv)
    best_acc = max(r["val_top1"] for r in result.table)
    print(f"{len(result.table)} grid points; best {result.best} val top-1 {_pct(best_acc)}%")


def cmd_diagnose(args):
    model = Projection.load(args.model)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    G = normalized_gram(model.W)
    np.savetxt(out / "wtw.csv", G, delimiter=",", fmt="%.17g")
    norms = np.linalg.norm(model.W, axis=0)
    off = G[~np.eye(G.shape[0], dtype=bool)]
    diag = {
        "incoherence": incoherence(model.W),
        "mean_abs_offdiag": float(np.mean(np.abs(off))) if off.size else 0.0,
        "max_abs_offdiag": float(np.max(np.abs(off))) if off.size else 0.0,
        "column_norms": {"min": float(norms.min()), "max": float(norms.max()),
                         "mean": float(norms.mean()), "values": [float(v) for v in norms]},
    }
    (out / "diag.json").write_text(json.dumps(diag, indent=2) + "\n")
    print(f"incoherence {diag['incoherence']:.4f}; mean |offdiag| {diag['mean_abs_offdiag']:.4f}")


COMMANDS = {"gen-synth": cmd_gen_synth, "train": cmd_train, "eval": cmd_eval, "cv": cmd_cv,
            "diagnose": cmd_diagnose}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"zskl: error: {exc}", file=sys.stderr)
        return 2
    except (ZsklError, OSError, FloatingPointError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        if getattr(exc, "iteration", None) is not None:
            err["iteration"] = exc.iteration
        print(json.dumps(err), file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
