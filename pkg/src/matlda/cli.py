"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver divergence.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import DataFileError, DivergenceError, InvalidInputError, MatLDAError
from .lda import fit_matrix_lda
from .simgen import SHAPES, SignalSpec, StudySpec, bayes_error, make_signal, run_monte_carlo, \
    simulate_dataset
from .solver import LOSSES, PENALTIES, FitConfig
from .tuning import tune

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3

log = logging.getLogger("matlda")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _study_flags(ap):
    ap.add_argument("--shape", choices=SHAPES, default="cross")
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--p", type=int, default=64)
    ap.add_argument("--q", type=int, default=64)
    ap.add_argument("--pi1", type=float, default=0.5)
    ap.add_argument("--rho", type=float, default=0.5)
    ap.add_argument("--amplitude", type=float, default=0.05)
    ap.add_argument("--test-size", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)


def _fit_flags(ap, omega=False, grid=False):
    ap.add_argument("--loss", choices=LOSSES, default="squared")
    ap.add_argument("--penalty", choices=PENALTIES, default="nuclear")
    ap.add_argument("--max-iter", type=int, default=2000)
    ap.add_argument("--rel-tol", type=float, default=1e-7)
    if omega:
        ap.add_argument("--omega", type=float, required=True)
    if grid:
        ap.add_argument("--grid-size", type=int, default=20)
        ap.add_argument("--grid-span", type=float, default=0.01)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="matlda", description="Matrix LDA with a nuclear-norm penalty.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write a simulated train/test study to a directory")
    _study_flags(s)
    s.add_argument("--out", required=True, help="output directory")

    f = sub.add_parser("fit", help="fit one omega on a manifest")
    _fit_flags(f, omega=True)
    f.add_argument("--manifest", required=True)
    f.add_argument("--out", default="model.json", help="model file; a .pgm rendering is written beside it")

    t = sub.add_parser("tune", help="fit a BIC-tuned path on a manifest")
    _fit_flags(t, grid=True)
    t.add_argument("--manifest", required=True)
    t.add_argument("--out", default="path.csv", help="path report (CSV)")
    t.add_argument("--model", default="model.json", help="selected model file")

    pr = sub.add_parser("predict", help="score a manifest with a model file")
    pr.add_argument("--model", required=True)
    pr.add_argument("--manifest", required=True)
    pr.add_argument("--out", default="predictions.csv")

    e = sub.add_parser("evaluate", help="compare predictions with manifest labels")
    e.add_argument("predictions")
    e.add_argument("--manifest", required=True)
    e.add_argument("--out", default=None, help="report file (default: stdout)")

    m = sub.add_parser("mc", help="Monte Carlo study with BIC tuning")
    _study_flags(m)
    _fit_flags(m, grid=True)
    m.add_argument("--replicates", type=int, default=100)
    m.add_argument("--out", default="report.txt")
    return ap


def _fit_config(a) -> FitConfig:
    kw = dict(loss=a.loss, penalty=a.penalty, max_iter=a.max_iter, rel_tol=a.rel_tol)
    if getattr(a, "omega", None) is not None:
        kw["omega"] = a.omega
    try:
        return FitConfig(**kw)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None


def _study(a, replicates=1) -> StudySpec:
    try:
        sig = SignalSpec(a.shape, a.p, a.q, a.amplitude)
        return StudySpec(sig, n=a.n, pi1=a.pi1, rho=a.rho, test_size=a.test_size,
                         replicates=replicates, seed=a.seed)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None


def _flatten(prefix, d):
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(f"{prefix}{k}.", v))
        else:
            out[prefix + k] = v
    return out


def _check_grid(a):
    if a.grid_size < 2 or not 0 < a.grid_span < 1:
        raise UsageError("--grid-size must be >= 2 and --grid-span in (0, 1)")


def cmd_simulate(a):
    spec = _study(a)
    rng = np.random.default_rng(spec.seed)
    train, test = simulate_dataset(spec, rng)
    out = Path(a.out)
    io.write_dataset(train, out / "train")
    io.write_dataset(test, out / "test")
    B0 = make_signal(spec.signal)
    io.save_matrix_csv(B0, out / "signal.csv")
    io.render_pgm(B0, out / "signal.pgm")
    text = io.format_report([("study", _flatten("", spec.to_dict())),
                             ("summary", {"bayes_error": bayes_error(spec),
                                          "train_manifest": "train/manifest.json",
                                          "test_manifest": "test/manifest.json"})])
    io.atomic_write_text(out / "study.txt", text)
    print(f"wrote {train.n} training and {test.n} test samples to {out}")


def _model_meta(cfg, d, extra=None):
    meta = {"config": cfg.to_dict(), "n": d.n, "n1": d.n1, "n2": d.n2}
    meta.update(extra or {})
    return meta


def cmd_fit(a):
    cfg = _fit_config(a)
    d = io.load_dataset(a.manifest)
    model = fit_matrix_lda(d, cfg)
    io.save_model(model, a.out, _model_meta(cfg, d, {"manifest_sha256": io.file_sha256(a.manifest)}))
    io.render_pgm(model.b_hat, Path(a.out).with_suffix(".pgm"))
    print(f"omega={model.omega!r} rank={model.rank} beta0={model.beta0_tilde!r} -> {a.out}")


def cmd_tune(a):
    _check_grid(a)
    cfg = _fit_config(a)
    d = io.load_dataset(a.manifest)
    path = tune(d, cfg, k=a.grid_size, span=a.grid_span)
    with open(a.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "omega", "rss", "df", "bic", "rank", "valid", "selected"])
        for i, e in enumerate(path.entries):
            w.writerow([i, repr(e.omega), repr(e.rss), repr(e.df), repr(e.bic), e.rank,
                        int(e.valid), int(i == path.selected_index)])
    model = path.model
    io.save_model(model, a.model, _model_meta(cfg, d, {
        "manifest_sha256": io.file_sha256(a.manifest), "grid_size": a.grid_size, "grid_span": a.grid_span,
        "selected_index": path.selected_index}))
    io.render_pgm(model.b_hat, Path(a.model).with_suffix(".pgm"))
    print(f"selected omega={model.omega!r} rank={model.rank} (entry {path.selected_index}"
          f" of {len(path.entries)}) -> {a.model}")


def cmd_predict(a):
    model, _ = io.load_model(a.model)
    d = io.load_dataset(a.manifest)
    if d.shape != model.shape:
        raise DataFileError(f"{a.manifest}: samples are {d.shape}, model is {model.shape}")
    scores = model.decision_function(d.X)
    labels = model.predict(d.X)
    with open(a.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "label", "score"])
        for name, lab, s in zip(d.names, labels, scores):
            w.writerow([name, int(lab), repr(float(s))])
    print(f"predicted {d.n} samples -> {a.out}")


def _read_predictions(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        raise DataFileError(f"{path}: predictions file not found") from None
    try:
        return {r["name"]: int(r["label"]) for r in rows}
    except (KeyError, ValueError, TypeError):
        raise DataFileError(f"{path}: expected columns name,label,score") from None


def cmd_evaluate(a):
    pred = _read_predictions(a.predictions)
    d = io.load_dataset(a.manifest)
    truth = d.require_labels()
    missing = [nm for nm in d.names if nm not in pred]
    if missing:
        raise DataFileError(f"{a.predictions}: no prediction for {missing[0]}")
    yhat = np.array([pred[nm] for nm in d.names])
    conf = {f"true{t}_pred{p}": int(np.sum((truth == t) & (yhat == p))) for t in (1, 2) for p in (1, 2)}
    summary = {"n": d.n, "errors": int(np.sum(yhat != truth)), "rate": float(np.mean(yhat != truth))}
    text = io.format_report([("evaluation", summary), ("confusion", conf)])
    if a.out:
        io.atomic_write_text(a.out, text)
    sys.stdout.write(text)


def cmd_mc(a):
    _check_grid(a)
    cfg = _fit_config(a)
    spec = _study(a, a.replicates)
    rep = run_monte_carlo(spec, cfg, k=a.grid_size, span=a.grid_span)
    summary = {
        "replicates": spec.replicates,
        "failed": rep.failed,
        "mean_rate": rep.mean_rate,
        "std_error": rep.std_error,
        "mean_rank": rep.mean_rank,
        "mean_frob_error": rep.mean_frob_error,
        "mean_frob_sq": rep.mean_frob_sq,
        "mean_best_rate": rep.mean_best_rate,
        "bayes_error": rep.bayes_error,
    }
    rows = [(i,) + row for i, row in enumerate(zip(
        rep.per_replicate_rates, rep.per_replicate_ranks, rep.per_replicate_frob_sq,
        rep.per_replicate_omegas, rep.per_replicate_best_rates))]
    text = io.format_report(
        [("study", _flatten("", spec.to_dict())), ("fit", cfg.to_dict()),
         ("grid", {"size": a.grid_size, "span": a.grid_span}), ("summary", summary)],
        [("replicates", ["index", "rate", "rank", "frob_sq", "omega", "best_rate"], rows)])
    io.atomic_write_text(a.out, text)
    se = "NA" if rep.std_error is None else f"{100 * rep.std_error:.2f}"
    print(f"mean rate {100 * rep.mean_rate:.2f}% (se {se}) over {len(rows)} replicates -> {a.out}")


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "tune": cmd_tune, "predict": cmd_predict,
            "evaluate": cmd_evaluate, "mc": cmd_mc}


def run_cli(argv=None) -> int:
    """Parse ``argv``, run the command and return its exit code."""
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        COMMANDS[a.command](a)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except MatLDAError as exc:
        # flag values were validated above, so anything left is about the data
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
