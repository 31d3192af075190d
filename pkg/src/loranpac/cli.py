"""Command-line entry point.

Subcommands: gen, lift, run, compare, spectrum, bounds. Delimited output
(CSV/JSON) is the primary interface; --plot additionally renders matplotlib
figures next to the CSVs. Exit codes: 0 success, 2 config error, 3 numeric
error, 4 format error.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, dataio, theory
from .baselines import NearestClassMean, RidgeConfig, RidgeLearner, truncated_offline
from .errors import (
    FormatError,
    InvalidInputError,
    LoRanPacError,
    NumericError,
    SizeCapError,
)
from .features import make_embedding, lift
from .harness import Protocol, build_stream, run as run_stream
from .solver import ContinualLearner, TruncationPolicy

DEFAULT_ZETA = 0.25
DEFAULT_RMAX = 10000
DEFAULT_LIFT_DIM = 2000


def _fail(code, message):
    print(f"error: {message}", file=sys.stderr)
    return code


def _merge_config(args, keys):
    """flags > config file > argparse defaults."""
    if not getattr(args, "config", None):
        return
    cfg = json.loads(Path(args.config).read_text())
    for key, value in cfg.items():
        if key not in keys:
            raise InvalidInputError(f"unknown config key {key!r}")
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _prepare_out_dir(path, force):
    out = Path(path)
    if out.exists() and any(out.iterdir()) and not force:
        raise InvalidInputError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args):
    spec_dict = json.loads(Path(args.spec).read_text())
    spec = dataio.SyntheticSpec(**spec_dict)
    train, test = dataio.gen_synthetic(spec, args.out)
    print(f"wrote {train} and {test}")
    return 0


def cmd_lift(args):
    labels, X = dataio.read_features(args.infile)
    emb = make_embedding(X.shape[0], args.dim, args.seed, allow_small_e=args.allow_small_e)
    dataio.write_features(args.out, labels, lift(emb, X))
    manifest = {"embedding": emb.config(), "source": str(args.infile)}
    Path(str(args.out) + ".manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"lifted {X.shape[1]} samples from d={X.shape[0]} to E={args.dim}")
    return 0


def _make_learner(method, dim, zeta, rmax, diagnostics=False):
    if method == "loranpac":
        return ContinualLearner(
            E=dim, policy=TruncationPolicy(zeta=zeta, r_max=rmax), record_diagnostics=diagnostics
        )
    if method == "minnorm":
        return ContinualLearner(
            E=dim, policy=TruncationPolicy(zeta=0.0, r_max=10**9), record_diagnostics=diagnostics
        )
    if method == "ranpac":
        return RidgeLearner(E=dim, cfg=RidgeConfig())
    if method == "ncm":
        return NearestClassMean(dim=dim)
    raise InvalidInputError(f"unknown method {method!r}")


def _write_accuracy_csv(path, A):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["task"] + [f"after_{t + 1}" for t in range(A.shape[1])])
        for i, row in enumerate(A):
            writer.writerow([i + 1] + ["" if np.isnan(v) else f"{v:.6f}" for v in row])


def _write_ledger_csv(path, rows):
    if not rows:
        return
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def _run_one(method, stream, dim, zeta, rmax):
    learner = _make_learner(method, dim, zeta, rmax)
    matrix = run_stream(stream, learner)
    metrics = {
        "method": method,
        "final_accuracy": matrix.final_accuracy(),
        "total_accuracy": matrix.total_accuracy(),
        "n_tasks": matrix.T,
        "evaluation_errors": matrix.errors,
    }
    if hasattr(learner, "chosen_lambda"):
        metrics["chosen_lambda"] = learner.chosen_lambda
    return learner, matrix, metrics


def _load_stream(args):
    train_labels, train_X = dataio.read_features(args.train)
    test_labels, test_X = dataio.read_features(args.test)
    protocol = Protocol.parse(args.protocol, order_seed=args.order_seed)
    stream = build_stream(train_labels, train_X, test_labels, test_X, protocol)
    return stream, train_X.shape[0], protocol


def _manifest(args, protocol, dim, extra=None):
    m = {
        "package_version": __version__,
        "numpy_version": np.__version__,
        "train": str(args.train),
        "test": str(args.test),
        "protocol": {"q1": protocol.q1, "q2": protocol.q2, "order_seed": protocol.order_seed},
        "zeta": args.zeta,
        "rmax": args.rmax,
        "feature_dim": dim,
    }
    if extra:
        m.update(extra)
    return m


def cmd_run(args):
    _merge_config(args, {"zeta", "rmax", "protocol", "order_seed", "method"})
    args.zeta = DEFAULT_ZETA if args.zeta is None else args.zeta
    args.rmax = DEFAULT_RMAX if args.rmax is None else args.rmax
    out = _prepare_out_dir(args.out, args.force)
    stream, dim, protocol = _load_stream(args)
    learner, matrix, metrics = _run_one(args.method, stream, dim, args.zeta, args.rmax)

    _write_accuracy_csv(out / "accuracy_matrix.csv", matrix.A)
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    (out / "manifest.json").write_text(
        json.dumps(_manifest(args, protocol, dim, {"method": args.method}), indent=2)
    )
    if hasattr(learner, "ledger"):
        _write_ledger_csv(out / "ledger.csv", learner.ledger.rows())
    if args.plot:
        from . import plots

        plots.plot_accuracy_matrix(matrix.A, out / "accuracy_matrix.png")
        if hasattr(learner, "ledger"):
            plots.plot_ledger(learner.ledger.rows(), out / "ledger.png")
    print(
        f"{args.method}: final={metrics['final_accuracy']:.4f} "
        f"total={metrics['total_accuracy']:.4f} ({matrix.T} tasks)"
    )
    return 0


def cmd_compare(args):
    args.zeta = DEFAULT_ZETA if args.zeta is None else args.zeta
    args.rmax = DEFAULT_RMAX if args.rmax is None else args.rmax
    out = _prepare_out_dir(args.out, args.force)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise InvalidInputError("no methods given")
    stream, dim, protocol = _load_stream(args)
    report = []
    for method in methods:
        _, matrix, metrics = _run_one(method, stream, dim, args.zeta, args.rmax)
        _write_accuracy_csv(out / f"accuracy_matrix_{method}.csv", matrix.A)
        if args.plot:
            from . import plots

            plots.plot_accuracy_matrix(matrix.A, out / f"accuracy_matrix_{method}.png", title=method)
        report.append(metrics)
        print(f"{method}: final={metrics['final_accuracy']:.4f} total={metrics['total_accuracy']:.4f}")
    (out / "comparison.json").write_text(json.dumps(report, indent=2))
    (out / "manifest.json").write_text(
        json.dumps(_manifest(args, protocol, dim, {"methods": methods}), indent=2)
    )
    return 0


def cmd_spectrum(args):
    _, X = dataio.read_features(args.infile)
    eig = theory.gram_spectrum(X)
    rows = theory.spectrum_rows(eig)
    with open(args.out, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["index", "eigenvalue", "effective_rank"])
        writer.writerows((i, repr(ev), repr(rk)) for i, ev, rk in rows)
    if args.plot:
        from . import plots

        plots.plot_spectrum(eig, Path(args.out).with_suffix(".png"))
    print(f"wrote {len(rows)} spectrum rows to {args.out}")
    return 0


def _replay_for_bounds(run_dir):
    manifest = json.loads((Path(run_dir) / "manifest.json").read_text())
    train_labels, train_X = dataio.read_features(manifest["train"])
    test_labels, test_X = dataio.read_features(manifest["test"])
    proto = manifest["protocol"]
    protocol = Protocol(q1=proto["q1"], q2=proto["q2"], order_seed=proto["order_seed"])
    stream = build_stream(train_labels, train_X, test_labels, test_X, protocol)
    learner = ContinualLearner(
        E=train_X.shape[0],
        policy=TruncationPolicy(zeta=manifest["zeta"], r_max=manifest["rmax"]),
        record_diagnostics=True,
    )
    for task in stream:
        learner.observe_task(task.train)
    sidecar_path = Path(manifest["train"]).parent / "sidecar.npz"
    sidecar = dict(np.load(sidecar_path)) if sidecar_path.exists() else {}
    return learner, stream, test_X, sidecar


def _require_w_star(sidecar, which):
    if "W_star" not in sidecar:
        raise InvalidInputError(
            f"{which} needs the planted ground truth; no sidecar.npz next to the training file"
        )
    return sidecar["W_star"]


def cmd_bounds(args):
    learner, stream, test_X, sidecar = _replay_for_bounds(args.run)
    H_blocks = [h for h, _ in learner.task_log]
    H = np.hstack(H_blocks)
    state, ledger = learner.state, learner.ledger
    rng = np.random.default_rng(args.noise_seed)

    which = args.which
    if which == "lemma1":
        residual = theory.lemma1_residual(H_blocks, state, learner.tail_log)
        result = {"which": "lemma1", "residual": residual, "satisfied": residual <= 1e-6}
        print(f"lemma1 residual = {residual:.3e}")
    elif which == "prop1":
        report = theory.eval_projection_bound(state, H_blocks, ledger)
        result = report.__dict__
    elif which == "thm6":
        drift = theory.eval_factor_drift(state, H_blocks, ledger)
        result = {
            "sigma": drift.sigma.__dict__,
            "subspace": drift.subspace.__dict__ if drift.subspace else None,
            "hypothesis_met": drift.hypothesis_met,
            "gap": drift.gap,
        }
    elif which in ("thm1", "thm3", "thm4"):
        W_star = _require_w_star(sidecar, which)
        Y = W_star @ H
        if which == "thm1":
            report = theory.eval_training_bound(W_star, np.zeros((W_star.shape[0], 0)), ledger, H, Y, state)
        else:
            report = theory.eval_gaussian_bounds(which, W_star, args.nu, ledger, H, state, rng)
        result = report.__dict__
    elif which in ("thm2", "thm5"):
        W_star = _require_w_star(sidecar, which)
        pool = test_X
        if which == "thm2":
            Y = W_star @ H
            eps = np.zeros((W_star.shape[0], pool.shape[1]))
            report = theory.eval_test_bound(
                W_star, np.zeros((W_star.shape[0], 0)), ledger, H, Y, state, pool, eps
            )
        else:
            report = theory.eval_gaussian_bounds("thm5", W_star, args.nu, ledger, H, state, rng, pool_h=pool)
        result = report.__dict__
    elif which == "thm7":
        W_star = _require_w_star(sidecar, which)
        Y = W_star @ H
        W_online = theory.classifier_from(Y, H, state)
        W_offline = truncated_offline(H, Y, state.k).W
        gap = theory.batch_gap(H, state.k)
        report = theory.eval_offline_online_distance(W_offline, W_online, ledger, W_star, gap)
        result = report.__dict__
    else:
        raise InvalidInputError(f"unknown bound id {which!r}")

    out = Path(args.run) / f"bounds_{which}.json"
    out.write_text(json.dumps(result, indent=2, default=float))
    if "satisfied" in result:
        print(f"{which}: satisfied={result['satisfied']}")
    print(f"wrote {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="loranpac", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic feature files")
    p.add_argument("--spec", required=True, help="JSON file with SyntheticSpec fields")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("lift", help="apply the random ReLU feature lift")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--dim", type=int, default=DEFAULT_LIFT_DIM)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-small-e", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lift)

    def stream_args(p):
        p.add_argument("--train", required=True)
        p.add_argument("--test", required=True)
        p.add_argument("--protocol", default="B0-Inc1")
        p.add_argument("--order-seed", type=int, default=0)
        p.add_argument("--zeta", type=float, default=None)
        p.add_argument("--rmax", type=int, default=None)
        p.add_argument("--out", required=True)
        p.add_argument("--force", action="store_true")
        p.add_argument("--plot", action="store_true")

    p = sub.add_parser("run", help="full continual run of one method")
    p.add_argument("--method", choices=["loranpac", "minnorm", "ranpac", "ncm"], default="loranpac")
    p.add_argument("--config", help="JSON config; flags override it")
    stream_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="paired runs of several methods on one stream")
    p.add_argument("--methods", required=True, help="comma-separated method list")
    stream_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("spectrum", help="Gram spectrum and effective ranks to CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("bounds", help="evaluate a bound on a completed run directory")
    p.add_argument("--run", required=True)
    p.add_argument(
        "--which",
        required=True,
        choices=["thm1", "thm2", "thm3", "thm4", "thm5", "prop1", "thm6", "thm7", "lemma1"],
    )
    p.add_argument("--nu", type=float, default=0.1, help="noise level for the Gaussian variants")
    p.add_argument("--noise-seed", type=int, default=0)
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        return _fail(4, str(exc))
    except (InvalidInputError, FileNotFoundError, json.JSONDecodeError, SizeCapError) as exc:
        return _fail(2, str(exc))
    except (NumericError, np.linalg.LinAlgError) as exc:
        return _fail(3, str(exc))
    except LoRanPacError as exc:
        return _fail(3, str(exc))


if __name__ == "__main__":
    sys.exit(main())
