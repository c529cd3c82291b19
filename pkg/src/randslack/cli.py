"""Command-line interface.

Subcommands: gen, train, infer, verify, bound, bench. Exit codes: 0 on
success (for verify: all selected checks passed), 1 on validation error or a
failed check, 2 on internal error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from .bounds import compute_bound_report
from .errors import RandslackError
from .features import ModelParams, SyntheticFeatureMap
from .harness.datasets import (
    Dataset,
    generate_matching,
    generate_synthetic,
    load_dataset,
    save_dataset,
    synthetic_space,
)
from .harness.experiment import results_to_csv, results_to_text, run_experiment
from .inference import exact_decode, random_decode
from .learning import Method, TrainConfig, train
from .rng import derive_key
from .sampling import build_proposal_set, proposal_set_size
from .structures import Kind, beta_constant, output_to_text
from .verification import run_checks


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("LS_THREADS")
    return int(env) if env else 1


def _space_kind(name: str) -> Kind:
    try:
        return Kind(name)
    except ValueError:
        raise UsageError(f"unknown space {name!r}") from None


def _cmd_gen(args) -> int:
    if args.space == "match":
        dataset = generate_matching(args.v, args.n, args.noise, args.seed)
    else:
        space = synthetic_space(_space_kind(args.space), args.v, args.b)
        dataset = generate_synthetic(space, args.n, args.seed)
    save_dataset(dataset, args.out)
    print(f"wrote {args.n} samples to {args.out}")
    return 0


def _featmap_for(dataset: Dataset):
    if dataset.protocol_tag == "matching":
        from .features import MatchingFeatureMap
        from .harness.datasets import MATCHING_DESCRIPTOR_DIM

        return MatchingFeatureMap(MATCHING_DESCRIPTOR_DIM)
    return SyntheticFeatureMap(dataset.space)


def _cmd_train(args) -> int:
    dataset = load_dataset(args.infile)
    featmap = _featmap_for(dataset)
    config = TrainConfig(
        method=Method(args.method),
        iterations=args.iters,
        lam=args.lam,
        eta0=args.eta0,
        seed=args.seed,
    )
    report = train(dataset, dataset.space, featmap, config)
    doc = {
        "method": args.method,
        "objective_trace": report.objective_trace,
        "wall_time_s": report.wall_time,
        "proposal_draw_count": report.proposal_draw_count,
        "w_final": report.w_final.w.tolist(),
    }
    Path(args.out).write_text(json.dumps(doc, sort_keys=True, indent=1))
    print(
        f"trained {args.method}: objective {report.objective_trace[0]:.4f} ->"
        f" {report.objective_trace[-1]:.4f} in {report.wall_time:.2f}s"
    )
    return 0


def _load_weights(path: str) -> np.ndarray:
    doc = json.loads(Path(path).read_text())
    return np.array(doc["w_final"] if "w_final" in doc else doc, dtype=np.float64)


def _cmd_infer(args) -> int:
    dataset = load_dataset(args.infile)
    featmap = _featmap_for(dataset)
    w = _load_weights(args.weights)
    space = dataset.space
    predictions = []
    for i, (x, _) in enumerate(dataset.samples):
        if args.mode == "exact":
            dec = exact_decode(w, x, space, featmap)
        else:
            pset = build_proposal_set(
                w, x, space, featmap, args.draws, derive_key(args.seed, i)
            )
            dec = random_decode(w, x, pset, featmap)
        predictions.append(
            {
                "y": output_to_text(space, dec.point.output),
                "latent": dec.point.latent,
                "score": dec.score,
            }
        )
    doc = {"mode": args.mode, "predictions": predictions}
    if args.out:
        Path(args.out).write_text(json.dumps(doc, sort_keys=True, indent=1))
    else:
        print(json.dumps(doc, sort_keys=True, indent=1))
    return 0


def _cmd_verify(args) -> int:
    flags = dict(
        beta=args.beta or args.all,
        derangements=args.derangements or args.all,
        change_of_measure=args.change_of_measure or args.all,
        low_norm=args.low_norm or args.all,
        ordering=args.ordering or args.all,
    )
    if not any(flags.values()):
        raise UsageError("select at least one check (or --all)")
    entries = run_checks(**flags, trials=args.trials, seed=args.seed)
    manifest = {"checks": entries, "all_pass": all(e["pass"] for e in entries)}
    if args.out:
        Path(args.out).write_text(json.dumps(manifest, sort_keys=True, indent=1))
    for e in entries:
        print(f"[{'pass' if e['pass'] else 'FAIL'}] {e['name']}: {e['detail']}")
    return 0 if manifest["all_pass"] else 1


def _cmd_bound(args) -> int:
    dataset = load_dataset(args.infile)
    featmap = _featmap_for(dataset)
    w = _load_weights(args.weights)
    report = compute_bound_report(
        w, dataset, dataset.space, featmap, delta=args.delta, draws=args.draws,
        seed=args.seed,
    )
    rows = [
        ("posterior center scale alpha", report.alpha),
        ("Monte-Carlo distortion mean", report.gibbs_mean),
        ("Monte-Carlo distortion stderr", report.gibbs_stderr),
        ("certificate (full maximum)", report.rhs_all),
        ("certificate (sampled maximum)", report.rhs_sampled),
    ]
    for label, value in rows:
        print(f"{label:<32} {value:.6f}")
    for key, value in sorted(report.inputs.items()):
        print(f"  input {key:<10} {value}")
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1))
    return 0


def _cmd_bench(args) -> int:
    space = synthetic_space(_space_kind(args.space), args.v, args.b)
    results = run_experiment(
        space,
        methods=["all", "random", "lssvm"],
        reps=args.reps,
        n_train=args.n_train,
        n_test=args.n_test,
        seed=args.seed,
        threads=_threads(args),
    )
    print(results_to_text(results, args.space))
    csv_text = results_to_csv(results, args.space)
    if args.out:
        Path(args.out).write_text(csv_text)
        print(f"wrote {args.out}")
    else:
        print(csv_text, end="")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="randslack")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset")
    p.add_argument("--space", required=True, choices=["tree", "dag", "set", "perm", "match"])
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--b", type=int, default=0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("train", help="train one method on a dataset")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--method", required=True, choices=["all", "random", "lssvm"])
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--eta0", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("infer", help="decode a dataset with trained weights")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--mode", choices=["exact", "random"], default="exact")
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_infer)

    p = sub.add_parser("verify", help="run the brute-force oracle checks")
    p.add_argument("--all", action="store_true")
    p.add_argument("--beta", action="store_true")
    p.add_argument("--derangements", action="store_true")
    p.add_argument("--change-of-measure", dest="change_of_measure", action="store_true")
    p.add_argument("--low-norm", dest="low_norm", action="store_true")
    p.add_argument("--ordering", action="store_true")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("bound", help="evaluate the PAC-Bayes diagnostics")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_bound)

    p = sub.add_parser("bench", help="benchmark the three methods")
    p.add_argument("--space", required=True, choices=["tree", "dag", "set", "perm"])
    p.add_argument("--v", type=int, default=4)
    p.add_argument("--b", type=int, default=0)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--n-train", dest="n_train", type=int, default=100)
    p.add_argument("--n-test", dest="n_test", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (RandslackError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # internal failure
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
