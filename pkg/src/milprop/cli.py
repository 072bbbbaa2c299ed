"""Command-line entry point: train / predict / evaluate / attribute / synth.

Exit codes: 0 success, 1 data or validation error, 2 usage error.
Diagnostics go to stderr; machine-readable output goes to files or stdout.
Every flag default matches the library default, and all randomness flows
from --seed through the package generator.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import synth as synthmod
from .data import (
    DataError,
    eval_true_labels,
    filter_groups,
    load_dataset,
    load_instances,
    stats,
    write_groups,
    write_instances,
)
from .inference import (
    NeutralBand,
    attribute,
    calibrate_band,
    evaluate_groups,
    evaluate_instances,
    predict_instances,
    realized_recall,
    score_instances,
)
from .objective import Theta, gradient, lambda_from_alpha, make_batch
from .rng import make_rng
from .training import (
    Hyperparams,
    ModelIOError,
    TrainingError,
    load_model,
    save_model,
    train,
)

GRADCHECK_TOLERANCE = 1e-5


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--instances", required=True, help="instances JSONL path")


def _add_hyperparam_flags(p: argparse.ArgumentParser) -> None:
    hp = Hyperparams()
    p.add_argument("--alpha", type=float, default=hp.alpha_tradeoff,
                   help="trade-off between smoothness and group fidelity")
    p.add_argument("--lr", type=float, default=hp.learning_rate,
                   help="SGD learning rate")
    p.add_argument("--batch-groups", type=int, default=hp.batch_groups,
                   help="groups per mini-batch")
    p.add_argument("--inner-iters", type=int, default=hp.inner_iters,
                   help="SGD iterations per mini-batch")
    p.add_argument("--epochs", type=int, default=hp.epochs,
                   help="passes over the group list")
    p.add_argument("--max-iters", type=int, default=hp.max_total_iters,
                   help="hard cap on total SGD iterations")
    p.add_argument("--gamma", type=float, default=hp.gamma,
                   help="similarity bandwidth (multiplies squared distance)")
    p.add_argument("--bias", action="store_true",
                   help="add a bias term to the logistic scorer")
    p.add_argument("--lambda-scope", choices=("batch", "global"),
                   default=hp.lambda_scope,
                   help="compute lambda from batch-local or global counts")
    p.add_argument("--knn", type=int, default=None,
                   help="use a global k-nearest-neighbour graph instead of "
                        "dense batch-local graphs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="milprop",
        description="Transfer group-level labels to the instances in the groups.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("synth", formatter_class=fmt,
                       help="generate a synthetic labelled bag dataset")
    cfg = synthmod.SynthConfig()
    p.add_argument("--out-dir", required=True, help="directory for output files")
    p.add_argument("--dim", type=int, default=cfg.dim, help="feature dimension")
    p.add_argument("--n-groups", type=int, default=cfg.n_groups,
                   help="number of groups")
    p.add_argument("--group-size", type=int, default=10,
                   help="instances per group")
    p.add_argument("--noise-std", type=float, default=cfg.noise_std,
                   help="within-class Gaussian noise")
    p.add_argument("--composition", choices=("fixed", "uniform", "bernoulli"),
                   default=cfg.composition,
                   help="how positives are spread over groups")
    p.add_argument("--positive-fraction", type=float, default=cfg.positive_fraction,
                   help="positive rate for fixed/bernoulli composition")
    p.add_argument("--score-mode", choices=("proportion", "binary_majority"),
                   default=cfg.score_mode, help="group score construction")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", formatter_class=fmt,
                       help="train a model from instances and group scores")
    p.add_argument("--instances", required=True, help="instances JSONL path")
    p.add_argument("--groups", required=True, help="groups JSONL path")
    p.add_argument("--model", required=True, help="output model JSON path")
    _add_hyperparam_flags(p)
    p.add_argument("--filter-tag", default=None,
                   help="train only on groups carrying this tag")
    p.add_argument("--seed", type=int, default=0, help="shuffling seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for graph construction")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", formatter_class=fmt,
                       help="score instances with a trained model")
    _add_model_flags(p)
    p.add_argument("--out", default=None, help="predictions JSONL (default stdout)")
    p.add_argument("--band", type=float, default=NeutralBand().b,
                   help="neutral band half-width")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval-instances", formatter_class=fmt,
                       help="precision/recall of instance predictions "
                            "against labels in the instances file")
    _add_model_flags(p)
    p.add_argument("--band", type=float, default=NeutralBand().b,
                   help="neutral band half-width")
    p.add_argument("--policy", choices=("ignore-neutral", "no-neutral-band"),
                   default="ignore-neutral", help="neutral handling")
    p.add_argument("--out", default=None, help="metrics JSON (default stdout)")
    p.set_defaults(func=_cmd_eval_instances)

    p = sub.add_parser("eval-groups", formatter_class=fmt,
                       help="group classification accuracy on binary scores")
    _add_model_flags(p)
    p.add_argument("--groups", required=True, help="groups JSONL path")
    p.add_argument("--out", default=None, help="accuracy JSON (default stdout)")
    p.set_defaults(func=_cmd_eval_groups)

    p = sub.add_parser("attribute", formatter_class=fmt,
                       help="per-member score report for one group")
    _add_model_flags(p)
    p.add_argument("--groups", required=True, help="groups JSONL path")
    p.add_argument("--group-id", required=True, help="group to attribute")
    p.add_argument("--band", type=float, default=NeutralBand().b,
                   help="neutral band half-width")
    p.add_argument("--json", action="store_true", help="emit JSON, not a table")
    p.set_defaults(func=_cmd_attribute)

    p = sub.add_parser("calibrate", formatter_class=fmt,
                       help="find the widest band meeting a recall target")
    _add_model_flags(p)
    p.add_argument("--target-recall", type=float, default=0.762,
                   help="required decided fraction")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("gradcheck", formatter_class=fmt,
                       help="check the analytic gradient against finite "
                            "differences on random small problems")
    p.add_argument("--seed", type=int, default=0, help="problem generator seed")
    p.add_argument("--trials", type=int, default=20, help="random problems to run")
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def _hp_from_args(args: argparse.Namespace) -> Hyperparams:
    return Hyperparams(
        alpha_tradeoff=args.alpha,
        learning_rate=args.lr,
        batch_groups=args.batch_groups,
        inner_iters=args.inner_iters,
        epochs=args.epochs,
        max_total_iters=args.max_iters,
        gamma=args.gamma,
        use_bias=args.bias,
        lambda_scope=args.lambda_scope,
        knn=args.knn,
        seed=args.seed,
    )


def _write_or_print(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _cmd_synth(args: argparse.Namespace) -> int:
    config = synthmod.SynthConfig(
        dim=args.dim,
        n_groups=args.n_groups,
        group_size=args.group_size,
        positive_mean=tuple([2.0] + [0.0] * (args.dim - 1)),
        negative_mean=tuple([-2.0] + [0.0] * (args.dim - 1)),
        noise_std=args.noise_std,
        composition=args.composition,
        positive_fraction=args.positive_fraction,
        score_mode=args.score_mode,
        seed=args.seed,
    )
    dataset = synthmod.generate(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_instances(dataset.instances, str(out_dir / "instances.jsonl"))
    write_groups(dataset.groups, str(out_dir / "groups.jsonl"))
    summary = stats(dataset)
    print(
        f"wrote {summary.n_instances} instances in {summary.n_groups} groups "
        f"(dim {summary.dim}) to {out_dir}",
        file=sys.stderr,
    )
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    if args.threads < 1:
        raise ValueError("--threads must be >= 1")
    dataset = load_dataset(args.instances, args.groups)
    if args.filter_tag is not None:
        dataset = filter_groups(dataset, tag=args.filter_tag)
    model = train(dataset, _hp_from_args(args), workers=args.threads)
    save_model(model, args.model)
    print(
        f"trained {model.summary.iterations} iterations, final batch "
        f"objective {model.summary.final_objective:.6g}; model -> {args.model}",
        file=sys.stderr,
    )
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    instances = load_instances(args.instances, dim=model.dim)
    band = NeutralBand(args.band)
    lines = [
        json.dumps({"id": p.id, "score": p.score, "label": p.label})
        for p in predict_instances(model, instances, band)
    ]
    _write_or_print("".join(line + "\n" for line in lines), args.out)
    return 0


def _cmd_eval_instances(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    instances = load_instances(args.instances, dim=model.dim)
    truths = eval_true_labels(instances)
    band = NeutralBand(args.band)
    policy = args.policy.replace("-", "_")
    report = evaluate_instances(
        predict_instances(model, instances, band), list(truths), policy
    )
    payload = {
        "precision": report.precision,
        "recall": report.recall,
        "accuracy": report.accuracy,
        "counts": asdict(report.counts),
        "neutral_policy": report.neutral_policy,
        "band": band.b,
    }
    _write_or_print(json.dumps(payload) + "\n", args.out)
    return 0


def _cmd_eval_groups(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.instances, args.groups, dim=model.dim)
    accuracy = evaluate_groups(model, dataset)
    payload = {"accuracy": accuracy, "n_groups": dataset.n_groups}
    _write_or_print(json.dumps(payload) + "\n", args.out)
    return 0


def _cmd_attribute(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.instances, args.groups, dim=model.dim)
    group = dataset.group(args.group_id)
    report = attribute(model, group, dataset, NeutralBand(args.band))
    if args.json:
        payload = {
            "group_id": report.group_id,
            "group_score": report.group_score,
            "group_label": report.group_label,
            "members": [asdict(m) for m in report.members],
        }
        sys.stdout.write(json.dumps(payload) + "\n")
    else:
        print(f"group {report.group_id}  score {report.group_score:.6f}  "
              f"label {report.group_label}")
        print(f"{'member':<16} {'score':>10}  label")
        for m in report.members:
            print(f"{m.id:<16} {m.score:>10.6f}  {m.label}")
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    instances = load_instances(args.instances, dim=model.dim)
    scores = score_instances(model, instances)
    band = calibrate_band(scores, args.target_recall)
    payload = {
        "b": band.b,
        "target_recall": args.target_recall,
        "realized_recall": realized_recall(scores, band),
        "n_scores": int(scores.size),
    }
    sys.stdout.write(json.dumps(payload) + "\n")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    rng = make_rng(args.seed)
    worst = 0.0
    for trial in range(args.trials):
        dim = int(rng.integers(1, 9))
        config = synthmod.SynthConfig(
            dim=dim,
            n_groups=int(rng.integers(1, 5)),
            group_size=(1, 3),
            positive_mean=tuple(rng.normal(size=dim)),
            negative_mean=tuple(rng.normal(size=dim)),
            noise_std=0.8,
            seed=int(rng.integers(0, 2**31)),
        )
        dataset = synthmod.generate(config)
        use_bias = trial % 2 == 1
        theta = Theta(
            rng.normal(scale=0.5, size=dim),
            float(rng.normal(scale=0.5)) if use_bias else None,
        )
        gamma = float(rng.uniform(0.2, 2.0))
        lam = lambda_from_alpha(
            float(rng.uniform(0.0, 0.1)), dataset.n_instances, dataset.n_groups
        )
        batch = make_batch(dataset, dataset.groups, gamma=gamma, lam=lam)
        analytic = gradient(theta, batch)
        numeric = synthmod.oracle_gradient(theta, dataset, gamma, lam)
        rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
        worst = max(worst, float(rel.max()))
    payload = {
        "max_rel_error": worst,
        "trials": args.trials,
        "tolerance": GRADCHECK_TOLERANCE,
    }
    sys.stdout.write(json.dumps(payload) + "\n")
    return 0 if worst < GRADCHECK_TOLERANCE else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage error, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        print(f"error: file not found: {err.filename}", file=sys.stderr)
        return 1
    except (DataError, ModelIOError, TrainingError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
