#!/usr/bin/env python3
"""Sweep the neutral band and emit precision/recall rows as data.

Scores a labelled instances file with a trained model, then widens the band
from 0 outward. Each row shows how abstaining on near-0.5 scores trades
recall for precision. Output is CSV (default) or JSON lines; plot it with
whatever you like.
"""
import argparse
import json
import sys

import numpy as np

from milprop.data import eval_true_labels, load_instances
from milprop.inference import NeutralBand, evaluate_instances, predict_instances
from milprop.training import load_model


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", required=True)
    parser.add_argument("--instances", required=True,
                        help="instances JSONL with ground-truth labels")
    parser.add_argument("--steps", type=int, default=50)
    parser.add_argument("--max-band", type=float, default=0.45)
    parser.add_argument("--json", action="store_true", help="JSON lines output")
    args = parser.parse_args()

    model = load_model(args.model)
    instances = load_instances(args.instances, dim=model.dim)
    truths = list(eval_true_labels(instances))

    if not args.json:
        print("band,recall,precision,accuracy,neutral")
    for b in np.linspace(0.0, args.max_band, args.steps):
        preds = predict_instances(model, instances, NeutralBand(float(b)))
        report = evaluate_instances(preds, truths)
        row = {
            "band": float(b),
            "recall": report.recall,
            "precision": report.precision,
            "accuracy": report.accuracy,
            "neutral": report.counts.neutral,
        }
        if args.json:
            print(json.dumps(row))
        else:
            precision = "" if row["precision"] is None else f"{row['precision']:.6f}"
            print(f"{b:.6f},{row['recall']:.6f},{precision},"
                  f"{row['accuracy']:.6f},{row['neutral']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
