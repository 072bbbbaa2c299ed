#!/usr/bin/env python3
"""Context-restricted training: the same vector scores differently per context.

Builds a dataset with two tagged contexts whose group labels are reversed
with respect to the same feature regions, trains one model per tag on the
filtered groups, and scores a shared probe vector with each. The probe comes
out positive in the context that praises its region and negative in the one
that pans it, which is the point of restricting training to a context.
"""
import argparse
import json
import sys

import numpy as np

from milprop.data import Group, Instance, build_dataset, filter_groups
from milprop.inference import score_vector
from milprop.rng import make_rng
from milprop.training import Hyperparams, train


def build_two_context_dataset(seed: int, groups_per_context: int = 15):
    rng = make_rng(seed)
    instances, groups = [], []
    counter = 0
    for tag, flip in (("ctx-a", False), ("ctx-b", True)):
        for g in range(groups_per_context):
            around_plus = g % 2 == 0
            center = np.array([2.0, 0.0]) if around_plus else np.array([-2.0, 0.0])
            members = []
            for _ in range(6):
                feats = center + 0.5 * rng.standard_normal(2)
                inst_id = f"s{counter:05d}"
                counter += 1
                instances.append(Instance(inst_id, feats))
                members.append(inst_id)
            score = 1.0 if around_plus != flip else 0.0
            groups.append(Group(f"{tag}-g{g:03d}", tuple(members), score, (tag,)))
    return build_dataset(instances, groups)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--lr", type=float, default=0.001)
    args = parser.parse_args()

    dataset = build_two_context_dataset(args.seed)
    probe = np.array([2.0, 0.0])

    result = {"probe": probe.tolist(), "contexts": {}}
    for tag in ("ctx-a", "ctx-b"):
        restricted = filter_groups(dataset, tag=tag)
        model = train(restricted, Hyperparams(
            batch_groups=5, learning_rate=args.lr, seed=args.seed,
        ))
        result["contexts"][tag] = {
            "n_groups": restricted.n_groups,
            "probe_score": score_vector(model, probe),
        }

    a = result["contexts"]["ctx-a"]["probe_score"]
    b = result["contexts"]["ctx-b"]["probe_score"]
    result["polarity_reversed"] = (a > 0.5) != (b > 0.5)
    json.dump(result, sys.stdout, indent=2)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
