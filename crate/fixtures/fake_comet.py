#!/usr/bin/env python3
"""Stand-in for the COMET sidecar: same arguments, same files. Scores are
token-overlap F1 between mt and ref, so they are deterministic."""

import argparse
import json


def tokens(s):
    return [w.lower() for w in "".join(c if c.isalnum() else " " for c in s).split()]


def overlap(mt, ref):
    a, b = tokens(mt), tokens(ref)
    if not a or not b:
        return 0.0
    common = sum(min(a.count(w), b.count(w)) for w in set(a))
    if common == 0:
        return 0.0
    p, r = common / len(a), common / len(b)
    return 2 * p * r / (p + r)


ap = argparse.ArgumentParser()
ap.add_argument("--model", required=True)
ap.add_argument("--batch-size", type=int, default=16)
dev = ap.add_mutually_exclusive_group()
dev.add_argument("--gpu", action="store_true")
dev.add_argument("--cpu", action="store_true")
ap.add_argument("input")
ap.add_argument("output")
args = ap.parse_args()

with open(args.input, encoding="utf-8") as f, open(args.output, "w", encoding="utf-8") as out:
    for line in f:
        t = json.loads(line)
        score = round(overlap(t["mt"], t["ref"]), 6)
        out.write(json.dumps({"entry_id": t["entry_id"], "score": score, "model_id": args.model}) + "\n")
