#!/usr/bin/env python3
"""Regenerates data/cora, a synthetic stand-in for the public Cora citation
graph. The fixture reproduces Cora's headline statistics exactly where tests
pin them (2708 nodes, 5278 undirected edges, 1433 binary features, 7 classes,
edge homophily ~= 0.81) without shipping or downloading the real dataset.

Everything is drawn from one seeded Mersenne Twister, so reruns are
byte-identical. Edges are written once per unordered pair with u < v.
"""

import argparse
import pathlib
import random

N = 2708
DIM = 1433
# class sizes matching the public Cora label histogram
CLASS_SIZES = [351, 217, 418, 818, 426, 298, 180]
INTRA_EDGES = 4275   # same-class pairs; 4275 / 5278 ~= 0.80997
INTER_EDGES = 1003
TRAIN_PER_CLASS = 20
VAL_NODES = 500
TEST_NODES = 1000
TOPIC_WIDTH = 200    # feature columns reserved per class
TOPIC_ON = 0.08      # P(feature=1) inside the class topic block
BACKGROUND_ON = 0.003

def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/cora")
    ap.add_argument("--seed", type=int, default=20240917)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    assert sum(CLASS_SIZES) == N

    # scatter class labels over node ids
    labels = []
    for c, size in enumerate(CLASS_SIZES):
        labels.extend([c] * size)
    rng.shuffle(labels)
    by_class = [[] for _ in CLASS_SIZES]
    for node, c in enumerate(labels):
        by_class[c].append(node)

    # sample exact intra- and inter-class edge counts, one pair at a time
    edges = set()

    def add_edges(count: int, same_class: bool) -> None:
        added = 0
        while added < count:
            u = rng.randrange(N)
            if same_class:
                v = by_class[labels[u]][rng.randrange(len(by_class[labels[u]]))]
            else:
                v = rng.randrange(N)
                if labels[v] == labels[u]:
                    continue
            if u == v:
                continue
            pair = (min(u, v), max(u, v))
            if pair in edges:
                continue
            edges.add(pair)
            added += 1

    add_edges(INTRA_EDGES, True)
    add_edges(INTER_EDGES, False)
    assert len(edges) == INTRA_EDGES + INTER_EDGES

    with open(out / "edges.tsv", "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u}\t{v}\n")

    with open(out / "labels.tsv", "w") as f:
        for c in labels:
            f.write(f"{c}\n")

    # sparse binary rows: a dense-ish block of topic words plus background noise
    with open(out / "features.csv", "w") as f:
        for node in range(N):
            topic = labels[node] * TOPIC_WIDTH
            row = ["0"] * DIM
            for j in range(DIM):
                p = TOPIC_ON if topic <= j < topic + TOPIC_WIDTH else BACKGROUND_ON
                if rng.random() < p:
                    row[j] = "1"
            f.write(",".join(row))
            f.write("\n")

    # the usual planted split: 20 train nodes per class, then 500/1000 val/test
    roles = ["none"] * N
    leftover = []
    for c in range(len(CLASS_SIZES)):
        picks = rng.sample(by_class[c], TRAIN_PER_CLASS)
        for node in picks:
            roles[node] = "train"
        leftover.extend(n for n in by_class[c] if n not in set(picks))
    rng.shuffle(leftover)
    for node in leftover[:VAL_NODES]:
        roles[node] = "val"
    for node in leftover[VAL_NODES:VAL_NODES + TEST_NODES]:
        roles[node] = "test"

    with open(out / "masks.tsv", "w") as f:
        for role in roles:
            f.write(role + "\n")

    same = sum(1 for u, v in edges if labels[u] == labels[v])
    print(f"wrote {out}: n={N} edges={len(edges)} homophily={same / len(edges):.6f}")

if __name__ == "__main__":
    main()
