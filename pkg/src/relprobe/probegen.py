"""Generation of the 14 probing-task datasets from corpus annotations.

Raw values for the binned tasks (SentLen, ArgDist, TreeDepth, SDPTreeDepth)
are grouped by empirical quantiles fitted on the training split only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from . import deptree

TASKS = (
    "SentLen", "ArgDist", "EntExist", "TreeDepth", "SDPTreeDepth", "ArgOrd",
    "PosHeadL", "PosHeadR", "PosTailL", "PosTailR",
    "TypeHead", "TypeTail", "GRHead", "GRTail",
)

BINNED_TASKS = ("SentLen", "ArgDist", "TreeDepth", "SDPTreeDepth")

# grammatical roles kept verbatim; everything else maps to "other"
GR_CLASSES = ("nsubj", "nsubjpass", "dobj", "iobj")

TREE_DEPTH_CLAMP = 15

# per-profile bin counts for the binned tasks
PROFILES = {
    "tacred": {"SentLen": 10, "ArgDist": 10, "TreeDepth": 10, "SDPTreeDepth": 6},
    "semeval": {"SentLen": 7, "ArgDist": 5, "TreeDepth": 7, "SDPTreeDepth": 4},
}

# tasks excluded per profile
EXCLUDED = {"tacred": (), "semeval": ("ArgOrd", "EntExist")}

BOUNDARY_LEFT = "<S>"
BOUNDARY_RIGHT = "</S>"


@dataclass(frozen=True)
class BinSpec:
    """Ascending upper bounds; the last is +inf. assign() is total."""

    boundaries: tuple

    @property
    def n_bins(self):
        return len(self.boundaries)

    def assign(self, value):
        for i, b in enumerate(self.boundaries):
            if value <= b:
                return i
        return len(self.boundaries) - 1

    def label(self, value):
        return "bin%02d" % self.assign(value)

    def labels(self):
        return tuple("bin%02d" % i for i in range(self.n_bins))


def quantile_bins(values, n) -> BinSpec:
    """Boundaries at the k/n empirical quantiles, duplicates merged.

    Boundaries at or above the maximum are dropped (covered by the final
    +inf bin), so all-equal input collapses to a single bin.
    """
    values = sorted(values)
    if not values:
        raise ValueError("values must be non-empty")
    if n < 2:
        raise ValueError("bin count must be >= 2")
    m = len(values)
    candidates = []
    for k in range(1, n):
        idx = math.ceil(k * m / n) - 1
        candidates.append(values[idx])
    boundaries = []
    for b in candidates:
        if b >= values[-1]:
            break
        if not boundaries or b > boundaries[-1]:
            boundaries.append(b)
    boundaries.append(math.inf)
    return BinSpec(boundaries=tuple(boundaries))


@dataclass(frozen=True)
class ProbingDataset:
    task: str
    labels: tuple
    splits: dict  # split name -> tuple of (sentence id, label)
    bin_spec: BinSpec | None = None


class TreeCache:
    """Lazily built DepTrees keyed by sentence id."""

    def __init__(self):
        self._trees = {}

    def get(self, s):
        t = self._trees.get(s.id)
        if t is None:
            t = deptree.build_tree(s.dep_head)
            self._trees[s.id] = t
        return t


def extract(task, s, trees: TreeCache):
    """Raw probing label of one sentence; a pure function of the annotations."""
    if task == "SentLen":
        return len(s)
    if task == "ArgDist":
        return _arg_distance(s)
    if task == "EntExist":
        lo = min(s.head.end, s.tail.end) + 1
        hi = max(s.head.start, s.tail.start)
        return "yes" if any(s.ner[i] != "O" for i in range(lo, hi)) else "no"
    if task == "TreeDepth":
        return min(deptree.tree_depth(trees.get(s)), TREE_DEPTH_CLAMP)
    if task == "SDPTreeDepth":
        t = trees.get(s)
        return deptree.sdp(t, s.head, s.tail).depth
    if task == "ArgOrd":
        return "head-first" if s.head.end < s.tail.start else "tail-first"
    if task in ("PosHeadL", "PosHeadR", "PosTailL", "PosTailR"):
        span = s.head if "Head" in task else s.tail
        if task.endswith("L"):
            return s.pos[span.start - 1] if span.start > 0 else BOUNDARY_LEFT
        return s.pos[span.end + 1] if span.end + 1 < len(s) else BOUNDARY_RIGHT
    if task in ("TypeHead", "TypeTail"):
        span = s.head if task == "TypeHead" else s.tail
        return s.ner[deptree.span_root(trees.get(s), span)]
    if task in ("GRHead", "GRTail"):
        span = s.head if task == "GRHead" else s.tail
        label = s.dep_label[deptree.span_root(trees.get(s), span)]
        return label if label in GR_CLASSES else "other"
    raise ValueError("unknown task: %s" % task)


def _arg_distance(s):
    """Tokens strictly between the two argument spans."""
    if s.head.end < s.tail.start:
        return s.tail.start - s.head.end - 1
    return s.head.start - s.tail.end - 1


def build_task(task, corpus, profile="tacred", trees=None) -> ProbingDataset:
    """Build one probing dataset; bins are fitted on train raw values only."""
    if task not in TASKS:
        raise ValueError("unknown task: %s" % task)
    if isinstance(profile, str):
        if profile not in PROFILES:
            raise ValueError("unknown profile: %s" % profile)
        if task in EXCLUDED[profile]:
            raise ValueError("task %s excluded for this profile" % task)
        bin_counts = PROFILES[profile]
    else:
        bin_counts = dict(profile)
    trees = trees or TreeCache()
    raw = {
        name: [(s.id, extract(task, s, trees)) for s in split]
        for name, split in (("train", corpus.train), ("validation", corpus.validation),
                            ("test", corpus.test))
    }
    if task in BINNED_TASKS:
        spec = quantile_bins([v for _, v in raw["train"]], bin_counts[task])
        splits = {name: tuple((sid, spec.label(v)) for sid, v in items)
                  for name, items in raw.items()}
        labels = spec.labels()
        return ProbingDataset(task=task, labels=labels, splits=splits, bin_spec=spec)
    if task in ("GRHead", "GRTail"):
        train_set = {v for _, v in raw["train"]}
        labels = tuple(l for l in GR_CLASSES if l in train_set) + ("other",)
        # roles unseen in train fold into "other" for the held-out splits
        splits = {name: tuple((sid, v if v in labels else "other") for sid, v in items)
                  for name, items in raw.items()}
    else:
        splits = {name: tuple(items) for name, items in raw.items()}
        labels = tuple(sorted({v for _, v in splits["train"]}))
    return ProbingDataset(task=task, labels=labels, splits=splits, bin_spec=None)


def build_all(corpus, profile="tacred"):
    trees = TreeCache()
    excluded = EXCLUDED[profile] if isinstance(profile, str) else ()
    return [build_task(t, corpus, profile, trees) for t in TASKS if t not in excluded]


def save_dataset(ds: ProbingDataset, path):
    """One jsonl line per split: {task, labels, split, items}."""
    with open(path, "w", encoding="utf-8") as f:
        for split in ("train", "validation", "test"):
            rec = {
                "task": ds.task,
                "labels": list(ds.labels),
                "split": split,
                "items": [{"id": sid, "label": label} for sid, label in ds.splits[split]],
            }
            if ds.bin_spec is not None:
                rec["boundaries"] = [b if math.isfinite(b) else "inf"
                                     for b in ds.bin_spec.boundaries]
            f.write(json.dumps(rec) + "\n")


def load_dataset(path) -> ProbingDataset:
    splits = {}
    task = labels = bin_spec = None
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            task = rec["task"]
            labels = tuple(rec["labels"])
            splits[rec["split"]] = tuple((it["id"], it["label"]) for it in rec["items"])
            if "boundaries" in rec:
                bin_spec = BinSpec(tuple(math.inf if b == "inf" else b
                                         for b in rec["boundaries"]))
    return ProbingDataset(task=task, labels=labels, splits=splits, bin_spec=bin_spec)
