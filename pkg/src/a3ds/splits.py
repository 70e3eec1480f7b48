"""Seeded test-pair sets over the label space.

A set is defined by features the distractor must share with the target, either
a fixed feature set or ``random_k`` (k features drawn per pair).  Pairs are
"matched at least on" the constraint: further coincidental matches are fine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .features import (
    BACKGROUND_FEATURES, CARDINALITY, FEATURES, OBJECT_FEATURES, ImagePair, decode_id, encode_id,
)

CATEGORIES = {"one_feature": 1, "two_features": 2, "three_features": 3}
DEFAULT_PAIRS_PER_SET = 7500

# 2-subsets of the object features used for the two-feature sets
OBJECT_PAIRS = (("shape", "object_color"), ("shape", "scale"), ("object_color", "scale"))
# background set: wall + floor, with orientation as the third matched feature
BACKGROUND_SET = BACKGROUND_FEATURES + ("orientation",)

_RADICES = np.asarray([CARDINALITY[f] for f in FEATURES])
_INDEX = {f: i for i, f in enumerate(FEATURES)}


class SplitSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    category: str
    constraint: tuple | str  # feature tuple, or "random_2" / "random_3"
    pairs_per_set: int = DEFAULT_PAIRS_PER_SET
    seed: int = 0
    name: str = ""
    unique: bool = False

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise SplitSpecError(f"unknown category {self.category!r}")
        size = CATEGORIES[self.category]
        if isinstance(self.constraint, str):
            if self.constraint != f"random_{size}":
                raise SplitSpecError(f"{self.category} takes 'random_{size}', not {self.constraint!r}")
        else:
            cons = tuple(self.constraint)
            unknown = [f for f in cons if f not in CARDINALITY]
            if unknown:
                raise SplitSpecError(f"unknown features {unknown}")
            if len(set(cons)) != size:
                raise SplitSpecError(f"{self.category} needs {size} distinct features, got {cons}")
            object.__setattr__(self, "constraint", cons)
        if self.pairs_per_set < 1:
            raise SplitSpecError("pairs_per_set must be positive")
        if not self.name:
            object.__setattr__(self, "name", f"{self.category}/{self.constraint_tag}")

    @property
    def constraint_tag(self) -> str:
        if isinstance(self.constraint, str):
            return self.constraint
        return "+".join(self.constraint)

    @property
    def n_match(self) -> int:
        return CATEGORIES[self.category]

    def to_dict(self) -> dict:
        return {"name": self.name, "category": self.category,
                "constraint": self.constraint if isinstance(self.constraint, str) else list(self.constraint),
                "pairs_per_set": self.pairs_per_set, "seed": self.seed, "unique": self.unique}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitSpec":
        cons = d["constraint"]
        return cls(d["category"], cons if isinstance(cons, str) else tuple(cons),
                   int(d.get("pairs_per_set", DEFAULT_PAIRS_PER_SET)), int(d.get("seed", 0)),
                   d.get("name", ""), bool(d.get("unique", False)))


@dataclass
class PairSet:
    spec: SplitSpec
    pairs: list = field(default_factory=list)
    # features the pair was constrained on (differs per pair for random_k)
    matched: list = field(default_factory=list)

    def __len__(self):
        return len(self.pairs)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def category(self) -> str:
        return self.spec.category

    def records(self) -> list:
        return [{"pair_index": i, "target_id": p.target_id, "distractor_id": p.distractor_id,
                 "category": self.spec.category, "constraint": self.spec.constraint_tag,
                 "matched": list(m), "seed": self.spec.seed}
                for i, (p, m) in enumerate(zip(self.pairs, self.matched))]


def build_split(spec: SplitSpec) -> PairSet:
    """Rejection-sample ``spec.pairs_per_set`` pairs from a seeded stream.

    The target is uniform over all labels; the distractor copies the
    constrained features and draws the rest uniformly.  Identical pairs (and,
    with ``unique``, repeated pairs) are redrawn.
    """
    rng = np.random.default_rng(spec.seed)
    pairs, matched, seen = [], [], set()
    while len(pairs) < spec.pairs_per_set:
        target = rng.integers(0, _RADICES)
        if isinstance(spec.constraint, str):
            cons = tuple(FEATURES[i] for i in sorted(rng.choice(len(FEATURES), spec.n_match, replace=False)))
        else:
            cons = spec.constraint
        distractor = rng.integers(0, _RADICES)
        for f in cons:
            distractor[_INDEX[f]] = target[_INDEX[f]]
        if (distractor == target).all():
            continue
        pair = ImagePair(tuple(int(v) for v in target), tuple(int(v) for v in distractor))
        if spec.unique:
            key = (pair.target, pair.distractor)
            if key in seen:
                continue
            seen.add(key)
        pairs.append(pair)
        matched.append(cons)
    return PairSet(spec, pairs, matched)


def suite_specs(seed: int = 0, pairs_per_set: int = DEFAULT_PAIRS_PER_SET) -> list:
    """The 13 standard set specs: 6 one-feature, 4 two-feature, 3 three-feature."""
    specs = [("one_feature", (f,), f"one_feature/{f}") for f in FEATURES]
    specs += [("two_features", p, f"two_features/{'+'.join(p)}") for p in OBJECT_PAIRS]
    specs += [("two_features", "random_2", "two_features/random_2")]
    specs += [("three_features", OBJECT_FEATURES, "three_features/object"),
              ("three_features", BACKGROUND_SET, "three_features/background"),
              ("three_features", "random_3", "three_features/random_3")]
    children = np.random.SeedSequence(seed).spawn(len(specs))
    return [SplitSpec(cat, cons, pairs_per_set, int(child.generate_state(1)[0]), name)
            for (cat, cons, name), child in zip(specs, children)]


def standard_suite(seed: int = 0, pairs_per_set: int = DEFAULT_PAIRS_PER_SET) -> list:
    return [build_split(s) for s in suite_specs(seed, pairs_per_set)]


@dataclass(frozen=True)
class SplitViolation:
    pair_index: int | None
    kind: str
    message: str

    def __str__(self):
        where = "" if self.pair_index is None else f"pair {self.pair_index}: "
        return f"{where}{self.kind}: {self.message}"


def validate_split(ps: PairSet) -> list:
    out = []
    spec = ps.spec
    if len(ps.pairs) != spec.pairs_per_set:
        out.append(SplitViolation(None, "size", f"{len(ps.pairs)} pairs, expected {spec.pairs_per_set}"))
    seen = set()
    for i, pair in enumerate(ps.pairs):
        t, d = tuple(pair.target), tuple(pair.distractor)
        if t == d:
            out.append(SplitViolation(i, "degenerate", "target equals distractor"))
            continue
        equal = {f for f, a, b in zip(FEATURES, t, d) if a == b}
        if isinstance(spec.constraint, str):
            if len(equal) < spec.n_match:
                out.append(SplitViolation(i, "constraint", f"only {len(equal)} matching features"))
        else:
            missing = [f for f in spec.constraint if f not in equal]
            if missing:
                out.append(SplitViolation(i, "constraint", f"does not match on {missing}"))
        if spec.unique:
            if (t, d) in seen:
                out.append(SplitViolation(i, "duplicate", "pair repeats"))
            seen.add((t, d))
    return out


class _RawPair:
    """Pair holder that tolerates target == distractor, for loading corrupt files."""

    def __init__(self, target, distractor):
        self.target, self.distractor = target, distractor
        self.target_id, self.distractor_id = encode_id(target), encode_id(distractor)


def pairset_from_records(spec: SplitSpec, records) -> PairSet:
    pairs, matched = [], []
    for rec in sorted(records, key=lambda r: r["pair_index"]):
        t, d = decode_id(rec["target_id"]), decode_id(rec["distractor_id"])
        pairs.append(ImagePair(t, d) if t != d else _RawPair(t, d))
        matched.append(tuple(rec.get("matched") or ()))
    return PairSet(spec, pairs, matched)


def manifest_dict(sets: list, meta: dict | None = None, files: list | None = None) -> dict:
    entries = []
    for i, ps in enumerate(sets):
        e = ps.spec.to_dict()
        if files:
            e["file"] = files[i]
        entries.append(e)
    return {"meta": meta or {}, "sets": entries}


def dumps_records(records) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
