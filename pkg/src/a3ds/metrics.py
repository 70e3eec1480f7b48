"""Pragmatic caption metrics and split-level aggregation.

For a caption evaluated on a (target, distractor) pair:

* ``c``  contrastive features mentioned truthfully
* ``k``  features mentioned (truthfully, or including false ones under the
  ``all-mentions`` convention)
* ``z``  contrastive features of the pair

``d = [c > 0]``; ``e = 1`` if ``k == c == 1`` else ``1 - (c-1)/(k-1)``, defined
only when ``d == 1``; ``r = 1 - (k-c)/(6-z)`` with ``r = 1`` at ``z == 6``;
``od = [c == 1]``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .features import FEATURES, ContrastProfile
from .parser import MentionRecord

K_CONVENTIONS = ("truthful", "all-mentions")

TABLE_ROWS = (
    ("Discriminativity", "d"),
    ("Contrastive efficiency", "e"),
    ("Relevance", "r"),
    ("Optimal contrastivity", "od"),
    ("Mentioned features #", "k"),
    ("Listener accuracy", "listener_accuracy"),
    ("False features #", "false_features"),
)


class ConsistencyError(ValueError):
    """Counts that cannot come from one caption, e.g. ``c > k``."""


class EmptySplitError(ValueError):
    pass


@dataclass(frozen=True)
class CaptionEval:
    c: int
    k: int
    z: int
    d: int
    e: float | None
    r: float
    od: int
    false_feature_count: int = 0


def metric_values(c: int, k: int, z: int, false_feature_count: int = 0, clamp: bool = False) -> CaptionEval:
    """The four metrics from raw counts."""
    n = len(FEATURES)
    if not (0 <= c <= k and c <= z and 1 <= z <= n and k <= n):
        raise ConsistencyError(f"inconsistent counts c={c}, k={k}, z={z}")
    d = int(c > 0)
    if not d:
        e = None
    elif k == 1:
        e = 1.0
    else:
        e = 1.0 - (c - 1) / (k - 1)
    r = 1.0 if z == n else 1.0 - (k - c) / (n - z)
    if clamp:
        r = max(0.0, r)
    elif k - c > n - z:
        raise ConsistencyError(f"more non-contrastive mentions ({k - c}) than non-contrastive features ({n - z})")
    return CaptionEval(c, k, z, d, e, r, int(c == 1), false_feature_count)


def eval_caption(mentions: MentionRecord, profile: ContrastProfile, k_convention: str = "truthful") -> CaptionEval:
    """Score one parsed caption against its pair's contrast profile.

    Under ``all-mentions`` falsely described features join ``k`` (and so the
    non-contrastive count ``k - c``); ``r`` is then floored at 0.
    """
    if k_convention not in K_CONVENTIONS:
        raise ValueError(f"unknown k convention {k_convention!r}")
    truthful = mentions.truthful_features
    c = len(truthful & profile.contrastive)
    k = len(truthful)
    if k_convention == "all-mentions":
        k += mentions.false_feature_count
    return metric_values(c, k, profile.z, mentions.false_feature_count,
                         clamp=k_convention == "all-mentions")


@dataclass(frozen=True)
class AggregateReport:
    name: str
    n: int
    n_discriminative: int
    d: float
    e: float | None
    r: float
    od: float
    k: float
    false_features: float
    listener_accuracy: float | None = None
    category: str | None = None
    n_sets: int = 1

    def rounded(self, ndigits: int = 3) -> dict:
        out = asdict(self)
        for key, v in out.items():
            if isinstance(v, float):
                out[key] = round(v, ndigits)
        return out


def _mean(xs):
    return math.fsum(xs) / len(xs)


def aggregate(evals: Sequence[CaptionEval], split_tag: str, rewards: Sequence[int] | None = None,
              category: str | None = None) -> AggregateReport:
    """Means over one split; ``e`` only over discriminative captions.

    ``rewards`` (+1/-1 per game), when given, yields listener accuracy.
    """
    evals = list(evals)
    if not evals:
        raise EmptySplitError(f"split {split_tag!r} has no evaluations")
    disc = [ev.e for ev in evals if ev.d == 1]
    acc = None
    if rewards is not None:
        rewards = list(rewards)
        if len(rewards) != len(evals):
            raise ValueError("one reward per evaluation expected")
        acc = sum(1 for x in rewards if x > 0) / len(rewards)
    return AggregateReport(
        name=split_tag,
        n=len(evals),
        n_discriminative=len(disc),
        d=_mean([ev.d for ev in evals]),
        e=_mean(disc) if disc else None,
        r=_mean([ev.r for ev in evals]),
        od=_mean([ev.od for ev in evals]),
        k=_mean([ev.k for ev in evals]),
        false_features=_mean([ev.false_feature_count for ev in evals]),
        listener_accuracy=acc,
        category=category,
    )


def combine(reports: Sequence[AggregateReport], name: str) -> AggregateReport:
    """Average set-level reports into a category row (mean of set means)."""
    reports = list(reports)
    if not reports:
        raise EmptySplitError(f"category {name!r} has no sets")

    def avg(key):
        vals = [getattr(rep, key) for rep in reports if getattr(rep, key) is not None]
        return _mean(vals) if vals else None

    return AggregateReport(
        name=name,
        n=sum(rep.n for rep in reports),
        n_discriminative=sum(rep.n_discriminative for rep in reports),
        d=avg("d"), e=avg("e"), r=avg("r"), od=avg("od"), k=avg("k"),
        false_features=avg("false_features"),
        listener_accuracy=avg("listener_accuracy"),
        category=name,
        n_sets=len(reports),
    )


@dataclass(frozen=True)
class RedundancyProfile:
    """Per feature: share of captions mentioning it truthfully when it was non-contrastive.

    ``proportions[f]`` is None when no pair had ``f`` non-contrastive.
    """

    proportions: dict
    counts: dict
    support: dict

    def to_dict(self, ndigits: int | None = 3) -> dict:
        return {f: (round(p, ndigits) if p is not None and ndigits is not None else p)
                for f, p in self.proportions.items()}


def redundancy_profile(items: Iterable, only_irrelevant: bool = False) -> RedundancyProfile:
    """``items`` yields (MentionRecord, ContrastProfile) or (MentionRecord, ContrastProfile, CaptionEval).

    With ``only_irrelevant`` only captions with ``r < 1`` are counted (needs the
    evaluation in each item).
    """
    counts = dict.fromkeys(FEATURES, 0)
    support = dict.fromkeys(FEATURES, 0)
    for item in items:
        mentions, profile = item[0], item[1]
        if only_irrelevant:
            if len(item) < 3:
                raise ValueError("only_irrelevant needs a CaptionEval per item")
            if item[2].r >= 1:
                continue
        truthful = mentions.truthful_features
        for f in profile.non_contrastive:
            support[f] += 1
            if f in truthful:
                counts[f] += 1
    props = {f: (counts[f] / support[f] if support[f] else None) for f in FEATURES}
    return RedundancyProfile(props, counts, support)


# report output ---------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


CSV_COLUMNS = (["scope", "name", "category"] + [label for label, _ in TABLE_ROWS]
               + ["n", "n_discriminative", "n_sets"] + [f"redundancy_{f}" for f in FEATURES])


def report_rows(sets: Sequence[AggregateReport], categories: Sequence[AggregateReport],
                profiles: dict | None = None) -> list:
    profiles = profiles or {}
    rows = []
    for scope, reps in (("set", sets), ("category", categories)):
        for rep in reps:
            row = {"scope": scope, "name": rep.name, "category": rep.category or ""}
            for label, key in TABLE_ROWS:
                row[label] = _fmt(getattr(rep, key))
            row["n"] = rep.n
            row["n_discriminative"] = rep.n_discriminative
            row["n_sets"] = rep.n_sets
            prof = profiles.get(rep.name)
            for f in FEATURES:
                row[f"redundancy_{f}"] = _fmt(prof.proportions[f]) if prof else ""
            rows.append(row)
    return rows


def report_csv(sets, categories, profiles=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in report_rows(sets, categories, profiles):
        w.writerow(row)
    return buf.getvalue()


def report_json(sets, categories, profiles=None, meta: dict | None = None) -> str:
    profiles = profiles or {}

    def block(rep):
        d = {label: (round(getattr(rep, key), 3) if getattr(rep, key) is not None else None)
             for label, key in TABLE_ROWS}
        d.update(name=rep.name, category=rep.category, n=rep.n,
                 n_discriminative=rep.n_discriminative, n_sets=rep.n_sets)
        if rep.name in profiles:
            d["redundancy_profile"] = profiles[rep.name].to_dict()
        return d

    doc = {"meta": meta or {}, "sets": [block(r) for r in sets], "categories": [block(r) for r in categories]}
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
