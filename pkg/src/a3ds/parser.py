"""Mention extraction from free caption text.

Captions may be drifted model output, so matching is purely lexical: a
longest-match scan over lexicon phrases, followed by color resolution.  A color
term binds to a color feature when its hue is carried by exactly one of the
target's three color features (the unique-color rule); otherwise it needs a head
noun of the matching class within ``window`` tokens after it.  Anything else is
left unresolved and ignored by the metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .features import COLOR_FEATURES, FEATURES, Label, make_label
from .lexicon import NOUN_CLASS_FEATURE, Entry, Lexicon, tokenize

DEFAULT_WINDOW = 3
COLOR_ORDERS = ("unique_first", "noun_first")

__all__ = [
    "DEFAULT_WINDOW", "COLOR_ORDERS", "Occurrence", "ColorBinding", "Mention", "MentionRecord",
    "tokenize", "match_phrases", "resolve_colors", "extract_mentions",
]


@dataclass(frozen=True)
class Occurrence:
    start: int
    end: int
    entry: Entry

    @property
    def tokens(self) -> tuple:
        return self.entry.tokens

    @property
    def is_color(self) -> bool:
        return self.entry.is_color

    @property
    def noun_class(self) -> str | None:
        return self.entry.noun_class


@dataclass(frozen=True)
class ColorBinding:
    occurrence: Occurrence
    feature: str | None
    rule: str | None  # "unique_color", "head_noun_window" or None when unresolved

    @property
    def resolved(self) -> bool:
        return self.feature is not None


@dataclass(frozen=True)
class Mention:
    feature: str
    values: frozenset
    truthful: bool


@dataclass(frozen=True)
class MentionRecord:
    target: Label
    mentions: dict = field(default_factory=dict)  # feature -> frozenset of Mention
    unresolved: tuple = ()
    bindings: tuple = ()

    @cached_property
    def truthful_features(self) -> frozenset:
        return frozenset(f for f, ms in self.mentions.items() if any(m.truthful for m in ms))

    @cached_property
    def false_features(self) -> frozenset:
        return frozenset(f for f, ms in self.mentions.items() if ms and not any(m.truthful for m in ms))

    @cached_property
    def mentioned_features(self) -> frozenset:
        return frozenset(f for f, ms in self.mentions.items() if ms)

    @cached_property
    def k(self) -> int:
        return len(self.truthful_features)

    @cached_property
    def false_feature_count(self) -> int:
        return len(self.false_features)

    def to_dict(self) -> dict:
        return {
            "target": list(self.target),
            "k": self.k,
            "false_feature_count": self.false_feature_count,
            "mentions": {
                f: sorted(({"values": sorted(m.values), "truthful": m.truthful} for m in self.mentions[f]),
                          key=lambda d: (d["values"], d["truthful"]))
                for f in FEATURES if f in self.mentions
            },
            "unresolved": [" ".join(b.occurrence.tokens) for b in self.unresolved],
        }


def match_phrases(tokens, lex: Lexicon) -> list:
    return [Occurrence(s, e, entry) for s, e, entry in lex.longest_match(list(tokens))]


def resolve_colors(occurrences, target, lex: Lexicon = None, window: int = DEFAULT_WINDOW,
                   order: str = "unique_first") -> list:
    """Bind each color occurrence to a color feature of ``target``.

    ``order="unique_first"`` (evaluation) tries the unique-color rule before
    the head-noun window; ``"noun_first"`` (literal listener) reads an
    adjacent head noun first and falls back to uniqueness for bare colors.
    """
    if order not in COLOR_ORDERS:
        raise ValueError(f"unknown color order {order!r}")
    target = make_label(target)
    nouns = [o for o in occurrences if o.noun_class is not None]
    out = []
    for occ in occurrences:
        if not occ.is_color:
            continue
        dens = occ.entry.denotations
        carriers = [f for f in COLOR_FEATURES if f in dens and target[f] in dens[f]]
        noun = next((n for n in nouns if occ.end <= n.start < occ.end + window), None)
        by_noun = NOUN_CLASS_FEATURE.get(noun.noun_class) if noun else None
        if by_noun not in dens:
            by_noun = None
        if order == "noun_first" and by_noun:
            out.append(ColorBinding(occ, by_noun, "head_noun_window"))
        elif len(carriers) == 1:
            out.append(ColorBinding(occ, carriers[0], "unique_color"))
        elif by_noun:
            out.append(ColorBinding(occ, by_noun, "head_noun_window"))
        else:
            out.append(ColorBinding(occ, None, None))
    return out


def extract_mentions(text: str, target, lex: Lexicon, window: int = DEFAULT_WINDOW,
                     order: str = "unique_first") -> MentionRecord:
    """Per-feature mentions of ``text`` judged against ``target``. Never raises on text."""
    target = make_label(target)
    occs = match_phrases(tokenize(text or ""), lex)
    found = {}
    for occ in occs:
        f = occ.entry.feature
        if f is not None:
            vals = occ.entry.denotations[f]
            found.setdefault(f, set()).add(Mention(f, vals, target[f] in vals))
    bindings = resolve_colors(occs, target, lex, window, order)
    unresolved = []
    for b in bindings:
        if not b.resolved:
            unresolved.append(b)
            continue
        vals = b.occurrence.entry.denotations[b.feature]
        found.setdefault(b.feature, set()).add(Mention(b.feature, vals, target[b.feature] in vals))
    mentions = {f: frozenset(found[f]) for f in FEATURES if f in found}
    return MentionRecord(target, mentions, tuple(unresolved), tuple(bindings))
