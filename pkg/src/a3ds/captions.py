"""Ground-truth caption generation from label vectors."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .features import CARDINALITY, FEATURES, Label, make_label
from .lexicon import Lexicon, Template, phrases_for

KINDS = ("exhaustive", "short")


@dataclass(frozen=True)
class Caption:
    text: str
    kind: str
    mentioned_features: frozenset
    source_label: Label

    def to_record(self) -> dict:
        from .features import encode_id
        return {"image_id": encode_id(self.source_label), "label": list(self.source_label),
                "kind": self.kind, "text": self.text}


def _instantiate(template: Template, label: Label, lex: Lexicon):
    slots = template.slots
    choices = []
    for f in slots:
        opts = phrases_for(lex, f, label[f])
        if not opts:
            raise ValueError(f"lexicon has no phrase for ({f}, {label[f]})")
        choices.append([p.text for p in opts])
    for combo in itertools.product(*choices):
        yield template.render(dict(zip(slots, combo)))


def caption_texts(label: Label, lex: Lexicon, kind: str) -> dict:
    """Distinct rendered text -> mentioned features, in template-then-synonym order."""
    if kind not in KINDS:
        raise ValueError(f"unknown caption kind {kind!r}")
    seen = {}
    for t in lex.templates_of(kind):
        mentioned = frozenset(t.slots)
        for text in _instantiate(t, label, lex):
            seen.setdefault(text, mentioned)
    return seen


def captions(label, lex: Lexicon, kind: str) -> list:
    """All distinct captions of one kind, in template-then-synonym order."""
    label = make_label(label)
    return [Caption(text, kind, m, label) for text, m in caption_texts(label, lex, kind).items()]


def exhaustive_captions(label, lex: Lexicon) -> list:
    return captions(label, lex, "exhaustive")


def short_captions(label, lex: Lexicon) -> list:
    return captions(label, lex, "short")


def sample_caption(label, lex: Lexicon, kind: str, seed) -> Caption:
    """Uniform draw from the caption set; the same seed gives the same caption."""
    label = make_label(label)
    pool = list(caption_texts(label, lex, kind).items())
    if not pool:
        raise ValueError(f"lexicon has no {kind} templates")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    text, mentioned = pool[int(rng.integers(len(pool)))]
    return Caption(text, kind, mentioned, label)


@dataclass(frozen=True)
class CaptionCount:
    kind: str
    min_per_image: int
    max_per_image: int
    total: int

    @property
    def per_image(self) -> int | None:
        """The per-image count when it does not depend on the label."""
        return self.min_per_image if self.min_per_image == self.max_per_image else None


def count_captions(lex: Lexicon, kind: str) -> CaptionCount:
    """Template x synonym multiplicities, summed over templates.

    The total sums over all 480,000 labels; because a template's count is a
    product of per-slot synonym counts, the sum over labels factorises per
    feature.  Identical renderings from different templates are not
    de-duplicated here.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown caption kind {kind!r}")
    n_syn = {f: [len(phrases_for(lex, f, v)) for v in range(CARDINALITY[f])] for f in FEATURES}
    lo = hi = total = 0
    for t in lex.templates_of(kind):
        slots = set(t.slots)
        lo += math.prod(min(n_syn[f]) for f in slots)
        hi += math.prod(max(n_syn[f]) for f in slots)
        total += math.prod(sum(n_syn[f]) if f in slots else CARDINALITY[f] for f in FEATURES)
    return CaptionCount(kind, lo, hi, total)


def count_for_label(label, lex: Lexicon, kind: str) -> int:
    label = make_label(label)
    return sum(math.prod(len(phrases_for(lex, f, label[f])) for f in t.slots)
               for t in lex.templates_of(kind))


def _article(word: str) -> str:
    return "an" if word[:1] in "aeiou" else "a"


def compose_caption(label, features, lex: Lexicon, rng=None) -> Caption:
    """Describe exactly ``features`` of ``label`` in a fixed attributive frame.

    ``a [scale] [object_color] (shape|object) [orientation] in front of a
    [wall_color] wall on [floor_color] floor``, with unused parts dropped.
    Color terms always precede their head noun so they stay resolvable.
    ``rng`` picks among synonyms; without one the first phrase is used.
    """
    label = make_label(label)
    feats = frozenset(features)
    unknown = feats - set(FEATURES)
    if unknown:
        raise ValueError(f"unknown features {sorted(unknown)}")

    def word(f):
        opts = phrases_for(lex, f, label[f])
        if not opts:
            raise ValueError(f"lexicon has no phrase for ({f}, {label[f]})")
        if rng is None:
            return opts[0].text
        return opts[int(rng.integers(len(opts)))].text

    pieces = []
    if feats & {"scale", "object_color", "shape", "orientation"}:
        np_words = [word(f) for f in ("scale", "object_color") if f in feats]
        if "shape" in feats:
            np_words.append(word("shape"))
        else:
            generic = lex.generic_object_noun()
            if generic is None:
                raise ValueError("lexicon has no generic object noun to stand in for the shape")
            np_words.append(generic.text)
        pieces.append(_article(np_words[0]))
        pieces += np_words
        if "orientation" in feats:
            pieces.append(word("orientation"))
    if "wall_color" in feats:
        c = word("wall_color")
        pieces += (["in", "front", "of", "a"] if pieces else [_article(c)]) + [c, "wall"]
    if "floor_color" in feats:
        c = word("floor_color")
        pieces += (["on"] if pieces else [_article(c)]) + [c, "floor"]
    return Caption(" ".join(pieces), "composed", feats, label)
