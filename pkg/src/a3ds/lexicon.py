"""Caption grammar: phrases with denotations, head nouns and templates.

A lexicon document is JSON with four top-level keys::

    {"version": "...",
     "phrases":    [{"tokens": [...], "feature": "scale", "values": [0]}, ...],
     "head_nouns": [{"tokens": ["wall"], "noun_class": "wall"}, ...],
     "templates":  [{"kind": "exhaustive", "text": "a {scale} {shape} ..."}, ...]}

Object head nouns are usually shape phrases carrying ``"noun_class": "object"``.
Head nouns without a feature ("wall", "floor", a generic "object") only anchor
color terms.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

from .features import CARDINALITY, COLOR_FEATURES, FEATURES

NOUN_CLASSES = ("object", "wall", "floor")
# color feature anchored by each head-noun class
NOUN_CLASS_FEATURE = {"object": "object_color", "wall": "wall_color", "floor": "floor_color"}
TEMPLATE_KINDS = ("exhaustive", "short")
LEXICON_ENV = "A3DS_LEXICON"

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SLOT_RE = re.compile(r"\{([^{}]*)\}")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace and punctuation."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Phrase:
    tokens: tuple
    feature: str
    values: frozenset
    noun_class: str | None = None

    @cached_property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class HeadNoun:
    tokens: tuple
    noun_class: str
    feature: str | None = None
    values: frozenset = frozenset()

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Template:
    kind: str
    text: str

    @cached_property
    def parts(self) -> list:
        """Alternating literal strings and slot names (odd positions)."""
        return _SLOT_RE.split(self.text)

    @cached_property
    def slots(self) -> tuple:
        return tuple(self.parts[1::2])

    @cached_property
    def _format(self) -> str:
        parts = self.parts
        lits = [" ".join(p.split()) for p in parts[0::2]]
        out = lits[0].replace("{", "{{").replace("}", "}}")
        for slot, lit in zip(parts[1::2], lits[1:]):
            lit = lit.replace("{", "{{").replace("}", "}}")
            out = " ".join(x for x in (out, "{" + slot + "}", lit) if x)
        return out

    def render(self, fills: dict) -> str:
        return self._format.format_map(fills)


@dataclass(frozen=True)
class Entry:
    """Everything a token sequence can mean.

    ``denotations`` maps feature -> value set; color sequences may carry up to
    three color features, any other sequence at most one feature.
    """

    tokens: tuple
    denotations: dict
    noun_class: str | None = None

    @cached_property
    def is_color(self) -> bool:
        return bool(self.denotations) and all(f in COLOR_FEATURES for f in self.denotations)

    @cached_property
    def feature(self) -> str | None:
        if self.is_color or not self.denotations:
            return None
        return next(iter(self.denotations))


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    feature: str | None = None
    value: int | None = None

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class Note:
    kind: str
    shorter: tuple
    longer: tuple

    def __str__(self):
        return f"{self.kind}: {' '.join(self.shorter)!r} inside {' '.join(self.longer)!r}"


class LexiconError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"invalid lexicon ({len(self.violations)} violations):\n{lines}")


@dataclass(frozen=True)
class Lexicon:
    phrases: tuple = ()
    head_nouns: tuple = ()
    templates: tuple = ()
    version: str = ""
    _entries: dict = field(default=None, init=False, repr=False, compare=False)
    _by_first: dict = field(default=None, init=False, repr=False, compare=False)
    _by_value: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "phrases", tuple(self.phrases))
        object.__setattr__(self, "head_nouns", tuple(self.head_nouns))
        object.__setattr__(self, "templates", tuple(self.templates))
        entries = {}
        for p in self.phrases:
            e = entries.setdefault(p.tokens, {"den": {}, "noun": None})
            e["den"].setdefault(p.feature, set()).update(p.values)
            if p.noun_class:
                e["noun"] = p.noun_class
        for h in self.head_nouns:
            e = entries.setdefault(h.tokens, {"den": {}, "noun": None})
            if h.feature:
                e["den"].setdefault(h.feature, set()).update(h.values)
            e["noun"] = h.noun_class
        frozen = {
            toks: Entry(toks, {f: frozenset(v) for f, v in e["den"].items()}, e["noun"])
            for toks, e in entries.items() if toks
        }
        by_first = {}
        for toks in frozen:
            by_first.setdefault(toks[0], []).append(toks)
        for cands in by_first.values():
            cands.sort(key=len, reverse=True)
        object.__setattr__(self, "_entries", frozen)
        object.__setattr__(self, "_by_first", by_first)
        by_value = {}
        for p in self.phrases:
            for v in p.values:
                by_value.setdefault((p.feature, v), []).append(p)
        object.__setattr__(self, "_by_value", by_value)

    def entry(self, tokens) -> Entry | None:
        return self._entries.get(tuple(tokens))

    def longest_match(self, tokens: list) -> list:
        """Left-to-right longest-match scan; returns (start, end, Entry) triples."""
        out = []
        i, n = 0, len(tokens)
        while i < n:
            for cand in self._by_first.get(tokens[i], ()):
                if tuple(tokens[i:i + len(cand)]) == cand:
                    out.append((i, i + len(cand), self._entries[cand]))
                    i += len(cand)
                    break
            else:
                i += 1
        return out

    @property
    def all_head_nouns(self) -> list:
        """Explicit head nouns plus phrases that carry a noun class."""
        derived = [HeadNoun(p.tokens, p.noun_class, p.feature, p.values)
                   for p in self.phrases if p.noun_class]
        return list(self.head_nouns) + derived

    @property
    def color_index(self) -> dict:
        """Color token sequence -> {color feature: value set}."""
        return {toks: dict(e.denotations) for toks, e in self._entries.items() if e.is_color}

    def templates_of(self, kind: str) -> list:
        return self._by_kind.get(kind, [])

    @cached_property
    def _by_kind(self) -> dict:
        out = {}
        for t in self.templates:
            out.setdefault(t.kind, []).append(t)
        return out

    def generic_object_noun(self) -> HeadNoun | None:
        for h in self.head_nouns:
            if h.noun_class == "object" and not h.feature:
                return h
        return None


def phrases_for(lex: Lexicon, feature: str, value: int) -> list:
    if feature not in CARDINALITY:
        raise ValueError(f"unknown feature {feature!r}")
    if not 0 <= value < CARDINALITY[feature]:
        raise ValueError(f"{feature}: value {value} outside [0, {CARDINALITY[feature]})")
    return list(lex._by_value.get((feature, value), ()))


def _check_tokens(tokens, what) -> list:
    if not tokens:
        return [Violation("normalization", f"{what}: empty token sequence")]
    bad = [t for t in tokens if not (isinstance(t, str) and _TOKEN_RE.fullmatch(t))]
    if bad:
        return [Violation("normalization", f"{what}: tokens {bad!r} are not lowercase alphanumeric")]
    return []


def _check_denotation(feature, values, what) -> list:
    if feature not in CARDINALITY:
        return [Violation("unknown_feature", f"{what}: unknown feature {feature!r}")]
    if not values:
        return [Violation("empty_denotation", f"{what}: empty denotation", feature)]
    out = []
    for v in sorted(values):
        if not 0 <= v < CARDINALITY[feature]:
            out.append(Violation("out_of_range", f"{what}: value {v} outside [0, {CARDINALITY[feature]})",
                                 feature, v))
    return out


def _check_template(t: Template, lex: Lexicon) -> list:
    what = f"template {t.text!r}"
    if t.kind not in TEMPLATE_KINDS:
        return [Violation("template", f"{what}: unknown kind {t.kind!r}")]
    slots = t.slots
    out = [Violation("template", f"{what}: unknown slot {{{s}}}") for s in slots if s not in CARDINALITY]
    if len(set(slots)) != len(slots):
        out.append(Violation("template", f"{what}: a slot repeats"))
    if t.kind == "exhaustive" and sorted(slots) != sorted(FEATURES):
        out.append(Violation("template", f"{what}: exhaustive templates must use all six features once"))
    if t.kind == "short" and len(set(slots)) not in (2, 3):
        out.append(Violation("template", f"{what}: short templates use 2 or 3 features"))
    for part in t.parts[0::2]:
        if part != part.lower():
            out.append(Violation("normalization", f"{what}: literal text must be lowercase"))
        for _, _, e in lex.longest_match(tokenize(part)):
            if e.denotations:
                out.append(Violation("template", f"{what}: literal text contains lexicon phrase "
                                                 f"{' '.join(e.tokens)!r}"))
    return out


def validate_lexicon(lex: Lexicon) -> list:
    """All invariant violations; an empty list means the lexicon is usable."""
    violations = []
    for p in lex.phrases:
        what = f"phrase {' '.join(map(str, p.tokens))!r}"
        violations += _check_tokens(p.tokens, what)
        violations += _check_denotation(p.feature, p.values, what)
        if p.noun_class is not None:
            if p.noun_class != "object" or p.feature != "shape":
                violations.append(Violation(
                    "noun_class", f"{what}: only shape phrases may be (object) head nouns", p.feature))
    for h in lex.head_nouns:
        what = f"head noun {' '.join(map(str, h.tokens))!r}"
        violations += _check_tokens(h.tokens, what)
        if h.noun_class not in NOUN_CLASSES:
            violations.append(Violation("noun_class", f"{what}: unknown noun class {h.noun_class!r}"))
        elif h.feature is not None:
            if h.noun_class != "object" or h.feature != "shape":
                violations.append(Violation(
                    "noun_class", f"{what}: only object nouns may carry a shape denotation"))
            else:
                violations += _check_denotation(h.feature, h.values, what)

    # ambiguity: group every meaning a token sequence receives
    meanings = {}
    for p in lex.phrases:
        meanings.setdefault(p.tokens, []).append((p.feature, frozenset(p.values)))
    for h in lex.head_nouns:
        meanings.setdefault(h.tokens, []).append((h.feature, frozenset(h.values)))
    for toks, ms in meanings.items():
        feats = {f for f, _ in ms}
        text = " ".join(map(str, toks))
        if feats <= set(COLOR_FEATURES):
            for f in sorted(feats):
                dens = {d for g, d in ms if g == f}
                if len(dens) > 1:
                    violations.append(Violation(
                        "ambiguity", f"{text!r} has {len(dens)} different {f} denotations", f))
        elif len(set(ms)) > 1:
            violations.append(Violation(
                "ambiguity", f"{text!r} has conflicting meanings {sorted(set(ms), key=str)}"))

    for feature in FEATURES:
        covered = set()
        for p in lex.phrases:
            if p.feature == feature:
                covered |= set(p.values)
        for v in range(CARDINALITY[feature]):
            if v not in covered:
                violations.append(Violation("coverage", f"no phrase for ({feature}, {v})", feature, v))

    for t in lex.templates:
        violations += _check_template(t, lex)
    return violations


def prefix_notes(lex: Lexicon) -> list:
    """Pairs where one token sequence sits inside a longer one.

    Informational only: longest-match scanning resolves them in favour of the
    longer phrase.
    """
    seqs = sorted({p.tokens for p in lex.phrases} | {h.tokens for h in lex.head_nouns})
    notes = []
    for a in seqs:
        for b in seqs:
            if len(a) >= len(b):
                continue
            n = len(a)
            if b[:n] == a:
                notes.append(Note("prefix", a, b))
            elif b[-n:] == a:
                notes.append(Note("suffix", a, b))
            elif any(b[i:i + n] == a for i in range(1, len(b) - n)):
                notes.append(Note("infix", a, b))
    return notes


def _normalize_tokens(raw) -> tuple:
    if isinstance(raw, str):
        raw = [raw]
    return tuple(t for piece in raw for t in tokenize(str(piece)))


def lexicon_from_dict(doc: dict, normalize: bool = True) -> Lexicon:
    """Build a Lexicon from a parsed document, raising LexiconError on schema problems."""
    problems = []
    if not isinstance(doc, dict):
        raise LexiconError([Violation("schema", "lexicon document must be a JSON object")])
    for key in ("phrases", "head_nouns", "templates", "version"):
        if key not in doc:
            problems.append(Violation("schema", f"missing top-level key {key!r}"))
    if problems:
        raise LexiconError(problems)

    def toks(entry, what):
        raw = entry.get("tokens")
        if not isinstance(raw, (list, str)) or not raw:
            problems.append(Violation("schema", f"{what}: 'tokens' must be a non-empty list"))
            return ()
        if normalize:
            return _normalize_tokens(raw)
        return tuple(raw) if isinstance(raw, list) else (raw,)

    def values(entry, what):
        raw = entry.get("values", [])
        if not isinstance(raw, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw):
            problems.append(Violation("schema", f"{what}: 'values' must be a list of integers"))
            return frozenset()
        return frozenset(raw)

    phrases, nouns, templates = [], [], []
    for i, p in enumerate(doc["phrases"] or []):
        what = f"phrases[{i}]"
        if not isinstance(p, dict):
            problems.append(Violation("schema", f"{what}: must be an object"))
            continue
        if not isinstance(p.get("feature"), str):
            problems.append(Violation("schema", f"{what}: 'feature' must be a string"))
            continue
        phrases.append(Phrase(toks(p, what), p["feature"], values(p, what), p.get("noun_class")))
    for i, h in enumerate(doc["head_nouns"] or []):
        what = f"head_nouns[{i}]"
        if not isinstance(h, dict) or not isinstance(h.get("noun_class"), str):
            problems.append(Violation("schema", f"{what}: needs a string 'noun_class'"))
            continue
        nouns.append(HeadNoun(toks(h, what), h["noun_class"], h.get("feature"), values(h, what)))
    for i, t in enumerate(doc["templates"] or []):
        what = f"templates[{i}]"
        if not isinstance(t, dict) or not isinstance(t.get("text"), str) or not isinstance(t.get("kind"), str):
            problems.append(Violation("schema", f"{what}: needs string 'kind' and 'text'"))
            continue
        text = t["text"].lower() if normalize else t["text"]
        templates.append(Template(t["kind"], text))
    if problems:
        raise LexiconError(problems)
    return Lexicon(tuple(phrases), tuple(nouns), tuple(templates), str(doc["version"]))


def lexicon_to_dict(lex: Lexicon) -> dict:
    def phrase(p):
        d = {"tokens": list(p.tokens), "feature": p.feature, "values": sorted(p.values)}
        if p.noun_class:
            d["noun_class"] = p.noun_class
        return d

    def noun(h):
        d = {"tokens": list(h.tokens), "noun_class": h.noun_class}
        if h.feature:
            d["feature"] = h.feature
            d["values"] = sorted(h.values)
        return d

    return {
        "version": lex.version,
        "phrases": [phrase(p) for p in lex.phrases],
        "head_nouns": [noun(h) for h in lex.head_nouns],
        "templates": [{"kind": t.kind, "text": t.text} for t in lex.templates],
    }


def load_lexicon(source=None) -> Lexicon:
    """Load and validate a lexicon from a path, a JSON string or a dict.

    ``None`` loads the default lexicon (or the file named by ``$A3DS_LEXICON``).
    Raises LexiconError listing every violation.
    """
    if source is None:
        source = default_lexicon_path()
    if isinstance(source, dict):
        doc = source
    else:
        if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
            text = Path(source).read_text(encoding="utf-8")
        else:
            text = str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LexiconError([Violation("schema", f"not valid JSON: {exc}")]) from exc
    lex = lexicon_from_dict(doc)
    violations = validate_lexicon(lex)
    if violations:
        raise LexiconError(violations)
    return lex


def default_lexicon_path() -> Path:
    env = os.environ.get(LEXICON_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("a3ds") / "data" / "default_lexicon.json"))


_DEFAULT = None


def default_lexicon() -> Lexicon:
    """The shipped lexicon, loaded once."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_lexicon(Path(str(resources.files("a3ds") / "data" / "default_lexicon.json")))
    return _DEFAULT

