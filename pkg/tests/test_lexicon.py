import copy
import json

import pytest
from hypothesis import given, strategies as st

from a3ds.features import CARDINALITY, COLOR_FEATURES, FEATURES
from a3ds.lexicon import (
    Lexicon, LexiconError, Phrase, Template, default_lexicon_path, lexicon_from_dict, lexicon_to_dict,
    load_lexicon, phrases_for, prefix_notes, tokenize, validate_lexicon,
)


@pytest.fixture
def doc(lex):
    return lexicon_to_dict(lex)


def test_default_has_no_violations(lex):
    assert validate_lexicon(lex) == []


def test_notes_match_containment_oracle(lex):
    # every strict contiguous sub-sequence relation between distinct sequences
    seqs = {p.tokens for p in lex.phrases} | {h.tokens for h in lex.head_nouns}
    expected = set()
    for a in seqs:
        for b in seqs:
            if len(a) < len(b) and any(b[i:i + len(a)] == a for i in range(len(b) - len(a) + 1)):
                expected.add((a, b))
    got = {(n.shorter, n.longer) for n in prefix_notes(lex)}
    assert got == expected
    assert got == {(("blue",), ("light", "blue")), (("green",), ("light", "green"))}


def test_missing_shape_value_is_coverage_error(doc):
    doc["phrases"] = [p for p in doc["phrases"] if not (p["feature"] == "shape" and p["values"] == [3])]
    v = validate_lexicon(lexicon_from_dict(doc))
    cov = [x for x in v if x.kind == "coverage"]
    assert [(x.feature, x.value) for x in cov] == [("shape", 3)]
    with pytest.raises(LexiconError):
        load_lexicon(doc)


def test_conflicting_denotations_are_ambiguous(doc):
    doc["phrases"].append({"tokens": ["huge"], "feature": "scale", "values": [2]})
    v = validate_lexicon(lexicon_from_dict(doc))
    assert any(x.kind == "ambiguity" and "huge" in x.message for x in v)


def test_shared_color_words_are_not_ambiguous(lex):
    idx = lex.color_index
    assert set(idx[("red",)]) == set(COLOR_FEATURES)
    assert idx[("light", "green")] == {f: frozenset({3}) for f in COLOR_FEATURES}


def test_uppercase_tokens_flagged_when_built_directly(lex):
    bad = Lexicon(lex.phrases + (Phrase(("Huge",), "scale", frozenset({7})),), lex.head_nouns, lex.templates)
    assert any(x.kind == "normalization" for x in validate_lexicon(bad))


def test_load_normalises_case(doc):
    doc["phrases"][0]["tokens"] = ["RED"]
    lex = load_lexicon(doc)
    assert lex.entry(("red",)) is not None


def test_empty_lexicon_has_57_coverage_violations():
    v = validate_lexicon(Lexicon())
    assert len(v) == sum(CARDINALITY.values()) == 57
    assert all(x.kind == "coverage" for x in v)


@pytest.mark.parametrize("feature,value,word", [
    ("shape", 2, "ball"), ("shape", 2, "sphere"), ("floor_color", 4, "green"),
    ("scale", 0, "tiny"), ("object_color", 0, "red"), ("object_color", 8, "purple"),
    ("wall_color", 3, "light green"), ("orientation", 13, "near the right corner"),
])
def test_phrases_for_examples(lex, feature, value, word):
    assert word in {p.text for p in phrases_for(lex, feature, value)}


def test_phrases_for_out_of_range(lex):
    with pytest.raises(ValueError):
        phrases_for(lex, "shape", 4)
    with pytest.raises(ValueError):
        phrases_for(lex, "colour", 0)


def test_every_value_covered(lex):
    for f in FEATURES:
        for v in range(CARDINALITY[f]):
            assert phrases_for(lex, f, v)


def test_non_color_sequences_identify_one_meaning(lex):
    for p in lex.phrases:
        if p.feature in COLOR_FEATURES:
            continue
        e = lex.entry(p.tokens)
        assert e.denotations == {p.feature: frozenset(p.values)}


def test_template_checks(lex):
    bad = Lexicon(lex.phrases, lex.head_nouns,
                  (Template("exhaustive", "a {shape} on {floor_color} floor"),
                   Template("short", "a {colour} thing"),
                   Template("short", "a huge {shape} {scale}")))
    kinds = [x.kind for x in validate_lexicon(bad)]
    assert kinds.count("template") >= 3


def test_truncated_file_is_schema_error(tmp_path):
    text = default_lexicon_path().read_text()
    p = tmp_path / "t.json"
    p.write_text(text[: len(text) // 2])
    with pytest.raises(LexiconError) as exc:
        load_lexicon(p)
    assert exc.value.violations[0].kind == "schema"


def test_missing_key_is_schema_error(doc):
    del doc["templates"]
    with pytest.raises(LexiconError):
        lexicon_from_dict(doc)


def test_dict_round_trip(lex, doc):
    again = lexicon_from_dict(json.loads(json.dumps(doc)))
    assert again.phrases == lex.phrases and again.templates == lex.templates


def test_env_override(monkeypatch, tmp_path, doc):
    d = copy.deepcopy(doc)
    d["version"] = "custom"
    p = tmp_path / "lex.json"
    p.write_text(json.dumps(d))
    monkeypatch.setenv("A3DS_LEXICON", str(p))
    assert load_lexicon().version == "custom"


def test_longest_match_prefers_multiword(lex):
    spans = [(s, e, " ".join(ent.tokens)) for s, e, ent in lex.longest_match(tokenize("a light green wall"))]
    assert spans == [(1, 3, "light green"), (3, 4, "wall")]


@given(st.text(max_size=60))
def test_tokenize_is_lowercase_alnum(text):
    for t in tokenize(text):
        assert t and t == t.lower() and t.isalnum()
