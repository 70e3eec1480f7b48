import pytest
from hypothesis import given, settings, strategies as st

from a3ds.captions import sample_caption
from a3ds.features import CARDINALITY, FEATURES, make_label
from a3ds.parser import extract_mentions, match_phrases, resolve_colors, tokenize

from conftest import RED_BALL_DRIFTED, RED_BALL_EXHAUSTIVE, RED_BALL_TARGET

# green floor and green wall, red tiny ball
GREEN_ROOM = make_label((4, 4, 0, 0, 2, 7))

labels = st.tuples(*(st.integers(0, CARDINALITY[f] - 1) for f in FEATURES)).map(make_label)
VOCAB = ["a", "tiny", "huge", "red", "green", "light", "blue", "ball", "cube", "wall", "floor", "object",
         "near", "the", "right", "corner", "in", "middle", "of", "on", "front", "xyzzy", "purple"]
word_lists = st.lists(st.sampled_from(VOCAB), max_size=14)


@pytest.mark.parametrize("text,tokens", [
    ("A tiny red ball.", ["a", "tiny", "red", "ball"]),
    ("", []),
    ("Light GREEN wall", ["light", "green", "wall"]),
])
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def test_match_light_green_wall(lex):
    occ = match_phrases(["light", "green", "wall"], lex)
    assert [o.tokens for o in occ] == [("light", "green"), ("wall",)]
    assert occ[1].noun_class == "wall"


def test_match_repeated_and_unknown(lex):
    assert [o.tokens for o in match_phrases(["green", "green"], lex)] == [("green",), ("green",)]
    assert match_phrases(["xyzzy", "qux"], lex) == []


def test_red_ball_drift_binds_red_by_uniqueness(lex):
    occ = match_phrases(tokenize(RED_BALL_DRIFTED), lex)
    red = next(b for b in resolve_colors(occ, RED_BALL_TARGET, lex) if b.occurrence.tokens == ("red",))
    assert (red.feature, red.rule) == ("object_color", "unique_color")


def test_green_wall_uses_head_noun(lex):
    b = resolve_colors(match_phrases(tokenize("a green wall"), lex), GREEN_ROOM, lex)
    assert [(x.feature, x.rule) for x in b] == [("wall_color", "head_noun_window")]


def test_bare_green_is_unresolved(lex):
    m = extract_mentions("green", GREEN_ROOM, lex)
    assert not m.bindings[0].resolved
    assert m.k == 0 and m.false_feature_count == 0 and len(m.unresolved) == 1


def test_window_size(lex):
    text = "green x y z floor"
    assert extract_mentions(text, GREEN_ROOM, lex, window=3).k == 0
    assert extract_mentions(text, GREEN_ROOM, lex, window=4).truthful_features == {"floor_color"}


def test_red_ball_exhaustive(lex):
    m = extract_mentions(RED_BALL_EXHAUSTIVE, RED_BALL_TARGET, lex)
    assert m.k == 6 and m.false_feature_count == 0


def test_empty_string(lex):
    m = extract_mentions("", RED_BALL_TARGET, lex)
    assert m.k == 0 and m.false_feature_count == 0


def test_false_scale(lex):
    m = extract_mentions("a huge red ball", RED_BALL_TARGET, lex)
    assert m.truthful_features == {"object_color", "shape"}
    assert m.false_features == {"scale"}
    assert m.k == 2 and m.false_feature_count == 1


def test_truthful_beats_false_mention(lex):
    m = extract_mentions("a huge tiny ball", RED_BALL_TARGET, lex)
    assert "scale" in m.truthful_features and m.false_feature_count == 0


def test_noun_first_order(lex):
    # target whose wall is the only red surface: "red object" is a false claim about the object
    lab = make_label((4, 0, 8, 0, 2, 7))
    assert extract_mentions("a red object", lab, lex).truthful_features == {"wall_color"}
    nf = extract_mentions("a red object", lab, lex, order="noun_first")
    assert nf.truthful_features == set() and nf.false_features == {"object_color"}


@settings(max_examples=300)
@given(labels, st.integers(0, 2**32 - 1), st.sampled_from(["exhaustive", "short"]))
def test_generated_captions_round_trip(lex, lab, seed, kind):
    cap = sample_caption(lab, lex, kind, seed)
    m = extract_mentions(cap.text, lab, lex)
    assert m.truthful_features == cap.mentioned_features
    assert m.false_feature_count == 0


@given(st.text(max_size=200), labels)
def test_parsing_is_total(lex, text, lab):
    m = extract_mentions(text, lab, lex)
    assert 0 <= m.k <= 6
    assert m.k + m.false_feature_count <= 6


@given(word_lists, word_lists, labels)
def test_appending_keeps_truthful_mentions(lex, head, tail, lab):
    before = extract_mentions(" ".join(head), lab, lex).truthful_features
    after = extract_mentions(" ".join(head + tail), lab, lex).truthful_features
    assert before <= after


@given(word_lists, labels)
def test_truthful_flag_matches_denotation(lex, words, lab):
    m = extract_mentions(" ".join(words), lab, lex)
    for f, ms in m.mentions.items():
        for mention in ms:
            assert mention.truthful == (lab[f] in mention.values)
    unresolved = {b.occurrence.start for b in m.unresolved}
    resolved = {b.occurrence.start for b in m.bindings if b.resolved}
    assert not unresolved & resolved
