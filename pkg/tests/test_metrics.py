import csv
import io
import itertools
import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from a3ds.agents import SpeakerPolicy, speak
from a3ds.features import FEATURES, ContrastProfile, ImagePair, contrast_profile, make_label
from a3ds.metrics import (
    CSV_COLUMNS, ConsistencyError, EmptySplitError, aggregate, combine, eval_caption, metric_values,
    redundancy_profile, report_csv, report_json,
)
from a3ds.parser import MentionRecord, Mention, extract_mentions
from a3ds.splits import SplitSpec, build_split

# (c, k, z) -> (d, e, r, od), computed by hand
FORMULA_TABLE = {
    (1, 1, 1): (1, 1, 1, 1),
    (1, 6, 1): (1, 1, 0, 1),
    (2, 3, 2): (1, Fraction(1, 2), Fraction(3, 4), 0),
    (0, 4, 1): (0, None, Fraction(1, 5), 0),
    (0, 0, 3): (0, None, 1, 0),
    (6, 6, 6): (1, 0, 1, 0),
    (3, 6, 6): None,  # at z = 6 every mention is contrastive
    (2, 6, 2): (1, Fraction(4, 5), 0, 0),
    (1, 3, 6): None,  # k - c non-contrastive mentions with no non-contrastive feature
    (3, 3, 3): (1, 0, 1, 0),
    (1, 2, 5): (1, 1, 0, 1),
    (4, 5, 5): (1, Fraction(1, 4), 0, 0),
}


@pytest.mark.parametrize("ckz", sorted(FORMULA_TABLE))
def test_formula_table(ckz):
    expected = FORMULA_TABLE[ckz]
    if expected is None:
        with pytest.raises(ConsistencyError):
            metric_values(*ckz)
        return
    ev = metric_values(*ckz)
    d, e, r, od = expected
    assert (ev.d, ev.od) == (d, od)
    assert ev.e == (None if e is None else pytest.approx(float(e), abs=0))
    assert ev.r == pytest.approx(float(r), abs=1e-15)


@pytest.mark.parametrize("ckz", [(2, 1, 3), (2, 2, 1), (0, 0, 0), (0, 7, 1)])
def test_inconsistent_counts(ckz):
    with pytest.raises(ConsistencyError):
        metric_values(*ckz)


valid_counts = st.integers(1, 6).flatmap(
    lambda z: st.integers(0, z).flatmap(
        lambda c: st.integers(c, c + 6 - z).map(lambda k: (c, k, z))))


@given(valid_counts)
def test_metric_invariants(ckz):
    c, k, z = ckz
    ev = metric_values(c, k, z)
    assert ev.od <= ev.d
    assert (ev.e is not None) == (ev.d == 1)
    assert 0 <= ev.r <= 1
    if ev.e is not None:
        assert 0 <= ev.e <= 1
    if z < 6 and k - c < 6 - z:
        more = metric_values(c, k + 1, z)
        assert more.r < ev.r and more.d == ev.d


@given(st.integers(2, 6), st.data())
def test_e_decreases_in_c(k, data):
    z = data.draw(st.integers(1, 6))
    cs = [c for c in range(1, min(k, z) + 1) if k - c <= 6 - z]
    es = [metric_values(c, k, z).e for c in cs]
    assert all(a > b for a, b in zip(es, es[1:]))


def test_aggregate_support_rule():
    a = metric_values(1, 1, 1)
    b = metric_values(0, 2, 1)
    rep = aggregate([a, a, b, b], "s")
    assert rep.d == 0.5 and rep.e == 1.0 and rep.n == 4 and rep.n_discriminative == 2


def test_aggregate_identical():
    ev = metric_values(2, 3, 2, false_feature_count=1)
    rep = aggregate([ev] * 5, "s", rewards=[1, 1, -1, 1, -1])
    assert (rep.d, rep.e, rep.r, rep.od, rep.k) == (1, 0.5, 0.75, 0, 3)
    assert rep.false_features == 1 and rep.listener_accuracy == pytest.approx(0.6)


def test_aggregate_empty():
    with pytest.raises(EmptySplitError):
        aggregate([], "s")


def test_no_discriminative_gives_undefined_e():
    assert aggregate([metric_values(0, 2, 1)], "s").e is None


def test_combine_is_mean_of_means():
    r1 = aggregate([metric_values(1, 1, 1)], "a")
    r2 = aggregate([metric_values(0, 1, 1)] * 3, "b")
    cat = combine([r1, r2], "cat")
    assert cat.d == 0.5 and cat.e == 1.0 and cat.n == 4 and cat.n_sets == 2


def _rec(target, truthful=(), false=()):
    target = make_label(target)
    m = {f: frozenset({Mention(f, frozenset({target[f]}), True)}) for f in truthful}
    m.update({f: frozenset({Mention(f, frozenset({(target[f] + 1) % 4}), False)}) for f in false})
    return MentionRecord(target, m)


def test_k_conventions():
    target = (0,) * 6
    prof = ContrastProfile(frozenset({"shape"}))
    rec = _rec(target, truthful=("shape",), false=("scale",))
    t = eval_caption(rec, prof)
    a = eval_caption(rec, prof, "all-mentions")
    assert (t.k, t.r, t.false_feature_count) == (1, 1.0, 1)
    assert (a.k, a.r) == (2, pytest.approx(0.8))
    with pytest.raises(ValueError):
        eval_caption(rec, prof, "other")


def test_redundancy_profile_absent_denominator():
    target = (0,) * 6
    items = [(_rec(target, truthful=FEATURES), ContrastProfile(frozenset(FEATURES) - {"shape"}))]
    prof = redundancy_profile(items)
    assert prof.proportions["shape"] == 1.0
    assert prof.proportions["scale"] is None


def test_redundancy_profile_exhaustive_and_minimal(lex):
    ps = build_split(SplitSpec("three_features", "random_3", 300, seed=4))
    for variant, expected in (("exhaustive", 1.0), ("oracle_minimal", 0.0)):
        items = []
        for i, pair in enumerate(ps.pairs):
            cap = speak(SpeakerPolicy(variant), pair, lex, i)
            items.append((extract_mentions(cap.text, pair.target, lex), contrast_profile(pair)))
        prof = redundancy_profile(items)
        assert all(p == expected for p in prof.proportions.values() if p is not None)


def test_biased_shape_profile(lex):
    ps = build_split(SplitSpec("one_feature", ("shape",), 7500, seed=2))
    speaker = SpeakerPolicy("biased", redundancy={"shape": 0.3})
    items = []
    for i, pair in enumerate(ps.pairs):
        cap = speak(speaker, pair, lex, i)
        items.append((extract_mentions(cap.text, pair.target, lex), contrast_profile(pair)))
    prof = redundancy_profile(items).proportions
    assert abs(prof["shape"] - 0.3) <= 0.02
    assert all(prof[f] == 0.0 for f in FEATURES if f != "shape")


def test_only_irrelevant_filter():
    target = (0,) * 6
    prof = ContrastProfile(frozenset({"shape"}))
    items = [(_rec(target, truthful=("shape",)), prof, metric_values(1, 1, 1)),
             (_rec(target, truthful=("shape", "scale")), prof, metric_values(1, 2, 1))]
    p = redundancy_profile(items, only_irrelevant=True)
    assert p.support["scale"] == 1 and p.proportions["scale"] == 1.0


# micro-world: object color in {red, orange} and shape in {cube, cylinder}, everything else fixed
COLOR_WORDS = {0: "red", 1: "orange"}
SHAPE_WORDS = {0: "cube", 1: "cylinder"}


def _micro_caption(color, shape):
    words = ["a"]
    if color is not None:
        words.append(COLOR_WORDS[color])
    words.append("object" if shape is None else SHAPE_WORDS[shape])
    return " ".join(words)


@pytest.mark.parametrize("k_convention", ["truthful", "all-mentions"])
def test_micro_world_brute_force(lex, k_convention):
    images = [make_label((6, 5, col, 3, sh, 7)) for col in (0, 1) for sh in (0, 1)]
    n_checked = 0
    for t, dis in itertools.permutations(images, 2):
        contrastive = {f for f in ("object_color", "shape") if t[f] != dis[f]}
        z = len(contrastive)
        for color, shape in itertools.product((None, 0, 1), repeat=2):
            said = {f: v for f, v in (("object_color", color), ("shape", shape)) if v is not None}
            true_f = {f for f, v in said.items() if t[f] == v}
            false_f = set(said) - true_f
            c = len(true_f & contrastive)
            k = len(true_f) + (len(false_f) if k_convention == "all-mentions" else 0)
            d = int(c > 0)
            e = None if not d else (Fraction(1) if k == c == 1 else 1 - Fraction(c - 1, k - 1))
            r = max(Fraction(0), 1 - Fraction(k - c, 6 - z))
            ev = eval_caption(extract_mentions(_micro_caption(color, shape), t, lex),
                              contrast_profile(ImagePair(t, dis)), k_convention)
            assert (ev.c, ev.k, ev.d, ev.od) == (c, k, d, int(c == 1))
            assert ev.e == (None if e is None else float(e))
            assert ev.r == pytest.approx(float(r))
            assert ev.false_feature_count == len(false_f)
            n_checked += 1
    assert n_checked == 12 * 9


def test_reports_round_and_carry_rows():
    rep = aggregate([metric_values(1, 2, 1), metric_values(1, 3, 1), metric_values(0, 3, 1)], "s", category="c")
    cat = combine([rep], "c")
    text = report_csv([rep], [cat])
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == CSV_COLUMNS
    assert rows[0]["Mentioned features #"] == "2.667" and rows[0]["Listener accuracy"] == ""
    doc = json.loads(report_json([rep], [cat], meta={"seed": 0}))
    assert doc["sets"][0]["Mentioned features #"] == 2.667
    assert doc["categories"][0]["Listener accuracy"] is None
