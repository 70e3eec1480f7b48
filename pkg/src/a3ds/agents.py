"""Scripted and RSA-style reference-game agents and the benchmark runner.

The speaker sees (target, distractor) and emits a caption of the target; the
listener picks one of the two images; reward is +1 for the target, -1
otherwise.  Every caption, simulated or loaded from an external dump, goes
through the same parser and metrics.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .captions import Caption, captions, compose_caption, sample_caption
from .features import FEATURES, ContrastProfile, ImagePair, contrast_profile
from .lexicon import Lexicon
from .metrics import AggregateReport, CaptionEval, aggregate, combine, eval_caption, redundancy_profile
from .parser import DEFAULT_WINDOW, MentionRecord, extract_mentions

SPEAKERS = ("exhaustive", "oracle_minimal", "biased", "rsa")
LISTENERS = ("l0", "l1", "uniform")
FAMILY_KINDS = ("minimal", "short", "exhaustive")

# default: object features are redundantly mentioned more often than background
DEFAULT_REDUNDANCY = {"shape": 0.5, "object_color": 0.3, "scale": 0.3,
                      "orientation": 0.1, "wall_color": 0.05, "floor_color": 0.05}


class PolicyError(ValueError):
    pass


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


@dataclass(frozen=True)
class SpeakerPolicy:
    """One of four speaker variants.

    ``preference`` orders features when several are contrastive (oracle and
    biased speakers); ``redundancy`` gives the biased speaker's per-feature
    probability of adding a true non-contrastive mention; ``alpha``, ``cost``
    and ``family`` parameterise the RSA speaker.
    """

    variant: str
    preference: tuple = FEATURES
    redundancy: dict = field(default_factory=dict)
    alpha: float = 1.0
    cost: dict = field(default_factory=dict)
    family: tuple = ("minimal", "short")

    def __post_init__(self):
        if self.variant not in SPEAKERS:
            raise PolicyError(f"unknown speaker {self.variant!r}; choose from {SPEAKERS}")
        if sorted(self.preference) != sorted(FEATURES):
            raise PolicyError("preference must order all six features")
        for f, p in self.redundancy.items():
            if f not in FEATURES or not 0.0 <= p <= 1.0:
                raise PolicyError(f"bad redundancy entry {f}={p}")
        for f, c in self.cost.items():
            if f not in FEATURES or not math.isfinite(c):
                raise PolicyError(f"bad cost entry {f}={c}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise PolicyError("alpha must be a finite non-negative number")
        if not self.family or any(k not in FAMILY_KINDS for k in self.family):
            raise PolicyError(f"family must be a non-empty subset of {FAMILY_KINDS}")

    def to_dict(self) -> dict:
        d = {"variant": self.variant}
        if self.variant in ("oracle_minimal", "biased"):
            d["preference"] = list(self.preference)
        if self.variant == "biased":
            d["redundancy"] = {f: self.redundancy.get(f, 0.0) for f in FEATURES}
        if self.variant == "rsa":
            d.update(alpha=self.alpha, cost={f: self.cost.get(f, 0.0) for f in FEATURES},
                     family=list(self.family))
        return d


@dataclass(frozen=True)
class ListenerPolicy:
    """``l0`` literal listener, ``l1`` pragmatic listener, ``uniform`` chance guesser.

    ``l1`` reasons about ``speaker`` (an RSA policy); captions outside that
    speaker's utterance families fall back to the literal posterior.
    """

    variant: str = "l0"
    mode: str = "argmax"
    speaker: SpeakerPolicy | None = None

    def __post_init__(self):
        if self.variant not in LISTENERS:
            raise PolicyError(f"unknown listener {self.variant!r}; choose from {LISTENERS}")
        if self.mode not in ("argmax", "sample"):
            raise PolicyError("mode must be 'argmax' or 'sample'")
        if self.variant == "l1" and self.speaker is None:
            object.__setattr__(self, "speaker", SpeakerPolicy("rsa"))

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "mode": self.mode}
        if self.variant == "l1":
            d["speaker"] = self.speaker.to_dict()
        return d


# literal semantics -----------------------------------------------------------

def l0_posterior(text: str, pair: ImagePair, lex: Lexicon, window: int = DEFAULT_WINDOW) -> tuple:
    """(P(target), P(distractor)) proportional to the truthful-mention count on each image.

    Colors are read noun-first: "a red object" is a claim about the object
    even when some other surface of the image happens to be the only red one.
    """
    kt = extract_mentions(text, pair.target, lex, window, "noun_first").k
    kd = extract_mentions(text, pair.distractor, lex, window, "noun_first").k
    if kt + kd == 0:
        return (0.5, 0.5)
    return (kt / (kt + kd), kd / (kt + kd))


def utterance_family(label, lex: Lexicon, kinds=("minimal", "short")) -> list:
    """Finite utterance set for RSA: one-feature descriptions, short and/or exhaustive captions."""
    out, seen = [], set()
    for kind in kinds:
        if kind == "minimal":
            cands = [compose_caption(label, {f}, lex) for f in FEATURES]
        else:
            cands = captions(label, lex, kind)
        for cap in cands:
            if cap.text not in seen:
                seen.add(cap.text)
                out.append(cap)
    return out


def literal_speaker(pair: ImagePair, lex: Lexicon, kinds=("minimal", "short"),
                    window: int = DEFAULT_WINDOW) -> list:
    """S0: uniform over the family's utterances that say nothing false of the target."""
    fam = [u for u in utterance_family(pair.target, lex, kinds)
           if extract_mentions(u.text, pair.target, lex, window).false_feature_count == 0]
    return [(u, 1.0 / len(fam)) for u in fam]


def rsa_speaker(pair: ImagePair, lex: Lexicon, alpha: float = 1.0, cost: dict | None = None,
                kinds=("minimal", "short"), window: int = DEFAULT_WINDOW) -> list:
    """S1(u | target) proportional to exp(alpha * log L0(target | u) - cost(u)).

    Returns (Caption, probability) pairs over the truthful utterance family.
    At ``alpha == 0`` with zero cost this is exactly the literal speaker.
    """
    cost = cost or {}
    family = [u for u, _ in literal_speaker(pair, lex, kinds, window)]
    logw = []
    for u in family:
        c = sum(cost.get(f, 0.0) for f in u.mentioned_features)
        if alpha == 0:
            logw.append(-c)
            continue
        p = l0_posterior(u.text, pair, lex, window)[0]
        logw.append(alpha * math.log(p) - c if p > 0 else -math.inf)
    top = max(logw)
    w = [math.exp(x - top) for x in logw]
    total = math.fsum(w)
    return [(u, x / total) for u, x in zip(family, w)]


def l1_posterior(text: str, pair: ImagePair, lex: Lexicon, speaker: SpeakerPolicy,
                 window: int = DEFAULT_WINDOW) -> tuple:
    """Posterior over (target, distractor) from the assumed speaker's S1 on each image."""
    scores = []
    for p in (pair, pair.swapped()):
        dist = rsa_speaker(p, lex, speaker.alpha, speaker.cost, speaker.family, window)
        scores.append(math.fsum(q for u, q in dist if u.text == text))
    total = scores[0] + scores[1]
    if total == 0:
        return l0_posterior(text, pair, lex, window)
    return (scores[0] / total, scores[1] / total)


# speaking ----------------------------------------------------------------------

def _first_contrastive(profile: ContrastProfile, preference) -> str:
    for f in preference:
        if f in profile.contrastive:
            return f
    raise PolicyError("pair has no contrastive feature")


def speak(policy: SpeakerPolicy, pair: ImagePair, lex: Lexicon, seed=None,
          window: int = DEFAULT_WINDOW) -> Caption:
    rng = _rng(seed)
    if policy.variant == "exhaustive":
        return sample_caption(pair.target, lex, "exhaustive", rng)
    profile = contrast_profile(pair)
    if policy.variant == "oracle_minimal":
        return compose_caption(pair.target, {_first_contrastive(profile, policy.preference)}, lex)
    if policy.variant == "biased":
        feats = {_first_contrastive(profile, policy.preference)}
        # one coin per feature in canonical order keeps the stream reproducible
        for f in FEATURES:
            coin = rng.random()
            if f in profile.non_contrastive and coin < policy.redundancy.get(f, 0.0):
                feats.add(f)
        return compose_caption(pair.target, feats, lex)
    dist = rsa_speaker(pair, lex, policy.alpha, policy.cost, policy.family, window)
    probs = np.array([q for _, q in dist])
    idx = int(rng.choice(len(dist), p=probs / probs.sum()))
    return dist[idx][0]


# games -------------------------------------------------------------------------

@dataclass(frozen=True)
class GameResult:
    pair: ImagePair
    caption: str
    guess: str | None  # "target", "distractor" or None without a listener
    reward: int | None
    evaluation: CaptionEval
    mentions: MentionRecord
    profile: ContrastProfile
    posterior: tuple | None = None

    def to_record(self) -> dict:
        ev = self.evaluation
        return {
            "target_id": self.pair.target_id, "distractor_id": self.pair.distractor_id,
            "text": self.caption, "guess": self.guess, "reward": self.reward,
            "posterior": None if self.posterior is None else [round(p, 6) for p in self.posterior],
            "c": ev.c, "k": ev.k, "z": ev.z, "d": ev.d,
            "e": None if ev.e is None else round(ev.e, 6), "r": round(ev.r, 6), "od": ev.od,
            "false_feature_count": ev.false_feature_count,
        }


def listener_posterior(listener: ListenerPolicy, text: str, pair: ImagePair, lex: Lexicon,
                       window: int = DEFAULT_WINDOW) -> tuple:
    if listener.variant == "uniform":
        return (0.5, 0.5)
    if listener.variant == "l1":
        return l1_posterior(text, pair, lex, listener.speaker, window)
    return l0_posterior(text, pair, lex, window)


def judge_caption(text: str, pair: ImagePair, lex: Lexicon, listener: ListenerPolicy | None = None,
                  seed=None, window: int = DEFAULT_WINDOW, k_convention: str = "truthful") -> GameResult:
    """Score ``text`` on ``pair`` and, with a listener, play the guessing step."""
    rng = _rng(seed)
    profile = contrast_profile(pair)
    mentions = extract_mentions(text, pair.target, lex, window)
    ev = eval_caption(mentions, profile, k_convention)
    guess = reward = post = None
    if listener is not None:
        post = listener_posterior(listener, text, pair, lex, window)
        u = rng.random()
        if listener.mode == "sample":
            pick_target = u < post[0]
        elif post[0] == post[1]:
            pick_target = u < 0.5
        else:
            pick_target = post[0] > post[1]
        guess = "target" if pick_target else "distractor"
        reward = 1 if pick_target else -1
    return GameResult(pair, text, guess, reward, ev, mentions, profile, post)


def play_game(pair: ImagePair, speaker: SpeakerPolicy, listener: ListenerPolicy, lex: Lexicon,
              seed=None, window: int = DEFAULT_WINDOW, k_convention: str = "truthful") -> GameResult:
    rng = _rng(seed)
    caption = speak(speaker, pair, lex, rng, window)
    return judge_caption(caption.text, pair, lex, listener, rng, window, k_convention)


# benchmark ---------------------------------------------------------------------

@dataclass
class BenchmarkResult:
    sets: list  # AggregateReport per set, suite order
    categories: list  # AggregateReport per category
    profiles: dict  # name -> RedundancyProfile, for sets and categories
    games: dict = field(default_factory=dict)  # set name -> list of (pair_index, GameResult)
    uncovered: dict = field(default_factory=dict)  # set name -> missing pair indices

    def category(self, name: str) -> AggregateReport:
        return next(r for r in self.categories if r.name == name)

    def set(self, name: str) -> AggregateReport:
        return next(r for r in self.sets if r.name == name)


def game_seed(seed: int, set_index: int, pair_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, set_index, pair_index])


def _run_set(args):
    (set_index, name, category, pairs, texts, speaker, listener, lex, seed, window, k_convention) = args
    games = []
    for i, pair in enumerate(pairs):
        rng = game_seed(seed, set_index, i)
        if texts is None:
            res = play_game(pair, speaker, listener, lex, rng, window, k_convention)
        else:
            if i not in texts:
                continue
            res = judge_caption(texts[i], pair, lex, listener, rng, window, k_convention)
        games.append((i, res))
    return games


def _summarise(suite, all_games, with_listener: bool) -> tuple:
    set_reports, profiles, by_cat = [], {}, {}
    for ps, games in zip(suite, all_games):
        if not games:
            continue
        results = [g for _, g in games]
        rewards = [g.reward for g in results] if with_listener else None
        rep = aggregate([g.evaluation for g in results], ps.name, rewards, ps.category)
        set_reports.append(rep)
        items = [(g.mentions, g.profile, g.evaluation) for g in results]
        profiles[ps.name] = redundancy_profile(items)
        cat = by_cat.setdefault(ps.category, {"reports": [], "items": []})
        cat["reports"].append(rep)
        cat["items"] += items
    cat_reports = []
    for name, cat in by_cat.items():
        cat_reports.append(combine(cat["reports"], name))
        profiles[name] = redundancy_profile(cat["items"])
    return set_reports, cat_reports, profiles


def run_benchmark(speaker: SpeakerPolicy, listener: ListenerPolicy | None, suite: list, lex: Lexicon,
                  seed: int = 0, window: int = DEFAULT_WINDOW, k_convention: str = "truthful",
                  workers: int = 1, keep_games: bool = False) -> BenchmarkResult:
    """Play every pair of every set; metric reports per set and category."""
    if not suite:
        raise ValueError("empty suite")
    return _benchmark(suite, None, speaker, listener, lex, seed, window, k_convention, workers, keep_games)


def score_captions(texts: dict, suite: list, lex: Lexicon, listener: ListenerPolicy | None = None,
                   seed: int = 0, window: int = DEFAULT_WINDOW, k_convention: str = "truthful",
                   workers: int = 1, keep_games: bool = False) -> BenchmarkResult:
    """Benchmark externally produced captions.

    ``texts`` maps set name -> {pair_index: caption}.  Pairs without a caption
    are listed in ``uncovered`` and skipped.
    """
    if not suite:
        raise ValueError("empty suite")
    result = _benchmark(suite, texts, None, listener, lex, seed, window, k_convention, workers, keep_games)
    for ps in suite:
        have = texts.get(ps.name, {})
        missing = [i for i in range(len(ps.pairs)) if i not in have]
        if missing:
            result.uncovered[ps.name] = missing
    return result


def _benchmark(suite, texts, speaker, listener, lex, seed, window, k_convention, workers, keep_games):
    jobs = [(i, ps.name, ps.category, ps.pairs, None if texts is None else texts.get(ps.name, {}),
             speaker, listener, lex, seed, window, k_convention) for i, ps in enumerate(suite)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            all_games = list(pool.map(_run_set, jobs))
    else:
        all_games = [_run_set(j) for j in jobs]
    sets, cats, profiles = _summarise(suite, all_games, listener is not None)
    games = {ps.name: g for ps, g in zip(suite, all_games)} if keep_games else {}
    return BenchmarkResult(sets, cats, profiles, games)
