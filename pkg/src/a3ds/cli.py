"""Command-line entry point.

Subcommands: gen-captions, make-splits, evaluate, simulate, parse,
validate-lexicon.  Data goes to files (or stdout with ``--out -``); progress
and warnings go to stderr.

Exit status: 0 success, 2 bad arguments, 3 validation failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .agents import (
    DEFAULT_REDUNDANCY, FAMILY_KINDS, ListenerPolicy, PolicyError, SpeakerPolicy, run_benchmark,
    score_captions,
)
from .captions import KINDS, caption_texts
from .features import FEATURES, N_IMAGES, ValidationError, decode_id, make_label
from .lexicon import LexiconError, default_lexicon_path, lexicon_from_dict, load_lexicon, prefix_notes, validate_lexicon
from .metrics import K_CONVENTIONS, report_csv, report_json
from .parser import DEFAULT_WINDOW, extract_mentions
from .splits import (
    CATEGORIES, DEFAULT_PAIRS_PER_SET, PairSet, SplitSpec, SplitSpecError, build_split, manifest_dict,
    pairset_from_records, suite_specs, validate_split,
)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("a3ds")


class CommandError(Exception):
    def __init__(self, message, code=EXIT_INVALID):
        super().__init__(message)
        self.code = code


class UsageError(CommandError):
    def __init__(self, message):
        super().__init__(message, EXIT_USAGE)


# config + output helpers ---------------------------------------------------------

_UNHASHED = {"out", "workers", "log", "mentions_out", "func", "quiet"}


def run_meta(args) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _UNHASHED}
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return {"tool": "a3ds", "version": __version__,
            "config_digest": hashlib.sha256(blob).hexdigest()[:16],
            "seed": getattr(args, "seed", None), "config": json.loads(json.dumps(config, default=str))}


def _open_out(path):
    if str(path) == "-":
        return sys.stdout
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise CommandError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def write_text(path, text: str) -> None:
    fh = _open_out(path)
    try:
        fh.write(text)
    finally:
        if fh is not sys.stdout:
            fh.close()


def write_jsonl(path, records, meta: dict) -> int:
    fh = _open_out(path)
    n = 0
    try:
        fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            n += 1
    finally:
        if fh is not sys.stdout:
            fh.close()
    return n


def read_jsonl(path) -> list:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    out = []
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CommandError(f"{path}:{i}: bad JSON ({exc})") from exc
        if isinstance(rec, dict) and "_meta" in rec:
            continue
        out.append(rec)
    return out


def _lexicon(args):
    path = args.lexicon or default_lexicon_path()
    try:
        return load_lexicon(Path(path))
    except OSError as exc:
        raise CommandError(f"cannot read lexicon {path}: {exc}", EXIT_IO) from exc
    except LexiconError as exc:
        raise CommandError(str(exc)) from exc


def _parse_feature_map(text, what) -> dict:
    """``0.3`` (all features) or ``shape=0.3,scale=0.1``."""
    if text is None:
        return None
    try:
        return {f: float(text) for f in FEATURES}
    except ValueError:
        pass
    out = {}
    for item in text.split(","):
        name, sep, val = item.partition("=")
        name = name.strip()
        if not sep or name not in FEATURES:
            raise UsageError(f"--{what}: expected FEATURE=VALUE pairs, got {item!r}")
        try:
            out[name] = float(val)
        except ValueError:
            raise UsageError(f"--{what}: {val!r} is not a number") from None
    return out


def _parse_range(text):
    lo, sep, hi = text.partition(":")
    try:
        lo, hi = int(lo or 0), int(hi) if sep and hi else N_IMAGES
    except ValueError:
        raise UsageError(f"--range expects START:STOP, got {text!r}") from None
    if not 0 <= lo < hi <= N_IMAGES:
        raise CommandError(f"--range {lo}:{hi} outside [0, {N_IMAGES}]", EXIT_USAGE)
    return lo, hi


# subcommands ---------------------------------------------------------------------

def cmd_gen_captions(args) -> int:
    lex = _lexicon(args)
    lo, hi = _parse_range(args.range)
    meta = run_meta(args)
    shard = args.shard_records

    def records():
        for image_id in range(lo, hi):
            label = decode_id(image_id)
            for text in caption_texts(label, lex, args.kind):
                yield {"image_id": image_id, "label": list(label), "kind": args.kind, "text": text}
            if (image_id - lo + 1) % 10000 == 0:
                log.info("gen-captions: %d / %d images", image_id - lo + 1, hi - lo)

    if not shard or args.out == "-":
        n = write_jsonl(args.out, records(), meta)
        log.info("wrote %d captions to %s", n, args.out)
        return EXIT_OK
    out = Path(args.out)
    stem, suffix = out.stem, out.suffix or ".jsonl"
    buf, idx, total = [], 0, 0
    for rec in records():
        buf.append(rec)
        if len(buf) == shard:
            total += write_jsonl(out.with_name(f"{stem}-{idx:05d}{suffix}"), buf, meta)
            buf, idx = [], idx + 1
    if buf:
        total += write_jsonl(out.with_name(f"{stem}-{idx:05d}{suffix}"), buf, meta)
        idx += 1
    log.info("wrote %d captions in %d shards", total, idx)
    return EXIT_OK


def _custom_spec(args):
    if not args.constraint:
        return None
    if len(args.category or []) != 1:
        raise UsageError("--constraint needs exactly one --category")
    cons = args.constraint if args.constraint.startswith("random_") else tuple(args.constraint.split("+"))
    try:
        return SplitSpec(args.category[0], cons, args.pairs_per_set, args.seed, unique=args.unique)
    except SplitSpecError as exc:
        raise CommandError(f"invalid split spec: {exc}") from exc


def _file_name(name: str) -> str:
    return name.replace("/", "__").replace("+", "-") + ".jsonl"


def cmd_make_splits(args) -> int:
    custom = _custom_spec(args)
    if custom:
        specs = [custom]
    else:
        specs = suite_specs(args.seed, args.pairs_per_set)
        if args.category:
            specs = [s for s in specs if s.category in args.category]
        if args.unique:
            specs = [SplitSpec(s.category, s.constraint, s.pairs_per_set, s.seed, s.name, True) for s in specs]
    meta = run_meta(args)
    out = Path(args.out)
    sets, files = [], []
    for spec in specs:
        ps = build_split(spec)
        problems = validate_split(ps)
        if problems:
            raise CommandError(f"{spec.name}: {len(problems)} violations, first: {problems[0]}")
        fname = _file_name(spec.name)
        write_jsonl(out / fname, ps.records(), meta)
        sets.append(ps)
        files.append(fname)
        log.info("%s: %d pairs", spec.name, len(ps))
    write_text(out / "manifest.json", json.dumps(manifest_dict(sets, meta, files), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def load_manifest(path) -> list:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise CommandError(f"cannot read manifest {path}: {exc}", EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise CommandError(f"manifest {path} is not JSON: {exc}") from exc
    sets = []
    for entry in doc.get("sets", []):
        try:
            spec = SplitSpec.from_dict(entry)
        except (KeyError, SplitSpecError) as exc:
            raise CommandError(f"manifest entry {entry.get('name')!r}: {exc}") from exc
        recs = read_jsonl(path.parent / entry["file"])
        try:
            ps = pairset_from_records(spec, recs)
        except (KeyError, ValidationError) as exc:
            raise CommandError(f"{entry['file']}: {exc}") from exc
        problems = validate_split(ps)
        if problems:
            raise CommandError(f"{spec.name}: {len(problems)} violations, first: {problems[0]}")
        sets.append(ps)
    if not sets:
        raise CommandError(f"manifest {path} lists no sets")
    return sets


def _suite(args) -> list:
    if args.splits:
        suite = load_manifest(args.splits)
        if args.category:
            suite = [ps for ps in suite if ps.category in args.category]
    else:
        specs = suite_specs(args.seed, args.pairs_per_set)
        if args.category:
            specs = [s for s in specs if s.category in args.category]
        suite = [build_split(s) for s in specs]
    if not suite:
        raise CommandError("no test sets selected")
    return suite


def _listener(args, speaker=None):
    if not args.listener or args.listener == "none":
        return None
    try:
        return ListenerPolicy(args.listener, args.guess, speaker if args.listener == "l1" else None)
    except PolicyError as exc:
        raise UsageError(str(exc)) from exc


def _write_reports(args, result, meta) -> None:
    out = Path(args.out)
    write_text(out / "report.json", report_json(result.sets, result.categories, result.profiles, meta))
    csv_text = report_csv(result.sets, result.categories, result.profiles)
    # meta travels as trailing columns on every row
    lines = csv_text.splitlines()
    stamped = [lines[0] + ",tool_version,config_digest,seed"]
    stamped += [f"{ln},{meta['version']},{meta['config_digest']},{meta['seed']}" for ln in lines[1:]]
    write_text(out / "report.csv", "\n".join(stamped) + "\n")
    for rep in result.categories:
        acc = "absent" if rep.listener_accuracy is None else f"{rep.listener_accuracy:.3f}"
        e = "n/a" if rep.e is None else f"{rep.e:.3f}"
        log.info("%-15s d=%.3f e=%s r=%.3f od=%.3f k=%.3f false=%.3f acc=%s",
                 rep.name, rep.d, e, rep.r, rep.od, rep.k, rep.false_features, acc)


def cmd_evaluate(args) -> int:
    lex = _lexicon(args)
    suite = load_manifest(args.splits)
    recs = read_jsonl(args.captions)
    names = {ps.name for ps in suite}
    texts = {}
    for i, rec in enumerate(recs):
        name = rec.get("set")
        if name is None:
            if len(suite) != 1:
                raise CommandError(f"caption record {i} has no 'set' and the manifest lists {len(suite)} sets")
            name = suite[0].name
        if name not in names:
            log.warning("caption record %d refers to unknown set %r; skipped", i, name)
            continue
        try:
            texts.setdefault(name, {})[int(rec["pair_index"])] = str(rec.get("text") or "")
        except (KeyError, ValueError):
            raise CommandError(f"caption record {i} needs integer 'pair_index'") from None
    listener = _listener(args, SpeakerPolicy("rsa"))
    result = score_captions(texts, suite, lex, listener, args.seed, args.color_window,
                            args.k_convention, args.workers, keep_games=bool(args.mentions_out))
    for name, missing in result.uncovered.items():
        log.warning("%s: %d pairs have no caption (first: %s); evaluated the covered subset",
                    name, len(missing), missing[:10])
    if not result.sets:
        raise CommandError("no caption covers any pair")
    meta = run_meta(args)
    meta["uncovered"] = {k: v for k, v in sorted(result.uncovered.items())}
    _write_reports(args, result, meta)
    if args.mentions_out:
        write_jsonl(args.mentions_out, _game_records(result), meta)
    return EXIT_OK


def _game_records(result):
    for name, games in result.games.items():
        for i, g in games:
            rec = {"set": name, "pair_index": i}
            rec.update(g.to_record())
            rec["mentions"] = g.mentions.to_dict()
            yield rec


def _speaker(args) -> SpeakerPolicy:
    variant = args.speaker.replace("-", "_")
    kw = {}
    if args.preference:
        kw["preference"] = tuple(args.preference.split(","))
    if variant == "biased":
        kw["redundancy"] = _parse_feature_map(args.redundancy, "redundancy") or dict(DEFAULT_REDUNDANCY)
    if variant == "rsa":
        kw["alpha"] = args.alpha
        kw["cost"] = _parse_feature_map(args.cost, "cost") or {}
        kw["family"] = tuple(args.family.split(","))
    try:
        return SpeakerPolicy(variant, **kw)
    except PolicyError as exc:
        raise CommandError(f"invalid policy: {exc}", EXIT_USAGE) from exc


def cmd_simulate(args) -> int:
    lex = _lexicon(args)
    speaker = _speaker(args)
    listener = _listener(args, speaker if speaker.variant == "rsa" else SpeakerPolicy("rsa"))
    suite = _suite(args)
    result = run_benchmark(speaker, listener, suite, lex, args.seed, args.color_window, args.k_convention,
                           args.workers, keep_games=bool(args.log))
    meta = run_meta(args)
    meta["speaker"] = speaker.to_dict()
    meta["listener"] = listener.to_dict() if listener else None
    _write_reports(args, result, meta)
    if args.log:
        recs = ({k: v for k, v in r.items() if k != "mentions"} for r in _game_records(result))
        write_jsonl(args.log, recs, meta)
    return EXIT_OK


def cmd_parse(args) -> int:
    """Batch mention extraction: {pair_id?, image_id | label, text} -> MentionRecord dumps."""
    lex = _lexicon(args)
    out = []
    for i, rec in enumerate(read_jsonl(args.input)):
        try:
            label = make_label(rec["label"]) if "label" in rec else decode_id(int(rec["image_id"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise CommandError(f"record {i}: needs a valid 'label' or 'image_id' ({exc})") from None
        m = extract_mentions(str(rec.get("text") or ""), label, lex, args.color_window)
        d = {"record": i, "text": rec.get("text", "")}
        if "pair_id" in rec:
            d["pair_id"] = rec["pair_id"]
        d.update(m.to_dict())
        out.append(d)
    write_jsonl(args.out, out, run_meta(args))
    return EXIT_OK


def cmd_validate_lexicon(args) -> int:
    path = args.path or args.lexicon or default_lexicon_path()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        lex = lexicon_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        print(f"schema error: {path} is not valid JSON ({exc})")
        return EXIT_INVALID
    except LexiconError as exc:
        for v in exc.violations:
            print(f"schema error: {v}")
        return EXIT_INVALID
    violations = validate_lexicon(lex)
    for v in violations:
        loc = f" ({v.feature}, {v.value})" if v.value is not None else ""
        print(f"violation: {v}{loc}")
    for n in prefix_notes(lex):
        print(f"note: {n}")
    print(f"{path}: {len(violations)} violations")
    return EXIT_INVALID if violations else EXIT_OK


# argument parsing ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lexicon", help="lexicon JSON (default: $A3DS_LEXICON or the shipped lexicon)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1, help="worker processes (output is order-stable)")
    common.add_argument("--color-window", type=int, default=DEFAULT_WINDOW,
                        help="tokens after a color term searched for its head noun")
    common.add_argument("--k-convention", choices=K_CONVENTIONS, default="truthful")
    common.add_argument("--quiet", action="store_true", help="no progress output")

    p = argparse.ArgumentParser(prog="a3ds", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"a3ds {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-captions", parents=[common], help="dump ground-truth captions")
    g.add_argument("--kind", choices=KINDS, default="exhaustive")
    g.add_argument("--range", default=f"0:{N_IMAGES}", help="image id range START:STOP")
    g.add_argument("--format", choices=["jsonl"], default="jsonl")
    g.add_argument("--shard-records", type=int, default=0, help="records per shard file (0: one file)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_captions)

    def suite_args(q):
        q.add_argument("--category", action="append", choices=sorted(CATEGORIES))
        q.add_argument("--pairs-per-set", type=int, default=DEFAULT_PAIRS_PER_SET)

    m = sub.add_parser("make-splits", parents=[common], help="build test pair sets")
    suite_args(m)
    m.add_argument("--constraint", help="custom set: FEATURE[+FEATURE...] or random_K (needs one --category)")
    m.add_argument("--unique", action="store_true", help="forbid repeated pairs")
    m.add_argument("--out", required=True, help="output directory")
    m.set_defaults(func=cmd_make_splits)

    def listener_args(q, default):
        q.add_argument("--listener", choices=["l0", "l1", "uniform", "none"], default=default)
        q.add_argument("--guess", choices=["argmax", "sample"], default="argmax")

    e = sub.add_parser("evaluate", parents=[common], help="score an external caption dump")
    e.add_argument("--captions", required=True, help="JSONL of {set, pair_index, text}")
    e.add_argument("--splits", required=True, help="split manifest.json")
    listener_args(e, "none")
    e.add_argument("--format", choices=["csv", "json"], default="json", help="(both are always written)")
    e.add_argument("--mentions-out", help="optional JSONL audit of per-caption mentions")
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("simulate", parents=[common], help="play reference games with scripted agents")
    s.add_argument("--speaker", choices=["exhaustive", "oracle-minimal", "biased", "rsa"], required=True)
    listener_args(s, "l0")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--cost", help="per-feature utterance cost: VALUE or FEATURE=VALUE,...")
    s.add_argument("--redundancy", help="biased speaker: VALUE or FEATURE=PROB,...")
    s.add_argument("--preference", help="comma-separated feature order for picking the contrastive feature")
    s.add_argument("--family", default="minimal,short", help=f"RSA utterance family from {FAMILY_KINDS}")
    s.add_argument("--splits", help="split manifest (default: build the standard suite)")
    suite_args(s)
    s.add_argument("--format", choices=["csv", "json"], default="json", help="(both are always written)")
    s.add_argument("--log", help="optional per-game JSONL log")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("parse", parents=[common], help="extract mentions from {image_id|label, text} records")
    r.add_argument("input")
    r.add_argument("--out", default="-")
    r.set_defaults(func=cmd_parse)

    v = sub.add_parser("validate-lexicon", parents=[common], help="check a lexicon file")
    v.add_argument("path", nargs="?")
    v.set_defaults(func=cmd_validate_lexicon)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"a3ds {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
