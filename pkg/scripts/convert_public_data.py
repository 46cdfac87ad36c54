#!/usr/bin/env python3
"""Convert public span-annotated sentiment files into the JSONL format.

Two widely mirrored distribution formats are supported, auto-detected
per file:

* triplet-lines: one review per line,
  ``sentence####[([1, 2], [4], 'POS'), ...]`` where the two lists hold
  the aspect and opinion token positions and the label is POS/NEU/NEG.

* tagged-json: a JSON array of records with a "sentence" string and a
  "triples" list; each triple carries "target_tags" and "opinion_tags"
  strings of the form ``word\\B word\\I word\\O ...`` plus a "sentiment"
  of positive/neutral/negative.

Every converted sentence passes the full data-model validation; with
--on-error skip, offending sentences are dropped and counted instead of
aborting.

Example:
    python scripts/convert_public_data.py \\
        --splits train=raw/14res/train.txt dev=raw/14res/dev.txt \\
                 test=raw/14res/test.txt \\
        --out data/14res
"""

from __future__ import annotations

import argparse
import ast
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gridtag.corpus import CorpusError, parse_sentence, sentence_to_obj

LABELS = {"POS": "positive", "NEU": "neutral", "NEG": "negative"}


def positions_to_span(positions: list[int], what: str) -> list[int]:
    if not positions:
        raise CorpusError(f"empty {what} position list")
    lo, hi = min(positions), max(positions)
    if sorted(positions) != list(range(lo, hi + 1)):
        raise CorpusError(f"non-contiguous {what} positions {positions}")
    return [lo, hi]


def parse_triplet_line(line: str) -> dict:
    sentence, _, raw = line.partition("####")
    if not raw:
        raise CorpusError("no '####' separator")
    tokens = sentence.split()
    triplets = []
    for entry in ast.literal_eval(raw.strip()):
        aspect_pos, opinion_pos, label = entry
        if label not in LABELS:
            raise CorpusError(f"unknown sentiment label {label!r}")
        triplets.append(
            {
                "aspect": positions_to_span(list(aspect_pos), "aspect"),
                "opinion": positions_to_span(list(opinion_pos), "opinion"),
                "sentiment": LABELS[label],
            }
        )
    return {"tokens": tokens, "triplets": triplets}


def tag_string_spans(tagged: str, what: str) -> tuple[list[str], list[list[int]]]:
    """Split ``word\\B word\\I word\\O`` into tokens and B/I spans."""
    tokens: list[str] = []
    spans: list[list[int]] = []
    current: list[int] | None = None
    for position, piece in enumerate(tagged.split()):
        word, sep, tag = piece.rpartition("\\")
        if not sep or tag not in ("B", "I", "O"):
            raise CorpusError(f"malformed {what} tag token {piece!r}")
        tokens.append(word)
        if tag == "B":
            current = [position, position]
            spans.append(current)
        elif tag == "I":
            if current is None or current[1] != position - 1:
                raise CorpusError(f"{what} tag I without a continuing B")
            current[1] = position
        else:
            current = None
    return tokens, spans


def parse_tagged_record(record: dict) -> dict:
    tokens = record["sentence"].split()
    triplets = []
    for triple in record.get("triples", []):
        t_tokens, aspects = tag_string_spans(triple["target_tags"], "target")
        o_tokens, opinions = tag_string_spans(triple["opinion_tags"], "opinion")
        if t_tokens != tokens or o_tokens != tokens:
            raise CorpusError("tag strings do not match the sentence tokens")
        sentiment = triple["sentiment"]
        if sentiment not in LABELS.values():
            raise CorpusError(f"unknown sentiment {sentiment!r}")
        # One triple record may mark several spans of one term type; pair
        # every aspect span with every opinion span it annotates.
        for aspect in aspects:
            for opinion in opinions:
                triplets.append(
                    {"aspect": aspect, "opinion": opinion, "sentiment": sentiment}
                )
    return {"tokens": tokens, "triplets": triplets}


def detect_format(path: Path) -> str:
    with path.open("r", encoding="utf-8") as fh:
        head = fh.read(4096).lstrip()
    if head.startswith("[") or head.startswith("{"):
        return "tagged-json"
    if "####" in head:
        return "triplet-lines"
    raise CorpusError(f"cannot detect the format of {path}")


def convert_file(path: Path, fmt: str, on_error: str) -> tuple[list[dict], int]:
    if fmt == "auto":
        fmt = detect_format(path)
    raw_objs: list[tuple[str, dict]] = []
    if fmt == "triplet-lines":
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    raw_objs.append((f"{path}:{lineno}", {"line": line}))
        parse = lambda raw: parse_triplet_line(raw["line"])
    else:
        records = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(records, dict):
            records = [records]
        raw_objs = [(f"{path}[{k}]", r) for k, r in enumerate(records)]
        parse = parse_tagged_record

    converted, skipped = [], 0
    for where, raw in raw_objs:
        try:
            obj = parse(raw)
            parse_sentence(obj)  # full validation; raises CorpusError
        except (CorpusError, ValueError, SyntaxError, KeyError) as exc:
            if on_error == "fail":
                raise CorpusError(f"{where}: {exc}") from None
            print(f"skipping {where}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        converted.append(obj)
    return converted, skipped


def main() -> int:
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument(
        "--splits",
        nargs="+",
        required=True,
        metavar="NAME=FILE",
        help="split assignments, e.g. train=path/train.txt",
    )
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument(
        "--format", default="auto", choices=["auto", "triplet-lines", "tagged-json"]
    )
    parser.add_argument("--on-error", default="fail", choices=["fail", "skip"])
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for assignment in args.splits:
        name, _, source = assignment.partition("=")
        if name not in ("train", "dev", "test") or not source:
            print(f"error: bad split assignment {assignment!r}", file=sys.stderr)
            return 2
        converted, skipped = convert_file(Path(source), args.format, args.on_error)
        target = out / f"{name}.jsonl"
        with target.open("w", encoding="utf-8") as fh:
            for obj in converted:
                fh.write(json.dumps(parse_and_canonicalize(obj)) + "\n")
        total = sum(len(o["triplets"]) for o in converted)
        note = f", {skipped} skipped" if skipped else ""
        print(f"{name}: {len(converted)} sentences, {total} triplets{note} -> {target}")
    return 0


def parse_and_canonicalize(obj: dict) -> dict:
    return sentence_to_obj(parse_sentence(obj))


if __name__ == "__main__":
    sys.exit(main())
