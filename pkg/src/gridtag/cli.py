"""Command-line entry point.

Subcommands: stats, encode-grid, decode-grid, train, predict, eval,
ablate-L.  Outputs are JSON (lines) by default; --pretty switches the
reporting commands to aligned text.  Exit codes: 0 success, 1 data or
validation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import TrainConfig, config_from_dict, load_config
from .corpus import (
    AnnotatedSentence,
    CorpusError,
    OpinionPair,
    OpinionTriplet,
    SentimentPolarity,
    Span,
    load_split,
    sentence_to_obj,
    serialize_split,
)
from .encoders import EncoderError
from .grid import (
    DecodedResult,
    GridError,
    Task,
    decode,
    encode_grid,
    grid_from_obj,
    grid_to_obj,
    unseparable_span_pairs,
)
from .model import GridTagger, predict_sentences
from .scoring import ScoringError, score
from .training import TrainingError, ablate_inference_times, train

log = logging.getLogger(__name__)

USER_ERRORS = (
    CorpusError,
    GridError,
    EncoderError,
    ScoringError,
    TrainingError,
    ValueError,
    OSError,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pretty", action="store_true", help="human-readable output")
    parser.add_argument("--threads", type=int, default=1, help="worker cap for prediction")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True)
    parser.add_argument("--task", choices=["ope", "ote"])
    parser.add_argument("--encoder", choices=["cnn", "bilstm"])
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--learning-rate", type=float, dest="learning_rate")
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--max-epochs", type=int, dest="max_epochs")
    parser.add_argument("--patience", type=int)
    parser.add_argument("--dropout", type=float)


def _split_path(data_dir: str, split: str) -> Path:
    return Path(data_dir) / f"{split}.jsonl"


def _load(data_dir: str, split: str):
    return load_split(_split_path(data_dir, split), split)


def cmd_stats(args: argparse.Namespace) -> int:
    from .corpus import dataset_stats

    split = _load(args.data, args.split)
    stats = dataset_stats(split)
    if args.pretty:
        print(f"split: {split.name}")
        for key, value in stats.to_dict().items():
            print(f"  {key:<14}{value}")
    else:
        print(json.dumps({"split": split.name, **stats.to_dict()}))
    return 0


def cmd_encode_grid(args: argparse.Namespace) -> int:
    split = _load(args.data, args.split)
    task = Task(args.task)
    clashes = 0
    out = Path(args.out)
    with out.open("w", encoding="utf-8") as fh:
        for sentence in split.sentences:
            clashes += len(unseparable_span_pairs(sentence))
            grid = encode_grid(sentence, task)
            fh.write(json.dumps(grid_to_obj(grid, sentence.tokens)) + "\n")
    print(
        json.dumps(
            {"sentences": len(split), "unseparable_span_pairs": clashes, "out": str(out)}
        )
    )
    return 0


def _result_to_obj(result: DecodedResult, task: Task) -> dict:
    triplets = []
    if task is Task.OTE:
        for t in sorted(result.triplets):
            triplets.append(
                {
                    "aspect": [t.aspect.left, t.aspect.right],
                    "opinion": [t.opinion.left, t.opinion.right],
                    "sentiment": t.sentiment.value,
                }
            )
    else:
        for p in sorted(result.pairs):
            triplets.append(
                {
                    "aspect": [p.aspect.left, p.aspect.right],
                    "opinion": [p.opinion.left, p.opinion.right],
                }
            )
    return {
        "triplets": triplets,
        "aspects": [[s.left, s.right] for s in sorted(result.aspects)],
        "opinions": [[s.left, s.right] for s in sorted(result.opinions)],
    }


def cmd_decode_grid(args: argparse.Namespace) -> int:
    out = Path(args.out)
    count = 0
    with Path(args.grids).open("r", encoding="utf-8") as src, out.open(
        "w", encoding="utf-8"
    ) as dst:
        for lineno, line in enumerate(src, start=1):
            if not line.strip():
                continue
            try:
                grid, tokens = grid_from_obj(json.loads(line))
            except (json.JSONDecodeError, GridError) as exc:
                raise GridError(f"{args.grids}:{lineno}: {exc}") from None
            result = decode(grid)
            obj = _result_to_obj(result, grid.task)
            if tokens is not None:
                obj = {"tokens": list(tokens), **obj}
            dst.write(json.dumps(obj) + "\n")
            count += 1
    print(json.dumps({"grids": count, "out": str(out)}))
    return 0


def _build_config(args: argparse.Namespace) -> TrainConfig:
    values = load_config(args.config).to_dict() if args.config else {}
    overrides = {
        "task": args.task,
        "encoder": getattr(args, "encoder", None),
        "seed": args.seed,
        "inference_turns": getattr(args, "inference_turns", None),
        "learning_rate": getattr(args, "learning_rate", None),
        "batch_size": getattr(args, "batch_size", None),
        "max_epochs": getattr(args, "max_epochs", None),
        "patience": getattr(args, "patience", None),
        "dropout": getattr(args, "dropout", None),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(values)


def cmd_train(args: argparse.Namespace) -> int:
    config = _build_config(args)
    train_split = _load(args.data, "train")
    dev_path = _split_path(args.data, "dev")
    dev_split = load_split(dev_path, "dev") if dev_path.exists() else train_split
    if not dev_path.exists():
        log.warning("no dev split found; early stopping on the train split")
    model, report = train(config, train_split, dev_split)

    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(
        json.dumps(config.to_dict(), indent=2), encoding="utf-8"
    )
    model.save(run_dir / "checkpoint.json")
    (run_dir / "report.jsonl").write_text(report.to_jsonl(), encoding="utf-8")
    print(
        json.dumps(
            {
                "best_epoch": report.best_epoch,
                "best_dev_f1": report.best_dev_f1,
                "epochs_run": len(report.epochs),
                "wall_time": report.wall_time,
                "run_dir": str(run_dir),
            }
        )
    )
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    model = GridTagger.load(args.checkpoint)
    split = _load(args.data, args.split)
    results = predict_sentences(model, split.sentences, threads=args.threads)
    out = Path(args.out)
    with out.open("w", encoding="utf-8") as fh:
        for sentence, result in zip(split.sentences, results):
            obj = {"tokens": list(sentence.tokens), **_result_to_obj(result, model.task)}
            fh.write(json.dumps(obj) + "\n")
    print(json.dumps({"sentences": len(split), "out": str(out)}))
    return 0


def _span_from(raw, what: str) -> Span:
    if not (isinstance(raw, list) and len(raw) == 2):
        raise CorpusError(f"{what} must be [left, right], got {raw!r}")
    return Span(int(raw[0]), int(raw[1]))


def load_predictions(path: str | Path, task: Task) -> list[tuple[list[str] | None, DecodedResult]]:
    """Read prediction (or gold-format) JSONL into decoded results.

    Explicit "aspects"/"opinions" arrays are honored when present so
    unpaired predicted terms stay scorable; otherwise terms derive from
    the triplets, which matches how gold annotations are counted.
    """
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from None
            try:
                pairs = set()
                triplets = set()
                for raw in obj.get("triplets", []):
                    aspect = _span_from(raw.get("aspect"), "aspect")
                    opinion = _span_from(raw.get("opinion"), "opinion")
                    pairs.add(OpinionPair(aspect, opinion))
                    if task is Task.OTE:
                        if "sentiment" not in raw:
                            raise CorpusError(
                                "triplet-task predictions need a sentiment"
                            )
                        triplets.add(
                            OpinionTriplet(
                                aspect, opinion, SentimentPolarity(raw["sentiment"])
                            )
                        )
                if "aspects" in obj:
                    aspects = {_span_from(s, "aspects entry") for s in obj["aspects"]}
                else:
                    aspects = {p.aspect for p in pairs}
                if "opinions" in obj:
                    opinions = {_span_from(s, "opinions entry") for s in obj["opinions"]}
                else:
                    opinions = {p.opinion for p in pairs}
                result = DecodedResult(
                    frozenset(aspects),
                    frozenset(opinions),
                    frozenset(pairs),
                    frozenset(triplets),
                )
                records.append((obj.get("tokens"), result))
            except (CorpusError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return records


def cmd_eval(args: argparse.Namespace) -> int:
    task = Task(args.task)
    gold = load_split(args.gold, "test")
    records = load_predictions(args.pred, task)
    if len(records) != len(gold.sentences):
        raise ScoringError(
            f"{len(records)} predictions for {len(gold.sentences)} gold sentences"
        )
    for k, ((tokens, _), sentence) in enumerate(zip(records, gold.sentences)):
        if tokens is not None and tuple(tokens) != sentence.tokens:
            raise ScoringError(f"prediction {k + 1} tokens do not match gold")
    report = score([r for _, r in records], list(gold.sentences), task)
    print(report.render_table() if args.pretty else json.dumps(report.to_dict()))
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    turn_values = [int(v) for v in args.turn_list.split(",") if v != ""]
    config = _build_config(args).replace(inference_turns=None)
    train_split = _load(args.data, "train")
    dev_path = _split_path(args.data, "dev")
    dev_split = load_split(dev_path, "dev") if dev_path.exists() else train_split
    rows = ablate_inference_times(config, train_split, dev_split, turn_values)
    if args.out:
        with Path(args.out).open("w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
    if args.pretty:
        print(f"{'turns':>6}{'best_dev_f1':>14}{'best_epoch':>12}")
        for row in rows:
            print(
                f"{row['inference_turns']:>6}{row['best_dev_f1']:>14.4f}"
                f"{row['best_epoch']:>12}"
            )
    else:
        for row in rows:
            print(json.dumps(row))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridtag",
        description="Word-pair grid tagging for opinion pair/triplet extraction",
    )
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset split statistics")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--split", default="train", choices=["train", "dev", "test"])
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("encode-grid", help="encode gold annotations into tag grids")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="train", choices=["train", "dev", "test"])
    p.add_argument("--task", required=True, choices=["ope", "ote"])
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_encode_grid)

    p = sub.add_parser("decode-grid", help="decode tag grids into annotations")
    p.add_argument("--grids", required=True, help="grid dump file")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_decode_grid)

    p = sub.add_parser("train", help="train a tagger")
    _add_train_flags(p)
    p.add_argument("--inference-turns", type=int, dest="inference_turns")
    p.add_argument("--out", required=True, help="run directory")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decode a trained model over a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=["train", "dev", "test"])
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True, help="gold JSONL file")
    p.add_argument("--task", required=True, choices=["ope", "ote"])
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate-L", help="sweep inference turn counts")
    _add_train_flags(p)
    p.add_argument(
        "--inference-turns",
        default="0,1,2,3",
        dest="turn_list",
        help="comma-separated turn counts",
    )
    p.add_argument("--out", help="JSONL table output path")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
