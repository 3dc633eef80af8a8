"""Command-line pipeline: one subcommand per stage.

Every flag can be pre-set through an environment variable named
PTMKIT_<FLAG> (dashes become underscores).  Every output file starts with a
one-line ``#`` JSON header carrying the tool version, seed and a config hash
so artifacts are auditable.  Exit codes: 0 success, 1 validation error
(flags, missing files, schema), 2 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from . import aggregation, calibration, curation, dataset_builder, evaluation, normalization, scoring, transform
from .corpus_io import (
    Interaction,
    ParseError,
    iter_jsonl,
    json_line,
    parse_documents,
    parse_gene_protein_map,
    parse_kb_records,
    parse_mentions,
    read_records,
    write_lines,
)

ENV_PREFIX = "PTMKIT_"


class CliError(Exception):
    """Validation failure: prints a message and exits 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2; the contract wants 1
        raise CliError(message)


def _env(name: str, fallback, cast=str):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError as e:
        raise CliError(f"bad value for {ENV_PREFIX}{name.upper()}: {e}") from None


def _ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"ratios must be three comma-separated fractions, got {text!r}")
    try:
        r = tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric ratio in {text!r}") from None
    return r  # positivity and sum are validated by split_dataset


def _require_files(*paths):
    for p in paths:
        if p is not None and not os.path.exists(p):
            raise CliError(f"input file not found: {p}")


def _header(args: argparse.Namespace) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]
    return "#" + json_line(
        {"tool": "ptmkit", "version": __version__, "seed": getattr(args, "seed", None), "config": digest}
    )


def _read_samples(path) -> list[dataset_builder.LabeledSample]:
    with open(path, "rb") as fh:
        return dataset_builder.read_samples(fh, str(path))


def _read_predictions(path) -> list[calibration.PredictionRecord]:
    with open(path, "rb") as fh:
        return calibration.read_predictions(fh, str(path))


def cmd_build_dataset(args) -> int:
    _require_files(args.kb, args.docs, args.mentions, args.map)
    records = read_records(args.kb, parse_kb_records)
    documents = read_records(args.docs, parse_documents)
    mentions = read_records(args.mentions, parse_mentions)
    gp_map = read_records(args.map, parse_gene_protein_map)
    samples, report = dataset_builder.build_dataset(
        records, documents, mentions, gp_map, args.ratios, args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(args)
    write_lines(out / "dataset.jsonl", dataset_builder.write_samples(samples), header)
    for split in dataset_builder.SPLITS:
        subset = [s for s in samples if s.split == split]
        write_lines(out / f"{split}.jsonl", dataset_builder.write_samples(subset), header)
    write_lines(out / "report.json", [json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"], header)
    print(f"built {len(samples)} samples ({report.positives} positive / {report.negatives} negative)")
    return 0


def cmd_transform(args) -> int:
    if bool(args.dataset) == bool(args.docs):
        raise CliError("pass exactly one of --dataset (training mode) or --docs (inference mode)")
    inputs: list[transform.TransformedInput] = []
    if args.dataset:
        _require_files(args.dataset)
        seen: set[str] = set()
        for s in _read_samples(args.dataset):
            if args.split and s.split != args.split:
                continue
            sid = transform.sample_id_for(s.pmid, s.pair)
            if sid in seen:  # same pair under two interaction labels masks identically
                continue
            seen.add(sid)
            na = normalization.NormalizedAbstract(
                pmid=s.pmid, text=s.text, proteins=frozenset(s.pair) | set(s.others)
            )
            inputs.append(transform.mask_participants(na, s.pair))
    else:
        _require_files(args.docs, args.mentions, args.map)
        documents = read_records(args.docs, parse_documents)
        mentions = read_records(args.mentions, parse_mentions)
        gp_map = read_records(args.map, parse_gene_protein_map)
        by_pmid: dict[str, list] = {}
        for m in mentions:
            by_pmid.setdefault(m.pmid, []).append(m)
        normalized = [
            normalization.normalize_document(d, by_pmid.get(d.pmid, ()), gp_map) for d in documents
        ]
        if args.normalized_out:
            write_lines(args.normalized_out, (na.to_json() + "\n" for na in normalized), _header(args))
        for na in normalized:
            for pair in transform.enumerate_pairs(na):
                inputs.append(transform.mask_participants(na, pair))
    if args.budget:
        inputs = [
            transform.TransformedInput(i.sample_id, i.pmid, i.pair, transform.truncate(i.text, args.budget))
            for i in inputs
        ]
    write_lines(args.out, (i.to_json() + "\n" for i in inputs), _header(args))
    print(f"wrote {len(inputs)} transformed inputs")
    return 0


def _parse_scorers(specs: list[str], ensemble_size: int, seed: int, noise: float) -> list[scoring.ScorerHandle]:
    if not specs:
        specs = ["stub"]
    handles: list[scoring.ScorerHandle] = []
    if specs == ["stub"]:
        return scoring.stub_ensemble(ensemble_size, seed=seed, noise=noise)
    for spec in specs:
        identity = len(handles) + 1
        if spec == "stub":
            handles.append(
                scoring.ScorerHandle(kind="stub-lexical", identity=identity, config={"seed": seed, "noise": noise})
            )
        elif spec.startswith(("http://", "https://")):
            handles.append(scoring.ScorerHandle(kind="external", identity=identity, config={"url": spec}))
        elif spec.startswith("cmd:"):
            handles.append(scoring.ScorerHandle(kind="external", identity=identity, config={"command": spec[4:]}))
        else:
            raise CliError(f"scorer spec must be 'stub', 'cmd:<command>' or an http(s) URL, got {spec!r}")
    return handles


def cmd_score(args) -> int:
    _require_files(args.inputs)
    with open(args.inputs, "rb") as fh:
        inputs = [transform.transformed_from_json(obj) for _, obj in iter_jsonl(fh, args.inputs)]
    scorers = _parse_scorers(args.scorer or [], args.ensemble_size, args.seed, args.noise)
    run = scoring.run_ensemble(inputs, scorers, batch_size=args.batch_size, jobs=args.jobs)
    write_lines(args.out, scoring.write_raw_outputs(run.outputs), _header(args))
    if run.failures:
        failures_path = args.failures or args.out + ".failures"
        write_lines(
            failures_path,
            (
                json_line({"id": f.sample_id, "model": f.model_identity, "message": f.message}) + "\n"
                for f in run.failures
            ),
            _header(args),
        )
        print(f"scored {len(run.outputs)} inputs, {len(run.failures)} failures -> {failures_path}")
    else:
        print(f"scored {len(run.outputs)} inputs with {len(scorers)} models")
    return 0


def cmd_calibrate(args) -> int:
    _require_files(args.preds)
    with open(args.preds, "rb") as fh:
        raw = scoring.read_raw_outputs(fh, args.preds)
    records = [calibration.aggregate(r) for r in raw]
    write_lines(args.out, calibration.write_predictions(records), _header(args))
    print(f"aggregated {len(records)} predictions")
    return 0


def cmd_learn_thresholds(args) -> int:
    _require_files(args.preds, args.gold)
    preds = _read_predictions(args.preds)
    gold = None
    if args.correct_only:
        if not args.gold:
            raise CliError("--correct-only requires --gold")
        gold = {transform.sample_id_for(s.pmid, s.pair): s.label for s in _read_samples(args.gold)}
    profile = calibration.learn_thresholds(
        preds, percentile=args.percentile, correct_only=args.correct_only, gold=gold
    )
    write_lines(args.out, [profile.to_json() + "\n"], _header(args))
    print(f"learned thresholds for {len(profile.per_class)} classes")
    return 0


def _read_profile(path) -> calibration.ThresholdProfile:
    with open(path, "rb") as fh:
        objs = [obj for _, obj in iter_jsonl(fh, str(path))]
    if len(objs) != 1:
        raise ParseError("threshold file must hold exactly one JSON object", str(path))
    return calibration.profile_from_json(objs[0])


def cmd_filter(args) -> int:
    _require_files(args.preds, args.thresholds)
    preds = _read_predictions(args.preds)
    profile = _read_profile(args.thresholds)
    high = calibration.filter_high_quality(preds, profile)
    write_lines(args.out, calibration.write_predictions(high), _header(args))
    message = f"retained {len(high)} of {len(preds)} predictions"
    if args.low_out:
        low = calibration.partition_low_quality(preds, profile)
        write_lines(args.low_out, calibration.write_predictions(low), _header(args))
        message += f"; {len(low)} low-quality"
    print(message)
    return 0


def cmd_evaluate(args) -> int:
    _require_files(args.preds, args.gold, args.train)
    preds = _read_predictions(args.preds)
    gold_samples = _read_samples(args.gold)
    gold: dict[str, Interaction] = {}
    for s in gold_samples:
        sid = transform.sample_id_for(s.pmid, s.pair)
        if gold.setdefault(sid, s.label) is not s.label:
            raise CliError(f"{args.gold}: conflicting gold labels for {sid}")
    matrix, report, bins = evaluation.evaluate_predictions(preds, gold, bins=args.bins)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(args)
    write_lines(out / "metrics.json", [json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"], header)
    write_lines(out / "metrics.txt", [evaluation.metrics_table(report)], header)
    if bins is not None:
        write_lines(out / "bins.csv", bins.csv_lines(), header)
    rows = [",".join(str(c) for c in row) + "\n" for row in matrix.counts]
    write_lines(out / "confusion.csv", ["," + ",".join(i.label for i in Interaction) + "\n"]
                + [f"{Interaction(r).label},{line}" for r, line in enumerate(rows)], header)
    if args.train:
        train_docs = {(s.pmid, s.text) for s in _read_samples(args.train)}
        eval_docs = sorted({(s.pmid, s.text) for s in gold_samples})
        sims = evaluation.nearest_train_similarity(eval_docs, sorted(train_docs))
        write_lines(out / "similarity.csv", evaluation.similarity_csv(sims), header)
    if args.top_words:
        by_class: dict[str, list[str]] = {}
        for s in gold_samples:
            by_class.setdefault(s.label.label, []).append(s.text)
        words = evaluation.common_words(by_class, args.top_words)
        write_lines(out / "common_words.csv", evaluation.common_words_csv(words), header)
    print(
        f"micro F1 {report.micro_f1 * 100:.2f}, macro F1 {report.macro_f1 * 100:.2f} "
        f"over {report.support} positive samples"
    )
    return 0


def cmd_aggregate(args) -> int:
    _require_files(args.preds)
    preds = _read_predictions(args.preds)
    triplets, stats = aggregation.aggregate_triplets(preds)
    if args.min_evidence > 1:
        triplets = aggregation.filter_multi_abstract(triplets, args.min_evidence)
    write_lines(args.out, aggregation.write_triplets(triplets), _header(args))
    if args.stats:
        payload = {
            "total_predictions": stats.total_predictions,
            "unique_triplets": stats.unique_triplets,
            "emitted": len(triplets),
            "min_evidence": args.min_evidence,
        }
        write_lines(args.stats, [json.dumps(payload, indent=2, sort_keys=True) + "\n"], _header(args))
    print(f"{stats.total_predictions} predictions -> {stats.unique_triplets} unique triplets, emitted {len(triplets)}")
    return 0


def cmd_compare_reference(args) -> int:
    _require_files(args.triplets, args.reference)
    with open(args.triplets, "rb") as fh:
        triplets = aggregation.read_triplets(fh, args.triplets)
    reference, dropped = aggregation.read_reference(args.reference)
    recall = aggregation.recall_against_reference(triplets, reference)
    payload = {
        "reference_dropped": dropped,
        "per_ptm": {
            ptm: {"found": f, "reference_total": t, "ratio": r} for ptm, (f, t, r) in recall.items()
        },
    }
    write_lines(args.out, [json.dumps(payload, indent=2, sort_keys=True) + "\n"], _header(args))
    print(f"compared against {len(reference)} reference triplets ({dropped} dropped)")
    return 0


def cmd_sample_review(args) -> int:
    _require_files(args.preds, args.normalized)
    preds = _read_predictions(args.preds)
    with open(args.normalized, "rb") as fh:
        texts = {obj["pmid"]: obj["text"] for _, obj in iter_jsonl(fh, args.normalized)}
    items, missing = curation.build_items(preds, texts)
    batch = curation.sample_items(items, per_ptm=args.per_ptm, seed=args.seed)
    write_lines(args.out, (json_line(i.to_dict()) + "\n" for i in batch), _header(args))
    message = f"sampled {len(batch)} of {len(items)} items"
    if missing:
        message += f" ({missing} predictions skipped: abstract text missing)"
    print(message)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    queue = curation.CurationQueue(args.log, snapshot_path=args.snapshot, snapshot_every=args.snapshot_every)
    if args.items:
        _require_files(args.items)
        with open(args.items, "rb") as fh:
            items = [curation.item_from_dict(obj) for _, obj in iter_jsonl(fh, args.items)]
        added = queue.load_items(items)
        print(f"loaded {added} new items ({len(queue.items)} total)")
    app = curation.create_app(queue, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


FORMATS_HELP = """\
file formats (all line oriented, UTF-8, LF; '#' lines are provenance comments):
  abstracts            JSON-lines {"pmid","text"}
  gene mentions        TSV pmid<TAB>start<TAB>end<TAB>surface<TAB>ncbi_id (character offsets)
  gene->protein map    TSV ncbi_id<TAB>acc1,acc2,... (accession order significant)
  KB records           TSV pmid<TAB>accession<TAB>accession<TAB>interaction
  dataset samples      JSON-lines {"pmid","a","b","label","split","text","others"}
  normalized abstracts JSON-lines {"pmid","text","proteins","skipped"}
  transformed inputs   JSON-lines {"id","pmid","a","b","text"}, id = pmid:a:b (a < b)
  raw ensemble outputs JSON-lines {"id","per_model":[[7 probs] x M]}
  prediction log       JSON-lines {"id","pmid","a","b","per_model","mean","pred","conf","std"}
  thresholds           one JSON object keyed by class name
  reliability bins     CSV bin_low,bin_high,count,accuracy,confidence
  triplets             JSON-lines {"a","ptm","b","n_abstracts","pmids","max_conf","min_std"}
  reference triplets   TSV accession<TAB>ptm<TAB>accession
  curation event log   JSON-lines, one item-load or verdict event per line
class order for all probability vectors:
  negative, acetylation, dephosphorylation, deubiquitination, methylation,
  phosphorylation, ubiquitination
"""


def build_parser() -> _Parser:
    parser = _Parser(prog="ptmkit", description=__doc__, epilog=FORMATS_HELP,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"ptmkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser):
        p.add_argument("--seed", type=int, default=_env("seed", 0, int), help="master random seed")
        p.add_argument("--jobs", type=int, default=_env("jobs", os.cpu_count() or 1, int),
                       help="parallel workers (output order is guaranteed regardless)")

    p = sub.add_parser("build-dataset", help="build the distant-supervision dataset (JSON-lines + report)")
    p.add_argument("--kb", required=True, help="knowledge-base records, 4-column TSV")
    p.add_argument("--docs", required=True, help="abstracts, JSON-lines {pmid,text}")
    p.add_argument("--mentions", required=True, help="gene mentions, 5-column TSV")
    p.add_argument("--map", required=True, help="gene->protein accessions, 2-column TSV")
    p.add_argument("--ratios", type=_ratios, default=_env("ratios", None, _ratios), required=_env("ratios", None, _ratios) is None,
                   help="train,val,test fractions (must sum to 1); the reference split proportions are unpublished, so this is always explicit")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("transform", help="mask participants; enumerate candidate pairs in inference mode")
    p.add_argument("--dataset", help="labeled samples JSON-lines (training mode)")
    p.add_argument("--split", choices=dataset_builder.SPLITS, help="restrict --dataset to one split")
    p.add_argument("--docs", help="abstracts JSON-lines (inference mode)")
    p.add_argument("--mentions", help="gene mentions TSV (inference mode)")
    p.add_argument("--map", help="gene->protein TSV (inference mode)")
    p.add_argument("--normalized-out", help="also write normalized abstracts (inference mode)")
    p.add_argument("--budget", type=int, help="truncate to this many whitespace tokens")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("score", help="run the scorer ensemble over transformed inputs")
    p.add_argument("--inputs", required=True)
    p.add_argument("--scorer", action="append",
                   help="'stub', 'cmd:<command>' or http(s) URL; repeat for several members")
    p.add_argument("--ensemble-size", type=int, default=_env("ensemble_size", 10, int),
                   help="stub ensemble size when --scorer is stub/omitted")
    p.add_argument("--noise", type=float, default=_env("noise", 0.05, float),
                   help="stub perturbation magnitude")
    p.add_argument("--batch-size", type=int, default=_env("batch_size", 64, int))
    p.add_argument("--failures", help="where to write per-input failures (default <out>.failures)")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("calibrate", help="aggregate raw ensemble outputs into prediction records")
    p.add_argument("--preds", required=True, help="raw ensemble outputs JSON-lines")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("learn-thresholds", help="per-class confidence/std cutoffs from training predictions")
    p.add_argument("--preds", required=True)
    p.add_argument("--percentile", type=float, default=_env("percentile", 50.0, float))
    p.add_argument("--correct-only", action="store_true",
                   help="use only predictions matching --gold labels")
    p.add_argument("--gold", help="labeled samples for --correct-only")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_learn_thresholds)

    p = sub.add_parser("filter", help="keep high-quality predictions; optionally write the low-quality partition")
    p.add_argument("--preds", required=True)
    p.add_argument("--thresholds", required=True)
    p.add_argument("--low-out", help="also write the low-quality partition here")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("evaluate", help="metrics, reliability bins and analyses against gold labels")
    p.add_argument("--preds", required=True)
    p.add_argument("--gold", required=True, help="labeled samples JSON-lines")
    p.add_argument("--bins", type=int, default=_env("bins", 10, int))
    p.add_argument("--train", help="training samples for nearest-train similarity")
    p.add_argument("--top-words", type=int, help="emit per-class common words CSV with this many rows")
    p.add_argument("--out-dir", required=True)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("aggregate", help="collapse positive predictions into unique triplets")
    p.add_argument("--preds", required=True)
    p.add_argument("--min-evidence", type=int, default=_env("min_evidence", 1, int),
                   help="minimum distinct abstracts per emitted triplet")
    p.add_argument("--stats", help="write total/unique counts here")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("compare-reference", help="recall of triplets against a reference TSV")
    p.add_argument("--triplets", required=True)
    p.add_argument("--reference", required=True, help="3-column TSV: accession, ptm, accession")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_compare_reference)

    p = sub.add_parser("sample-review", help="sample a per-PTM review batch from filtered predictions")
    p.add_argument("--preds", required=True, help="filtered predictions JSON-lines")
    p.add_argument("--normalized", required=True, help="normalized abstracts JSON-lines")
    p.add_argument("--per-ptm", type=int, default=_env("per_ptm", 30, int))
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_sample_review)

    p = sub.add_parser("serve", help="run the curation HTTP service")
    p.add_argument("--log", required=True, help="append-only event log (created if missing)")
    p.add_argument("--items", help="item JSON-lines to load into the queue on startup")
    p.add_argument("--snapshot", help="periodic state snapshot file (warm start; the log stays authoritative)")
    p.add_argument("--snapshot-every", type=int, default=_env("snapshot_every", 100, int),
                   help="verdicts between snapshots")
    p.add_argument("--ui", help="directory with the curation UI bundle to serve")
    p.add_argument("--host", default=_env("host", "127.0.0.1"))
    p.add_argument("--port", type=int, default=_env("port", 8321, int))
    common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ParseError, FileNotFoundError, IsADirectoryError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # scorer/protocol/OS failures
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
