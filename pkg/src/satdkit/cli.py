"""Command-line entry point: every pipeline stage as a subcommand.

Each subcommand resolves its configuration (defaults < TOML file < flags),
writes its data artifacts plus exactly one manifest.json into --out, and
logs to standard error only.  Exit codes: 0 success, 1 validation error
(bad flags, unknown config keys, missing or malformed inputs), 2 runtime
failure (network trouble, failed folds, diverged training).

Re-running with --config pointed at a previous manifest.json replays that
run's resolved configuration; in single-threaded mode (--jobs 1) the data
artifacts reproduce byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    CONFIG_SCHEMA,
    ConfigError,
    load_config_file,
    pipeline_config,
    resolve_config,
    resolve_data_path,
    schema_help,
)
from .corpus import (
    IssueSection,
    LabeledDataset,
    SATDLabel,
    TrackerError,
    UnknownProjectError,
    decompose_issue,
    fetch_issues,
    filter_bot_comments,
    identify_bot_candidates,
    load_dataset,
    load_raw_issues,
    save_dataset,
    save_exclusions,
    save_raw_issues,
)
from .evaluation import (
    ExperimentError,
    run_cross_project,
    run_cross_tracker,
    run_cross_validation,
    run_learning_curve,
    run_transfer_experiment,
    train_pipeline,
)
from .keywords import (
    aggregate_keywords,
    emit_overlap_plot_data,
    keyword_overlap,
    load_keyword_csv,
)
from .manifest import RunManifest
from .model import TrainingData, TrainingDivergenceError, cnn_predict, load_model, save_model
from .model.textcnn import TRANSFER_SETTINGS
from .preprocess import (
    build_vocabulary,
    encode_batch,
    save_embedding_file,
    save_vocabulary,
    tokenize,
    train_corpus_embedding,
)

log = logging.getLogger("satdkit")


class CliValidationError(ValueError):
    """Bad command line or unusable input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors as validation errors (exit 1)."""

    def error(self, message):
        raise CliValidationError(f"{self.prog}: {message}")


class _Formatter(argparse.ArgumentDefaultsHelpFormatter,
                 argparse.RawDescriptionHelpFormatter):
    pass


def _slug(value: str) -> str:
    """Filesystem-safe token for artifact names."""
    return "".join(c if c.isalnum() or c in "-." else "-" for c in value) or "unnamed"


def _resolve(args) -> dict:
    file_values = load_config_file(args.config) if getattr(args, "config", None) else None
    overrides: dict[str, dict[str, object]] = {}

    def put(section: str, key: str, value):
        if value is not None:
            overrides.setdefault(section, {})[key] = value

    for section, key, attr in getattr(args, "_config_flags", []):
        put(section, key, getattr(args, attr, None))
    return resolve_config(file_values, overrides)


def _dataset_path(args, config) -> Path:
    if getattr(args, "data", None):
        path = Path(args.data)
    else:
        path = resolve_data_path(config, config["data"]["dataset"])
    if not path.is_file():
        raise CliValidationError(f"dataset not found at expected path: {path}")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args, config) -> int:
    return config["evaluation"]["seed"] if args.seed is None else args.seed


def _manifest(args, config, seeds: dict[str, int], inputs) -> RunManifest:
    manifest = RunManifest(command=args.command, argv=list(args._argv),
                           config=config, seeds=seeds)
    for path in inputs:
        manifest.add_input(path)
    return manifest


def _finish(manifest: RunManifest, out: Path, started: float) -> int:
    manifest.wall_time_s = time.perf_counter() - started
    manifest.write(out)
    return 0


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _metrics_dict(metrics) -> dict:
    return {"precision": metrics.precision, "recall": metrics.recall, "f1": metrics.f1}


# ---------------------------------------------------------------- subcommands


def cmd_ingest(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    c = config["corpus"]
    if not c["base_url"]:
        raise CliValidationError("a tracker base URL is required "
                                 "(--base-url or [corpus] base_url)")
    if not c["projects"]:
        raise CliValidationError("at least one project is required "
                                 "(--project or [corpus] projects)")
    cache_dir = resolve_data_path(config, c["cache_dir"]) if c["cache_dir"] else None
    issues = []
    for project in c["projects"]:
        fetched = fetch_issues(c["base_url"], c["tracker"], project, c["max_issues"],
                               auth=c["auth_token"] or None, cache_dir=cache_dir,
                               offline=c["offline"], jobs=args.jobs)
        log.info("fetched %d issues from %s project %r", len(fetched), c["tracker"], project)
        issues.extend(fetched)
    out = _out_dir(args)
    save_raw_issues(issues, out / "issues.jsonl")
    log.info("wrote %s (%d issues)", out / "issues.jsonl", len(issues))
    return _finish(_manifest(args, config, {}, []), out, started)


def cmd_clean(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    c = config["corpus"]
    issues_path = Path(args.input) if args.input else \
        resolve_data_path(config, "issues.jsonl")
    if not issues_path.is_file():
        raise CliValidationError(f"issues file not found at expected path: {issues_path}")
    issues = load_raw_issues(issues_path)
    patterns = tuple(c["code_patterns"]) or None
    exclusions: list[dict] = []
    sections: list[IssueSection] = []
    for issue in issues:
        sections.extend(decompose_issue(issue, patterns=patterns, exclusions=exclusions))
    candidates = identify_bot_candidates(issues)
    sections = filter_bot_comments(sections, c["bot_usernames"])
    labels = [SATDLabel(is_satd=False, satd_type=None, indicator=None)
              for _ in sections]
    dataset = LabeledDataset(sections=sections, labels=labels,
                             provenance=f"cleaned from {issues_path}")
    out = _out_dir(args)
    save_dataset(dataset, out / "sections.jsonl")
    save_exclusions(exclusions, out / "exclusions.jsonl")
    with (out / "bot_candidates.jsonl").open("w", encoding="utf-8", newline="\n") as fh:
        for username, count in candidates:
            fh.write(json.dumps({"username": username, "comment_count": count},
                                ensure_ascii=False) + "\n")
    log.info("wrote %d sections (%d issues excluded, %d bot candidates listed)",
             len(sections), len(exclusions), len(candidates))
    manifest = _manifest(args, config, {}, [issues_path])
    return _finish(manifest, out, started)


def cmd_label_import(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    data_path = _dataset_path(args, config)
    labels_path = Path(args.labels)
    if not labels_path.is_file():
        raise CliValidationError(f"labels file not found at expected path: {labels_path}")
    dataset = load_dataset(data_path)
    index = {section.ref: i for i, section in enumerate(dataset.sections)}
    labels = list(dataset.labels)
    applied = 0
    with labels_path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            try:
                ref = (record["project"], record["issue_id"],
                       record["kind"], record["position"])
                label = SATDLabel(is_satd=record["is_satd"],
                                  satd_type=record.get("satd_type"),
                                  indicator=record.get("indicator"))
            except (KeyError, TypeError, ValueError) as exc:
                raise CliValidationError(
                    f"{labels_path}: line {lineno}: {exc}") from exc
            if ref not in index:
                raise CliValidationError(
                    f"{labels_path}: line {lineno}: no section matches {ref}")
            labels[index[ref]] = label
            applied += 1
    labeled = LabeledDataset(sections=dataset.sections, labels=labels,
                             provenance=f"labels from {labels_path} onto {data_path}")
    out = _out_dir(args)
    save_dataset(labeled, out / "labeled.jsonl")
    log.info("applied %d labels; %d sections now positive",
             applied, labeled.positive_count)
    manifest = _manifest(args, config, {}, [data_path, labels_path])
    return _finish(manifest, out, started)


def cmd_embed(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    data_path = _dataset_path(args, config)
    dataset = load_dataset(data_path)
    pre = config["preprocess"]
    seed = _seed(args, config)
    tokens = [tokenize(s.text) for s in dataset.sections]
    vocab = build_vocabulary(tokens, min_count=pre["min_count"])
    matrix = train_corpus_embedding(tokens, vocab, pre["embedding_dim"], seed,
                                    epochs=pre["embedding_epochs"],
                                    buckets=pre["embedding_buckets"])
    out = _out_dir(args)
    save_vocabulary(vocab, out / "vocabulary.jsonl")
    save_embedding_file(matrix, vocab, out / "embedding.txt")
    log.info("trained %d-dim embeddings for %d tokens", matrix.dim, vocab.size)
    manifest = _manifest(args, config, {"seed": seed}, [data_path])
    return _finish(manifest, out, started)


def cmd_train(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    data_path = _dataset_path(args, config)
    seed = _seed(args, config)
    pipeline = pipeline_config(config, seed=seed)
    if pipeline.classifier != "cnn":
        raise CliValidationError(
            "train writes CNN checkpoints; set [model] classifier = \"cnn\" "
            f"(got {pipeline.classifier!r})")
    dataset = load_dataset(data_path)
    model, vocab, artifacts = train_pipeline(dataset, pipeline, seed=seed)
    out = _out_dir(args)
    save_model(model, out / "model.ckpt", vocab=vocab)
    log.info("trained on %d sections (vocab %d); checkpoint at %s",
             len(dataset), vocab.size, out / "model.ckpt")
    log.debug("training artifacts: %s", artifacts)
    manifest = _manifest(args, config, {"seed": seed}, [data_path])
    return _finish(manifest, out, started)


def cmd_predict(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    model_path = Path(args.model)
    if not model_path.is_file():
        raise CliValidationError(f"model checkpoint not found at expected path: {model_path}")
    input_path = Path(args.input)
    if not input_path.is_file():
        raise CliValidationError(f"input file not found at expected path: {input_path}")
    model, vocab = load_model(model_path)
    if vocab is None:
        raise CliValidationError(
            f"checkpoint {model_path} does not embed a vocabulary; retrain with "
            "the train subcommand (it stores the vocabulary alongside the tensors)")
    records = []
    with input_path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            if not isinstance(record, dict) or "text" not in record \
                    or not isinstance(record["text"], str):
                raise CliValidationError(
                    f"{input_path}: line {lineno}: expected an object with a 'text' field")
            records.append(record)
    token_lists = [tokenize(r["text"]) for r in records]
    indices, lengths = encode_batch(token_lists, vocab, model.config.max_len)
    predicted = np.zeros(len(records), dtype=bool)
    probs = np.zeros(len(records))
    keep = lengths >= 1
    if np.any(keep):
        data = TrainingData(indices[keep], lengths[keep],
                            np.zeros(int(keep.sum()), dtype=np.int64))
        pred_kept, probs_kept = cnn_predict(model, data)
        predicted[keep] = pred_kept
        probs[keep] = probs_kept
    out = _out_dir(args)
    with (out / "predictions.jsonl").open("w", encoding="utf-8", newline="\n") as fh:
        for record, flag, prob in zip(records, predicted, probs):
            enriched = dict(record)
            enriched["predicted_is_satd"] = bool(flag)
            enriched["satd_probability"] = float(prob)
            fh.write(json.dumps(enriched, ensure_ascii=False) + "\n")
    log.info("predicted %d/%d sections as SATD", int(predicted.sum()), len(records))
    manifest = _manifest(args, config, {}, [model_path, input_path])
    return _finish(manifest, out, started)


def cmd_cross_validate(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    data_path = _dataset_path(args, config)
    dataset = load_dataset(data_path)
    seed = _seed(args, config)
    k = config["evaluation"]["k"]
    pipeline = pipeline_config(config, seed=seed)
    report = run_cross_validation(dataset, pipeline, k=k, seed=seed,
                                  keep_predictions=args.keep_predictions,
                                  jobs=args.jobs)
    out = _out_dir(args)
    json_path, csv_path = report.write(out, stem="report")
    if args.keep_predictions and report.predictions is not None:
        with (out / "predictions.jsonl").open("w", encoding="utf-8", newline="\n") as fh:
            for row in report.predictions:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    log.info("%d-fold averages: precision=%.3f recall=%.3f f1=%.3f",
             k, report.averages.precision, report.averages.recall, report.averages.f1)
    log.info("wrote %s and %s", json_path, csv_path)
    manifest = _manifest(args, config, {"seed": seed}, [data_path])
    return _finish(manifest, out, started)


def cmd_cross_project(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    data_path = _dataset_path(args, config)
    dataset = load_dataset(data_path)
    seed = _seed(args, config)
    pipeline = pipeline_config(config, seed=seed)
    per_project, average = run_cross_project(dataset, pipeline, seed=seed)
    out = _out_dir(args)
    summary = {"average": _metrics_dict(average), "projects": {}}
    for project, report in per_project.items():
        report.write(out, stem=f"report_{_slug(project)}")
        summary["projects"][project] = _metrics_dict(report.averages)
    _write_json(out / "summary.json", summary)
    log.info("cross-project average f1=%.3f over %d projects",
             average.f1, len(per_project))
    manifest = _manifest(args, config, {"seed": seed}, [data_path])
    return _finish(manifest, out, started)


def cmd_cross_tracker(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    data_path = _dataset_path(args, config)
    dataset = load_dataset(data_path)
    seed = _seed(args, config)
    pipeline = pipeline_config(config, seed=seed)
    results = run_cross_tracker(dataset, pipeline, seed=seed)
    out = _out_dir(args)
    summary: dict = {}
    for target_tracker, (per_project, average) in results.items():
        summary[target_tracker] = {"average": _metrics_dict(average), "projects": {}}
        for project, report in per_project.items():
            report.write(out, stem=f"report_{_slug(target_tracker)}__{_slug(project)}")
            summary[target_tracker]["projects"][project] = _metrics_dict(report.averages)
        log.info("target tracker %s: average f1=%.3f", target_tracker, average.f1)
    _write_json(out / "summary.json", summary)
    manifest = _manifest(args, config, {"seed": seed}, [data_path])
    return _finish(manifest, out, started)


def _parse_plan(text: str) -> tuple[str, str]:
    aliases = {"fresh": "fresh", "fine_tune": "fine_tune", "tune": "fine_tune",
               "frozen": "frozen", "freeze": "frozen"}
    parts = dict(item.split("=", 1) for item in text.split(",") if "=" in item)
    try:
        conv = aliases[parts["conv"].strip()]
        output = aliases[parts["output"].strip()]
    except KeyError as exc:
        raise CliValidationError(
            f"bad transfer plan {text!r}; expected conv=<s>,output=<s> with "
            f"settings from {TRANSFER_SETTINGS}") from exc
    return conv, output


def cmd_transfer(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    data_path = _dataset_path(args, config)
    dataset = load_dataset(data_path)
    seed = _seed(args, config)
    k = config["evaluation"]["k"]
    pipeline = pipeline_config(config, seed=seed)
    source_value = args.source or config["evaluation"]["source_path"]
    if not source_value:
        raise CliValidationError("a source dataset is required "
                                 "(--source or [evaluation] source_path)")
    source_path = Path(args.source) if args.source else \
        resolve_data_path(config, source_value)
    plan_specs = args.plan or config["evaluation"]["plans"]
    if plan_specs:
        plan_grid = [_parse_plan(p) for p in plan_specs]
    else:
        plan_grid = [(conv, output) for conv in TRANSFER_SETTINGS
                     for output in TRANSFER_SETTINGS]
    budgets = args.budget or config["evaluation"]["budget_sizes"] or None
    results = run_transfer_experiment(dataset, source_path, plan_grid, pipeline,
                                      budget_sizes=budgets, k=k, seed=seed)
    out = _out_dir(args)
    with (out / "summary.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["plan", "budget", "precision", "recall", "f1"])
        for (tag, budget), report in results.items():
            stem = f"report_{_slug(tag)}_budget-{budget if budget is not None else 'full'}"
            report.write(out, stem=stem)
            writer.writerow([tag, budget if budget is not None else "full",
                             repr(report.averages.precision),
                             repr(report.averages.recall),
                             repr(report.averages.f1)])
    log.info("ran %d transfer cells (%d plans)", len(results), len(plan_grid))
    manifest = _manifest(args, config, {"seed": seed}, [data_path, source_path])
    return _finish(manifest, out, started)


def cmd_learning_curve(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    data_path = _dataset_path(args, config)
    dataset = load_dataset(data_path)
    seed = _seed(args, config)
    pipeline = pipeline_config(config, seed=seed)
    curve = run_learning_curve(dataset, pipeline, step=config["evaluation"]["step"],
                               k=config["evaluation"]["k"], seed=seed)
    out = _out_dir(args)
    with (out / "curve.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["train_size", "mean_f1"])
        for size, mean_f1 in curve:
            writer.writerow([size, repr(mean_f1)])
    _write_json(out / "curve.json",
                [{"train_size": size, "mean_f1": mean_f1} for size, mean_f1 in curve])
    log.info("learning curve over %d sizes (peak f1=%.3f)",
             len(curve), max((f for _, f in curve), default=0.0))
    manifest = _manifest(args, config, {"seed": seed}, [data_path])
    return _finish(manifest, out, started)


def cmd_keywords(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    model_path = Path(args.model)
    if not model_path.is_file():
        raise CliValidationError(f"model checkpoint not found at expected path: {model_path}")
    data_path = _dataset_path(args, config)
    model, vocab = load_model(model_path)
    if vocab is None:
        raise CliValidationError(
            f"checkpoint {model_path} does not embed a vocabulary; retrain with "
            "the train subcommand")
    dataset = load_dataset(data_path)
    kw = config["keywords"]
    result = aggregate_keywords(model, dataset, vocab,
                                top_fraction=kw["top_fraction"],
                                top_m_features=kw["top_m_features"],
                                per_project=kw["per_project"])
    out = _out_dir(args)
    if kw["per_project"]:
        for project, table in sorted(result.items()):
            table.to_csv(out / f"keywords_{_slug(project)}.csv")
        log.info("wrote keyword tables for %d projects", len(result))
    else:
        result.to_csv(out / "keywords.csv")
        total = sum(len(rows) for rows in result.per_n.values())
        log.info("wrote %d keywords to %s", total, out / "keywords.csv")
    manifest = _manifest(args, config, {}, [model_path, data_path])
    return _finish(manifest, out, started)


def cmd_overlap(args) -> int:
    started = time.perf_counter()
    config = _resolve(args)
    if len(args.table) < 2:
        raise CliValidationError("overlap needs at least two --table LABEL=PATH inputs")
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes \
        else list(config["keywords"]["sizes"])
    sets: dict[str, set] = {}
    table_paths = []
    for spec in args.table:
        label, sep, path_str = spec.partition("=")
        if not sep or not label or not path_str:
            raise CliValidationError(f"bad --table {spec!r}; expected LABEL=PATH")
        path = Path(path_str)
        if not path.is_file():
            raise CliValidationError(f"keyword table not found at expected path: {path}")
        table_paths.append(path)
        per_n = load_keyword_csv(path)
        rows = [(ngram, weight) for n in sizes for (ngram, weight, _) in per_n.get(n, [])]
        if args.top is not None:
            rows.sort(key=lambda row: (-row[1], row[0]))
            rows = rows[:args.top]
        sets[label] = {ngram for ngram, _ in rows}
    labels, matrix = keyword_overlap(sets)
    out = _out_dir(args)
    filename = {"csv": "overlap.csv", "heatmap_csv": "overlap_heatmap.csv",
                "chord_json": "overlap_chord.json"}[args.format]
    emit_overlap_plot_data(labels, matrix, args.format, out / filename)
    log.info("wrote %s for %d keyword sets", out / filename, len(labels))
    manifest = _manifest(args, config, {}, table_paths)
    return _finish(manifest, out, started)


# ------------------------------------------------------------------- parser


def _add_common(sub, sections, data_flag=True, seed_flag=True, jobs_flag=False):
    sub.add_argument("--config", metavar="PATH",
                     help="TOML config file or a previous manifest.json to replay")
    sub.add_argument("--out", metavar="DIR", default=".",
                     help="output directory (artifacts + manifest.json)")
    if data_flag:
        sub.add_argument("--data", metavar="PATH",
                         help="dataset JSONL (default: [data] dataset under the data root)")
    if seed_flag:
        sub.add_argument("--seed", type=int, default=None,
                         help="base RNG seed (default: [evaluation] seed)")
    if jobs_flag:
        sub.add_argument("--jobs", type=int, default=1,
                         help="parallel worker cap; 1 = deterministic single-threaded")
    sub.epilog = schema_help(sections)


def _flag(sub, args_store, name, section, key, **kwargs):
    attr = name.lstrip("-").replace("-", "_")
    sub.add_argument(name, **kwargs)
    args_store.append((section, key, attr))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="satdkit", formatter_class=_Formatter,
                     description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging on stderr")
    commands = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    def sub(name, helptext, handler, sections, **common):
        p = commands.add_parser(name, help=helptext, description=helptext,
                                formatter_class=_Formatter)
        config_flags: list[tuple[str, str, str]] = []
        p.set_defaults(handler=handler, _config_flags=config_flags)
        _add_common(p, sections, **common)
        return p, config_flags

    p, flags = sub("ingest", "Fetch issues from a tracker into issues.jsonl.",
                   cmd_ingest, ["data", "corpus"], data_flag=False, seed_flag=False,
                   jobs_flag=True)
    _flag(p, flags, "--tracker", "corpus", "tracker", choices=["jira", "monorail"],
          help="tracker family")
    _flag(p, flags, "--base-url", "corpus", "base_url", metavar="URL",
          help="tracker API base URL")
    _flag(p, flags, "--project", "corpus", "projects", action="append", metavar="NAME",
          help="project to fetch (repeatable)")
    _flag(p, flags, "--max-issues", "corpus", "max_issues", type=int, metavar="N",
          help="cap issues per project")
    _flag(p, flags, "--auth-token", "corpus", "auth_token", metavar="TOKEN",
          help="bearer token")
    _flag(p, flags, "--cache-dir", "corpus", "cache_dir", metavar="DIR",
          help="HTTP record/replay cache directory")
    _flag(p, flags, "--offline", "corpus", "offline", action="store_const", const=True,
          default=None, help="serve everything from the cache; no network")

    p, flags = sub("clean", "Decompose raw issues into sections; strip code; drop bot comments.",
                   cmd_clean, ["data", "corpus"], data_flag=False, seed_flag=False)
    p.add_argument("--input", metavar="PATH",
                   help="issues JSONL from ingest (default: issues.jsonl under the data root)")
    _flag(p, flags, "--bot", "corpus", "bot_usernames", action="append", metavar="USER",
          help="bot username whose comments are dropped (repeatable)")
    _flag(p, flags, "--pattern", "corpus", "code_patterns", action="append", metavar="REGEX",
          help="replace the shipped code-stripping patterns (repeatable)")

    p, _ = sub("label-import", "Merge a JSONL label file onto a sections dataset.",
               cmd_label_import, ["data"], seed_flag=False)
    p.add_argument("--labels", metavar="PATH", required=True,
                   help="JSONL of {project, issue_id, kind, position, is_satd, ...}")

    p, flags = sub("embed", "Train subword skip-gram embeddings on a dataset's text.",
                   cmd_embed, ["data", "preprocess", "evaluation"])
    _flag(p, flags, "--dim", "preprocess", "embedding_dim", type=int, metavar="D",
          help="embedding dimensionality")
    _flag(p, flags, "--epochs", "preprocess", "embedding_epochs", type=int, metavar="N",
          help="training epochs")
    _flag(p, flags, "--min-count", "preprocess", "min_count", type=int, metavar="N",
          help="vocabulary frequency threshold")

    p, flags = sub("train", "Train the CNN on a full dataset and write model.ckpt.",
                   cmd_train, ["data", "preprocess", "imbalance", "model", "evaluation"])
    _flag(p, flags, "--imbalance", "imbalance", "strategy",
          choices=["none", "weighted", "oversample", "eda"], help="imbalance strategy")
    _flag(p, flags, "--embedding-source", "preprocess", "embedding_source",
          choices=["random", "pretrained_general", "pretrained_se", "corpus_trained"],
          help="embedding initialization")
    _flag(p, flags, "--epochs", "model", "epochs", type=int, metavar="N",
          help="training epochs")

    p, _ = sub("predict", "Classify JSONL records with a checkpoint; append predictions.",
               cmd_predict, ["data"], data_flag=False, seed_flag=False)
    p.add_argument("--model", metavar="PATH", required=True, help="model checkpoint")
    p.add_argument("--input", metavar="PATH", required=True,
                   help="JSONL with a 'text' field per record")

    for name, helptext, handler in [
        ("cross-validate", "Stratified k-fold evaluation; writes report.json/report.csv.",
         cmd_cross_validate),
        ("cross-project", "Leave-one-project-out evaluation; per-project reports + summary.",
         cmd_cross_project),
        ("cross-tracker", "Train on one tracker family, test on the other (both ways).",
         cmd_cross_tracker),
    ]:
        p, flags = sub(name, helptext, handler,
                       ["data", "preprocess", "imbalance", "model", "evaluation"],
                       jobs_flag=(name == "cross-validate"))
        _flag(p, flags, "--classifier", "model", "classifier",
              choices=["cnn", "nbm", "lr", "knn", "svm", "rf", "random", "keyword"],
              help="classifier to evaluate")
        _flag(p, flags, "--imbalance", "imbalance", "strategy",
              choices=["none", "weighted", "oversample", "eda"], help="imbalance strategy")
        _flag(p, flags, "--embedding-source", "preprocess", "embedding_source",
              choices=["random", "pretrained_general", "pretrained_se", "corpus_trained"],
              help="embedding initialization")
        if name == "cross-validate":
            _flag(p, flags, "--k", "evaluation", "k", type=int, help="number of folds")
            p.add_argument("--keep-predictions", action="store_true",
                           help="also write per-section predictions.jsonl")

    p, flags = sub("transfer", "Source-to-target transfer over a fresh/fine-tune/frozen plan grid.",
                   cmd_transfer, ["data", "preprocess", "imbalance", "model", "evaluation"])
    p.add_argument("--source", metavar="PATH",
                   help="source corpus as JSONL {text, label} "
                        "(default: [evaluation] source_path)")
    p.add_argument("--plan", action="append", metavar="SPEC",
                   help="transfer plan 'conv=<s>,output=<s>', settings "
                        "fresh|fine_tune|frozen (repeatable; default: full 3x3 grid)")
    p.add_argument("--budget", action="append", type=int, metavar="N",
                   help="training-set size cap (repeatable; default: full folds)")
    _flag(p, flags, "--k", "evaluation", "k", type=int, help="number of folds")

    p, flags = sub("learning-curve", "Mean F1 at growing training-set sizes under k-fold CV.",
                   cmd_learning_curve,
                   ["data", "preprocess", "imbalance", "model", "evaluation"])
    _flag(p, flags, "--step", "evaluation", "step", type=int, metavar="N",
          help="training-size increment")
    _flag(p, flags, "--k", "evaluation", "k", type=int, help="number of folds")

    p, flags = sub("keywords", "Extract ranked SATD n-gram keywords from a trained model.",
                   cmd_keywords, ["data", "keywords"], seed_flag=False)
    p.add_argument("--model", metavar="PATH", required=True, help="model checkpoint")
    _flag(p, flags, "--top-fraction", "keywords", "top_fraction", type=float,
          metavar="F", help="fraction of distinct n-grams kept per size")
    _flag(p, flags, "--top-m", "keywords", "top_m_features", type=int, metavar="M",
          help="strongest features backtracked per section")
    _flag(p, flags, "--per-project", "keywords", "per_project", action="store_const",
          const=True, default=None, help="one keyword table per project")

    p, _ = sub("overlap", "Pairwise intersection counts between keyword tables.",
               cmd_overlap, ["data", "keywords"], data_flag=False, seed_flag=False)
    p.add_argument("--table", action="append", metavar="LABEL=PATH", default=[],
                   help="keyword CSV produced by the keywords subcommand (repeat >= 2)")
    p.add_argument("--sizes", metavar="N,N,...",
                   help="n-gram sizes to include (default: [keywords] sizes)")
    p.add_argument("--top", type=int, metavar="N",
                   help="keep only the N heaviest n-grams per table")
    p.add_argument("--format", choices=["csv", "heatmap_csv", "chord_json"],
                   default="csv", help="export format")

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return 1
    args._argv = argv
    try:
        return args.handler(args)
    except (ExperimentError, TrainingDivergenceError) as exc:
        log.error("%s", exc)
        return 2
    except UnknownProjectError as exc:
        log.error("%s", exc)
        return 1
    except TrackerError as exc:
        log.error("%s", exc)
        return 2
    except (ValueError, FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # runtime failures keep a distinct exit code
        log.exception("unexpected failure: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
