"""Experiment protocols: k-fold, leave-one-out by project/tracker, learning
curves, and source-to-target transfer over a plan grid."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from ..corpus.types import LabeledDataset
from ..model.textcnn import (
    TrainingData,
    TransferPlan,
    apply_transfer_plan,
    cnn_init,
    cnn_predict,
    cnn_train,
)
from ..imbalance import SingleClassError, compute_class_weights
from ..preprocess.embeddings import init_random_embedding, load_embedding_file
from ..preprocess.subword import train_corpus_embedding
from ..preprocess.text import tokenize
from ..preprocess.vocab import build_vocabulary, encode_batch
from .folds import stratified_kfold
from .metrics import compute_metrics, confusion_from_predictions, mean_metrics
from .pipeline import FoldOutcome, PipelineConfig, fit_and_predict
from .report import EvalReport, build_report, fingerprint_config


class ExperimentError(RuntimeError):
    """A fold or experiment cell failed; message names the failing unit."""


def _derived_seed(base_seed: int, job_index: int) -> int:
    return base_seed ^ job_index


def _evaluate_split(train: LabeledDataset, test: LabeledDataset,
                    config: PipelineConfig, seed: int):
    start = time.perf_counter()
    outcome = fit_and_predict(train, test, config, seed)
    wall = time.perf_counter() - start
    counts = confusion_from_predictions(test.bool_labels(), outcome.predicted)
    return counts, compute_metrics(counts), wall, outcome


def run_cross_validation(dataset: LabeledDataset, config: PipelineConfig,
                         k: int = 10, seed: int | None = None,
                         keep_predictions: bool = False,
                         jobs: int = 1) -> EvalReport:
    """Stratified k-fold evaluation with per-fold fitting (no leakage).

    Folds are mutually independent (each derives its own seed), so ``jobs``
    may run them in worker threads; results are always assembled in fold
    order, and jobs=1 is the bit-reproducible single-threaded mode.
    """
    seed = config.seed if seed is None else seed
    plan = stratified_kfold(dataset, k, seed)

    def one_fold(fold: int):
        test_idx = plan.test_indices(fold)
        train_idx = plan.train_indices(fold)
        counts, metrics, wall, outcome = _evaluate_split(
            dataset.subset(train_idx), dataset.subset(test_idx),
            config, _derived_seed(seed, fold))
        return test_idx, counts, metrics, wall, outcome

    outcomes: list = [None] * k
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=min(jobs, k)) as pool:
            futures = {fold: pool.submit(one_fold, fold) for fold in range(k)}
        for fold in range(k):
            try:
                outcomes[fold] = futures[fold].result()
            except Exception as exc:
                raise ExperimentError(f"fold {fold} failed: {exc}") from exc
    else:
        for fold in range(k):
            try:
                outcomes[fold] = one_fold(fold)
            except Exception as exc:
                raise ExperimentError(f"fold {fold} failed: {exc}") from exc

    fold_results = []
    wall_times = []
    predictions: list[dict] | None = [] if keep_predictions else None
    for fold, (test_idx, counts, metrics, wall, outcome) in enumerate(outcomes):
        fold_results.append((counts, metrics))
        wall_times.append(wall)
        if predictions is not None:
            for local, global_idx in enumerate(test_idx):
                predictions.append({
                    "fold": fold,
                    "index": int(global_idx),
                    "true": bool(dataset.labels[global_idx].is_satd),
                    "predicted": bool(outcome.predicted[local]),
                })
    fingerprint = fingerprint_config({"experiment": "cross-validation",
                                      "config": config.to_dict(), "k": k, "seed": seed})
    return build_report(fold_results, fingerprint, wall_times, predictions=predictions)


def run_cross_project(dataset: LabeledDataset, config: PipelineConfig,
                      seed: int | None = None):
    """Leave-one-project-out: test each project against all the others."""
    seed = config.seed if seed is None else seed
    projects = dataset.projects()
    if len(projects) < 2:
        raise ExperimentError("cross-project validation needs at least 2 projects")
    per_project: dict[str, EvalReport] = {}
    for job, project in enumerate(projects):
        test_idx = [i for i, s in enumerate(dataset.sections) if s.project == project]
        train_idx = [i for i, s in enumerate(dataset.sections) if s.project != project]
        test = dataset.subset(test_idx)
        try:
            counts, metrics, wall, _ = _evaluate_split(
                dataset.subset(train_idx), test, config, _derived_seed(seed, job))
        except Exception as exc:
            raise ExperimentError(f"target project {project!r} failed: {exc}") from exc
        flags = ["zero_positive_test"] if test.positive_count == 0 else []
        fingerprint = fingerprint_config({
            "experiment": "cross-project", "target": project,
            "config": config.to_dict(), "seed": seed})
        per_project[project] = build_report([(counts, metrics)], fingerprint,
                                            [wall], flags=flags)
    average = mean_metrics([r.averages for r in per_project.values()])
    return per_project, average


def run_cross_tracker(dataset: LabeledDataset, config: PipelineConfig,
                      seed: int | None = None):
    """Train on one tracker family, test per-project on the other; both ways.

    Returns {target_tracker: (per_project_reports, average_metrics)}.
    """
    seed = config.seed if seed is None else seed
    trackers = dataset.trackers()
    if len(trackers) != 2:
        raise ExperimentError(
            f"cross-tracker validation needs exactly 2 tracker families, got {trackers}")
    results = {}
    job = 0
    for target_tracker in trackers:
        train_idx = [i for i, s in enumerate(dataset.sections)
                     if s.tracker != target_tracker]
        train = dataset.subset(train_idx)
        target_projects = sorted({s.project for s in dataset.sections
                                  if s.tracker == target_tracker})
        per_project: dict[str, EvalReport] = {}
        for project in target_projects:
            test_idx = [i for i, s in enumerate(dataset.sections)
                        if s.project == project and s.tracker == target_tracker]
            test = dataset.subset(test_idx)
            try:
                counts, metrics, wall, _ = _evaluate_split(
                    train, test, config, _derived_seed(seed, job))
            except Exception as exc:
                raise ExperimentError(
                    f"cross-tracker target {project!r} failed: {exc}") from exc
            job += 1
            flags = ["zero_positive_test"] if test.positive_count == 0 else []
            fingerprint = fingerprint_config({
                "experiment": "cross-tracker", "target_tracker": target_tracker,
                "target": project, "config": config.to_dict(), "seed": seed})
            per_project[project] = build_report([(counts, metrics)], fingerprint,
                                                [wall], flags=flags)
        results[target_tracker] = (per_project,
                                   mean_metrics([r.averages for r in per_project.values()]))
    return results


def run_learning_curve(dataset: LabeledDataset, config: PipelineConfig,
                       step: int = 100, k: int = 10,
                       seed: int | None = None) -> list[tuple[int, float]]:
    """Mean F1 at nested training-set prefixes of sizes step, 2·step, ….

    Per fold, the train split is shuffled once and prefixes grow from it, so
    the size-s set is contained in the size-(s+step) set.  The final partial
    size (the full train split) is included.  Prefixes that contain a single
    class fall back to unweighted training.
    """
    if step < 1:
        raise ValueError("step must be >= 1")
    seed = config.seed if seed is None else seed
    plan = stratified_kfold(dataset, k, seed)
    curves: dict[int, list[float]] = {}
    for fold in range(k):
        fold_seed = _derived_seed(seed, fold)
        train_idx = plan.train_indices(fold)
        test = dataset.subset(plan.test_indices(fold))
        rng = np.random.default_rng([fold_seed, 1])
        order = rng.permutation(len(train_idx))
        shuffled = [train_idx[i] for i in order]
        sizes = list(range(step, len(shuffled), step)) + [len(shuffled)]
        for size in sizes:
            subset = dataset.subset(shuffled[:size])
            cfg = config
            if config.imbalance != "none" and \
                    (subset.positive_count == 0 or subset.positive_count == len(subset)):
                from dataclasses import replace as dc_replace

                cfg = dc_replace(config, imbalance="none")
            try:
                _, metrics, _, _ = _evaluate_split(subset, test, cfg, fold_seed)
            except SingleClassError:
                continue
            except Exception as exc:
                raise ExperimentError(
                    f"fold {fold} at train size {size} failed: {exc}") from exc
            curves.setdefault(size, []).append(metrics.f1)
    return [(size, float(np.mean(values))) for size, values in sorted(curves.items())]


def load_text_label_file(path) -> tuple[list[str], list[bool]]:
    """Generic labeled-text JSONL ({text, label}) used for transfer sources."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"transfer source dataset not found at {path}; download the source "
            f"corpus and convert it to JSONL records of {{text, label}}")
    texts: list[str] = []
    labels: list[bool] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            if "text" not in record or "label" not in record:
                raise ValueError(f"{path}: line {lineno}: need 'text' and 'label' fields")
            label = record["label"]
            if label not in (0, 1, True, False):
                raise ValueError(
                    f"{path}: line {lineno}: labels must be binary, got {label!r}")
            texts.append(str(record["text"]))
            labels.append(bool(label))
    return texts, labels


def _transfer_embedding(config: PipelineConfig, vocab, corpus_tokens, seed: int):
    if config.embedding_source == "random":
        return init_random_embedding(vocab, config.embedding_dim, seed)
    if config.embedding_source == "corpus_trained":
        return train_corpus_embedding(corpus_tokens, vocab, config.embedding_dim, seed,
                                      epochs=config.embedding_epochs,
                                      buckets=config.embedding_buckets)
    return load_embedding_file(config.embedding_path, vocab, seed=seed,
                               source=config.embedding_source)


def _stratified_budget(labels: np.ndarray, budget: int, rng) -> np.ndarray:
    """Class-proportional subset indices; budgets nest because each class
    list is shuffled once and budgets take growing prefixes of it."""
    pos = np.flatnonzero(labels)
    neg = np.flatnonzero(~labels)
    n_pos = max(1, min(len(pos), round(budget * len(pos) / len(labels))))
    n_neg = min(len(neg), budget - n_pos)
    take = np.concatenate([pos[:n_pos], neg[:n_neg]])
    return np.sort(take)


def run_transfer_experiment(target_dataset: LabeledDataset, source_dataset_path,
                            plan_grid: list[tuple[str, str]], config: PipelineConfig,
                            budget_sizes: list[int] | None = None, k: int = 10,
                            seed: int | None = None) -> dict:
    """Pre-train on the source corpus, then fine-tune per plan under k-fold CV.

    The embedding is shared (built over target + source text) and frozen, so
    transferred convolution filters keep their meaning.  Returns
    {(plan_tag, budget): EvalReport}; budget None means the full train split.
    """
    seed = config.seed if seed is None else seed
    source_texts, source_labels = load_text_label_file(source_dataset_path)

    target_tokens = [tokenize(s.text) for s in target_dataset.sections]
    source_tokens = [tokenize(t) for t in source_texts]
    vocab = build_vocabulary(target_tokens + source_tokens, min_count=config.min_count)
    embedding = _transfer_embedding(config, vocab, target_tokens + source_tokens, seed)

    cnn_cfg = config.cnn_config(seed=seed, embedding_dim=embedding.dim,
                                embedding_trainable=False)
    src_indices, src_lengths = encode_batch(source_tokens, vocab, config.max_len)
    src_keep = src_lengths >= 1
    src_data = TrainingData(src_indices[src_keep], src_lengths[src_keep],
                            np.array(source_labels, dtype=np.int64)[src_keep])
    source_model = cnn_init(cnn_cfg, embedding, vocab_hash=vocab.content_hash())
    source_weights = None
    try:
        source_weights = compute_class_weights([bool(l) for l in src_data.labels])
    except SingleClassError:
        source_weights = None
    if config.imbalance != "weighted":
        source_weights = None
    source_model, _ = cnn_train(source_model, src_data, weights=source_weights)
    snapshot = source_model.snapshot()

    tgt_indices, tgt_lengths = encode_batch(target_tokens, vocab, config.max_len)
    tgt_labels = np.array(target_dataset.bool_labels())
    plan_fold = stratified_kfold(target_dataset, k, seed)
    budgets: list[int | None] = list(budget_sizes) if budget_sizes else [None]

    results: dict[tuple[str, int | None], EvalReport] = {}
    for plan_settings in plan_grid:
        plan = TransferPlan(conv_setting=plan_settings[0], output_setting=plan_settings[1],
                            source_params=snapshot)
        for budget in budgets:
            fold_results = []
            wall_times = []
            for fold in range(k):
                fold_seed = _derived_seed(seed, fold)
                train_idx = np.array(plan_fold.train_indices(fold), dtype=np.int64)
                test_idx = np.array(plan_fold.test_indices(fold), dtype=np.int64)
                rng = np.random.default_rng([fold_seed, 7])
                shuffle = rng.permutation(len(train_idx))
                train_idx = train_idx[shuffle]
                train_idx = train_idx[tgt_lengths[train_idx] >= 1]
                if budget is not None and budget < len(train_idx):
                    take = _stratified_budget(tgt_labels[train_idx], budget, rng)
                    train_idx = train_idx[take]
                start = time.perf_counter()
                try:
                    fold_cfg = config.cnn_config(seed=fold_seed,
                                                 embedding_dim=embedding.dim,
                                                 embedding_trainable=False)
                    model = cnn_init(fold_cfg, embedding, vocab_hash=vocab.content_hash())
                    model = apply_transfer_plan(model, plan)
                    weights = None
                    if config.imbalance == "weighted":
                        try:
                            weights = compute_class_weights(
                                tgt_labels[train_idx].tolist())
                        except SingleClassError:
                            weights = None
                    data = TrainingData(tgt_indices[train_idx], tgt_lengths[train_idx],
                                        tgt_labels[train_idx].astype(np.int64))
                    model, _ = cnn_train(model, data, weights=weights)
                    keep = tgt_lengths[test_idx] >= 1
                    predicted = np.zeros(len(test_idx), dtype=bool)
                    if np.any(keep):
                        kept_idx = test_idx[keep]
                        pred_kept, _ = cnn_predict(
                            model, TrainingData(tgt_indices[kept_idx],
                                                tgt_lengths[kept_idx],
                                                np.zeros(len(kept_idx), dtype=np.int64)))
                        predicted[keep] = pred_kept
                except Exception as exc:
                    raise ExperimentError(
                        f"transfer plan ({plan.tag()}) budget {budget} fold {fold} "
                        f"failed: {exc}") from exc
                wall_times.append(time.perf_counter() - start)
                counts = confusion_from_predictions(tgt_labels[test_idx], predicted)
                fold_results.append((counts, compute_metrics(counts)))
            fingerprint = fingerprint_config({
                "experiment": "transfer", "plan": plan.tag(), "budget": budget,
                "config": config.to_dict(), "k": k, "seed": seed})
            results[(plan.tag(), budget)] = build_report(fold_results, fingerprint,
                                                         wall_times)
    return results
