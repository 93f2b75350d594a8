"""Batch pipeline front-end.

Subcommands mirror the processing stages: preprocess -> train -> calibrate
-> build-tables -> caption / predict-verbs -> evaluate.  Every command
writes its primary artifact plus a run manifest (config hash, seed,
versions) so an experiment can be reproduced from its output tree.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure during training.
"""

from __future__ import annotations

import hashlib
import json
import random
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from .corpus import Lexicon, annotate, append_noun_pairs, tokenize
from .dataset import load_dataset
from .detection import DetectionScores, PlattParams, fit_platt, top_n
from .embedding import EmbeddingModel, SkipGramConfig, train
from .errors import (
    ConfigError,
    DataError,
    EmptyCandidates,
    NonFiniteUpdate,
    ObjcapError,
    OutOfVocabulary,
)
from .metrics import (
    EvalReport,
    bleu_corpus,
    cider,
    subset_s1,
    subset_s2,
    verb_accuracy,
    verb_precision,
)
from .retrieval import build_index, candidates, consensus, exhaustive_knn, knn
from .verbpred import SCENARIOS, VerbTable, build_verb_table, predict

DEFAULT_TOP_N = 5
DEFAULT_PAIR_TOP = 2
DEFAULT_K = 90


def read_config(path: str | None) -> dict:
    """Flat key = value file; strings, numbers, and booleans."""
    if path is None:
        return {}
    cfg = {}
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip().strip('"')
        if value.lower() in ("true", "false"):
            cfg[key] = value.lower() == "true"
        else:
            try:
                cfg[key] = int(value)
            except ValueError:
                try:
                    cfg[key] = float(value)
                except ValueError:
                    cfg[key] = value
    return cfg


def pick(flag, config: dict, key: str, default):
    """Flag beats config file beats default."""
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def write_manifest(output: Path, command: str, settings: dict) -> None:
    payload = json.dumps({"command": command, **settings}, sort_keys=True)
    manifest = {
        "command": command,
        "settings": settings,
        "config_hash": hashlib.sha256(payload.encode()).hexdigest(),
        "versions": {
            "objcap": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    Path(str(output) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_lexicon(path: str | None) -> Lexicon:
    return Lexicon.from_file(path) if path else Lexicon.default()


@click.group()
def cli():
    """Caption retrieval and zero-shot verb prediction pipeline."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
def preprocess(config_path, dataset, lexicon_path, output):
    """Expand captions with noun-pair tokens into a training corpus."""
    read_config(config_path)
    lex = load_lexicon(lexicon_path)
    records = load_dataset(dataset)
    n_lines = 0
    with open(output, "w", encoding="utf-8") as f:
        for rec in records:
            for caption in rec.captions:
                for sent in append_noun_pairs(annotate(caption, lex), lex):
                    f.write(" ".join(sent.tokens) + "\n")
                    n_lines += 1
    write_manifest(Path(output), "preprocess", {"dataset": dataset, "lines": n_lines})
    click.echo(f"wrote {n_lines} sentences to {output}")


@cli.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--dim", type=int)
@click.option("--window", type=int)
@click.option("--negatives", type=int)
@click.option("--epochs", type=int)
@click.option("--initial-lr", type=float)
@click.option("--min-count", type=int)
@click.option("--seed", type=int)
@click.option("--threads", type=int)
@click.option("--text-export", type=click.Path())
def cmd_train(
    config_path, corpus_path, output, dim, window, negatives, epochs,
    initial_lr, min_count, seed, threads, text_export,
):
    """Train skip-gram embeddings on a preprocessed corpus."""
    config = read_config(config_path)
    cfg = SkipGramConfig(
        dim=pick(dim, config, "dim", 300),
        window=pick(window, config, "window", 10),
        negatives=pick(negatives, config, "negatives", 5),
        epochs=pick(epochs, config, "epochs", 5),
        initial_lr=pick(initial_lr, config, "initial_lr", 0.025),
        min_count=pick(min_count, config, "min_count", 1),
        seed=pick(seed, config, "seed", 1),
        subsample_t=config.get("subsample_t", 0.0),
    )
    n_threads = pick(threads, config, "threads", 1)
    sentences = [
        line.split()
        for line in Path(corpus_path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    model = train(sentences, cfg, threads=n_threads)
    model.save(output)
    if text_export:
        model.export_text(text_export)
    write_manifest(
        Path(output),
        "train",
        {"corpus": corpus_path, "threads": n_threads, **cfg.__dict__},
    )
    click.echo(f"trained {len(model)} words x {cfg.dim} dims -> {output}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
def calibrate(config_path, dataset, lexicon_path, output):
    """Fit per-category Platt sigmoids from training-set detector scores."""
    read_config(config_path)
    lex = load_lexicon(lexicon_path)
    records = [r for r in load_dataset(dataset) if r.scores is not None]
    if not records:
        raise DataError(f"{dataset}: no record carries detector scores")
    labels = {}
    for rec in records:
        hits = set()
        for caption in rec.captions:
            hits |= annotate(caption, lex).noun_hits
        labels[rec.image_id] = hits
    # single-class categories keep a low-probability prior sigmoid:
    # Platt's B0 with zero positives, p ~ 1/(N+2)
    a = np.full(lex.num_categories, -1.0)
    b = np.full(lex.num_categories, np.log(len(records) + 1.0))
    n_fit = 0
    for c in range(lex.num_categories):
        scores = np.array([r.scores[c] for r in records])
        y = np.array([int(c in labels[r.image_id]) for r in records])
        if y.min() == y.max():
            continue  # single-class category keeps the default sigmoid
        fit = fit_platt(scores, y)
        a[c], b[c] = fit.a, fit.b
        n_fit += 1
    params = PlattParams(tuple(lex.noun_categories), a, b)
    params.save(output)
    write_manifest(
        Path(output), "calibrate", {"dataset": dataset, "categories_fit": n_fit}
    )
    click.echo(f"fitted {n_fit}/{lex.num_categories} categories -> {output}")


@cli.command("build-tables")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
def build_tables(config_path, model_path, lexicon_path, output):
    """Precompute ranked verbs per noun and per pair token."""
    read_config(config_path)
    lex = load_lexicon(lexicon_path)
    model = EmbeddingModel.load(model_path)
    table = build_verb_table(model, lex)
    table.save(output)
    write_manifest(
        Path(output),
        "build-tables",
        {"model": model_path, "nouns": len(table.per_noun), "pairs": len(table.per_pair)},
    )
    click.echo(
        f"{len(table.per_noun)} noun and {len(table.per_pair)} pair rankings -> {output}"
    )


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--train-dataset", required=True, type=click.Path(exists=True))
@click.option("--test-dataset", required=True, type=click.Path(exists=True))
@click.option("--platt", "platt_path", required=True, type=click.Path(exists=True))
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True))
@click.option("--top-n", "top_n_opt", type=int)
@click.option("--k", type=int)
@click.option("--exhaustive", is_flag=True, help="Skip candidate filtering.")
@click.option("--output", required=True, type=click.Path())
def caption(
    config_path, train_dataset, test_dataset, platt_path, lexicon_path,
    top_n_opt, k, exhaustive, output,
):
    """Assign each test image the consensus caption of its k-NN images."""
    config = read_config(config_path)
    n = pick(top_n_opt, config, "top_n", DEFAULT_TOP_N)
    k_val = pick(k, config, "k", DEFAULT_K)
    if n < DEFAULT_PAIR_TOP:
        raise ConfigError(f"top_n must be >= {DEFAULT_PAIR_TOP}")
    if k_val < 1:
        raise ConfigError("k must be >= 1")
    lex = load_lexicon(lexicon_path)
    params = PlattParams.load(platt_path)
    idx = build_index(load_dataset(train_dataset), lex)
    tests = load_dataset(test_dataset)
    n_fallback = 0
    with open(output, "w", encoding="utf-8") as f:
        for rec in tests:
            if rec.scores is None:
                raise DataError(f"image {rec.image_id}: no detector scores")
            fallback = exhaustive
            if exhaustive:
                neighbors = exhaustive_knn(rec.features, idx, k_val)
            else:
                top = top_n(DetectionScores(rec.image_id, rec.scores), params, n)
                try:
                    pool = candidates(top, idx)
                    neighbors = knn(rec.features, idx, pool, k_val)
                except EmptyCandidates:
                    click.echo(
                        f"image {rec.image_id}: empty candidate set, "
                        "falling back to exhaustive search",
                        err=True,
                    )
                    fallback = True
                    n_fallback += 1
                    neighbors = exhaustive_knn(rec.features, idx, k_val)
            result = consensus(neighbors, idx)
            f.write(
                json.dumps(
                    {
                        "id": rec.image_id,
                        "caption": result.caption,
                        "neighbors": list(result.neighbors),
                        "fallback": fallback,
                    }
                )
                + "\n"
            )
    write_manifest(
        Path(output),
        "caption",
        {
            "train_dataset": train_dataset,
            "test_dataset": test_dataset,
            "top_n": n,
            "k": k_val,
            "exhaustive": exhaustive,
            "fallbacks": n_fallback,
        },
    )
    click.echo(f"captioned {len(tests)} images -> {output}")


@cli.command("predict-verbs")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--test-dataset", required=True, type=click.Path(exists=True))
@click.option("--table", "table_path", required=True, type=click.Path(exists=True))
@click.option("--platt", "platt_path", required=True, type=click.Path(exists=True))
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True))
@click.option(
    "--scenario",
    type=click.Choice(list(SCENARIOS) + ["all"]),
    default="all",
    show_default=True,
)
@click.option("--seed", type=int)
@click.option("--output", required=True, type=click.Path())
def predict_verbs(
    config_path, test_dataset, table_path, platt_path, lexicon_path,
    scenario, seed, output,
):
    """Predict verbs for each test image's top-2 objects."""
    config = read_config(config_path)
    seed_val = pick(seed, config, "seed", 1)
    lex = load_lexicon(lexicon_path)
    params = PlattParams.load(platt_path)
    table = VerbTable.load(table_path)
    tests = load_dataset(test_dataset)
    scenarios = list(SCENARIOS) if scenario == "all" else [scenario]
    rng = random.Random(seed_val)
    n_lines = 0
    with open(output, "w", encoding="utf-8") as f:
        for rec in tests:
            if rec.scores is None:
                raise DataError(f"image {rec.image_id}: no detector scores")
            det = DetectionScores(rec.image_id, rec.scores)
            lines = []
            try:
                for sc in scenarios:
                    pred = predict(det, params, lex, sc, table=table, rng=rng)
                    lines.append(
                        json.dumps(
                            {
                                "id": pred.image_id,
                                "pair": pred.pair_surface,
                                "nouns": list(pred.nouns),
                                "scenario": pred.scenario,
                                "verbs": list(pred.verbs),
                                "fallback": pred.used_fallback,
                            }
                        )
                    )
            except OutOfVocabulary as e:
                # skip the whole image so every scenario covers the same set
                click.echo(f"image {rec.image_id}: skipped ({e})", err=True)
                continue
            for line in lines:
                f.write(line + "\n")
            n_lines += len(lines)
    write_manifest(
        Path(output),
        "predict-verbs",
        {"test_dataset": test_dataset, "scenarios": scenarios, "seed": seed_val},
    )
    click.echo(f"wrote {n_lines} predictions -> {output}")


def _caption_eval(ids, hyp_by_id, records_by_id):
    hyps = [tokenize(hyp_by_id[i]) for i in ids]
    refs = [[tokenize(c) for c in records_by_id[i].captions] for i in ids]
    scores = bleu_corpus(hyps, refs)
    bleu = {f"bleu_{n}": scores[n - 1] for n in range(1, 5)}
    cider_score = cider(hyps, refs) if len(ids) >= 2 else None
    return bleu, cider_score


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--test-dataset", required=True, type=click.Path(exists=True))
@click.option("--captions", "captions_path", type=click.Path(exists=True))
@click.option("--predictions", "predictions_path", type=click.Path(exists=True))
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True))
@click.option(
    "--subset",
    type=click.Choice(["all", "s1", "s2"]),
    multiple=True,
    help="Defaults to every subset.",
)
@click.option("--output-dir", required=True, type=click.Path())
def evaluate(
    config_path, test_dataset, captions_path, predictions_path,
    lexicon_path, subset, output_dir,
):
    """Score captions and verb predictions on the all/S1/S2 subsets."""
    read_config(config_path)
    lex = load_lexicon(lexicon_path)
    records = load_dataset(test_dataset)
    records_by_id = {r.image_id: r for r in records}
    subsets = list(subset) if subset else ["all", "s1", "s2"]

    hyp_by_id = {}
    if captions_path:
        for line in Path(captions_path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                obj = json.loads(line)
                hyp_by_id[obj["id"]] = obj["caption"]

    preds_by_scenario: dict[str, dict[str, list[str]]] = {}
    top2_by_id: dict[str, tuple[int, int]] = {}
    if predictions_path:
        for line in Path(predictions_path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            preds_by_scenario.setdefault(obj["scenario"], {})[obj["id"]] = obj["verbs"]
            n1, n2 = obj["nouns"]
            top2_by_id[obj["id"]] = (
                lex.category_index(n1),
                lex.category_index(n2),
            )

    memberships = {"all": {r.image_id for r in records}}
    memberships["s1"] = subset_s1(records, lex)
    memberships["s2"] = subset_s2(records, top2_by_id, lex) if top2_by_id else set()

    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in subsets:
        member = memberships[name]
        ids = sorted(member & set(hyp_by_id)) if hyp_by_id else sorted(member)
        report = EvalReport(
            subset=name,
            images_evaluated=len(ids),
            images_skipped=len(records) - len(ids),
        )
        if hyp_by_id and ids:
            report.bleu, report.cider = _caption_eval(ids, hyp_by_id, records_by_id)
            caption_verbs = {
                i: [
                    lex.verb_stems[v]
                    for v in annotate(hyp_by_id[i], lex).verb_hits
                ]
                for i in ids
            }
            gt = {i: records_by_id[i].captions for i in ids}
            report.verb_precision = verb_precision(caption_verbs, gt, lex)
        for sc, preds in sorted(preds_by_scenario.items()):
            chosen = {i: preds[i] for i in preds if i in member}
            gt = {i: records_by_id[i].captions for i in chosen}
            report.scenario_accuracy[sc] = (
                verb_accuracy(chosen, gt, lex) if chosen else None
            )
        (out_dir / f"report_{name}.json").write_text(
            report.to_json() + "\n", encoding="utf-8"
        )
        (out_dir / f"report_{name}.txt").write_text(
            report.format_table(), encoding="utf-8"
        )
        click.echo(f"subset {name}: {len(ids)} images evaluated")
    write_manifest(
        out_dir / "evaluate",
        "evaluate",
        {
            "test_dataset": test_dataset,
            "captions": captions_path,
            "predictions": predictions_path,
            "subsets": subsets,
        },
    )


def main():
    try:
        cli(standalone_mode=False)
    except click.ClickException as e:
        e.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(2)
    except ConfigError as e:
        click.echo(f"configuration error: {e}", err=True)
        sys.exit(2)
    except NonFiniteUpdate as e:
        click.echo(f"numeric failure: {e}", err=True)
        sys.exit(4)
    except (DataError, ObjcapError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()
