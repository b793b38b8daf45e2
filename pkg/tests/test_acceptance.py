"""Acceptance gate: one test per release criterion, one printed line each.

Every test computes its measurement, prints a PASS/FAIL line through the
acceptance_report fixture (collected into a terminal summary section), and
then asserts, so a red criterion is visible both ways. Thresholds and time
budgets are pinned in the assertions, not in fixtures, to keep each test
readable on its own.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest
import torch

from conftest import memory_corpus
from oracles import (
    dtw_exhaustive,
    finite_difference_check,
    randomize_parameters,
    smoothed_token_loss,
    stepwise_label_loss,
)

from filmtts.annotator import (
    AnnotatorConfig,
    AnnotatorLossConfig,
    AnnotatorModel,
    annotate,
    annotator_loss,
    train_annotator,
)
from filmtts.cli import main
from filmtts.corpus import load_corpus
from filmtts.data import EMOTIONS, WordEmotionAnnotation
from filmtts.metrics import EmotionTrajectory, dtw, one_hot_trajectory, switch_steps
from filmtts.training import TrainConfig
from filmtts.tts import (
    GenLossConfig,
    TtsConfig,
    TtsModel,
    apply_film,
    conditioning_labels,
    emo_loss,
    generate,
    pack_batch,
    total_loss,
    train_tts,
    tts_loss,
)


@pytest.fixture(scope="module")
def corpus500():
    return memory_corpus(500, "random", seed=0, words=(10, 14), frames=(4, 10))


@pytest.fixture(scope="module")
def strong200():
    return memory_corpus(200, "strong", seed=0, words=(6, 10))


@pytest.fixture(scope="module")
def contrast_models(strong200):
    """film models over 3 seeds x {with, without} the emotion loss term."""
    models = {}
    for seed in (0, 1, 2):
        for lambda_emo in (0.0, 0.3):
            cfg = TrainConfig(learning_rate=3e-3, batch_size=4, epochs=30, seed=seed)
            model, _ = train_tts(
                strong200,
                cfg,
                GenLossConfig(epsilon=0.1, lambda_emo=lambda_emo),
                annotation_source="gold_word_level",
            )
            models[(seed, lambda_emo)] = model
    return models


def held_out_token_accuracy(model, corpus, split, annotation_source):
    """Teacher-forced next-token accuracy over a corpus split."""
    correct = 0
    total = 0
    for utterance in corpus.split_utterances(split):
        token_ids = torch.tensor(corpus.text_token_ids(utterance), dtype=torch.long)
        codes, intensities = conditioning_labels(utterance, annotation_source)
        targets = torch.tensor(
            list(utterance.speech_tokens) + [model.config.eos_id], dtype=torch.long
        )
        with torch.no_grad():
            speech_logits, _ = model(
                token_ids,
                torch.tensor(codes, dtype=torch.long),
                torch.tensor(intensities, dtype=torch.float64),
                targets,
            )
        correct += int((speech_logits.argmax(dim=1) == targets).sum())
        total += int(targets.shape[0])
    return correct / total


def gold_step_codes(utterance):
    codes = [a.code for a in utterance.annotations]
    return codes + [codes[-1]]


def mean_generated_dtw(model, corpus, split, max_len=32):
    costs = []
    for utterance in corpus.split_utterances(split):
        result = generate(
            model,
            corpus.text_token_ids(utterance),
            list(utterance.annotations),
            max_len=max_len,
        )
        gold = one_hot_trajectory(gold_step_codes(utterance), 5)
        costs.append(dtw(EmotionTrajectory(result.posteriors), gold))
    return float(np.mean(costs))


def write_pipeline_config(path: Path, paths: dict) -> None:
    payload = {
        "seed": 3,
        "paths": paths,
        "corpus": {
            "n_utterances": 10,
            "words_per_utterance_range": [3, 5],
            "frames_per_word_range": [3, 5],
            "transition_kind": "strong",
            "text_vocab_size": 6,
            "speakers": ["spk_a"],
        },
        "basis": {"dim": 8, "noise_sigma": 0.5},
        "annotator": {
            "model": {"hidden_dim": 16, "num_layers": 1, "num_heads": 2, "ff_dim": 32},
            "train": {"epochs": 1},
        },
        "tts": {
            "model": {"embed_dim": 16, "emotion_dim": 8, "num_heads": 2, "ff_dim": 32},
            "train": {"epochs": 1, "learning_rate": 3e-3},
        },
        "generate": {"max_len": 24},
        "plot": {"max_utterances": 2},
    }
    path.write_text(json.dumps(payload, indent=1))


def test_criterion_01_loss_oracles(acceptance_report):
    started = time.perf_counter()
    rng = np.random.default_rng(101)
    epsilons = (0.0, 0.1, 0.3)
    worst = 0.0
    for index in range(100):
        n_seqs = int(rng.integers(1, 4))
        vocab = int(rng.integers(2, 11))
        lengths = [int(rng.integers(1, 6)) for _ in range(n_seqs)]
        width = max(lengths)
        targets = [[int(t) for t in rng.integers(0, vocab, size=n)] for n in lengths]
        labels = [[int(c) for c in rng.integers(0, 5, size=n)] for n in lengths]
        batch = pack_batch(targets, labels, vocab_size=vocab)
        epsilon = epsilons[index % 3]
        speech_logits = rng.normal(size=(n_seqs, width, vocab))
        emo_logits = rng.normal(size=(n_seqs, width, 5))
        token_gap = abs(
            float(tts_loss(torch.tensor(speech_logits), batch, epsilon))
            - smoothed_token_loss(speech_logits.tolist(), targets, lengths, epsilon)
        )
        label_gap = abs(
            float(emo_loss(torch.tensor(emo_logits), batch))
            - stepwise_label_loss(emo_logits.tolist(), labels, lengths)
        )
        worst = max(worst, token_gap, label_gap)
    elapsed = time.perf_counter() - started
    ok = worst < 1e-8 and elapsed < 10.0
    acceptance_report(
        f"criterion 1: {'PASS' if ok else 'FAIL'} (loss vs scalar oracles, "
        f"max gap {worst:.2e} over 100 batches in {elapsed:.1f}s; "
        f"limits < 1e-8, < 10s)"
    )
    assert ok


def test_criterion_02_gradient_checks(acceptance_report):
    started = time.perf_counter()

    torch.manual_seed(0)
    annotator = AnnotatorModel(
        AnnotatorConfig(feature_dim=4, hidden_dim=8, num_layers=1, num_heads=2, ff_dim=16)
    )
    randomize_parameters(annotator, seed=1)
    generator = torch.Generator().manual_seed(21)
    frames = torch.randn(6, 4, generator=generator, dtype=torch.float64)
    spans = [(0, 3), (3, 6)]
    golds = [WordEmotionAnnotation("Happy", 0.7), WordEmotionAnnotation("Neutral", 0.0)]

    def annotator_objective():
        logits, intensities = annotator(frames, spans)
        return annotator_loss(logits, intensities, golds, AnnotatorLossConfig(1.0, 1.0)).total

    annotator_err = finite_difference_check(annotator, annotator_objective)

    torch.manual_seed(0)
    tts_cfg = TtsConfig(
        text_vocab_size=3, embed_dim=8, emotion_dim=4, num_heads=2, ff_dim=16,
        decoder_layers=1,
    )
    tts = TtsModel(tts_cfg)
    randomize_parameters(tts, seed=2)
    token_ids = torch.tensor([0, 2, 1], dtype=torch.long)
    categories = torch.tensor([1, 1, 4], dtype=torch.long)
    intensities = torch.tensor([0.8, 0.8, 0.0], dtype=torch.float64)
    targets = [5, 10, tts_cfg.eos_id]
    batch = pack_batch([targets], [[1, 1, 4]], vocab_size=tts_cfg.output_vocab_size)
    targets_t = torch.tensor(targets, dtype=torch.long)
    loss_cfg = GenLossConfig(epsilon=0.1, lambda_emo=0.5)

    def tts_objective():
        speech_logits, emo_logits = tts(token_ids, categories, intensities, targets_t)
        return total_loss(
            tts_loss(speech_logits.unsqueeze(0), batch, loss_cfg.epsilon),
            emo_loss(emo_logits.unsqueeze(0), batch),
            loss_cfg,
        )

    tts_err = finite_difference_check(tts, tts_objective)

    elapsed = time.perf_counter() - started
    worst = max(annotator_err, tts_err)
    ok = worst < 1e-4 and elapsed < 60.0
    acceptance_report(
        f"criterion 2: {'PASS' if ok else 'FAIL'} (gradients vs central "
        f"differences, worst rel err {worst:.2e} "
        f"(annotator {annotator_err:.2e}, generator {tts_err:.2e}) in "
        f"{elapsed:.1f}s; limits < 1e-4, < 60s)"
    )
    assert ok


def test_criterion_03_film_identity(acceptance_report):
    torch.manual_seed(3)
    model = TtsModel(
        TtsConfig(text_vocab_size=4, embed_dim=16, emotion_dim=8, num_heads=2, ff_dim=32)
    )
    clone = model.clone_with_variant("none")
    token_ids = torch.tensor([0, 3, 1], dtype=torch.long)
    categories = torch.tensor([1, 2, 4], dtype=torch.long)
    intensities = torch.tensor([0.9, 0.4, 0.0], dtype=torch.float64)
    targets = torch.tensor([5, 16, model.config.eos_id], dtype=torch.long)
    with torch.no_grad():
        speech_a, emo_a = model(token_ids, categories, intensities, targets)
        speech_b, emo_b = clone(token_ids, categories, intensities, targets)
    identical = torch.equal(speech_a, speech_b) and torch.equal(emo_a, emo_b)

    forced = apply_film(
        torch.tensor([1.0, 2.0], dtype=torch.float64),
        torch.tensor([2.0, 0.5], dtype=torch.float64),
        torch.tensor([1.0, -1.0], dtype=torch.float64),
    )
    exact = forced.tolist() == [3.0, 0.0]

    ok = identical and exact
    acceptance_report(
        f"criterion 3: {'PASS' if ok else 'FAIL'} (zero-init modulation "
        f"bit-identical to variant=none: {identical}; forced (gamma, beta) "
        f"arithmetic exact: {exact})"
    )
    assert ok


def test_criterion_04_dtw_oracle(acceptance_report):
    started = time.perf_counter()
    rng = np.random.default_rng(104)
    mismatches = 0
    for _ in range(500):
        a = rng.normal(size=int(rng.integers(1, 7)))
        b = rng.normal(size=int(rng.integers(1, 7)))
        fast = dtw(EmotionTrajectory(a), EmotionTrajectory(b))
        slow = dtw_exhaustive([[x] for x in a], [[y] for y in b])
        mismatches += int(fast != slow)
    pinned = dtw(
        EmotionTrajectory(np.array([1.0, 2.0, 3.0])),
        EmotionTrajectory(np.array([1.0, 3.0])),
    )
    elapsed = time.perf_counter() - started
    ok = mismatches == 0 and pinned == 1.0 and elapsed < 30.0
    acceptance_report(
        f"criterion 4: {'PASS' if ok else 'FAIL'} (dtw vs exhaustive paths, "
        f"{500 - mismatches}/500 pairs exact, pinned case {pinned}, "
        f"{elapsed:.1f}s; limits 500/500, 1.0, < 30s)"
    )
    assert ok


def test_criterion_05_annotator_learnability(corpus500, acceptance_report):
    started = time.perf_counter()
    model, _ = train_annotator(
        corpus500,
        TrainConfig(learning_rate=2e-3, batch_size=4, epochs=6, seed=0),
        AnnotatorLossConfig(1.0, 1.0),
        AnnotatorConfig(feature_dim=16),
    )
    correct = 0
    words = 0
    abs_error = 0.0
    for utterance in corpus500.split_utterances("test"):
        for predicted, gold in zip(annotate(model, utterance), utterance.annotations):
            words += 1
            correct += int(predicted.category == gold.category)
            abs_error += abs(predicted.intensity - gold.intensity)
    accuracy = correct / words
    mae = abs_error / words
    elapsed = time.perf_counter() - started
    ok = accuracy >= 0.90 and mae <= 0.10 and elapsed < 300.0
    acceptance_report(
        f"criterion 5: {'PASS' if ok else 'FAIL'} (500-utterance corpus, "
        f"held-out word accuracy {accuracy:.4f}, intensity MAE {mae:.4f} "
        f"over {words} words in {elapsed:.0f}s; limits >= 0.90, <= 0.10, < 300s)"
    )
    assert ok


def test_criterion_06_conditioning_necessity(corpus500, acceptance_report):
    started = time.perf_counter()
    train_cfg = TrainConfig(learning_rate=3e-3, batch_size=4, epochs=30, seed=0)
    loss_cfg = GenLossConfig(epsilon=0.1, lambda_emo=0.3)
    conditioned, _ = train_tts(
        corpus500, train_cfg, loss_cfg, annotation_source="gold_word_level"
    )
    unconditioned, _ = train_tts(
        corpus500, train_cfg, loss_cfg, annotation_source="none"
    )
    accuracy_gold = held_out_token_accuracy(
        conditioned, corpus500, "test", "gold_word_level"
    )
    accuracy_none = held_out_token_accuracy(unconditioned, corpus500, "test", "none")
    elapsed = time.perf_counter() - started
    chance_cap = 1 / 5 + 0.10
    ok = accuracy_gold >= 0.95 and accuracy_none <= chance_cap and elapsed < 900.0
    acceptance_report(
        f"criterion 6: {'PASS' if ok else 'FAIL'} (held-out next-token "
        f"accuracy: gold word-level {accuracy_gold:.4f} vs unconditioned "
        f"{accuracy_none:.4f} in {elapsed:.0f}s; limits >= 0.95, "
        f"<= {chance_cap:.2f}, < 900s)"
    )
    assert ok


def test_criterion_07_emotion_loss_benefit(strong200, contrast_models, acceptance_report):
    comparisons = []
    for seed in (0, 1, 2):
        with_term = mean_generated_dtw(contrast_models[(seed, 0.3)], strong200, "test")
        without = mean_generated_dtw(contrast_models[(seed, 0.0)], strong200, "test")
        comparisons.append((seed, with_term, without))
    wins = sum(1 for _, with_term, without in comparisons if with_term < without)
    detail = ", ".join(
        f"seed {seed}: {with_term:.2f} vs {without:.2f}"
        for seed, with_term, without in comparisons
    )
    ok = wins >= 2
    acceptance_report(
        f"criterion 7: {'PASS' if ok else 'FAIL'} (trajectory DTW with vs "
        f"without the emotion loss term, lower in {wins}/3 seeds; {detail}; "
        f"limit majority of 3)"
    )
    assert ok


def test_criterion_08_transition_localization(strong200, contrast_models, acceptance_report):
    model = contrast_models[(0, 0.3)]
    hits = 0
    total = 0
    for utterance in strong200.split_utterances("test"):
        result = generate(
            model,
            strong200.text_token_ids(utterance),
            list(utterance.annotations),
            max_len=32,
        )
        predicted = switch_steps([int(c) for c in result.posteriors.argmax(axis=1)])
        gold = switch_steps(gold_step_codes(utterance))
        total += 1
        hits += int(
            len(gold) == 1 and len(predicted) == 1 and abs(predicted[0] - gold[0]) <= 2
        )
    rate = hits / total
    ok = rate >= 0.70
    acceptance_report(
        f"criterion 8: {'PASS' if ok else 'FAIL'} (single switch within "
        f"2 steps of the gold boundary for {hits}/{total} strong-transition "
        f"test utterances = {rate:.2f}; limit >= 0.70)"
    )
    assert ok


def test_criterion_09_pipeline_determinism(tmp_path, acceptance_report):
    paths = {"corpus_dir": "corpus", "checkpoint_dir": "ckpt", "report_dir": "report"}
    trees = {}
    previous = os.getcwd()
    for name in ("first", "second"):
        root = tmp_path / name
        root.mkdir()
        write_pipeline_config(root / "cfg.json", paths)
        os.chdir(root)
        try:
            assert main(["pipeline", "--config", "cfg.json", "--seed", "7"]) == 0
        finally:
            os.chdir(previous)
        trees[name] = {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "cfg.json"
        }
    same_names = sorted(trees["first"]) == sorted(trees["second"])
    differing = [
        name for name, content in trees["first"].items()
        if trees["second"].get(name) != content
    ]
    ok = same_names and not differing
    acceptance_report(
        f"criterion 9: {'PASS' if ok else 'FAIL'} (two seed-7 pipeline runs, "
        f"{len(trees['first'])} files each, byte-identical: {not differing}"
        + (f", first difference {differing[0]}" if differing else "")
        + ")"
    )
    assert ok


def test_criterion_10_metric_identities(tmp_path, acceptance_report):
    write_pipeline_config(
        tmp_path / "cfg.json",
        {
            "corpus_dir": str(tmp_path / "corpus"),
            "checkpoint_dir": str(tmp_path / "ckpt"),
            "report_dir": str(tmp_path / "report"),
        },
    )
    assert main(["gen-data", "--config", str(tmp_path / "cfg.json")]) == 0
    corpus = load_corpus(tmp_path / "corpus" / "index.json")
    generated_dir = tmp_path / "report" / "generated"
    generated_dir.mkdir(parents=True)
    test_ids = list(corpus.split["test"])
    for utterance_id in test_ids:
        utterance = corpus.utterances[utterance_id]
        step_codes = gold_step_codes(utterance)
        payload = {
            "utterance_id": utterance_id,
            "tokens": list(utterance.speech_tokens),
            "posteriors": one_hot_trajectory(step_codes, 5).points.tolist(),
            "mode": "greedy",
            "seed": None,
        }
        (generated_dir / f"{utterance_id}.json").write_text(json.dumps(payload))
    (generated_dir / "index.json").write_text(
        json.dumps(
            {
                "split": "test",
                "mode": "greedy",
                "annotation_source": "gold_word_level",
                "utterances": test_ids,
            }
        )
    )
    assert main(["evaluate", "--config", str(tmp_path / "cfg.json")]) == 0
    report = json.loads((tmp_path / "report" / "report.json").read_text())
    sim_exact = abs(report["emo_sim_percent"] - 100.0) < 1e-9
    dtw_zero = report["dtw_cost"] == 0.0
    perfect = all(v == 1.0 for v in report["per_category_accuracy"].values())
    ok = sim_exact and dtw_zero and perfect and report["overall_accuracy"] == 1.0
    acceptance_report(
        f"criterion 10: {'PASS' if ok else 'FAIL'} (evaluate on perfect "
        f"predictions: emo sim {report['emo_sim_percent']:.6f}, dtw "
        f"{report['dtw_cost']}, category accuracies all 1.0: {perfect})"
    )
    assert ok
