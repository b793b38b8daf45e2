import pytest

from filmtts.annotator import AnnotatorConfig, AnnotatorLossConfig, train_annotator
from filmtts.corpus import (
    Corpus,
    CorpusSpec,
    make_emotion_basis,
    split_indices,
    synth_utterance,
    text_vocabulary,
)
from filmtts.training import TrainConfig, single_thread

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session", autouse=True)
def _deterministic_torch():
    single_thread()


def memory_corpus(
    n: int,
    kind: str,
    seed: int,
    words: tuple[int, int] = (3, 5),
    frames: tuple[int, int] = (3, 5),
    vocab: int = 8,
    dim: int = 16,
    noise_sigma: float = 0.5,
) -> Corpus:
    """Build a corpus directly in memory, skipping the file round trip."""
    spec = CorpusSpec(
        n_utterances=n,
        words_per_utterance_range=words,
        frames_per_word_range=frames,
        transition_kind=kind,
        seed=seed,
        text_vocab_size=vocab,
        speakers=("spk_a", "spk_b"),
    )
    basis = make_emotion_basis(5, dim, seed=seed, noise_sigma=noise_sigma)
    utterances = {}
    for index in range(n):
        u = synth_utterance(spec, basis, index)
        utterances[u.utterance_id] = u
    ids = sorted(utterances)
    split = {
        name: tuple(ids[i] for i in indices)
        for name, indices in split_indices(n, seed).items()
    }
    return Corpus(
        index_path=None,
        spec_data=spec.to_dict(),
        basis_data=basis.to_dict(),
        text_vocab=text_vocabulary(vocab),
        utterances=utterances,
        split=split,
    )


@pytest.fixture(scope="session")
def tiny_corpus() -> Corpus:
    return memory_corpus(30, "random", seed=11)


@pytest.fixture(scope="session")
def strong_corpus() -> Corpus:
    return memory_corpus(80, "strong", seed=5, words=(4, 8), frames=(3, 6))


@pytest.fixture(scope="session")
def trained_annotator(strong_corpus):
    cfg = TrainConfig(learning_rate=2e-3, batch_size=4, epochs=3, seed=0)
    model_cfg = AnnotatorConfig(feature_dim=16, hidden_dim=32, num_layers=1, ff_dim=64)
    model, log = train_annotator(strong_corpus, cfg, AnnotatorLossConfig(), model_cfg)
    return model, log


@pytest.fixture(scope="session")
def acceptance_report():
    def record(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
