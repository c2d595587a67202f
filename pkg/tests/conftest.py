import pytest

from stutterkit import nn
from stutterkit.detectors import DetectorKind, train_detector
from stutterkit.synth import CorpusSpec, build_corpus


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """16 two-second clips: enough for pipeline wiring tests, fast to train on."""
    out = tmp_path_factory.mktemp("corpus")
    return build_corpus(CorpusSpec(n_clips=16, ratio_stutter=0.3, seed=77, clip_seconds=2.0), out)


@pytest.fixture(scope="session")
def trained_detectors(small_corpus):
    cfg = nn.TrainConfig(batch_size=16, epochs=8, seed=5)
    pro, _ = train_detector(DetectorKind.PROLONGATION, small_corpus, cfg)
    rep, _ = train_detector(DetectorKind.REPETITION, small_corpus, cfg)
    return pro, rep
