import numpy as np
import pytest

from slipnet.annotation import SlipAnnotation, incipient_interval
from slipnet.core import N_PILLARS, SAMPLE_DT, TactileSequence
from slipnet.neural import NetworkConfig, TrainConfig
from slipnet.simgen import DatasetSpec, generate_dataset

TOY_NET = NetworkConfig(
    input_dim=4, encoder_hidden=8, encoder_out=4, gru_hidden=4, estimator_hidden=(8, 4)
)
MID_NET = NetworkConfig(
    input_dim=64, encoder_hidden=64, encoder_out=32, gru_hidden=32, estimator_hidden=(64, 32)
)
COMPACT_NET = NetworkConfig(
    input_dim=720, encoder_hidden=128, encoder_out=64, gru_hidden=64, estimator_hidden=(64, 32)
)
ABLATION_NET = NetworkConfig(
    input_dim=720, encoder_hidden=256, encoder_out=96, gru_hidden=96, estimator_hidden=(128, 64)
)


def make_sequence(
    n=120,
    movement="translation",
    forces=None,
    contact=None,
    annotation=None,
    seed=0,
) -> TactileSequence:
    """Hand-built valid sequence for unit tests."""
    rng = np.random.default_rng(seed)
    if forces is None:
        forces = rng.normal(0.0, 0.5, size=(n, N_PILLARS, 3))
    seq = TactileSequence(
        t=np.arange(n) * SAMPLE_DT,
        forces=forces,
        movement=movement,
        compression_mm=1.2,
        drive_speed=8.0,
        contact_mask=np.ones(N_PILLARS, bool) if contact is None else contact,
        annotation=annotation,
    )
    return seq.validate()


def annotated_slip_sequence(n=400, onsets_ms=(60, 80, 100, 120, 140, 160, 180, 200, 220)):
    """Slip sequence with known per-pillar onsets."""
    onsets = [ms / 1000.0 for ms in onsets_ms]
    ann = incipient_interval(onsets, "translation")
    return make_sequence(n=n, annotation=ann), ann


@pytest.fixture(scope="session")
def small_corpus():
    """Desk-scale corpus shared across test modules (seeded, with ground truth)."""
    return generate_dataset(DatasetSpec(slip_count=18, stop_count=6, seed=42))


@pytest.fixture(scope="session")
def slip_sequence(small_corpus):
    return next(
        s for s in small_corpus if s.annotation.sequence_class == "slip"
    )


@pytest.fixture(scope="session")
def stop_sequence(small_corpus):
    return next(
        s for s in small_corpus if s.annotation.sequence_class == "stop"
    )


def stop_annotation() -> SlipAnnotation:
    return SlipAnnotation(sequence_class="stop")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def quick_train():
    return TrainConfig(epochs=6, batch_windows=256, seed=0)
