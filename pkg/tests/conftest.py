import pytest

from posemime.gmm import TrainingConfig, fit_em
from posemime.scoring import calibrate
from posemime.session import GestureEntry, GestureLibrary
from posemime.skeleton import EncodingKind, PoseEncoding, encode_sequence

from .synthetic import arm_raise_demos

DIRS_2D = PoseEncoding(EncodingKind.DIRECTIONS, 2)


def train_gesture(base_seed, n_demos=5, n_frames=40, components=4):
    demos = arm_raise_demos(n_demos=n_demos, n_frames=n_frames, base_seed=base_seed)
    seqs = [encode_sequence(frames, DIRS_2D) for frames in demos]
    model = fit_em(seqs, TrainingConfig(components=components), DIRS_2D)
    calibration = calibrate(model, seqs)
    return model, calibration, demos


@pytest.fixture(scope="session")
def gesture_library():
    """Two trained gestures backed by distinct synthetic demo sets."""
    wave_model, wave_cal, wave_demos = train_gesture(base_seed=100)
    # a second gesture with the arm sweep reversed in phase comes from
    # training on reversed demos, making the two gestures distinguishable
    from .synthetic import reversed_frames

    rev_demos = [reversed_frames(frames) for frames in arm_raise_demos(base_seed=400)]
    rev_seqs = [encode_sequence(frames, DIRS_2D) for frames in rev_demos]
    rev_model = fit_em(rev_seqs, TrainingConfig(components=4), DIRS_2D)
    rev_cal = calibrate(rev_model, rev_seqs)

    library = GestureLibrary(
        [
            GestureEntry(id="raise", display_name="Arm raise", model=wave_model, calibration=wave_cal),
            GestureEntry(id="lower", display_name="Arm lower", model=rev_model, calibration=rev_cal, uses_object=False),
        ]
    )
    return library, wave_demos
