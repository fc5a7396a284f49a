"""Phoneme-level predictability analysis of facial measurements from voice.

The pipeline turns phoneme-aligned recordings into fixed-shape log mel
spectrograms, pairs them with normalized facial anthropometric measurements,
trains one scalar regressor per (phoneme, measurement) pair, and decides
per-pair predictability with a one-sided t confidence interval on repeated
MSE ratios against a chance-level constant predictor.
"""

__version__ = "0.1.0"

from .anthropometry import (  # noqa: F401
    AMDefinition,
    AMScaler,
    AMVector,
    LandmarkSet,
    angle,
    compute_am_vector,
    distance,
    load_am_definitions,
    normalize_ams,
    parse_landmarks,
    proportion,
)
from .dsp import (  # noqa: F401
    AudioClip,
    MelBinNormalizer,
    MelConfig,
    MelSpectrogram,
    fix_length,
    load_mel,
    load_wav,
    log_mel,
    normalize_per_bin,
    resample,
    save_mel,
)
from .errors import PhonofaceError  # noqa: F401
from .estimator import (  # noqa: F401
    RegressorConfig,
    RegressorParams,
    SpectrogramRegressor,
    TrainReport,
    adam_step,
    forward,
    grad,
    init_params,
    load_params,
    mse,
    predict_set,
    save_params,
    train,
)
from .experiment import (  # noqa: F401
    Dataset,
    RunManifest,
    SplitSpec,
    derive_seed,
    load_dataset,
    make_splits,
    run_matrix,
    run_pair,
    save_dataset,
)
from .segments import (  # noqa: F401
    PhonemeAlignment,
    PhonemeInterval,
    PhonemeInventory,
    build_inventory,
    parse_alignment,
    parse_alignment_file,
    slice_clip,
    write_alignment_file,
)
from .stats import (  # noqa: F401
    PairTestResult,
    PredictabilityMatrix,
    RepeatResult,
    aggregate,
    chance_estimator,
    chance_mse,
    ci_bounds,
    decide_pair,
    t_critical,
)
from .synthgen import SyntheticSpec, generate, planted_summary  # noqa: F401
