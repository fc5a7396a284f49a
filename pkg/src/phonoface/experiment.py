"""Full-study orchestration: repeated splits, training, and the pair grid.

For every selected (phoneme, measurement) pair the runner repeats N times:
draw a capped random split, fit mel-bin normalization on the training split
only, train with validation-based selection, measure test-split MSE against
the chance level (training-split target mean), then decide the pair from the
N ratios. All randomness is derived from ``(base_seed, phoneme, am, repeat)``
through SHA-256, so runs reproduce exactly regardless of scheduling or
worker count.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .anthropometry import AMVector, read_am_csv, write_am_csv
from .dsp import MelBinNormalizer, MelConfig, MelSpectrogram, load_mel, save_mel
from .errors import InsufficientDataError, PhonofaceError, RunError
from .estimator import RegressorConfig, mse, predict_set, train
from .stats import (
    PairTestResult,
    PredictabilityMatrix,
    RepeatResult,
    aggregate,
    chance_estimator,
    chance_mse,
    decide_pair,
)

MIN_POOL_SIZE = 10


@dataclass
class Dataset:
    """Paired spectrogram clips and normalized measurement vectors.

    ``clips`` maps phoneme label -> list of (subject_id, MelSpectrogram);
    ``subjects`` maps subject_id -> AMVector.
    """

    subjects: dict[str, AMVector]
    clips: dict[str, list[tuple[str, MelSpectrogram]]]

    def validate(self) -> None:
        shape = None
        for label, items in self.clips.items():
            for subject_id, spec in items:
                if subject_id not in self.subjects:
                    raise ValueError(
                        f"clip for {label!r} references unknown subject {subject_id!r}"
                    )
                if shape is None:
                    shape = spec.bins.shape
                elif spec.bins.shape != shape:
                    raise ValueError(
                        f"clip for {label!r} has shape {spec.bins.shape}, expected {shape}"
                    )

    @property
    def phonemes(self) -> list[str]:
        return sorted(self.clips)

    @property
    def am_names(self) -> list[str]:
        if not self.subjects:
            return []
        return sorted(next(iter(self.subjects.values())).names)


@dataclass(frozen=True)
class SplitSpec:
    """Sampling cap, split fractions, repeat count, and test level."""

    sample_cap: int = 5000
    fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    n_repeats: int = 10
    alpha: float = 0.05
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise ValueError("fractions must be three positive numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got {sum(self.fractions)}")
        if self.n_repeats < 2:
            raise ValueError("n_repeats must be >= 2")
        if self.sample_cap < 1:
            raise ValueError("sample_cap must be >= 1")
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")


@dataclass
class RunManifest:
    """Reproducibility record: config snapshot, derived seeds, timing."""

    version: str
    split_spec: dict
    regressor_config: dict
    pairs: dict[str, dict] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    elapsed_seconds: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def derive_seed(base_seed: int, phoneme: str, am: str, repeat: int, stream: str = "") -> int:
    """Deterministic 64-bit seed from the run coordinates.

    First 8 bytes (little-endian) of SHA-256 over the unit-separated string
    ``base_seed \\x1f phoneme \\x1f am \\x1f repeat \\x1f stream``. ``stream``
    separates independent uses ("split", "train") of the same coordinates.
    """
    payload = "\x1f".join([str(int(base_seed)), phoneme, am, str(int(repeat)), stream])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def split_sizes(n: int, fractions) -> tuple[int, int, int]:
    """floor(f*n) for the two validation splits; remainder goes to training."""
    n_v1 = int(fractions[1] * n)
    n_v2 = int(fractions[2] * n)
    return n - n_v1 - n_v2, n_v1, n_v2


def make_splits(pool, spec: SplitSpec, repeat: int, *, phoneme: str = "", am: str = ""):
    """Shuffle, cap, and split a sample pool into (train, val1, val2).

    Deterministic given (base_seed, phoneme, am, repeat); the three splits
    are disjoint and their union is the capped sample.
    """
    pool = list(pool)
    if len(pool) < MIN_POOL_SIZE:
        raise InsufficientDataError(
            f"pair ({phoneme!r}, {am!r}): pool of {len(pool)} samples is below "
            f"the minimum of {MIN_POOL_SIZE}"
        )
    rng = np.random.Generator(
        np.random.PCG64(derive_seed(spec.base_seed, phoneme, am, repeat, "split"))
    )
    order = rng.permutation(len(pool))
    n = min(len(pool), spec.sample_cap)
    taken = order[:n]
    n_t, n_v1, n_v2 = split_sizes(n, spec.fractions)
    d_t = [pool[i] for i in taken[:n_t]]
    d_v1 = [pool[i] for i in taken[n_t : n_t + n_v1]]
    d_v2 = [pool[i] for i in taken[n_t + n_v1 :]]
    return d_t, d_v1, d_v2


def run_repeat(
    dataset: Dataset,
    phoneme: str,
    am: str,
    spec: SplitSpec,
    cfg: RegressorConfig,
    repeat: int,
) -> RepeatResult:
    """One repeat of the per-pair protocol; see the module docstring."""
    pool = dataset.clips.get(phoneme)
    if not pool:
        raise InsufficientDataError(f"no clips for phoneme {phoneme!r}")
    d_t, d_v1, d_v2 = make_splits(pool, spec, repeat, phoneme=phoneme, am=am)

    def targets(split):
        return np.array([dataset.subjects[sid].values[am] for sid, _ in split])

    def bins(split):
        return np.stack([s.bins for _, s in split])

    normalizer = MelBinNormalizer().fit(bins(d_t))
    x_t, x_v1, x_v2 = (normalizer.transform(bins(s)) for s in (d_t, d_v1, d_v2))
    y_t, y_v1, y_v2 = targets(d_t), targets(d_v1), targets(d_v2)

    cfg_repeat = replace(cfg, seed=derive_seed(spec.base_seed, phoneme, am, repeat, "train"))
    report = train(cfg_repeat, (x_t, y_t), (x_v1, y_v1))
    epsilon = mse(predict_set(report.selected_params, x_v2), y_v2)
    level = chance_estimator(y_t)
    epsilon_chance = chance_mse(level, y_v2)
    return RepeatResult(repeat_index=repeat, epsilon=epsilon, epsilon_chance=epsilon_chance)


def run_pair(
    dataset: Dataset,
    phoneme: str,
    am: str,
    spec: SplitSpec,
    cfg: RegressorConfig,
) -> PairTestResult:
    """N repeats of train/evaluate for one pair, then the t-interval decision."""
    repeats = []
    for r in range(spec.n_repeats):
        try:
            repeats.append(run_repeat(dataset, phoneme, am, spec, cfg, r))
        except PhonofaceError as exc:
            raise type(exc)(
                f"pair ({phoneme!r}, {am!r}) repeat {r}: {exc}"
            ) from exc
    return decide_pair(repeats, spec.alpha, phoneme=phoneme, am=am)


def pair_seeds(spec: SplitSpec, phoneme: str, am: str) -> dict:
    return {
        str(r): {
            "split": derive_seed(spec.base_seed, phoneme, am, r, "split"),
            "train": derive_seed(spec.base_seed, phoneme, am, r, "train"),
        }
        for r in range(spec.n_repeats)
    }


_WORKER_CONTEXT: dict = {}


def _worker_init(dataset, spec, cfg):
    _WORKER_CONTEXT["args"] = (dataset, spec, cfg)


def _worker_run(pair):
    dataset, spec, cfg = _WORKER_CONTEXT["args"]
    phoneme, am = pair
    try:
        return pair, run_pair(dataset, phoneme, am, spec, cfg), None
    except PhonofaceError as exc:
        return pair, None, f"{type(exc).__name__}: {exc}"


def run_matrix(
    dataset: Dataset,
    spec: SplitSpec,
    cfg: RegressorConfig,
    phonemes=None,
    ams=None,
    workers: int = 1,
) -> tuple[PredictabilityMatrix, RunManifest]:
    """Run every selected pair and assemble the predictability matrix.

    Per-pair failures are recorded in the manifest without aborting the
    others; a run where every pair fails raises :class:`RunError`. Results
    are independent of scheduling order and worker count.
    """
    dataset.validate()
    selected_phonemes = [p for p in dataset.phonemes if phonemes is None or p in set(phonemes)]
    selected_ams = [a for a in dataset.am_names if ams is None or a in set(ams)]
    pairs = [(p, a) for p in selected_phonemes for a in selected_ams]
    if not pairs:
        raise RunError("no (phoneme, measurement) pairs selected")

    manifest = RunManifest(
        version=__version__,
        split_spec=asdict(spec),
        regressor_config=asdict(cfg),
    )
    started = time.perf_counter()
    results: dict[tuple[str, str], PairTestResult] = {}
    errors: dict[tuple[str, str], str] = {}

    if workers <= 1:
        for pair in pairs:
            try:
                results[pair] = run_pair(dataset, pair[0], pair[1], spec, cfg)
            except PhonofaceError as exc:
                errors[pair] = f"{type(exc).__name__}: {exc}"
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_worker_init,
            initargs=(dataset, spec, cfg),
        ) as pool:
            for pair, result, error in pool.map(_worker_run, pairs):
                if error is None:
                    results[pair] = result
                else:
                    errors[pair] = error

    for phoneme, am in pairs:
        key = f"{phoneme}|{am}"
        manifest.pairs[key] = {"seeds": pair_seeds(spec, phoneme, am)}
        if (phoneme, am) in errors:
            manifest.errors[key] = errors[(phoneme, am)]
    manifest.elapsed_seconds = time.perf_counter() - started

    if not results:
        raise RunError(
            "every pair failed: " + "; ".join(sorted(manifest.errors.values()))
        )
    matrix = aggregate(
        [results[p] for p in sorted(results)],
        phonemes=[p for p in selected_phonemes if any(k[0] == p for k in results)],
        ams=[a for a in selected_ams if any(k[1] == a for k in results)],
    )
    return matrix, manifest


# ---------------------------------------------------------------------------
# on-disk dataset layout:
#   <root>/mels/<clip_id>.pfms   spectrogram cache entries
#   <root>/clips.tsv             clip_id, phoneme, subject_id, mel path
#   <root>/ams.csv               subject_id + normalized measurement columns

def save_dataset(root, dataset: Dataset, ground_truth: dict | None = None) -> None:
    root = Path(root)
    (root / "mels").mkdir(parents=True, exist_ok=True)
    rows = []
    counter = 0
    for phoneme in sorted(dataset.clips):
        for subject_id, spec in dataset.clips[phoneme]:
            clip_id = f"c{counter:06d}"
            counter += 1
            rel = f"mels/{clip_id}.pfms"
            save_mel(root / rel, spec)
            rows.append((clip_id, phoneme, subject_id, rel))
    with open(root / "clips.tsv", "w", encoding="utf-8", newline="") as handle:
        handle.write("clip_id\tphoneme\tsubject_id\tmel_path\n")
        for row in rows:
            handle.write("\t".join(row) + "\n")
    write_am_csv(root / "ams.csv", [dataset.subjects[s] for s in sorted(dataset.subjects)])
    if ground_truth is not None:
        (root / "ground_truth.json").write_text(
            json.dumps(ground_truth, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def load_dataset(root, config: MelConfig | None = None) -> Dataset:
    root = Path(root)
    subjects = {v.subject_id: v for v in read_am_csv(root / "ams.csv")}
    clips: dict[str, list[tuple[str, MelSpectrogram]]] = {}
    with open(root / "clips.tsv", encoding="utf-8", newline="") as handle:
        header = handle.readline()
        if header.rstrip("\n").split("\t") != ["clip_id", "phoneme", "subject_id", "mel_path"]:
            raise ValueError(f"{root}/clips.tsv: unexpected header {header!r}")
        for line in handle:
            if not line.strip():
                continue
            clip_id, phoneme, subject_id, rel = line.rstrip("\n").split("\t")
            spec = load_mel(root / rel, config)
            clips.setdefault(phoneme, []).append((subject_id, spec))
    dataset = Dataset(subjects=subjects, clips=clips)
    dataset.validate()
    return dataset
