"""Facial measurements from 3D landmarks.

Landmark files are CSV rows ``index,x,y,z`` (header optional, coordinates in
millimetres). Measurement definitions come from a JSON config; the package
ships ``table1_ams.json`` with the 20 standard measurements (11 distances,
6 proportions, 3 angles). Landmark indices are opaque labels here; their
anatomical placement is a data question, not a code one.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DegenerateGeometryError, InsufficientDataError, LandmarkParseError
from .validation import as_float_array, check_finite

_KIND_ARITY = {"distance": 2, "proportion": 4, "angle": 3}


@dataclass(frozen=True)
class AMDefinition:
    """One measurement: a landmark pair, two pairs (ratio), or a triple.

    For proportions the indices are ``(num_a, num_b, den_a, den_b)``; for
    angles the vertex is the middle index.
    """

    name: str
    kind: str
    indices: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in _KIND_ARITY:
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        arity = _KIND_ARITY[self.kind]
        if len(self.indices) != arity:
            raise ValueError(
                f"{self.name}: {self.kind} needs {arity} indices, got {len(self.indices)}"
            )
        if self.kind == "proportion":
            pairs = (self.indices[:2], self.indices[2:])
        else:
            pairs = (self.indices,)
        for group in pairs:
            if len(set(group)) != len(group):
                raise ValueError(f"{self.name}: repeated landmark index in {group}")


@dataclass(frozen=True)
class LandmarkSet:
    """Indexed 3D points for one subject."""

    subject_id: str
    points: dict[int, np.ndarray]

    def __post_init__(self):
        pts = {}
        for idx, coords in self.points.items():
            arr = as_float_array(coords, f"landmark {idx}")
            if arr.shape != (3,):
                raise ValueError(f"landmark {idx} must be a 3-D point")
            check_finite(arr, f"landmark {idx}")
            pts[int(idx)] = arr
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class AMVector:
    """Measurement values for one subject, keyed by measurement name."""

    subject_id: str
    values: dict[str, float]

    def __post_init__(self):
        vals = {str(k): float(v) for k, v in self.values.items()}
        check_finite(np.array(list(vals.values()) or [0.0]), "values")
        object.__setattr__(self, "values", vals)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.values)

    def as_array(self, names=None) -> np.ndarray:
        names = self.names if names is None else names
        return np.array([self.values[n] for n in names])


def load_am_definitions(path=None) -> list[AMDefinition]:
    """Load measurement definitions; defaults to the shipped 20-entry config."""
    if path is None:
        text = resources.files("phonoface.data").joinpath("table1_ams.json").read_text()
    else:
        text = Path(path).read_text()
    entries = json.loads(text)
    defs = [AMDefinition(e["name"], e["kind"], tuple(e["indices"])) for e in entries]
    names = [d.name for d in defs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate measurement names in definitions")
    return defs


def required_indices(defs) -> set[int]:
    return {i for d in defs for i in d.indices}


def parse_landmarks(path, subject_id: str | None = None, required=None) -> LandmarkSet:
    """Parse a landmark CSV; ``required`` indices must all be present.

    Raises :class:`LandmarkParseError` listing every offending row, duplicate
    index, or missing required index.
    """
    path = Path(path)
    subject_id = subject_id if subject_id is not None else path.stem
    points: dict[int, np.ndarray] = {}
    problems: list[str] = []
    with open(path, newline="") as handle:
        for row_no, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if row_no == 1 and not _is_numeric(row[0]):
                continue  # header line
            if len(row) != 4:
                problems.append(f"row {row_no}: expected 4 fields, got {len(row)}")
                continue
            try:
                idx = int(row[0])
                coords = np.array([float(c) for c in row[1:]])
            except ValueError:
                problems.append(f"row {row_no}: non-numeric value in {row}")
                continue
            if idx in points:
                problems.append(f"row {row_no}: duplicate landmark index {idx}")
                continue
            points[idx] = coords
    if not points and not problems:
        problems.append("file contains no landmark rows")
    if required is not None:
        missing = sorted(set(required) - set(points))
        if missing:
            problems.append(f"missing required landmark indices {missing}")
    if problems:
        raise LandmarkParseError(f"{path}: " + "; ".join(problems))
    return LandmarkSet(subject_id=subject_id, points=points)


def _is_numeric(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def distance(a, b) -> float:
    """Euclidean distance between two points."""
    a = as_float_array(a, "a")
    b = as_float_array(b, "b")
    return float(np.linalg.norm(a - b))


def proportion(a1, b1, a2, b2) -> float:
    """distance(a1, b1) / distance(a2, b2)."""
    denom = distance(a2, b2)
    if denom == 0.0:
        raise DegenerateGeometryError("denominator pair is coincident")
    return distance(a1, b1) / denom


def angle(a, v, b) -> float:
    """Angle at vertex ``v`` between rays to ``a`` and ``b``, in degrees."""
    u = as_float_array(a, "a") - as_float_array(v, "v")
    w = as_float_array(b, "b") - as_float_array(v, "v")
    nu, nw = np.linalg.norm(u), np.linalg.norm(w)
    if nu == 0.0 or nw == 0.0:
        raise DegenerateGeometryError("a ray endpoint coincides with the vertex")
    cosine = np.clip(np.dot(u, w) / (nu * nw), -1.0, 1.0)
    return float(np.degrees(np.arccos(cosine)))


def compute_am_vector(lm: LandmarkSet, defs) -> AMVector:
    """Evaluate every definition on one landmark set, order-stable."""
    values: dict[str, float] = {}
    for d in defs:
        try:
            pts = [lm.points[i] for i in d.indices]
        except KeyError as exc:
            raise LandmarkParseError(
                f"{d.name}: landmark index {exc.args[0]} missing for "
                f"subject {lm.subject_id}"
            ) from exc
        try:
            if d.kind == "distance":
                values[d.name] = distance(*pts)
            elif d.kind == "proportion":
                values[d.name] = proportion(*pts)
            else:
                values[d.name] = angle(*pts)
        except DegenerateGeometryError as exc:
            raise DegenerateGeometryError(f"{d.name}: {exc}") from exc
    return AMVector(subject_id=lm.subject_id, values=values)


class AMScaler(TransformerMixin, BaseEstimator):
    """Per-measurement z-scoring across a cohort (population variance)."""

    def __init__(self, std_floor: float = 1e-8):
        self.std_floor = std_floor

    def fit(self, X, y=None):
        X = as_float_array(X, "X", ndim=2)
        if X.shape[0] < 2:
            raise InsufficientDataError("need at least 2 subjects to normalize")
        self.mean_ = X.mean(axis=0)
        self.scale_ = np.maximum(X.std(axis=0), self.std_floor)
        return self

    def transform(self, X):
        if not hasattr(self, "mean_"):
            raise RuntimeError("scaler is not fitted")
        X = as_float_array(X, "X", ndim=2)
        return (X - self.mean_) / self.scale_


def normalize_ams(cohort):
    """Z-score a cohort of AM vectors per measurement.

    Returns ``(normalized cohort, fitted AMScaler)``. All vectors must share
    the same measurement names, in the same order.
    """
    cohort = list(cohort)
    if len(cohort) < 2:
        raise InsufficientDataError("need at least 2 subjects to normalize")
    names = cohort[0].names
    for v in cohort:
        if v.names != names:
            raise ValueError(
                f"subject {v.subject_id} has measurement names {v.names}, expected {names}"
            )
    matrix = np.stack([v.as_array(names) for v in cohort])
    scaler = AMScaler().fit(matrix)
    scaled = scaler.transform(matrix)
    normalized = [
        AMVector(subject_id=v.subject_id, values=dict(zip(names, row)))
        for v, row in zip(cohort, scaled)
    ]
    return normalized, scaler


def write_am_csv(path, cohort) -> None:
    """Write ``subject_id,<measurement names...>`` rows."""
    cohort = list(cohort)
    if not cohort:
        raise ValueError("cohort is empty")
    names = cohort[0].names
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(("subject_id", *names))
        for v in cohort:
            writer.writerow((v.subject_id, *(repr(float(x)) for x in v.as_array(names))))


def read_am_csv(path) -> list[AMVector]:
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ValueError(f"{path}: empty measurement file")
    names = rows[0][1:]
    return [
        AMVector(subject_id=row[0], values=dict(zip(names, map(float, row[1:]))))
        for row in rows[1:]
    ]
