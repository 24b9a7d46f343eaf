"""Alloy records: parsing, validation, range-grid augmentation, encoding,
fold assignment and feature/target scaling.

A record gives each of the 9 elements as a [min, max] weight-percent range
plus a processing-route code (1-5) and the four measured properties. Ranged
elements are expanded on a 4-point equidistant grid: the two interior points
feed train/validation, the range midpoint feeds the test split. The full
Cartesian product over ranged elements forms the train/validation samples,
so a record with r ranged elements contributes 2**r samples and exactly one
test sample.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ValidationError

ELEMENTS = ("fe", "c", "mn", "p", "s", "si", "ni", "cr", "mo")

ELEMENT_NAMES = {
    "fe": "Fe", "c": "C", "mn": "Mn", "p": "P", "s": "S",
    "si": "Si", "ni": "Ni", "cr": "Cr", "mo": "Mo",
}

PROPERTIES = ("hardness", "tensile", "yield", "elongation")

PROCESS_ROUTES = {
    1: "hot rolling",
    2: "cold rolling",
    3: "annealing",
    4: "normalizing",
    5: "quench in water/oil",
}

CSV_HEADER = (
    "id,fe_min,fe_max,c_min,c_max,mn_min,mn_max,p_min,p_max,s_min,s_max,"
    "si_min,si_max,ni_min,ni_max,cr_min,cr_max,mo_min,mo_max,process,"
    "hardness,tensile,yield,elongation"
)

AUGMENTED_HEADER = "source_id,split,fe,c,mn,p,s,si,ni,cr,mo,process,target"

# Hard ceiling on per-record Cartesian blowup (2**12 combinations).
DEFAULT_AUGMENT_CAP = 4096


@dataclass(frozen=True)
class RangeSpec:
    """Weight-percent interval for one element; min == max is fixed."""
    min: float
    max: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValidationError("range bounds must be finite")
        if self.min > self.max:
            raise ValidationError(f"range inverted: {self.min} > {self.max}")

    @property
    def fixed(self) -> bool:
        return self.min == self.max

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.min + self.max)

    def grid4(self) -> tuple[float, float, float, float]:
        """The 4-point equidistant grid spanning the range, endpoints included."""
        d = (self.max - self.min) / 3.0
        return (self.min, self.min + d, self.min + 2.0 * d, self.max)

    def inner_points(self) -> tuple[float, ...]:
        """Train/validation values: the two grid points nearest the center."""
        if self.fixed:
            return (self.min,)
        g = self.grid4()
        return (g[1], g[2])


@dataclass(frozen=True)
class ProcessRoute:
    code: int

    def __post_init__(self):
        if self.code not in PROCESS_ROUTES:
            raise ValidationError(f"invalid process route code: {self.code}")


@dataclass(frozen=True)
class PropertyVector:
    hardness: float
    tensile: float
    yield_strength: float
    elongation: float

    def __post_init__(self):
        for name in PROPERTIES:
            v = self.get(name)
            if not math.isfinite(v) or v < 0.0:
                raise ValidationError(f"target {name} must be finite and >= 0, got {v}")
        if self.elongation > 100.0:
            raise ValidationError(f"elongation must be <= 100, got {self.elongation}")

    def get(self, prop: str) -> float:
        if prop == "yield":
            return self.yield_strength
        return getattr(self, prop)


@dataclass(frozen=True)
class AlloyRecord:
    record_id: str
    composition: dict[str, RangeSpec]   # keyed by ELEMENTS, in that order
    process: ProcessRoute
    targets: PropertyVector

    def __post_init__(self):
        if tuple(self.composition) != ELEMENTS:
            raise ValidationError(
                f"composition must list exactly {ELEMENTS} in order")
        for elem, spec in self.composition.items():
            if spec.min < 0.0 or spec.max > 100.0:
                raise ValidationError(
                    f"{ELEMENT_NAMES[elem]} range outside [0, 100]: "
                    f"[{spec.min}, {spec.max}]")

    def ranged_elements(self) -> tuple[str, ...]:
        return tuple(e for e in ELEMENTS if not self.composition[e].fixed)


@dataclass(frozen=True)
class Sample:
    source_record_id: str
    features: tuple[float, ...]
    target: float
    split_tag: str   # "train_val" | "test"


@dataclass(frozen=True)
class EncodingPolicy:
    """Route encoding: ordinal keeps the 1-5 code as one numeric feature,
    one_hot expands it to five indicator features."""
    one_hot: bool = False

    @property
    def n_features(self) -> int:
        return len(ELEMENTS) + (5 if self.one_hot else 1)


@dataclass(frozen=True)
class AugmentPolicy:
    property: str
    encoding: EncodingPolicy = EncodingPolicy()
    cap: int = DEFAULT_AUGMENT_CAP

    def __post_init__(self):
        if self.property not in PROPERTIES:
            raise ValidationError(f"unknown property: {self.property}")


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    seed: int
    assignment: tuple[int, ...]   # sample index -> fold index

    def train_indices(self, fold: int) -> np.ndarray:
        a = np.asarray(self.assignment)
        return np.flatnonzero(a != fold)

    def val_indices(self, fold: int) -> np.ndarray:
        a = np.asarray(self.assignment)
        return np.flatnonzero(a == fold)


def _parse_float(raw: str, row: int, col: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise DataError(f"row {row}, column {col}: non-numeric field {raw!r}") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}, column {col}: non-finite value {raw!r}")
    return v


def parse_records(text: str) -> list[AlloyRecord]:
    """Parse the documented CSV schema into validated records.

    Raises DataError naming the offending row and column for malformed input
    and ValidationError (e.g. "range inverted: Mn") for invariant breaks.
    """
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise DataError("empty document")
    header = [h.strip() for h in rows[0]]
    expected = CSV_HEADER.split(",")
    if header != expected:
        raise DataError(
            f"bad header: expected {','.join(expected)!r}, got {','.join(header)!r}")

    records = []
    for rownum, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(expected):
            raise DataError(
                f"row {rownum}: expected {len(expected)} columns, got {len(row)}")
        record_id = row[0].strip()
        composition = {}
        for i, elem in enumerate(ELEMENTS):
            lo = _parse_float(row[1 + 2 * i], rownum, f"{elem}_min")
            hi = _parse_float(row[2 + 2 * i], rownum, f"{elem}_max")
            if lo > hi:
                raise ValidationError(
                    f"row {rownum}: range inverted: {ELEMENT_NAMES[elem]}")
            composition[elem] = RangeSpec(lo, hi)
        process_raw = _parse_float(row[19], rownum, "process")
        if process_raw != int(process_raw):
            raise DataError(f"row {rownum}, column process: non-integer {row[19]!r}")
        try:
            record = AlloyRecord(
                record_id=record_id,
                composition=composition,
                process=ProcessRoute(int(process_raw)),
                targets=PropertyVector(
                    hardness=_parse_float(row[20], rownum, "hardness"),
                    tensile=_parse_float(row[21], rownum, "tensile"),
                    yield_strength=_parse_float(row[22], rownum, "yield"),
                    elongation=_parse_float(row[23], rownum, "elongation"),
                ),
            )
        except ValidationError as exc:
            raise ValidationError(f"row {rownum}: {exc}") from None
        records.append(record)
    return records


def records_to_csv(records: list[AlloyRecord]) -> str:
    """Inverse of parse_records; floats are written shortest-roundtrip."""
    out = [CSV_HEADER]
    for rec in records:
        cells = [rec.record_id]
        for elem in ELEMENTS:
            spec = rec.composition[elem]
            cells.append(fmt(spec.min))
            cells.append(fmt(spec.max))
        cells.append(str(rec.process.code))
        for prop in PROPERTIES:
            cells.append(fmt(rec.targets.get(prop)))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def fmt(x: float) -> str:
    """Shortest decimal string that round-trips the float bit pattern."""
    return repr(float(x))


def encode_features(values: dict[str, float], route: ProcessRoute,
                    policy: EncodingPolicy) -> tuple[float, ...]:
    """Concrete composition + route -> flat feature vector."""
    feats = [values[e] for e in ELEMENTS]
    if policy.one_hot:
        indicators = [0.0] * 5
        indicators[route.code - 1] = 1.0
        feats.extend(indicators)
    else:
        feats.append(float(route.code))
    return tuple(feats)


def augment(records: list[AlloyRecord], policy: AugmentPolicy
            ) -> tuple[list[Sample], list[Sample]]:
    """Expand records into (train_val, test) samples for one target property.

    Every augmented sample of a record shares that record's target value;
    only the composition grid varies.
    """
    train_val: list[Sample] = []
    test: list[Sample] = []
    for rec in records:
        target = rec.targets.get(policy.property)
        per_element = [rec.composition[e].inner_points() for e in ELEMENTS]
        n_combos = 1
        for pts in per_element:
            n_combos *= len(pts)
        if n_combos > policy.cap:
            raise DataError(
                f"record {rec.record_id}: {n_combos} grid combinations exceed "
                f"cap {policy.cap}")
        for combo in itertools.product(*per_element):
            values = dict(zip(ELEMENTS, combo))
            train_val.append(Sample(
                source_record_id=rec.record_id,
                features=encode_features(values, rec.process, policy.encoding),
                target=target,
                split_tag="train_val",
            ))
        mids = {e: rec.composition[e].midpoint for e in ELEMENTS}
        test.append(Sample(
            source_record_id=rec.record_id,
            features=encode_features(mids, rec.process, policy.encoding),
            target=target,
            split_tag="test",
        ))
    return train_val, test


def samples_to_csv(samples: list[Sample], process_codes: dict[str, int]) -> str:
    """Augmented-sample CSV (raw composition columns + process + target)."""
    out = [AUGMENTED_HEADER]
    for s in samples:
        comp = s.features[:len(ELEMENTS)]
        cells = [s.source_record_id, s.split_tag]
        cells.extend(fmt(v) for v in comp)
        cells.append(str(process_codes[s.source_record_id]))
        cells.append(fmt(s.target))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def samples_from_csv(text: str, encoding: EncodingPolicy) -> list[Sample]:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or [h.strip() for h in rows[0]] != AUGMENTED_HEADER.split(","):
        raise DataError(f"bad augmented header, expected {AUGMENTED_HEADER!r}")
    samples = []
    for rownum, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 13:
            raise DataError(f"row {rownum}: expected 13 columns, got {len(row)}")
        values = {e: _parse_float(row[2 + i], rownum, e)
                  for i, e in enumerate(ELEMENTS)}
        route = ProcessRoute(int(_parse_float(row[11], rownum, "process")))
        samples.append(Sample(
            source_record_id=row[0].strip(),
            features=encode_features(values, route, encoding),
            target=_parse_float(row[12], rownum, "target"),
            split_tag=row[1].strip(),
        ))
    return samples


def feature_matrix(samples: list[Sample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([s.features for s in samples], dtype=np.float64)
    y = np.array([s.target for s in samples], dtype=np.float64)
    return X, y


def assign_folds(samples: list[Sample], k: int, seed: int,
                 grouped: bool = True) -> FoldAssignment:
    """Deterministic K-fold partition, shared by every model family.

    grouped=True keeps all samples from one source record in a single fold,
    so augmented near-twins never straddle a train/validation boundary.
    """
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    n = len(samples)
    rng = np.random.default_rng(seed)
    if grouped:
        group_ids: list[str] = []
        seen: dict[str, int] = {}
        member_of = np.empty(n, dtype=np.int64)
        for i, s in enumerate(samples):
            gid = s.source_record_id
            if gid not in seen:
                seen[gid] = len(group_ids)
                group_ids.append(gid)
            member_of[i] = seen[gid]
        n_groups = len(group_ids)
        if n_groups < k:
            raise ValidationError(
                f"grouped folding needs >= {k} source records, got {n_groups}")
        perm = rng.permutation(n_groups)
        fold_of_group = np.empty(n_groups, dtype=np.int64)
        fold_of_group[perm] = np.arange(n_groups) % k
        assignment = fold_of_group[member_of]
    else:
        if n < k:
            raise ValidationError(f"need >= {k} samples, got {n}")
        perm = rng.permutation(n)
        assignment = np.empty(n, dtype=np.int64)
        assignment[perm] = np.arange(n) % k
    return FoldAssignment(k=k, seed=seed, assignment=tuple(int(f) for f in assignment))


@dataclass(frozen=True)
class Scaler:
    """Feature min-max map onto [-1, 1] plus target standardization.

    Fitted on the fold-training subset only; constant features map to 0.
    """
    feature_min: np.ndarray
    feature_max: np.ndarray
    target_mean: float
    target_std: float

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        span = self.feature_max - self.feature_min
        safe = np.where(span > 0.0, span, 1.0)
        out = 2.0 * (X - self.feature_min) / safe - 1.0
        return np.where(span > 0.0, out, 0.0)

    def transform_targets(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def inverse_targets(self, y_scaled: np.ndarray) -> np.ndarray:
        return np.asarray(y_scaled, dtype=np.float64) * self.target_std + self.target_mean


def fit_scaler(X: np.ndarray, y: np.ndarray) -> Scaler:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("scaler needs a non-empty 2-D training matrix")
    std = float(np.std(y))
    return Scaler(
        feature_min=X.min(axis=0),
        feature_max=X.max(axis=0),
        target_mean=float(np.mean(y)),
        target_std=std if std > 0.0 else 1.0,
    )
