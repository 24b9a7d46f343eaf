"""Synthetic alloy dataset with a known smooth ground truth.

The handbook data behind the original study is not redistributable, so the
workbench ships a generator: element ranges drawn inside the documented
composition bounds, a fixed closed-form target function per property
(saturating tanh terms plus a few pairwise interactions, clipped to a
physically sensible window) and seeded Gaussian noise. The functional
constants below are versioned: changing them changes every downstream
acceptance number, so treat them as frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import (ELEMENTS, AlloyRecord, ProcessRoute, PropertyVector,
                      RangeSpec)
from .errors import ValidationError

# Element-wise composition bounds (weight-percent) for the generator.
ELEMENT_BOUNDS = {
    "fe": (70.0, 100.0),
    "c": (0.08, 1.2),
    "mn": (0.25, 2.0),
    "p": (0.0, 0.2),
    "s": (0.0, 1.0),
    "si": (0.0, 3.0),
    "ni": (0.0, 26.0),
    "cr": (0.0, 37.0),
    "mo": (0.0, 4.0),
}

# Additive route effects, indexed by route code - 1
# (hot roll, cold roll, anneal, normalize, quench).
ROUTE_EFFECT = {
    "hardness": (0.0, 25.0, -60.0, -10.0, 95.0),
    "tensile": (0.0, 60.0, -120.0, -30.0, 180.0),
    "yield": (0.0, 80.0, -100.0, -20.0, 150.0),
    "elongation": (0.0, -6.0, 9.0, 3.0, -12.0),
}

CLIP_WINDOW = {
    "hardness": (100.0, 800.0),
    "tensile": (250.0, 1900.0),
    "yield": (150.0, 1500.0),
    "elongation": (2.0, 70.0),
}

DEFAULT_NOISE_STD = {
    "hardness": 6.0,
    "tensile": 18.0,
    "yield": 15.0,
    "elongation": 1.2,
}


def _unit(value: float, elem: str) -> float:
    lo, hi = ELEMENT_BOUNDS[elem]
    return 2.0 * (value - lo) / (hi - lo) - 1.0


def ground_truth(prop: str, values: dict[str, float], route_code: int) -> float:
    """Noise-free target for a concrete composition and route."""
    u = {e: _unit(values[e], e) for e in ELEMENTS}
    r = ROUTE_EFFECT[prop][route_code - 1]
    if prop == "hardness":
        raw = (400.0
               + 130.0 * math.tanh(1.1 * u["c"] + 0.6 * u["mn"] + 0.4 * u["cr"] + 0.2)
               + 60.0 * math.tanh(0.8 * u["mo"] + 0.5 * u["ni"])
               + 45.0 * u["c"] * u["cr"]
               - 25.0 * u["si"] * u["ni"]
               + 10.0 * u["p"] + 8.0 * u["s"] - 12.0 * u["fe"]
               + r)
    elif prop == "tensile":
        raw = (820.0
               + 300.0 * math.tanh(1.2 * u["c"] + 0.7 * u["mn"] + 0.3 * u["si"])
               + 150.0 * math.tanh(0.9 * u["cr"] + 0.6 * u["mo"] + 0.4 * u["ni"])
               + 90.0 * u["c"] * u["mn"]
               - 40.0 * u["s"] * u["p"]
               - 30.0 * u["fe"]
               + r)
    elif prop == "yield":
        raw = (560.0
               + 240.0 * math.tanh(1.3 * u["c"] + 0.5 * u["mn"] + 0.3 * u["mo"])
               + 120.0 * math.tanh(0.8 * u["cr"] + 0.4 * u["ni"])
               + 70.0 * u["mn"] * u["si"]
               - 25.0 * u["fe"]
               + 15.0 * u["p"]
               + r)
    elif prop == "elongation":
        raw = (32.0
               - 14.0 * math.tanh(1.2 * u["c"] + 0.6 * u["cr"] + 0.4 * u["mo"])
               - 6.0 * u["c"] * u["mn"]
               + 5.0 * math.tanh(1.0 * u["ni"])
               - 4.0 * u["s"] - 2.0 * u["p"]
               + r)
    else:
        raise ValidationError(f"unknown property: {prop}")
    lo, hi = CLIP_WINDOW[prop]
    return min(max(raw, lo), hi)


@dataclass(frozen=True)
class GroundTruthSpec:
    seed: int = 20180619
    noise_std: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_NOISE_STD))
    ranged_probability: float = 0.5     # chance each element gets a range
    width_fraction: tuple[float, float] = (0.05, 0.30)

    def __post_init__(self):
        for prop, std in self.noise_std.items():
            if std < 0.0:
                raise ValidationError(f"noise std for {prop} must be >= 0")
        if not 0.0 <= self.ranged_probability <= 1.0:
            raise ValidationError("ranged_probability must be in [0, 1]")


def generate(n_records: int, spec: GroundTruthSpec = GroundTruthSpec()
             ) -> list[AlloyRecord]:
    """Deterministic records: ranges inside the element bounds, targets from
    the ground truth at range midpoints plus seeded noise."""
    if n_records < 1:
        raise ValidationError("n_records must be >= 1")
    rng = np.random.default_rng(spec.seed)
    records = []
    for idx in range(n_records):
        composition = {}
        midpoints = {}
        for elem in ELEMENTS:
            lo, hi = ELEMENT_BOUNDS[elem]
            span = hi - lo
            if rng.random() < spec.ranged_probability:
                w = rng.uniform(*spec.width_fraction) * span
                center = rng.uniform(lo + 0.5 * w, hi - 0.5 * w)
                spec_range = RangeSpec(center - 0.5 * w, center + 0.5 * w)
                composition[elem] = spec_range
                # evaluate the truth at the exact float the midpoint property
                # yields, so zero-noise targets match test features bit-for-bit
                midpoints[elem] = spec_range.midpoint
            else:
                v = rng.uniform(lo, hi)
                composition[elem] = RangeSpec(v, v)
                midpoints[elem] = v
        route = int(rng.integers(1, 6))
        targets = {}
        for prop in ("hardness", "tensile", "yield", "elongation"):
            value = ground_truth(prop, midpoints, route)
            if spec.noise_std[prop] > 0.0:
                value += spec.noise_std[prop] * rng.standard_normal()
            lo, hi = CLIP_WINDOW[prop]
            targets[prop] = min(max(value, lo), hi)
        records.append(AlloyRecord(
            record_id=f"synth-{idx + 1:04d}",
            composition=composition,
            process=ProcessRoute(route),
            targets=PropertyVector(
                hardness=targets["hardness"],
                tensile=targets["tensile"],
                yield_strength=targets["yield"],
                elongation=targets["elongation"],
            ),
        ))
    return records
