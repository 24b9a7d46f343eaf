import numpy as np
import pytest

from steelprop import dataset


def make_record(record_id="r1", ranged=("c", "mn"), process=1,
                targets=(200.0, 500.0, 300.0, 25.0)):
    """Record with fixed mid-bound values except the listed ranged elements."""
    bounds = {
        "fe": (70.0, 100.0), "c": (0.08, 1.2), "mn": (0.25, 2.0),
        "p": (0.0, 0.2), "s": (0.0, 1.0), "si": (0.0, 3.0),
        "ni": (0.0, 26.0), "cr": (0.0, 37.0), "mo": (0.0, 4.0),
    }
    comp = {}
    for elem in dataset.ELEMENTS:
        lo, hi = bounds[elem]
        if elem in ranged:
            comp[elem] = dataset.RangeSpec(lo, hi)
        else:
            mid = 0.5 * (lo + hi)
            comp[elem] = dataset.RangeSpec(mid, mid)
    return dataset.AlloyRecord(
        record_id=record_id, composition=comp,
        process=dataset.ProcessRoute(process),
        targets=dataset.PropertyVector(*targets))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Reference per-fold R-square scores for four model families (10 folds),
# frozen to pin the rank statistics and pairwise decisions.
REFERENCE_FOLD_SCORES = np.array([
    [0.95533, 0.99349, 0.96494, 0.75425],
    [0.98194, 0.99383, 0.96168, 0.76033],
    [0.95781, 0.98894, 0.92343, 0.74292],
    [0.95485, 0.99303, 0.96808, 0.73856],
    [0.97518, 0.99283, 0.96444, 0.74721],
    [0.87986, 0.99340, 0.96082, 0.76504],
    [0.96407, 0.99351, 0.94713, 0.74609],
    [0.97277, 0.99286, 0.96487, 0.75255],
    [0.91661, 0.99212, 0.96443, 0.75220],
    [0.96105, 0.99284, 0.95929, 0.75382],
])
REFERENCE_FAMILIES = ("nn", "svr", "tree", "linear")
