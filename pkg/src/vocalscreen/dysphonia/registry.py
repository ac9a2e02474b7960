"""The versioned feature registry: canonical names, order and families."""
from __future__ import annotations

import csv
from functools import lru_cache
from importlib import resources

REGISTRY_VERSION = "1"
FAMILY_ORDER = ("jitter", "shimmer", "hnr", "gq", "rpde", "dfa", "ppe",
                "gne", "vfer", "emd_er", "mfcc", "f0", "wavelet")
FAMILY_SIZES = {"jitter": 28, "shimmer": 21, "hnr": 4, "gq": 3, "rpde": 1, "dfa": 1,
                "ppe": 1, "gne": 6, "vfer": 9, "emd_er": 6, "mfcc": 42, "f0": 3,
                "wavelet": 182}
N_FEATURES = sum(FAMILY_SIZES.values())


@lru_cache(maxsize=1)
def load_registry():
    """Tuple of (index, family, name) rows from the shipped registry file."""
    text = resources.files("vocalscreen").joinpath("data/registry.csv").read_text()
    rows = [(int(r["index"]), r["family"], r["name"]) for r in csv.DictReader(text.splitlines())]
    if [r[0] for r in rows] != list(range(len(rows))):
        raise RuntimeError("registry indices are not 0..n-1 in order")
    return tuple(rows)


def feature_names():
    return [r[2] for r in load_registry()]


def family_slices():
    """Ordered mapping family -> slice into the feature vector."""
    out, start = {}, 0
    for fam in FAMILY_ORDER:
        out[fam] = slice(start, start + FAMILY_SIZES[fam])
        start += FAMILY_SIZES[fam]
    return out
