"""Full feature vector assembly and the feature-matrix file format."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, VocalScreenError
from ..pitch import estimate_f0, extract_cycles
from .noise import emd_er_family, gne_family, hnr_nhr, vfer_family
from .nonlinear import dfa, ppe, rpde
from .perturbation import f0_stats, gq, jitter_family, shimmer_family
from .registry import FAMILY_ORDER, N_FEATURES, family_slices, feature_names
from .spectral import mfcc_family
from .wavelet import wavelet_family

log = logging.getLogger(__name__)


@dataclass
class FeatureVector:
    values: np.ndarray
    flags: np.ndarray
    notes: dict = field(default_factory=dict)

    @property
    def names(self):
        return feature_names()


@dataclass
class FeatureMatrix:
    values: np.ndarray
    ids: list
    labels: list
    ages: list
    sexes: list
    names: list = field(default_factory=feature_names)
    flags: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size == 0:
            self.values = np.zeros((len(self.ids), len(self.names)))
        else:
            self.values = self.values.reshape(len(self.ids), -1)
        if self.values.shape[1] != len(self.names):
            raise InputError(f"{self.values.shape[1]} columns but {len(self.names)} names")
        if len(set(self.ids)) != len(self.ids):
            raise InputError("duplicate recording ids in feature matrix")
        if self.flags is None:
            self.flags = np.isnan(self.values)

    def __len__(self):
        return len(self.ids)

    @property
    def y(self):
        """Labels coded 1 = PD, 0 = HC."""
        return np.array([1 if lab == "PD" else 0 for lab in self.labels], dtype=np.int8)

    def subset(self, rows):
        rows = np.asarray(rows, dtype=int)
        pick = lambda seq: [seq[i] for i in rows]
        return FeatureMatrix(self.values[rows], pick(self.ids), pick(self.labels),
                             pick(self.ages), pick(self.sexes), list(self.names),
                             self.flags[rows])

    def filter_cohort(self, cohort):
        """Rows for ``all``, ``female`` or ``male``."""
        if cohort == "all":
            return self
        want = {"female": "F", "male": "M"}.get(cohort)
        if want is None:
            raise InputError(f"unknown cohort filter {cohort!r}")
        return self.subset([i for i, s in enumerate(self.sexes) if s == want])


def extract_all(rec, contour=None, cycles=None, sex=None, age=None, f0_table=None) -> FeatureVector:
    """All 307 measures in registry order.

    A family that fails yields NaN values with their quality flags set and
    the reason in ``notes``; only a recording without any voiced frame is
    a total failure and raises.
    """
    sex = rec.sex if sex is None else sex
    age = rec.age if age is None else age
    if contour is None:
        contour = estimate_f0(rec)
    if not contour.voiced.any():
        from ..errors import UnvoicedRecordingError
        raise UnvoicedRecordingError(f"{rec.id}: no voiced frames")
    if cycles is None:
        cycles = extract_cycles(rec, contour)

    values = np.full(N_FEATURES, np.nan)
    flags = np.zeros(N_FEATURES, dtype=bool)
    notes = {}
    slices = family_slices()
    jobs = {
        "jitter": lambda: jitter_family(cycles, contour),
        "shimmer": lambda: shimmer_family(cycles),
        "hnr": lambda: hnr_nhr(rec, contour),
        "gq": lambda: gq(contour, cycles),
        "rpde": lambda: [rpde(rec)],
        "dfa": lambda: [dfa(rec)],
        "ppe": lambda: [ppe(contour)],
        "gne": lambda: gne_family(rec),
        "vfer": lambda: vfer_family(rec),
        "emd_er": lambda: emd_er_family(rec),
        "mfcc": lambda: mfcc_family(rec),
        "f0": None,
        "wavelet": lambda: wavelet_family(contour),
    }
    for fam in FAMILY_ORDER:
        sl = slices[fam]
        try:
            if fam == "f0":
                vals, pooled = f0_stats(contour, sex, age, f0_table)
                if pooled:
                    flags[sl.start] = True
                    notes[fam] = "expected F0 from the sex-pooled norm"
            else:
                vals = jobs[fam]()
            vals = np.asarray(vals, dtype=float)
        except (VocalScreenError, np.linalg.LinAlgError, ValueError) as exc:
            notes[fam] = f"{type(exc).__name__}: {exc}"
            flags[sl] = True
            continue
        bad = ~np.isfinite(vals)
        if bad.any():
            vals = np.where(bad, np.nan, vals)
            flags[sl] |= bad
            notes.setdefault(fam, "non-finite values replaced by NaN")
        values[sl] = vals
    return FeatureVector(values, flags, notes)


def extract_matrix(recordings, threads=1, contours=None) -> FeatureMatrix:
    """Feature matrix over ``recordings`` with rows ordered by recording id.

    Recordings with no voiced frames are skipped with a logged reason.
    """
    recs = sorted(recordings, key=lambda r: r.id)

    def one(rec):
        try:
            return extract_all(rec)
        except VocalScreenError as exc:
            log.warning("%s: skipped (%s)", rec.id, exc)
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vecs = list(pool.map(one, recs))
    else:
        vecs = [one(r) for r in recs]
    keep = [i for i, v in enumerate(vecs) if v is not None]
    vals = np.array([vecs[i].values for i in keep]).reshape(len(keep), N_FEATURES)
    flags = np.array([vecs[i].flags for i in keep]).reshape(len(keep), N_FEATURES)
    return FeatureMatrix(vals, [recs[i].id for i in keep], [recs[i].label for i in keep],
                         [recs[i].age for i in keep], [recs[i].sex for i in keep],
                         feature_names(), flags)


def _fmt(v):
    return "NaN" if v != v else repr(float(v))


def write_feature_csv(fm: FeatureMatrix, path, header_comment=None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(",".join(["id", "label", "age", "sex"] + list(fm.names)) + "\n")
        for i, rid in enumerate(fm.ids):
            age = "" if fm.ages[i] is None else _fmt(fm.ages[i])
            sex = "" if fm.sexes[i] in (None, "Unknown") else fm.sexes[i]
            fh.write(",".join([rid, fm.labels[i], age, sex] + [_fmt(v) for v in fm.values[i]]) + "\n")


def read_feature_csv(path) -> FeatureMatrix:
    ids, labels, ages, sexes, rows = [], [], [], [], []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise InputError(f"{path}: empty feature file")
    header = lines[0].split(",")
    if header[:4] != ["id", "label", "age", "sex"]:
        raise InputError(f"{path}: header must start with id,label,age,sex")
    names = header[4:]
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise InputError(f"{path}: row {parts[0]!r} has {len(parts)} fields, expected {len(header)}")
        ids.append(parts[0])
        labels.append(parts[1])
        ages.append(float(parts[2]) if parts[2] else None)
        sexes.append(parts[3] or "Unknown")
        try:
            rows.append([float(v) for v in parts[4:]])
        except ValueError as exc:
            raise InputError(f"{path}: row {parts[0]!r}: {exc}") from exc
    vals = np.array(rows, dtype=float).reshape(len(ids), len(names))
    return FeatureMatrix(vals, ids, labels, ages, sexes, names)
