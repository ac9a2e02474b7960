"""The 307 dysphonia measures and the feature matrix."""
from .extract import (FeatureMatrix, FeatureVector, extract_all, extract_matrix,
                      read_feature_csv, write_feature_csv)
from .noise import emd_er_family, gne_family, hnr_nhr, vfer_family
from .nonlinear import dfa, ppe, rpde
from .perturbation import f0_stats, gq, jitter_family, shimmer_family
from .registry import (FAMILY_ORDER, FAMILY_SIZES, N_FEATURES, family_slices, feature_names,
                       load_registry)
from .spectral import mfcc_family
from .wavelet import wavelet_family

__all__ = [
    "FeatureMatrix", "FeatureVector", "extract_all", "extract_matrix", "read_feature_csv",
    "write_feature_csv", "emd_er_family", "gne_family", "hnr_nhr", "vfer_family", "dfa",
    "ppe", "rpde", "f0_stats", "gq", "jitter_family", "shimmer_family", "FAMILY_ORDER",
    "FAMILY_SIZES", "N_FEATURES", "family_slices", "feature_names", "load_registry", "mfcc_family",
    "wavelet_family",
]
