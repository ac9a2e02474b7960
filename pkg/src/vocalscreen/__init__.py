"""Telephone-quality sustained-vowel screening for Parkinson's disease.

Dysphonia measures, feature selection, random forest classification and the
balanced cross-validation harness, plus a synthetic phonation generator used
as ground truth.
"""
__version__ = "0.1.0"
