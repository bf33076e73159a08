"""Exact Haar measures of 1-eigenspace strata in open subgroups of GL2(Z_l)."""

__version__ = "0.3.0"
