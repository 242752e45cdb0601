"""Ranking from pairwise comparisons with item features (f-BTL model)."""

from .errors import *  # noqa: F401,F403
from .graphs import EdgeCoverSets, RelationGraph, edge_cover_sets, gen_family, overlap_stats
from .features import FeatureSet, basis_condition, compute_coefficients, synth_features
from .model import ComparisonSample, FbtlModel, preference, sample_comparisons, sample_pairs
from .recovery import (
    build_equations,
    closed_form_threshold,
    error_probability_bound,
    hall_check,
    solve_noiseless,
)
from .estimators import fbtl_ls, ols, rank_centrality
from .metrics import l2_error, pd_error, sample_complexity, thm5_rhs, thm6_lower

__version__ = "0.1.0"
