"""Rank-based estimation of nested Archimedean copula tree structures."""
from .generator import Generator, bivariate_kendall_cdf, check_nesting, psi, psi_inv, tau_from_theta, theta_from_tau
from .kendall import KendallSample, ecdf, l1_distance, pair_pseudo_obs, triple_pseudo_obs
from .reconstruct import Estimate, detect_faulty, estimate_structure, recover
from .sampler import NacModel, make_rng, sample_archimedean, sample_nac
from .tree import TreeStructure, format_tree, induce, lca, parse_tree, triples, validate
from .triad import RadialFit, TripleDecision, fit_radial, h0_resample, triple_test

__version__ = "0.1.0"
