"""Measure-zero carpets with certified segments, wedges and a derivative search harness."""

from .carpet import measure_bound, member_depth, monte_carlo_area, squares_in_window
from .derivatives import LipschitzFn, Tolerances, dir_derivative, frechet_check, pair_order_check
from .errors import CarpetError
from .meanvalue import lemma_max_verify, mean_value_tau_search
from .poset import Index, Schedule, chain_supremum, midpoint, power, precedes, predecessor
from .search import run_search
from .segments import RationalDirection, find_segment, refine, verify_segment_avoidance
from .wedges import find_wedge, find_wedge_net, perturbed_crossing, product_wedge

__all__ = [
    "CarpetError",
    "Index",
    "LipschitzFn",
    "RationalDirection",
    "Schedule",
    "Tolerances",
    "chain_supremum",
    "dir_derivative",
    "find_segment",
    "find_wedge",
    "find_wedge_net",
    "frechet_check",
    "lemma_max_verify",
    "mean_value_tau_search",
    "measure_bound",
    "member_depth",
    "midpoint",
    "monte_carlo_area",
    "pair_order_check",
    "perturbed_crossing",
    "power",
    "precedes",
    "predecessor",
    "product_wedge",
    "refine",
    "run_search",
    "squares_in_window",
    "verify_segment_avoidance",
]
