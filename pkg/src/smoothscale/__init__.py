"""Multiscale image discrepancy statistics over toroidal environments."""

from .bounds import (
    DecaySolution,
    check_feasible,
    geometric_point,
    scale_margin_check,
    objective,
    optimality_probe,
    solve_decay,
    decay_bound_check,
)
from .discrepancy import (
    DiscrepancyReport,
    Equipartition,
    ScaleProfile,
    equipartition_discrepancy,
    estimate_profile,
    global_discrepancy,
    local_correlation,
    local_discrepancy,
    report,
)
from .domino import Window, build_basis, parseval_slack, bound_chain, transform, window_ld
from .env import (
    BlockQuery,
    Environment,
    make_checkerboard,
    make_constant,
    make_iid_uniform,
    make_megacell,
    make_prefix_walk,
    make_row_gradient,
)
from .pgm import load_pgm, save_pgm
from .sampling import ImageSample, SamplerConfig, extract_image, sample_image, sample_window

__version__ = "0.1.0"
