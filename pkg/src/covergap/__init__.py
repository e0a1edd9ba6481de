"""covergap: exact and Monte Carlo analysis of finite reversible chains.

The package computes the full hierarchy of chain parameters (spectral gap,
hitting times, four mixing-time notions, quasi-stationary tails, simulated
cover times) and treats the known inequalities between them as free
oracles: every bound is machine-checked, and a violation is reported as an
implementation bug rather than tolerated.
"""

from .chain import (
    ChainSpec,
    FamilyParams,
    build_family,
    complete,
    cycle,
    grid_torus,
    hypercube,
    load_spec,
    make_spec,
    random_reversible,
    srw_graph,
    stationary,
    two_state,
    validate,
)
from .cover import (
    CoverConfig,
    CoverStats,
    MatthewsBounds,
    concentration_report,
    estimate_tcov,
    exact_cover_times,
    matthews_bounds,
    simulate_cover,
    torus_sweep,
)
from .hitting import (
    HittingData,
    fundamental_matrix,
    hitting_times,
    near_set_general,
    near_set_transitive,
    transitive_ratio_check,
    z_identity_deviation,
)
from .mixing import (
    MixingProfile,
    compute_profile,
    gap_upper_bounds,
    hierarchy_report,
    mix_time,
    mix_time_from_x,
    opt_oracle_max,
    sep_time,
)
from .spectral import (
    SpectralData,
    ave_l2_mix_time,
    d2x_squared,
    d_inf,
    decompose,
    eigentime_alpha,
    heat_kernel,
)
from .tails import (
    InducedChain,
    KilledChainData,
    hit_prob_sandwich,
    hit_tail_bounds,
    induced_chain,
    killed_chain,
    local_time_expect,
    quasistationary_bounds_report,
    sep_tail_check,
    tail_exact,
)
from .verify import run_verify, verify_ok

__version__ = "0.1.0"
