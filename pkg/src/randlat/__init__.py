"""Moment machinery for counts of random unimodular lattice points.

Submodules:
    partitions   singleton-free set partitions, exact moment main terms
    admissible   admissible integer matrices, Smith forms, Rogers weights
    geometry     parallelotope volume suprema and certificates
    jintegral    Monte Carlo J-integrals and worst-matrix remainder terms
    lattices     Hecke-point sampling, LLL reduction, ball counting
    experiments  CLT / Poisson / Brownian / growth-rate experiment drivers
    cli          command line entry point
"""

__version__ = "0.1.0"

from .experiments import (  # noqa: F401
    ExperimentConfig,
    StatRecord,
    StatReport,
    run_brownian,
    run_clt,
    run_growth_scan,
    run_poisson,
    variance_oracle,
    verify_rogers_k2,
)
from .geometry import (  # noqa: F401
    ball_volume,
    log_ball_volume,
    log_v_tilde,
    v_sup,
    v_tilde,
)
from .jintegral import j_integral, worst_term  # noqa: F401
from .lattices import (  # noqa: F401
    count_curve,
    count_in_ball,
    default_prime,
    hecke_lattice,
    lll_reduce,
    sample_lattice,
    shortest_values,
)
from .partitions import (  # noqa: F401
    exact_main_term,
    limit_moment,
    normalized_main_term,
    partitions_no_singletons,
    threshold_c,
)
