"""Couplings of discrete measures on finite metric spaces.

Exact Prokhorov distances, gluing of couplings, an exact transportation
solver with duals, the assignment game built on it, and experiments on how
couplings and optimal values respond to perturbed marginals.
"""
from .continuity_lab import (
    ConvergenceRow,
    PerturbationCertificate,
    argmax_stability_probe,
    transfer_coupling,
    uhc_probe,
    value_convergence,
)
from .coupling import (
    SIGMA,
    Coupling,
    MultiCoupling,
    glue,
    glue4,
    identity_coupling,
    marginal,
    marginalize,
    permute,
    product_coupling,
)
from .matching import (
    Outcome,
    check_payoff,
    equivalence_audit,
    is_stable,
    stable_matching_exists,
)
from .metric_measure import (
    DiscreteMeasure,
    MetricSpace,
    SampleStream,
    empirical_sample,
    enlarge,
    euclidean_space,
    line_space,
    product_space,
    validate_space,
)
from .prokhorov import ProkhorovCertificate, min_far_mass, prokhorov_direct, prokhorov_distance
from .transport import (
    OptimalPlan,
    Potentials,
    SurplusGrid,
    enumerate_optimal_vertices,
    evaluate_surplus,
    solve_dual,
    solve_primal,
    solve_transport,
)

__version__ = "0.1.0"
