"""Principal Lyapunov exponents, Floquet vectors and exponential separation
for positive random matrix cocycles on R^n."""
from .cocycle import (ConfigError, Deterministic, Dist, IIDEnsemble, LeslieRandom, MarkovSwitch,
                      OmegaPath, ScalarScaled, check_A1_integrability, dual_product,
                      forward_product, model_from_dict, sample_matrix)
from .focusing import (AssumptionError, FocusingError, birkhoff_diameter, contraction_ratio,
                       focusing_report, kappa, kappa_beta, primitivity_index, verify_A5)
from .hilbert_metric import (NotComparableError, RatioBounds, comparable, oscillation,
                             proj_distance, ratio_bounds)
from .kernels import BACKEND
from .ordered_space import (ConeVector, NormKind, cone_contains, lattice_parts, norm,
                            order_leq)
from .principal import (entire_orbit, forward_normalize, lyapunov_top, pullback_adaptive,
                        pullback_principal)
from .separation import (cone_alignment_defect, compare_exponents, dual_principal,
                         duality_check, principal_projection, qr_oseledets_oracle,
                         second_exponent, temperedness_check)

__version__ = "0.1.0"

__all__ = [
    "AssumptionError",
    "BACKEND",
    "ConeVector",
    "ConfigError",
    "Deterministic",
    "Dist",
    "FocusingError",
    "IIDEnsemble",
    "LeslieRandom",
    "MarkovSwitch",
    "NormKind",
    "NotComparableError",
    "OmegaPath",
    "RatioBounds",
    "ScalarScaled",
    "birkhoff_diameter",
    "check_A1_integrability",
    "comparable",
    "compare_exponents",
    "cone_alignment_defect",
    "cone_contains",
    "contraction_ratio",
    "dual_principal",
    "dual_product",
    "duality_check",
    "entire_orbit",
    "focusing_report",
    "forward_normalize",
    "forward_product",
    "kappa",
    "kappa_beta",
    "lattice_parts",
    "lyapunov_top",
    "model_from_dict",
    "norm",
    "order_leq",
    "oscillation",
    "primitivity_index",
    "principal_projection",
    "proj_distance",
    "pullback_adaptive",
    "pullback_principal",
    "qr_oseledets_oracle",
    "ratio_bounds",
    "sample_matrix",
    "second_exponent",
    "temperedness_check",
    "verify_A5",
]
