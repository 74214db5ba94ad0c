"""Monte Carlo Feynman-Kac heat semigroups on bundles over manifolds with boundary."""
__version__ = "0.1.0"

from .errors import (BundleInvariantError, ConfigError, NonCompliantSectionError, NotOnBoundaryError,  # noqa: E402
                     OracleConvergenceError, OutsideChartError, OutsideCollarError)
from .geometry import DiskExterior2D, HalfSpace, Hemisphere2D, make_geometry  # noqa: E402
from .bundles import (bump_section, constant_section, forms_bundle, generic_bundle, harmonic_section,  # noqa: E402
                      make_bundle, scalar_bundle, spinor2d_bundle)
from .sde import StepConfig, run_ensemble  # noqa: E402
from .estimators import (EnsembleConfig, Estimate, conservation_pairing, domination_report, kernel_estimate,  # noqa: E402
                         l1_growth, local_time_moments, semigroup_apply)

__all__ = [
    "__version__", "BundleInvariantError", "ConfigError", "NonCompliantSectionError", "NotOnBoundaryError",
    "OracleConvergenceError", "OutsideChartError", "OutsideCollarError", "DiskExterior2D", "HalfSpace",
    "Hemisphere2D", "make_geometry", "bump_section", "constant_section", "forms_bundle", "generic_bundle",
    "harmonic_section", "make_bundle", "scalar_bundle", "spinor2d_bundle", "StepConfig", "run_ensemble",
    "EnsembleConfig", "Estimate", "conservation_pairing", "domination_report", "kernel_estimate", "l1_growth",
    "local_time_moments", "semigroup_apply",
]
