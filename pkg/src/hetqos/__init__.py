"""QoS analytics for three-tier cache-enabled heterogeneous networks.

Analytic engine plus Monte Carlo oracles for a cellular network with
macro cells (PPP), clustered small cells (Thomas cluster process),
device-to-device sharing links, content caching with Zipf popularity,
and weighted processor-sharing capacity allocation.
"""

__version__ = "0.1.0"

from .association import AssociationEngine, AssocProbs, NetworkConfig
from .content import ContentConfig, f_pop, zipf_pmf
from .dpsq import DpsInstance, dps_sojourn_approx, eps_baseline, qos_metrics
from .geometry import TierLayout
from .montecarlo import McRunSpec, dps_des, empirical_association
from .rates import ActiveIntensities, NumericsProfile, RateEngine, RateTable
from .traffic import TrafficConfig, build_state_matrix

__all__ = [
    "__version__",
    "AssociationEngine", "AssocProbs", "NetworkConfig",
    "ContentConfig", "f_pop", "zipf_pmf",
    "DpsInstance", "dps_sojourn_approx", "eps_baseline", "qos_metrics",
    "TierLayout",
    "McRunSpec", "dps_des", "empirical_association",
    "ActiveIntensities", "NumericsProfile", "RateEngine", "RateTable",
    "TrafficConfig", "build_state_matrix",
]
