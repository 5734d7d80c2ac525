"""Salt-based autopeering: protocol, simulator, and eclipse-resistance analytics."""

from .adversary import (
    AttackConfig,
    EclipseStats,
    MCResult,
    mc_inbound_takeover,
    mc_outbound_takeover,
    mc_random_choice_takeover,
    run_eclipse_simulation,
)
from .analytics import (
    eclipse_lower_bound,
    finite_outbound_cdf,
    inbound_takeover_prob,
    inbound_takeover_prob_with_theta,
    limiting_outbound_cdf,
    min_score_cdf,
    order_stat_mean,
    order_stat_pdf,
    outbound_takeover_prob,
    random_choice_eclipse_prob,
)
from .errors import (
    ChainExhaustedError,
    ConfigurationError,
    InvalidParameterError,
    ProtocolError,
    SaltpeerError,
    SelfScoreError,
    UnsupportedParameterError,
    VerificationRefusedError,
)
from .identity import (
    HashChain,
    NodeId,
    Salt,
    chain_advance,
    chain_create,
    digest,
    new_identity,
    new_private_salt,
    verify_salt,
)
from .protocol import (
    NeighborEntry,
    PeeringDrop,
    PeeringRequest,
    PeeringResponse,
    PeeringState,
    decode_message,
    encode_message,
)
from .scoring import (
    Score,
    inbound_score,
    outbound_score,
    rank_candidates,
    theta_test,
)
from .simulator import (
    AttackSpec,
    MetricsSeries,
    SimConfig,
    Simulation,
    run,
    score_distribution_experiment,
    snapshot_topology,
)

__version__ = "0.1.0"
