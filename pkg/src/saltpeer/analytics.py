"""Closed-form eclipse-resistance formulas used as oracles and reference curves.

All combinatorial terms are evaluated in the log-gamma domain and
exponentiated last, so the formulas stay numerically stable for counts
up to around 1e5.
"""

from __future__ import annotations

import math

from .errors import InvalidParameterError, UnsupportedParameterError


def _log_binom(n: int, r: int) -> float:
    """log C(n, r); -inf encodes a zero binomial (negative/oversize args)."""
    if r < 0 or n < 0 or r > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


def order_stat_pdf(rank: int, sample_size: int, x: float) -> float:
    """Density of the rank-th smallest of ``sample_size`` i.i.d. uniforms.

    f(x) = L!/((r-1)!(L-r)!) * x^(r-1) * (1-x)^(L-r) on [0, 1], zero
    outside.
    """
    r, L = rank, sample_size
    if not 1 <= r <= L:
        raise InvalidParameterError(f"rank must satisfy 1 <= rank <= sample_size, got ({r}, {L})")
    if x < 0.0 or x > 1.0:
        return 0.0
    log_coeff = math.lgamma(L + 1) - math.lgamma(r) - math.lgamma(L - r + 1)
    # 0**0 at the interval ends counts as 1
    if x == 0.0:
        return math.exp(log_coeff) if r == 1 else 0.0
    if x == 1.0:
        return math.exp(log_coeff) if r == L else 0.0
    return math.exp(log_coeff + (r - 1) * math.log(x) + (L - r) * math.log1p(-x))


def order_stat_mean(rank: int, sample_size: int) -> float:
    """Expectation rank/(sample_size+1) of the rank-th order statistic."""
    if not 1 <= rank <= sample_size:
        raise InvalidParameterError("rank must satisfy 1 <= rank <= sample_size")
    return rank / (sample_size + 1)


def min_score_cdf(x: float, sample_size: int) -> float:
    """CDF 1-(1-x)^L of the minimum of ``sample_size`` i.i.d. uniforms."""
    if sample_size < 1:
        raise InvalidParameterError("sample_size must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return -math.expm1(sample_size * math.log1p(-x))


def inbound_takeover_prob(n_attackers: int, honest_requests: int, k: int) -> float:
    """Probability that attackers hold all k inbound slots.

    With ``n_attackers`` adversarial and ``honest_requests`` honest
    requests, all with i.i.d. uniform inbound scores, this is the
    telescoping product prod_{j<k} (N_A - j)/(N_A + L - j).  Degenerate
    extensions: 0 when the attacker cannot fill k slots, 1 when there is
    no honest competition.
    """
    if k < 1:
        raise InvalidParameterError("k must be at least 1")
    if n_attackers < 0 or honest_requests < 0:
        raise InvalidParameterError("counts must be non-negative")
    if n_attackers < k:
        return 0.0
    if honest_requests == 0:
        return 1.0
    p = 1.0
    for j in range(k):
        p *= (n_attackers - j) / (n_attackers + honest_requests - j)
    return p


def inbound_takeover_prob_with_theta(
    theta: float, n_attackers: int, honest_requests: int, k: int
) -> float:
    """Inbound takeover with the threshold test throttling the attacker.

    The eligibility test reduces the effective attacker count to
    ``round(theta * n_attackers)`` (rounded to the nearest integer).
    """
    if not 0.0 <= theta <= 1.0:
        raise InvalidParameterError("theta must lie in [0, 1]")
    return inbound_takeover_prob(round(theta * n_attackers), honest_requests, k)


def outbound_takeover_prob(n_attackers: int, n_honest: int, honest_requests: int, k: int) -> float:
    """Probability that attackers overtake all k outbound slots.

    The victim made ``honest_requests`` requests to ``n_honest`` honest
    nodes (ending with its k-th acceptance); the attacker wins when its
    k-th smallest score undercuts the smallest accepted honest score.
    Stated for k >= 2; the k = 1 case degenerates and is rejected.
    Binomials with negative or oversize arguments count as zero, which
    also covers attackers too few to fill k slots.
    """
    L = honest_requests
    if k < 2:
        raise UnsupportedParameterError("outbound takeover closed form requires k >= 2")
    if k > L:
        raise InvalidParameterError("honest_requests must be at least k")
    if L > n_honest:
        raise InvalidParameterError("cannot make more honest requests than honest nodes")
    if n_attackers < 0:
        raise InvalidParameterError("n_attackers must be non-negative")
    log_den_y = _log_binom(L - 1, k - 1)
    total = 0.0
    for m in range(1, L - (k - 1) + 1):
        log_den_scores = _log_binom(n_attackers + n_honest, k + m - 1)
        inner = 0.0
        for j in range(m):
            log_term = (
                _log_binom(n_attackers, k + j)
                + _log_binom(n_honest, m - 1 - j)
                - log_den_scores
            )
            if log_term > -math.inf:
                inner += math.exp(log_term)
        log_weight = _log_binom(L - 1 - m, k - 2) - log_den_y
        if log_weight > -math.inf:
            total += inner * math.exp(log_weight)
    return min(total, 1.0)


def finite_outbound_cdf(x: float, n_honest: int, k: int, honest_requests: int) -> float:
    """CDF (1-(1-kx/L)^N) / (1-(1-k/L)^N) of the smallest accepted outbound score.

    First-moment heuristic for a network of ``n_honest`` nodes where every
    node sends ``honest_requests`` requests of which k are accepted.
    """
    L = honest_requests
    if not 0.0 <= x <= 1.0:
        raise InvalidParameterError("x must lie in [0, 1]")
    if k < 1 or k > L:
        raise InvalidParameterError("requires 1 <= k <= honest_requests")
    if n_honest < 1:
        raise InvalidParameterError("n_honest must be positive")
    ratio = k * x / L
    if ratio >= 1.0:
        num = 1.0
    else:
        num = -math.expm1(n_honest * math.log1p(-ratio))
    den = -math.expm1(n_honest * math.log1p(-(k / L))) if k < L else 1.0
    return num / den


def limiting_outbound_cdf(scaled_score: float, k: int, honest_requests: int) -> float:
    """Large-network limit 1 - exp(-x_bar * k/L) of the scaled outbound CDF.

    ``scaled_score`` is the raw score multiplied by the network size.
    """
    if scaled_score < 0.0:
        raise InvalidParameterError("scaled_score must be non-negative")
    if k < 1 or k > honest_requests:
        raise InvalidParameterError("requires 1 <= k <= honest_requests")
    return -math.expm1(-scaled_score * k / honest_requests)


def eclipse_lower_bound(attacker_ratio: float, k: int) -> float:
    """Rough eclipse probability (a/(1+a))^k for indistinguishable nodes.

    ``attacker_ratio`` is attacker nodes over honest nodes.
    """
    if attacker_ratio < 0.0:
        raise InvalidParameterError("attacker_ratio must be non-negative")
    if k < 1:
        raise InvalidParameterError("k must be at least 1")
    if math.isinf(attacker_ratio):
        return 1.0
    return (attacker_ratio / (1.0 + attacker_ratio)) ** k


def random_choice_eclipse_prob(n_honest: int, n_attackers: int, k: int) -> float:
    """Exact takeover probability C(N_A, k)/C(N + N_A, k) for uniform slot choice.

    The hypergeometric model behind :func:`eclipse_lower_bound`: k slots
    filled by distinct nodes drawn uniformly from the whole population.
    """
    if k < 1 or n_honest < 0 or n_attackers < 0:
        raise InvalidParameterError("counts must be non-negative and k >= 1")
    if n_attackers < k:
        return 0.0
    p = 1.0
    for j in range(k):
        p *= (n_attackers - j) / (n_honest + n_attackers - j)
    return p
