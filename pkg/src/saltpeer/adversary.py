"""Attacker models: Monte-Carlo takeover estimates and full eclipse runs.

The Monte-Carlo estimators draw i.i.d. uniform scores exactly as the
formulas in :mod:`saltpeer.analytics` model them, so each pair forms an
independent cross-check.  Trials are vectorised with numpy and chunked
to bound memory.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, InvalidParameterError
from .simulator import (
    PROTOCOL_FOLLOWING,
    SPAM_INBOUND,
    AttackSpec,
    SimConfig,
    Simulation,
)

_CHUNK = 100_000


@dataclass(frozen=True)
class MCResult:
    """A Monte-Carlo success fraction with its binomial standard error."""

    estimate: float
    std_err: float
    trials: int


def _finish(successes: int, trials: int) -> MCResult:
    p = successes / trials
    return MCResult(p, float(np.sqrt(p * (1.0 - p) / trials)), trials)


def mc_inbound_takeover(
    n_attackers: int, honest_requests: int, k: int, trials: int, rng: np.random.Generator
) -> MCResult:
    """Estimate the chance that attackers hold all k inbound slots.

    Per trial: draw i.i.d. uniform scores for every attacker and honest
    request; success when the k smallest all belong to the attacker,
    i.e. the attacker's k-th smallest undercuts the honest minimum.
    """
    if k < 1 or n_attackers < 0 or honest_requests < 0:
        raise InvalidParameterError("need k >= 1 and non-negative counts")
    if trials < 1:
        raise InvalidParameterError("trials must be positive")
    if n_attackers < k:
        return MCResult(0.0, 0.0, trials)
    if honest_requests == 0:
        return MCResult(1.0, 0.0, trials)
    successes = 0
    done = 0
    while done < trials:
        n = min(_CHUNK, trials - done)
        attacker = rng.random((n, n_attackers))
        honest = rng.random((n, honest_requests))
        kth_attacker = np.partition(attacker, k - 1, axis=1)[:, k - 1]
        successes += int((kth_attacker < honest.min(axis=1)).sum())
        done += n
    return _finish(successes, trials)


def mc_outbound_takeover(
    n_attackers: int,
    n_honest: int,
    honest_requests: int,
    k: int,
    trials: int,
    rng: np.random.Generator,
) -> MCResult:
    """Estimate the chance that attackers overtake all k outbound slots.

    Per trial: draw uniform outbound scores for the honest population and
    the attacker, sample which k of the victim's ``honest_requests``
    requests were the accepted ones (k-1 positions without replacement
    from the earlier requests, plus the final one), and succeed when the
    attacker's k-th smallest score beats the smallest accepted honest
    score.
    """
    L = honest_requests
    if k < 2:
        raise InvalidParameterError("the outbound model requires k >= 2")
    if k > L:
        raise InvalidParameterError("honest_requests must be at least k")
    if L > n_honest:
        raise InvalidParameterError("cannot make more honest requests than honest nodes")
    if n_attackers < 0:
        raise InvalidParameterError("n_attackers must be non-negative")
    if trials < 1:
        raise InvalidParameterError("trials must be positive")
    if n_attackers < k:
        return MCResult(0.0, 0.0, trials)
    successes = 0
    done = 0
    while done < trials:
        n = min(_CHUNK, trials - done)
        honest = np.sort(rng.random((n, n_honest)), axis=1)
        attacker = rng.random((n, n_attackers))
        kth_attacker = np.partition(attacker, k - 1, axis=1)[:, k - 1]
        # random (k-1)-subset of {1..L-1} via the smallest of L-1 uniform keys
        keys = rng.random((n, L - 1))
        chosen = np.argpartition(keys, k - 2, axis=1)[:, : k - 1]
        first_accepted = chosen.min(axis=1) + 1  # 1-based request position
        lowest_accepted = honest[np.arange(n), first_accepted - 1]
        successes += int((kth_attacker < lowest_accepted).sum())
        done += n
    return _finish(successes, trials)


def mc_random_choice_takeover(
    n_honest: int, n_attackers: int, k: int, trials: int, rng: np.random.Generator
) -> MCResult:
    """Estimate takeover odds when k slots are uniform draws without replacement.

    The sampling model behind the rough eclipse bound: with every node
    indistinguishable, the number of attacker-held slots is
    hypergeometric, and success means all k drawn are attackers.
    """
    if k < 1 or n_honest < 0 or n_attackers < 0:
        raise InvalidParameterError("need k >= 1 and non-negative counts")
    if k > n_honest + n_attackers:
        raise InvalidParameterError("cannot fill more slots than there are nodes")
    if trials < 1:
        raise InvalidParameterError("trials must be positive")
    successes = 0
    done = 0
    while done < trials:
        n = min(_CHUNK * 10, trials - done)
        draws = rng.hypergeometric(n_attackers, n_honest, k, size=n)
        successes += int((draws == k).sum())
        done += n
    return _finish(successes, trials)


@dataclass(frozen=True)
class AttackConfig:
    """An eclipse experiment: attacker shape plus the embedded simulation."""

    sim: SimConfig
    n_attackers: int
    strategy: str = SPAM_INBOUND
    trials: int = 1
    victim_index: int = 0
    measure_theta_pressure: bool = False

    def validate(self) -> None:
        self.sim.validate()
        if self.trials < 1:
            raise ConfigurationError("trials must be positive")
        AttackSpec(self.n_attackers, self.strategy, self.victim_index).validate(self.sim)


@dataclass
class EclipseStats:
    """Aggregate results of repeated eclipse trials."""

    n_attackers: int
    strategy: str
    trials: int
    times_to_eclipse: list[int | None]
    fraction_ever: float
    fraction_final: float
    theta_pass_rate: float | None
    theta_pass_samples: int

    @property
    def eclipse_fraction(self) -> float:
        return self.fraction_ever


def run_eclipse_simulation(attack: AttackConfig) -> EclipseStats:
    """Run full-protocol eclipse trials against one victim.

    Spam attackers request the victim every query interval with all of
    their identities (each gated by the victim's eligibility test on its
    genuine scores) and accept only the victim; protocol-following
    attackers behave exactly like honest nodes.  A trial counts as an
    eclipse once every one of the victim's 2k connections is
    attacker-held at a tick boundary.
    """
    attack.validate()
    trial_seeds = np.random.SeedSequence(attack.sim.rng_seed).generate_state(attack.trials)
    spec = AttackSpec(
        attack.n_attackers,
        attack.strategy,
        attack.victim_index,
        attack.measure_theta_pressure,
    )
    times: list[int | None] = []
    final_count = 0
    passes = 0
    pressure_samples = 0
    for trial in range(attack.trials):
        cfg = replace(attack.sim, rng_seed=int(trial_seeds[trial]))
        sim = Simulation(cfg, spec)
        sim.run()
        times.append(sim.first_eclipse_tick)
        if sim.eclipsed_now:
            final_count += 1
        if attack.measure_theta_pressure:
            passes += sum(sim.theta_pressure.values())
            pressure_samples += len(sim.theta_pressure)
    ever = sum(1 for t in times if t is not None)
    return EclipseStats(
        n_attackers=attack.n_attackers,
        strategy=attack.strategy,
        trials=attack.trials,
        times_to_eclipse=times,
        fraction_ever=ever / attack.trials,
        fraction_final=final_count / attack.trials,
        theta_pass_rate=(passes / pressure_samples) if pressure_samples else None,
        theta_pass_samples=pressure_samples,
    )
