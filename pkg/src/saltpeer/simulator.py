"""Deterministic discrete-event simulator for the neighbor-selection protocol.

Time is integer ticks.  Events are processed in (tick, sequence) order,
where the sequence number is assigned at scheduling time, so a given
configuration and seed reproduces every event and metric bit for bit.
Independent runs share no state and may execute concurrently.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass, field, replace

import numpy as np

from . import analytics
from .errors import ConfigurationError, InvalidParameterError, ProtocolError
from .identity import (
    DEFAULT_CHAIN_LENGTH,
    DEFAULT_M_MAX,
    SALT_LEN,
    NodeId,
    chain_create,
    new_identity,
    new_private_salt,
)
from .protocol import (
    PeeringDrop,
    PeeringRequest,
    PeeringResponse,
    PeeringState,
)
from .scoring import SCORE_SCALE, score_bits

SALT_PHASE_RANDOM = "random"
SALT_PHASE_SYNCHRONIZED = "synchronized"

SPAM_INBOUND = "spam_inbound"
PROTOCOL_FOLLOWING = "protocol_following"

# event codes; heap entries are (tick, seq, code, payload)
_QUERY = 0
_PUB_SALT = 1
_PRIV_SALT = 2
_DELIVER = 3
_SPAM = 4


@dataclass(frozen=True)
class SimConfig:
    """Knobs of one simulation run; ``validate`` rejects bad combinations."""

    n_nodes: int = 100
    k: int = 4
    salt_interval: int = 100  # per-node period between salt updates, in ticks
    query_delay: int = 1  # minimum ticks between a node's outbound requests
    theta: float = 1.0  # eligibility threshold; 1.0 disables the test
    latency: int = 1  # message delivery delay in ticks
    max_ticks: int = 5000
    rng_seed: int = 0
    salt_phase: str = SALT_PHASE_RANDOM
    chain_length: int = DEFAULT_CHAIN_LENGTH
    m_max: int = DEFAULT_M_MAX
    collect_epoch_scores: bool = False
    score_sample_warmup: int | None = None  # default: one salt interval
    log_events: bool = False

    def validate(self) -> None:
        if self.n_nodes < 2:
            raise ConfigurationError("need at least 2 nodes")
        if self.k < 1:
            raise ConfigurationError("k must be at least 1")
        if self.query_delay < 1:
            raise ConfigurationError("query delay must be at least 1 tick")
        if self.salt_interval < self.query_delay:
            raise ConfigurationError("salt interval must be at least the query delay")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigurationError("theta must lie in [0, 1]")
        if self.latency < 0:
            raise ConfigurationError("latency must be non-negative")
        if self.max_ticks < 1:
            raise ConfigurationError("max_ticks must be positive")
        if self.chain_length < 2:
            raise ConfigurationError("chain length must be at least 2")
        if self.m_max < 1:
            raise ConfigurationError("m_max must be at least 1")
        if self.salt_phase not in (SALT_PHASE_RANDOM, SALT_PHASE_SYNCHRONIZED):
            raise ConfigurationError(f"unknown salt phase {self.salt_phase!r}")


@dataclass(frozen=True)
class AttackSpec:
    """Attacker wiring for one simulation run."""

    n_attackers: int
    strategy: str  # SPAM_INBOUND | PROTOCOL_FOLLOWING
    victim_index: int = 0
    measure_theta_pressure: bool = False

    def validate(self, config: SimConfig) -> None:
        if self.n_attackers < 0:
            raise ConfigurationError("attacker count must be non-negative")
        if self.strategy not in (SPAM_INBOUND, PROTOCOL_FOLLOWING):
            raise ConfigurationError(f"unknown attack strategy {self.strategy!r}")
        if not 0 <= self.victim_index < config.n_nodes:
            raise ConfigurationError("victim index must name an honest node")


@dataclass
class MetricsSeries:
    """Per-tick topology metrics plus per-epoch minimum-score samples."""

    ticks: np.ndarray
    avg_neighbors: np.ndarray
    nodes_with_2k: np.ndarray
    drops: np.ndarray
    salt_updates: np.ndarray
    epoch_min_inbound: np.ndarray
    epoch_min_outbound: np.ndarray
    epoch_min_outbound_scaled: np.ndarray
    n_nodes: int
    k: int

    def time_avg_neighbors(self, start_tick: int = 0) -> float:
        mask = self.ticks >= start_tick
        return float(self.avg_neighbors[mask].mean())

    def frac_ticks_with_2k_count(self, at_least: int, start_tick: int = 0) -> float:
        mask = self.ticks >= start_tick
        return float((self.nodes_with_2k[mask] >= at_least).mean())

    def mean_drop_rate(self, start_tick: int = 0) -> float:
        mask = self.ticks >= start_tick
        return float(self.drops[mask].mean())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["tick", "avg_neighbors", "nodes_with_2k", "drops"])
            for i in range(len(self.ticks)):
                writer.writerow(
                    [
                        int(self.ticks[i]),
                        repr(float(self.avg_neighbors[i])),
                        int(self.nodes_with_2k[i]),
                        int(self.drops[i]),
                    ]
                )


class Simulation:
    """Event loop running one protocol instance per node.

    Build it, then :meth:`run` to the configured horizon, or step with
    :meth:`run_until` and inspect topology snapshots in between.
    """

    def __init__(self, config: SimConfig, attack: AttackSpec | None = None) -> None:
        config.validate()
        if attack is not None:
            attack.validate(config)
        self.config = config
        self.attack = attack
        self.now = 0

        rng = np.random.default_rng(config.rng_seed)
        self.rng = rng
        n_attackers = attack.n_attackers if attack else 0
        total = config.n_nodes + n_attackers
        seen: set[bytes] = set()
        ids = [new_identity(rng, seen) for _ in range(total)]
        self.ids = ids
        self.index = {nid: i for i, nid in enumerate(ids)}
        self.states: list[PeeringState] = []
        for i in range(total):
            chain = chain_create(rng.bytes(SALT_LEN), config.chain_length)
            state = PeeringState(
                ids[i],
                chain,
                new_private_salt(rng),
                config.k,
                rng,
                m_max=config.m_max,
                log_events=config.log_events,
            )
            for nid in ids:
                state.add_known_peer(nid)
            self.states.append(state)

        self.n_honest = config.n_nodes
        self.attacker_ids = frozenset(ids[config.n_nodes :])
        spam = attack is not None and attack.strategy == SPAM_INBOUND
        # spam nodes answer by script instead of running the protocol
        self.is_protocol_node = [True] * config.n_nodes + [not spam] * n_attackers
        self.victim_index = attack.victim_index if attack else -1

        self._heap: list[tuple[int, int, int, object]] = []
        self._seq = 0

        # O(1) per-tick metrics come from incrementally maintained counters
        self._deg_out = [0] * total
        self._deg_in = [0] * total
        self._total_degree = 0
        self._twok_count = 0
        self._drops_this_tick = 0
        self._salt_updates_this_tick = 0
        self._rows_tick: list[int] = []
        self._rows_avg: list[float] = []
        self._rows_twok: list[int] = []
        self._rows_drops: list[int] = []
        self._rows_salt_updates: list[int] = []
        self._min_inbound: list[float] = []
        self._min_outbound: list[float] = []
        warmup = config.score_sample_warmup
        self._score_warmup = config.salt_interval if warmup is None else warmup

        self.protocol_errors = 0
        self.first_eclipse_tick: int | None = None
        self.eclipsed_now = False
        # distinct (attacker id, presented salt) -> passed the theta test
        self.theta_pressure: dict[tuple[bytes, bytes], bool] = {}

        T = config.salt_interval
        for i in range(total):
            if config.salt_phase == SALT_PHASE_RANDOM:
                pub_phase = int(rng.integers(0, T))
                priv_phase = int(rng.integers(0, T))
            else:
                pub_phase = priv_phase = T
            self._schedule(pub_phase, _PUB_SALT, i)
            if self.is_protocol_node[i]:
                self._schedule(priv_phase, _PRIV_SALT, i)
        for i in range(total):
            if self.is_protocol_node[i]:
                self._wake_query(i, 0)
        if spam and n_attackers > 0:
            self._schedule(0, _SPAM, None)

    # -- scheduling -----------------------------------------------------

    def _schedule(self, at: int, code: int, payload) -> None:
        heapq.heappush(self._heap, (at, self._seq, code, payload))
        self._seq += 1

    def _wake_query(self, i: int, now: int) -> None:
        state = self.states[i]
        if state.query_scheduled or state.pending is not None:
            return
        if len(state.outbound) >= state.k and not state.replacement_seeking:
            return
        state.query_scheduled = True
        self._schedule(max(now, state.next_query_allowed), _QUERY, i)

    def _send(self, msg, now: int) -> None:
        if isinstance(msg, PeeringDrop):
            self._drops_this_tick += 1
        self._schedule(now + self.config.latency, _DELIVER, msg)

    # -- metrics upkeep ---------------------------------------------------

    def _refresh_degree(self, i: int) -> None:
        if i >= self.n_honest:
            return
        state = self.states[i]
        k = self.config.k
        out, inb = len(state.outbound), len(state.inbound)
        old_out, old_in = self._deg_out[i], self._deg_in[i]
        if out == old_out and inb == old_in:
            return
        self._total_degree += out + inb - old_out - old_in
        if (old_out == k and old_in == k) != (out == k and inb == k):
            self._twok_count += 1 if (out == k and inb == k) else -1
        self._deg_out[i], self._deg_in[i] = out, inb

    # -- event handlers ---------------------------------------------------

    def _on_query(self, i: int, now: int) -> None:
        state = self.states[i]
        state.query_scheduled = False
        if state.pending is not None:
            return
        target = state.next_outbound_target()
        if target is None:
            return
        state.next_query_allowed = now + self.config.query_delay
        self._send(state.build_request(target, now), now)

    def _on_deliver(self, msg, now: int) -> None:
        i = self.index.get(msg.to_id)
        if i is None:
            self.protocol_errors += 1
            return
        state = self.states[i]
        if not self.is_protocol_node[i]:
            # scripted spam attacker: peer with the victim, shun everyone else
            if isinstance(msg, PeeringRequest):
                accept = msg.from_id == self.states[self.victim_index].id
                self._send(PeeringResponse(state.id, msg.from_id, accept), now)
            return
        if isinstance(msg, PeeringRequest):
            if (
                self.attack is not None
                and self.attack.measure_theta_pressure
                and i == self.victim_index
                and msg.from_id in self.attacker_ids
            ):
                ob = score_bits(msg.from_id, state.id, msg.public_salt.value)
                key = (msg.from_id, msg.public_salt.value)
                self.theta_pressure[key] = ob <= self.config.theta * SCORE_SCALE
            try:
                resp, drop = state.handle_request(msg, self.config.theta, now)
            except ProtocolError:
                self.protocol_errors += 1
                return
            self._send(resp, now)
            if drop is not None:
                self._send(drop, now)
        elif isinstance(msg, PeeringResponse):
            drop = state.handle_response(msg, now)
            if drop is not None:
                self._send(drop, now)
            self._wake_query(i, now)
        elif isinstance(msg, PeeringDrop):
            state.handle_drop(msg, now)
            self._wake_query(i, now)
        else:
            self.protocol_errors += 1
            return
        self._refresh_degree(i)

    def _on_public_salt(self, i: int, now: int) -> None:
        state = self.states[i]
        if (
            self.config.collect_epoch_scores
            and i < self.n_honest
            and now >= self._score_warmup
            and state.outbound
        ):
            low = min(e.score.bits for e in state.outbound.values()) / SCORE_SCALE
            self._min_outbound.append(low)
        state.update_public_salt(now)
        self._salt_updates_this_tick += 1
        if self.is_protocol_node[i]:
            self._wake_query(i, now)
        self._schedule(now + self.config.salt_interval, _PUB_SALT, i)

    def _on_private_salt(self, i: int, now: int) -> None:
        state = self.states[i]
        if (
            self.config.collect_epoch_scores
            and i < self.n_honest
            and now >= self._score_warmup
            and state.inbound
        ):
            low = min(e.score.bits for e in state.inbound.values()) / SCORE_SCALE
            self._min_inbound.append(low)
        state.update_private_salt(now)
        self._salt_updates_this_tick += 1
        self._schedule(now + self.config.salt_interval, _PRIV_SALT, i)

    def _on_spam(self, now: int) -> None:
        victim_id = self.states[self.victim_index].id
        for i in range(self.n_honest, len(self.states)):
            req = self.states[i].build_request(victim_id, now, track_pending=False)
            self._send(req, now)
        self._schedule(now + self.config.query_delay, _SPAM, None)

    # -- main loop ----------------------------------------------------------

    def run_until(self, end_tick: int) -> None:
        """Process every tick in [now, end_tick); records one metrics row each."""
        if end_tick <= self.now:
            return
        heap = self._heap
        k = self.config.k
        victim = self.states[self.victim_index] if self.attack else None
        for t in range(self.now, end_tick):
            while heap and heap[0][0] == t:
                _, _, code, payload = heapq.heappop(heap)
                if code == _DELIVER:
                    self._on_deliver(payload, t)
                elif code == _QUERY:
                    self._on_query(payload, t)
                elif code == _PUB_SALT:
                    self._on_public_salt(payload, t)
                elif code == _PRIV_SALT:
                    self._on_private_salt(payload, t)
                else:
                    self._on_spam(t)
            self._rows_tick.append(t)
            self._rows_avg.append(self._total_degree / self.n_honest)
            self._rows_twok.append(self._twok_count)
            self._rows_drops.append(self._drops_this_tick)
            self._rows_salt_updates.append(self._salt_updates_this_tick)
            self._drops_this_tick = 0
            self._salt_updates_this_tick = 0
            if victim is not None:
                self.eclipsed_now = (
                    len(victim.outbound) == k
                    and len(victim.inbound) == k
                    and all(p in self.attacker_ids for p in victim.outbound)
                    and all(p in self.attacker_ids for p in victim.inbound)
                )
                if self.eclipsed_now and self.first_eclipse_tick is None:
                    self.first_eclipse_tick = t
        self.now = end_tick

    def metrics(self) -> MetricsSeries:
        n = self.config.n_nodes
        return MetricsSeries(
            ticks=np.asarray(self._rows_tick, dtype=np.int64),
            avg_neighbors=np.asarray(self._rows_avg, dtype=np.float64),
            nodes_with_2k=np.asarray(self._rows_twok, dtype=np.int64),
            drops=np.asarray(self._rows_drops, dtype=np.int64),
            salt_updates=np.asarray(self._rows_salt_updates, dtype=np.int64),
            epoch_min_inbound=np.asarray(self._min_inbound, dtype=np.float64),
            epoch_min_outbound=np.asarray(self._min_outbound, dtype=np.float64),
            epoch_min_outbound_scaled=np.asarray(self._min_outbound, dtype=np.float64) * n,
            n_nodes=n,
            k=self.config.k,
        )

    def run(self) -> MetricsSeries:
        self.run_until(self.config.max_ticks)
        return self.metrics()


def run(config: SimConfig, attack: AttackSpec | None = None) -> MetricsSeries:
    """Run a full simulation and return its metrics."""
    return Simulation(config, attack).run()


def snapshot_topology(sim: Simulation, tick: int) -> list[tuple[NodeId, NodeId, str, float]]:
    """Directed edge list (owner, peer, direction, score) after the given tick.

    Advances the simulation if needed; rewinding is not possible.
    """
    if tick < 0:
        raise InvalidParameterError("tick must be non-negative")
    if tick + 1 < sim.now:
        raise InvalidParameterError(f"simulation already at tick {sim.now}; cannot rewind")
    sim.run_until(tick + 1)
    edges = []
    for state in sim.states:
        for entry in state.outbound.values():
            edges.append((state.id, entry.peer, "outbound", entry.score.value))
        for entry in state.inbound.values():
            edges.append((state.id, entry.peer, "inbound", entry.score.value))
    edges.sort(key=lambda e: (e[0], e[2], e[1]))
    return edges


@dataclass
class ScoreDistributionResult:
    """Per-epoch minimum-score samples with their analytic reference curves.

    The reference band spans the request counts ``k`` (every acceptance
    was forced) and ``4k`` (plentiful competition).
    """

    n_nodes: int
    k: int
    min_inbound: np.ndarray  # sorted raw scores
    min_outbound_scaled: np.ndarray  # sorted, scaled by network size

    @staticmethod
    def empirical_cdf(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
        if len(samples) == 0:
            raise InvalidParameterError("no samples collected; run more epochs")
        return np.searchsorted(samples, grid, side="right") / len(samples)

    def inbound_table(self, grid: np.ndarray) -> list[tuple[float, float, float, float]]:
        emp = self.empirical_cdf(self.min_inbound, grid)
        return [
            (
                float(x),
                float(e),
                analytics.min_score_cdf(float(x), self.k),
                analytics.min_score_cdf(float(x), 4 * self.k),
            )
            for x, e in zip(grid, emp)
        ]

    def outbound_table(self, scaled_grid: np.ndarray) -> list[tuple[float, float, float, float]]:
        emp = self.empirical_cdf(self.min_outbound_scaled, scaled_grid)
        return [
            (
                float(x),
                float(e),
                analytics.limiting_outbound_cdf(float(x), self.k, self.k),
                analytics.limiting_outbound_cdf(float(x), self.k, 4 * self.k),
            )
            for x, e in zip(scaled_grid, emp)
        ]


def score_distribution_experiment(config: SimConfig, epochs: int) -> ScoreDistributionResult:
    """Collect each node's minimum neighbor scores just before its salt updates.

    Runs for ``epochs + 1`` salt intervals, discarding every node's first
    interval as warmup, and returns the samples with analytic bands.
    """
    if epochs < 1:
        raise InvalidParameterError("epochs must be positive")
    cfg = replace(
        config,
        max_ticks=config.salt_interval * (epochs + 1),
        collect_epoch_scores=True,
        score_sample_warmup=config.salt_interval,
    )
    sim = Simulation(cfg)
    metrics = sim.run()
    return ScoreDistributionResult(
        n_nodes=cfg.n_nodes,
        k=cfg.k,
        min_inbound=np.sort(metrics.epoch_min_inbound),
        min_outbound_scaled=np.sort(metrics.epoch_min_outbound_scaled),
    )


def write_cdf_csv(path, rows: list[tuple[float, float, float, float]]) -> None:
    """CDF table rows: score, empirical_cdf, analytic_L_eq_k, analytic_L_eq_4k."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["score", "empirical_cdf", "analytic_L_eq_k", "analytic_L_eq_4k"])
        for row in rows:
            writer.writerow([repr(v) for v in row])


def write_topology_csv(path, edges: list[tuple[NodeId, NodeId, str, float]]) -> None:
    """Edge rows: owner, peer, direction, score (ids hex-encoded)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["owner", "peer", "direction", "score"])
        for owner, peer, direction, score in edges:
            writer.writerow([owner.hex(), peer.hex(), direction, repr(score)])
