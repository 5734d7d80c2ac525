"""Per-node neighbor-selection state machine.

A node requests outbound connections in ascending outbound-score order
and accepts inbound requests that verify, pass the threshold test, and
beat (or fit under) its current worst inbound score.  Public salts come
from a committed hash chain so receivers can verify that a requester's
salt history follows the protocol; private salts are fresh randomness.

Each state is single-owner: exactly one event is applied at a time (the
simulator serialises events), so no handler takes locks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChainExhaustedError, ProtocolError, VerificationRefusedError
from .identity import (
    DEFAULT_M_MAX,
    SALT_LEN,
    HashChain,
    NodeId,
    Salt,
    chain_advance,
    chain_create,
    new_private_salt,
    verify_salt,
)
from .scoring import SCORE_SCALE, Score, score_bits

OUTBOUND = "outbound"
INBOUND = "inbound"


@dataclass(frozen=True)
class PeeringRequest:
    """Ask ``to_id`` for a connection, presenting the requester's public salt.

    ``updates_since_last`` counts the requester's salt updates since it
    last presented itself to this peer; ``chain_generation`` increments
    each time the requester had to provision a fresh chain, telling the
    receiver to treat it as newly joined.
    """

    from_id: NodeId
    to_id: NodeId
    public_salt: Salt
    updates_since_last: int
    chain_generation: int = 0


@dataclass(frozen=True)
class PeeringResponse:
    from_id: NodeId
    to_id: NodeId
    accepted: bool


@dataclass(frozen=True)
class PeeringDrop:
    from_id: NodeId
    to_id: NodeId


Message = PeeringRequest | PeeringResponse | PeeringDrop

_KIND_REQUEST = 1
_KIND_RESPONSE = 2
_KIND_DROP = 3


def _write_varint(n: int) -> bytes:
    if n < 0:
        raise ProtocolError("varint must be non-negative")
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise ProtocolError("truncated varint")
        byte = data[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise ProtocolError("varint too long")


def encode_message(msg: Message) -> bytes:
    """Canonical byte layout: kind tag, 32-byte ids, then the payload."""
    if isinstance(msg, PeeringRequest):
        return (
            bytes([_KIND_REQUEST])
            + msg.from_id
            + msg.to_id
            + msg.public_salt.value
            + _write_varint(msg.updates_since_last)
            + _write_varint(msg.chain_generation)
        )
    if isinstance(msg, PeeringResponse):
        return bytes([_KIND_RESPONSE]) + msg.from_id + msg.to_id + bytes([int(msg.accepted)])
    if isinstance(msg, PeeringDrop):
        return bytes([_KIND_DROP]) + msg.from_id + msg.to_id
    raise ProtocolError(f"unknown message type {type(msg).__name__}")


def decode_message(data: bytes) -> Message:
    """Inverse of :func:`encode_message`; raises ProtocolError on malformed input."""
    if len(data) < 1 + 2 * SALT_LEN:
        raise ProtocolError("message too short")
    kind = data[0]
    from_id = data[1 : 1 + SALT_LEN]
    to_id = data[1 + SALT_LEN : 1 + 2 * SALT_LEN]
    pos = 1 + 2 * SALT_LEN
    if kind == _KIND_REQUEST:
        if len(data) < pos + SALT_LEN:
            raise ProtocolError("request missing salt")
        salt = Salt(data[pos : pos + SALT_LEN], "public")
        updates, pos = _read_varint(data, pos + SALT_LEN)
        generation, pos = _read_varint(data, pos)
        if pos != len(data):
            raise ProtocolError("trailing bytes after request")
        return PeeringRequest(from_id, to_id, salt, updates, generation)
    if kind == _KIND_RESPONSE:
        if len(data) != pos + 1 or data[pos] not in (0, 1):
            raise ProtocolError("malformed response payload")
        return PeeringResponse(from_id, to_id, bool(data[pos]))
    if kind == _KIND_DROP:
        if len(data) != pos:
            raise ProtocolError("trailing bytes after drop")
        return PeeringDrop(from_id, to_id)
    raise ProtocolError(f"unknown message kind {kind}")


@dataclass(slots=True)
class NeighborEntry:
    peer: NodeId
    score: Score
    direction: str  # OUTBOUND | INBOUND
    established_at: int


class PeeringState:
    """Full protocol state of one node.

    ``outbound``/``inbound`` map peer id to :class:`NeighborEntry`; the
    two key sets are disjoint and each is capped at ``k``.  At most one
    outbound request is in flight at a time.
    """

    __slots__ = (
        "id",
        "k",
        "m_max",
        "chain_length",
        "rng",
        "chain",
        "generation",
        "public_salt",
        "private_salt",
        "outbound",
        "inbound",
        "known_peers",
        "presented",
        "ranked",
        "request_cursor",
        "tried",
        "replacement_seeking",
        "pending",
        "next_query_allowed",
        "query_scheduled",
        "counters",
        "log",
    )

    def __init__(
        self,
        node_id: NodeId,
        chain: HashChain,
        private_salt: Salt,
        k: int,
        rng: np.random.Generator,
        m_max: int = DEFAULT_M_MAX,
        log_events: bool = False,
    ) -> None:
        self.id = node_id
        self.k = k
        self.m_max = m_max
        self.chain_length = chain.length
        self.rng = rng
        self.chain = chain
        self.generation = 0
        self.public_salt = chain.current()
        self.private_salt = private_salt
        self.outbound: dict[NodeId, NeighborEntry] = {}
        self.inbound: dict[NodeId, NeighborEntry] = {}
        # verifier-side store: peer id -> (chain generation, last verified salt)
        self.known_peers: dict[NodeId, tuple[int, Salt] | None] = {}
        # requester-side store: peer id -> (generation, chain cursor) last presented
        self.presented: dict[NodeId, tuple[int, int]] = {}
        self.ranked: list[tuple[int, NodeId]] | None = None
        self.request_cursor = 0
        self.tried: set[NodeId] = set()
        self.replacement_seeking = False
        self.pending: NodeId | None = None
        self.next_query_allowed = 0
        self.query_scheduled = False
        self.counters: dict[str, int] = {}
        self.log: list[tuple] | None = [] if log_events else None

    # -- bookkeeping ---------------------------------------------------

    def add_known_peer(self, peer: NodeId) -> None:
        if peer != self.id and peer not in self.known_peers:
            self.known_peers[peer] = None
            self.ranked = None

    def _count(self, key: str) -> None:
        self.counters[key] = self.counters.get(key, 0) + 1

    def _log(self, *event) -> None:
        if self.log is not None:
            self.log.append(event)

    def neighbor_count(self) -> int:
        return len(self.outbound) + len(self.inbound)

    def _ensure_ranked(self) -> list[tuple[int, NodeId]]:
        if self.ranked is None:
            salt = self.public_salt.value
            me = self.id
            ranked = [(score_bits(me, peer, salt), peer) for peer in self.known_peers]
            ranked.sort()
            self.ranked = ranked
            self.request_cursor = 0
        return self.ranked

    def _worst_outbound(self) -> NeighborEntry:
        return max(self.outbound.values(), key=lambda e: (e.score.bits, e.peer))

    def _worst_inbound(self) -> NeighborEntry:
        return max(self.inbound.values(), key=lambda e: (e.score.bits, e.peer))

    # -- outbound side ---------------------------------------------------

    def next_outbound_target(self) -> NodeId | None:
        """Best candidate to request next, or None when there is nothing to do.

        Below capacity: the lowest-scored known peer not yet a neighbor
        and not already tried this salt epoch.  At capacity after a salt
        update: the lowest-scored non-neighbor that strictly improves on
        the current worst outbound score; the ascending walk stops as
        soon as no candidate can improve.
        """
        if self.pending is not None:
            return None
        filling = len(self.outbound) < self.k
        if not filling and not self.replacement_seeking:
            return None
        ranked = self._ensure_ranked()
        worst_bits = None if filling else self._worst_outbound().score.bits
        cursor = self.request_cursor
        while cursor < len(ranked):
            bits, peer = ranked[cursor]
            if peer in self.tried:
                # compact the walked prefix; tried peers stay tried all epoch
                if cursor == self.request_cursor:
                    self.request_cursor += 1
                cursor += 1
                continue
            if peer in self.outbound or peer in self.inbound:
                cursor += 1
                continue
            if worst_bits is not None and bits >= worst_bits:
                return None
            return peer
        return None

    def build_request(self, target: NodeId, now: int, track_pending: bool = True) -> PeeringRequest:
        """Issue a request to ``target``; normally marks it as the in-flight one.

        ``track_pending=False`` builds a fire-and-forget request (the spam
        strategy), keeping the salt-presentation bookkeeping but skipping
        the one-in-flight rule and this epoch's tried set.
        """
        if track_pending and self.pending is not None:
            raise ProtocolError("one outbound request may be in flight at a time")
        updates = 0
        prev = self.presented.get(target)
        if prev is not None and prev[0] == self.generation:
            updates = prev[1] - self.chain.cursor
        if updates <= self.m_max:
            # beyond the verifier cap the receiver keeps its old record,
            # so remembering this presentation would desynchronise us
            self.presented[target] = (self.generation, self.chain.cursor)
        if track_pending:
            self.pending = target
            self.tried.add(target)
        return PeeringRequest(self.id, target, self.public_salt, updates, self.generation)

    def handle_response(self, resp: PeeringResponse, now: int = 0) -> PeeringDrop | None:
        """Apply a response to the in-flight request; may emit a drop.

        An accepted replacement evicts the worst outbound neighbor.  If a
        mid-flight salt change (or a crossing request from the same peer)
        made the acceptance useless, the fresh connection is dropped
        straight back so both endpoints converge.
        """
        if resp.to_id != self.id:
            raise ProtocolError("response delivered to the wrong node")
        if self.pending is None or resp.from_id != self.pending:
            self._count("responses_ignored")
            return None
        self.pending = None
        peer = resp.from_id
        if not resp.accepted:
            self._count("requests_rejected")
            return None
        if peer in self.outbound or peer in self.inbound:
            # crossed with the peer's own request; cancel the extra edge
            self._count("response_conflicts")
            return PeeringDrop(self.id, peer)
        bits = score_bits(self.id, peer, self.public_salt.value)
        entry = NeighborEntry(peer, Score(bits), OUTBOUND, now)
        if len(self.outbound) < self.k:
            self.outbound[peer] = entry
            self._log("out_add", now, peer, bits)
            if len(self.outbound) == self.k:
                # the set was (re)filled after the last salt update, so the
                # replacement campaign for that update is over
                self.replacement_seeking = False
            return None
        worst = self._worst_outbound()
        if bits < worst.score.bits:
            del self.outbound[worst.peer]
            self.outbound[peer] = entry
            # the swap re-fills the set, which closes the replacement
            # window opened by the last salt update
            self.replacement_seeking = False
            self._log("out_replace", now, peer, bits, worst.peer)
            return PeeringDrop(self.id, worst.peer)
        # salt changed while the request was in flight; no longer an improvement
        self._count("stale_accepts")
        return PeeringDrop(self.id, peer)

    # -- inbound side ----------------------------------------------------

    def _verify_request(self, req: PeeringRequest) -> bool:
        record = self.known_peers.get(req.from_id)
        if record is None:
            # first contact (or id-only knowledge): trust the presented salt
            self.known_peers[req.from_id] = (req.chain_generation, req.public_salt)
            return True
        generation, last_salt = record
        if req.chain_generation > generation:
            # fresh chain after exhaustion: treat as newly joined
            self.known_peers[req.from_id] = (req.chain_generation, req.public_salt)
            return True
        if req.chain_generation < generation:
            return False
        try:
            ok = verify_salt(req.public_salt, last_salt, req.updates_since_last, self.m_max)
        except VerificationRefusedError:
            self._count("verify_refused")
            return False
        if ok:
            self.known_peers[req.from_id] = (generation, req.public_salt)
        return ok

    def handle_request(
        self, req: PeeringRequest, theta: float, now: int = 0
    ) -> tuple[PeeringResponse, PeeringDrop | None]:
        """Decide an incoming request; returns the response and maybe a drop.

        Rejects on failed/refused salt verification, a failed theta test,
        or an existing connection in either direction.  Otherwise accepts
        while below capacity, or by evicting the worst-scored inbound
        neighbor when the newcomer beats it.
        """
        if req.to_id != self.id:
            raise ProtocolError("request delivered to the wrong node")
        if req.from_id == self.id:
            raise ProtocolError("self-request")
        reject = PeeringResponse(self.id, req.from_id, False)
        if not self._verify_request(req):
            self._count("rejected_verify")
            return reject, None
        ob_bits = score_bits(req.from_id, self.id, req.public_salt.value)
        if ob_bits > theta * SCORE_SCALE:
            self._count("rejected_theta")
            return reject, None
        if req.from_id in self.outbound or req.from_id in self.inbound:
            self._count("rejected_duplicate")
            return reject, None
        bits = score_bits(self.id, req.from_id, self.private_salt.value)
        self._log("eligible_req", now, req.from_id, bits, ob_bits)
        if len(self.inbound) < self.k:
            self.inbound[req.from_id] = NeighborEntry(req.from_id, Score(bits), INBOUND, now)
            self._log("in_add", now, req.from_id, bits)
            return PeeringResponse(self.id, req.from_id, True), None
        worst = self._worst_inbound()
        if bits < worst.score.bits:
            del self.inbound[worst.peer]
            self.inbound[req.from_id] = NeighborEntry(req.from_id, Score(bits), INBOUND, now)
            self._log("in_replace", now, req.from_id, bits, worst.peer)
            return PeeringResponse(self.id, req.from_id, True), PeeringDrop(self.id, worst.peer)
        self._count("rejected_worse_score")
        return reject, None

    def handle_drop(self, drop: PeeringDrop, now: int = 0) -> None:
        """Remove the dropped neighbor, whichever direction it was on."""
        if drop.to_id != self.id:
            raise ProtocolError("drop delivered to the wrong node")
        peer = drop.from_id
        if peer in self.outbound:
            del self.outbound[peer]
            self._log("out_dropped", now, peer)
        elif peer in self.inbound:
            del self.inbound[peer]
            self._log("in_withdrawn", now, peer)
        else:
            self._count("drops_noop")

    # -- salt updates ------------------------------------------------------

    def update_public_salt(self, now: int = 0) -> None:
        """Advance the chain (or provision a fresh one) and start reorganising.

        Existing outbound neighbors are kept but re-scored under the new
        salt; the candidate ranking resets and replacement seeking turns
        on, so better-scored peers can displace them as they accept.
        """
        try:
            self.public_salt = chain_advance(self.chain)
        except ChainExhaustedError:
            self.chain = chain_create(self.rng.bytes(SALT_LEN), self.chain_length)
            self.generation += 1
            self.public_salt = self.chain.current()
            self._count("chain_resets")
        salt = self.public_salt.value
        for entry in self.outbound.values():
            entry.score = Score(score_bits(self.id, entry.peer, salt))
        self.ranked = None
        self.request_cursor = 0
        self.tried.clear()
        self.replacement_seeking = True
        self._log("public_salt", now, {p: e.score.bits for p, e in self.outbound.items()})

    def update_private_salt(self, now: int = 0) -> None:
        """Refresh the private salt and re-score the kept inbound neighbors.

        The set itself does not change; future acceptance comparisons use
        the new scores, so the worst inbound neighbor is re-drawn.
        """
        self.private_salt = new_private_salt(self.rng)
        salt = self.private_salt.value
        for entry in self.inbound.values():
            entry.score = Score(score_bits(self.id, entry.peer, salt))
        self._log("private_salt", now, {p: e.score.bits for p, e in self.inbound.items()})
