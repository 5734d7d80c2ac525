"""Peering scores and the eligibility threshold test.

A score is the first 8 bytes of ``SHA-256(a || b || salt)`` read as a
big-endian integer, normalised over 2**64 into [0, 1).  Scores are kept
as the raw 64-bit integer (``bits``) so that every comparison is exact;
the float ``value`` is for reporting only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import InvalidParameterError, SelfScoreError
from .identity import NodeId, Salt, digest

SCORE_SCALE = 1 << 64  # denominator of the dyadic score fraction


@dataclass(frozen=True, order=True)
class Score:
    """Exact dyadic score bits/2**64 in [0, 1)."""

    bits: int

    def __post_init__(self) -> None:
        if not 0 <= self.bits < SCORE_SCALE:
            raise InvalidParameterError("score bits out of 64-bit range")

    @property
    def value(self) -> float:
        return self.bits / SCORE_SCALE


def normalize(d: bytes) -> Score:
    """Digest to Score: first 8 bytes big-endian over 2**64."""
    return Score(int.from_bytes(d[:8], "big"))


def score_bits(a: NodeId, b: NodeId, salt_value: bytes) -> int:
    """Raw 64-bit score of hash(a || b || salt); hot-path form."""
    return int.from_bytes(digest(a + b + salt_value)[:8], "big")


def outbound_score(requester: NodeId, candidate: NodeId, requester_public_salt: Salt) -> Score:
    """Requester's preference score for a candidate under its public salt.

    Concatenation order is requester id, candidate id, salt; the score is
    not symmetric in any argument.
    """
    if requester == candidate:
        raise SelfScoreError("a node has no outbound score against itself")
    return Score(score_bits(requester, candidate, requester_public_salt.value))


def inbound_score(target: NodeId, requester: NodeId, target_private_salt: Salt) -> Score:
    """Target's acceptance score for a requester under its private salt.

    The target's own id comes first in the hashed concatenation.
    """
    if target == requester:
        raise SelfScoreError("a node has no inbound score against itself")
    return Score(score_bits(target, requester, target_private_salt.value))


def theta_test(s: Score, theta: float) -> bool:
    """Eligibility test: score at most theta, boundary inclusive.

    ``theta * 2**64`` is an exact float (power-of-two scaling), and
    Python compares int to float exactly, so the test is exact.
    """
    if not 0.0 <= theta <= 1.0:
        raise InvalidParameterError(f"theta must lie in [0, 1], got {theta}")
    return s.bits <= theta * SCORE_SCALE


def rank_candidates(
    self_id: NodeId, public_salt: Salt, candidates: Iterable[NodeId]
) -> list[tuple[NodeId, Score]]:
    """Candidates ordered by ascending outbound score, ties by node id.

    Deterministic for any input order; the ranking a node walks when
    requesting outbound connections.
    """
    ranked = []
    for peer in candidates:
        if peer == self_id:
            raise SelfScoreError("candidate set must not contain the ranking node")
        ranked.append((score_bits(self_id, peer, public_salt.value), peer))
    ranked.sort()
    return [(peer, Score(bits)) for bits, peer in ranked]
