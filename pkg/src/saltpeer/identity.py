"""Node identities, hash-chain public salts, and chain-linkage verification.

Every identifier and salt is an opaque 32-byte value.  The digest is
SHA-256 over raw bytes.  Randomness always comes from a caller-supplied
``numpy.random.Generator``; the shipped entry points use PCG64
(``numpy.random.default_rng``), so every value reproduces from a seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ChainExhaustedError, InvalidParameterError, VerificationRefusedError

SALT_LEN = 32
DEFAULT_CHAIN_LENGTH = 64
# Cap on how many chained updates a verifier will hash through in one
# check; bounds per-request work.
DEFAULT_M_MAX = 16

NodeId = bytes  # 32 bytes; equality and ordering are plain byte order


def digest(data: bytes) -> bytes:
    """SHA-256 of raw bytes, 32-byte output."""
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class Salt:
    """A 32-byte salt value, public (chain element) or private (random)."""

    value: bytes
    kind: str  # "public" | "private"

    def __post_init__(self) -> None:
        if len(self.value) != SALT_LEN:
            raise InvalidParameterError(f"salt must be {SALT_LEN} bytes, got {len(self.value)}")
        if self.kind not in ("public", "private"):
            raise InvalidParameterError(f"unknown salt kind {self.kind!r}")


@dataclass
class HashChain:
    """One-way chain s[t+1] = H(s[t]); elements revealed from the end backwards.

    The element at ``cursor`` is the currently published public salt.  The
    cursor starts at the last element and only ever decreases.
    """

    elements: list[bytes] = field(repr=False)
    cursor: int

    @property
    def length(self) -> int:
        return len(self.elements)

    def current(self) -> Salt:
        return Salt(self.elements[self.cursor], "public")


def new_identity(rng: np.random.Generator, seen: set[bytes] | None = None) -> NodeId:
    """Draw a fresh 32-byte node id.

    When ``seen`` is given, redraws on collision and records the result,
    guaranteeing uniqueness within one simulation.
    """
    nid = rng.bytes(SALT_LEN)
    if seen is not None:
        while nid in seen:
            nid = rng.bytes(SALT_LEN)
        seen.add(nid)
    return nid


def new_private_salt(rng: np.random.Generator) -> Salt:
    """Fresh random private salt."""
    return Salt(rng.bytes(SALT_LEN), "private")


def chain_create(seed: bytes, length: int = DEFAULT_CHAIN_LENGTH) -> HashChain:
    """Build a hash chain from ``seed`` with ``length`` elements.

    The published starting salt is the last element, so earlier elements
    stay secret until revealed by :func:`chain_advance`.
    """
    if length < 2:
        raise InvalidParameterError(f"chain length must be >= 2, got {length}")
    if len(seed) != SALT_LEN:
        raise InvalidParameterError(f"chain seed must be {SALT_LEN} bytes")
    elements = [seed]
    for _ in range(length - 1):
        elements.append(digest(elements[-1]))
    return HashChain(elements=elements, cursor=length - 1)


def chain_advance(chain: HashChain) -> Salt:
    """Reveal the preceding chain element as the new public salt."""
    if chain.cursor <= 0:
        raise ChainExhaustedError("hash chain exhausted; provision a new chain")
    chain.cursor -= 1
    return chain.current()


def verify_salt(claimed: Salt, last_known: Salt, updates: int, m_max: int = DEFAULT_M_MAX) -> bool:
    """Check that hashing ``claimed`` ``updates`` times yields ``last_known``.

    ``updates`` of zero means plain byte equality.  Raises
    :class:`VerificationRefusedError` (not ``False``) when ``updates``
    exceeds ``m_max``, since the verifier will not do unbounded work.
    """
    if updates < 0:
        raise InvalidParameterError("update count must be non-negative")
    if updates > m_max:
        raise VerificationRefusedError(f"claimed {updates} updates exceeds verifier cap {m_max}")
    value = claimed.value
    for _ in range(updates):
        value = digest(value)
    return value == last_known.value
