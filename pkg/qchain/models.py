"""Data structures for qchain.

Leaf module -- imports only qchain.errors.  Types that carry numpy arrays
(StateVector, QKDSession, CorrelatedLists) live next to their operations.
"""
from __future__ import annotations

import dataclasses
from collections.abc import Mapping
from dataclasses import dataclass, field
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from typing import Any

from .errors import AdversaryError, ChainError, NetworkError, QKDError

_U64_MAX = 2**64 - 1


# =============================================================================
# Chain core
# =============================================================================


class Hash256(bytes):
    """A 32-byte SHA-256 digest."""

    __slots__ = ()

    def __new__(cls, value: bytes | bytearray) -> Hash256:
        if len(value) != 32:
            raise ChainError(f"Hash256 needs exactly 32 bytes, got {len(value)}")
        return super().__new__(cls, value)

    @classmethod
    def zero(cls) -> Hash256:
        return cls(bytes(32))

    @classmethod
    def from_hex(cls, text: str) -> Hash256:
        return cls(bytes.fromhex(text))

    def __repr__(self) -> str:
        return f"Hash256({self.hex()})"


def _check_u64(name: str, value: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= _U64_MAX:
        raise ChainError(f"{name} must be an unsigned 64-bit integer, got {value!r}")


@dataclass(frozen=True, slots=True)
class BlockHeader:
    """Header fields; the canonical encoding lives in chain.encode_header."""

    prev_hash: Hash256
    merkle_root: Hash256
    nonce: int
    difficulty: int
    height: int
    timestamp: int

    def __post_init__(self) -> None:
        for name in ("prev_hash", "merkle_root"):
            value = getattr(self, name)
            if not isinstance(value, Hash256):
                object.__setattr__(self, name, Hash256(value))
        _check_u64("nonce", self.nonce)
        _check_u64("height", self.height)
        _check_u64("timestamp", self.timestamp)
        if not isinstance(self.difficulty, int) or not 0 <= self.difficulty <= 255:
            raise ChainError(f"difficulty must be in 0..255, got {self.difficulty!r}")

    def with_nonce(self, nonce: int) -> BlockHeader:
        return dataclasses.replace(self, nonce=nonce)


@dataclass(frozen=True, slots=True)
class Block:
    header: BlockHeader
    transactions: tuple[bytes, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "transactions", tuple(bytes(tx) for tx in self.transactions))


@dataclass(frozen=True, slots=True)
class Chain:
    blocks: tuple[Block, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(self.blocks))

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]


class Side(StrEnum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True, slots=True)
class MerkleProof:
    leaf_index: int
    siblings: tuple[tuple[Hash256, Side], ...]


class ViolationReason(StrEnum):
    GENESIS = "genesis-form"
    HEIGHT = "height-mismatch"
    LINK = "link-mismatch"
    MERKLE = "merkle-mismatch"
    DIFFICULTY = "difficulty-mismatch"
    POW = "pow-failure"


@dataclass(frozen=True, slots=True)
class ChainViolation:
    """First failing block index and why; returned, never raised."""

    index: int
    reason: ViolationReason


# =============================================================================
# Quantum simulation
# =============================================================================


@dataclass(frozen=True, slots=True)
class GroverPlan:
    n: int
    marked: int
    iterations: int
    theta: float

    @property
    def search_space(self) -> int:
        return 2**self.n


# =============================================================================
# Adversary
# =============================================================================


class AttackerKind(StrEnum):
    CLASSICAL = "classical"
    GROVER = "grover"


@dataclass(frozen=True, slots=True)
class MiningPuzzle:
    """Nonce search over {0..2^nonce_bits-1} against a header template.

    ``difficulty`` counts leading zero bits of the digest truncated to
    ``truncate_bytes`` bytes.
    """

    template: BlockHeader
    nonce_bits: int
    difficulty: int
    truncate_bytes: int = 32

    def __post_init__(self) -> None:
        if not 1 <= self.nonce_bits <= 24:
            raise AdversaryError(f"nonce_bits must be in 1..24, got {self.nonce_bits}")
        if not 1 <= self.truncate_bytes <= 32:
            raise AdversaryError(f"truncate_bytes must be in 1..32, got {self.truncate_bytes}")
        if not 0 <= self.difficulty <= 8 * self.truncate_bytes:
            raise AdversaryError(
                f"difficulty {self.difficulty} exceeds the {8 * self.truncate_bytes}-bit truncated digest"
            )

    @property
    def search_space(self) -> int:
        return 2**self.nonce_bits


@dataclass(frozen=True, slots=True)
class RaceConfig:
    """Fork race from ``z`` blocks behind.

    ``q`` is the attacker's share of raw throughput: block share for the
    classical attacker, oracle-query share for the Grover attacker
    (q = 0.5 means equal query rates).  ``difficulty_bits`` sets N/M = 2^t
    for the Grover attacker's per-block solve time.
    """

    q: float
    z: int
    attacker_kind: AttackerKind = AttackerKind.CLASSICAL
    trials: int = 100_000
    difficulty_bits: int = 16
    lead_cap: int = 200

    def __post_init__(self) -> None:
        if not 0.0 < self.q < 1.0:
            raise AdversaryError(f"q must be in (0, 1), got {self.q}")
        if self.z < 0:
            raise AdversaryError(f"z must be >= 0, got {self.z}")
        if self.trials < 1:
            raise AdversaryError(f"trials must be >= 1, got {self.trials}")
        if self.lead_cap <= self.z:
            raise AdversaryError(f"lead_cap {self.lead_cap} must exceed z {self.z}")
        object.__setattr__(self, "attacker_kind", AttackerKind(self.attacker_kind))

    @property
    def p(self) -> float:
        return 1.0 - self.q


@dataclass(frozen=True, slots=True)
class ToyGroup:
    """Multiplicative group mod a prime p, generated by g of order ``order``."""

    p: int
    g: int
    order: int


@dataclass(frozen=True, slots=True)
class ToyKeypair:
    group: ToyGroup
    x: int
    y: int

    def __post_init__(self) -> None:
        if not 1 <= self.x < self.group.p - 1:
            raise AdversaryError(f"private key must be in 1..p-2, got {self.x}")
        if pow(self.group.g, self.x, self.group.p) != self.y:
            raise AdversaryError("public key does not match g^x mod p")


@dataclass(frozen=True, slots=True)
class ToySignature:
    """Schnorr-style (r, s); wire form is r (4 bytes) || s (4 bytes) big-endian."""

    r: int
    s: int

    def to_bytes(self) -> bytes:
        return self.r.to_bytes(4, "big") + self.s.to_bytes(4, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> ToySignature:
        if len(data) != 8:
            raise AdversaryError(f"signature must be 8 bytes, got {len(data)}")
        return cls(int.from_bytes(data[:4], "big"), int.from_bytes(data[4:], "big"))


# =============================================================================
# QKD
# =============================================================================


@dataclass(frozen=True, slots=True)
class QKDConfig:
    n_qubits: int
    eve_fraction: float = 0.0
    sample_fraction: float = 0.5
    abort_threshold: float = 0.11

    def __post_init__(self) -> None:
        if not 0.0 <= self.eve_fraction <= 1.0:
            raise QKDError(f"eve_fraction must be in [0, 1], got {self.eve_fraction}")
        if not 0.0 < self.sample_fraction < 1.0:
            raise QKDError(f"sample_fraction must be in (0, 1), got {self.sample_fraction}")


@dataclass(frozen=True, slots=True)
class Ciphertext:
    """One-time-pad output; ``offset`` is the first pad bit used."""

    offset: int
    payload: bytes


# =============================================================================
# Network / consensus
# =============================================================================


@dataclass(frozen=True, slots=True)
class Topology:
    node_count: int
    byzantine: frozenset[int] = frozenset()
    latencies: Mapping[tuple[int, int], int] = field(default_factory=dict)
    default_latency: int = 1

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise NetworkError(f"node_count must be >= 1, got {self.node_count}")
        object.__setattr__(self, "byzantine", frozenset(self.byzantine))
        stray = [b for b in self.byzantine if not 0 <= b < self.node_count]
        if stray:
            raise NetworkError(f"byzantine nodes {sorted(stray)} outside 0..{self.node_count - 1}")
        if self.default_latency < 1 or any(v < 1 for v in self.latencies.values()):
            raise NetworkError("link latencies must be >= 1 tick")

    @property
    def honest(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.node_count) if i not in self.byzantine)

    def is_byzantine(self, node: int) -> bool:
        return node in self.byzantine

    def latency(self, src: int, dst: int) -> int:
        return self.latencies.get((src, dst), self.default_latency)


class Outcome(StrEnum):
    AGREED = "agreed"
    DETECTED_FAULT = "detected-fault"
    DISAGREEMENT = "disagreement"


@dataclass(frozen=True, slots=True)
class ConsensusRound:
    """One GHZ coin round.

    ``reports[(src, dst)]`` is the bit ``src`` told ``dst``; ``outputs`` holds
    each honest node's decision (None for Byzantine nodes).
    """

    round_id: int
    measured: tuple[int, ...]
    reports: Mapping[tuple[int, int], int]
    outputs: tuple[int | None, ...]
    outcome: Outcome
    bit: int | None
    suspects: frozenset[int] = frozenset()
    transcript_digest: str = ""


# =============================================================================
# Scenario configuration
# =============================================================================


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    """Validated scenario request; ``params`` has every default filled in."""

    name: str
    master_seed: int
    params: Mapping[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"scenario": self.name, "master_seed": self.master_seed, "params": dict(self.params)}
