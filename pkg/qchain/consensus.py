"""Consensus layer: GHZ shared coin, correlated-list detectable broadcast,
value agreement on top of it, and the classical echo-broadcast exhibit.

Party layout for the three-party protocols: node 0 is the sender, nodes 1
and 2 the receivers.  A receiver decision of None means it detected a
fault (the bottom value).
"""
from __future__ import annotations

import functools
import hashlib
import logging
import math
import struct
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from typing import Any

import numpy as np

from .errors import ConsensusError
from .models import ConsensusRound, Outcome, Topology
from .network import Network, payload_digest
from .qsim import StateVector, measure_all, prepare_ghz

_LOG = logging.getLogger(__name__)

HIDDEN: int = -1
SENDER: int = 0
RECEIVERS: tuple[int, int] = (1, 2)
MIN_LIST_LENGTH: int = 8
# mismatches a forwarded claim may show and still count as consistent
FORWARD_TOLERANCE: int = 4

# GHZ report wire format: round id, reported bit
_REPORT = struct.Struct(">QB")


def _outcome(decisions: Sequence[Any]) -> Outcome:
    if not decisions or all(d is None for d in decisions):
        return Outcome.DETECTED_FAULT
    if len(set(decisions)) == 1:
        return Outcome.AGREED
    return Outcome.DISAGREEMENT


# =============================================================================
# GHZ coin
# =============================================================================


@functools.lru_cache(maxsize=32)
def _ghz(n: int) -> StateVector:
    return prepare_ghz(n)


def ghz_consensus_round(
    topology: Topology,
    rng: np.random.Generator,
    round_id: int = 0,
    network: Network | None = None,
) -> ConsensusRound:
    """One round of the GHZ coin.

    GHZ(N) is measured once in the computational basis and bit i is dealt
    to node i, which matches measuring each node's qubit separately.
    Honest nodes output their own bit and report it to everyone; Byzantine
    nodes report random bits.  A report that contradicts an honest
    recipient's own bit convicts the sender, since honest bits coincide.
    """
    n = topology.node_count
    measured = tuple(int(c) for c in measure_all(_ghz(n), rng))
    net = network if network is not None else Network(topology)
    first_event = net.event_count
    noise = rng.integers(0, 2, size=(n, n))

    for src in range(n):
        lying = topology.is_byzantine(src)
        for dst in range(n):
            if src == dst:
                continue
            bit = int(noise[src, dst]) if lying else measured[src]
            net.post_message(src, dst, _REPORT.pack(round_id, bit))
    delivered = net.drain()

    reports = {(m.src, m.dst): _REPORT.unpack(m.payload)[1] for m in delivered}
    outputs = tuple(None if topology.is_byzantine(i) else measured[i] for i in range(n))
    honest_bits = [outputs[i] for i in topology.honest]
    suspects = frozenset(
        src for (src, dst), bit in reports.items() if not topology.is_byzantine(dst) and bit != measured[dst]
    )
    outcome = _outcome(honest_bits)
    digest = net.transcript_digest(first_event)
    return ConsensusRound(
        round_id=round_id,
        measured=measured,
        reports=reports,
        outputs=outputs,
        outcome=outcome,
        bit=honest_bits[0] if outcome is Outcome.AGREED else None,
        suspects=suspects,
        transcript_digest=digest,
    )


# =============================================================================
# Correlated lists
# =============================================================================


@dataclass(slots=True, eq=False)
class CorrelatedLists:
    """Dealer output for one broadcast.

    ``sender[b]`` is the list backing claims for bit b.  ``views[r][b]`` is
    receiver r's copy of list b with HIDDEN at unrevealed positions.
    """

    length: int
    sender: np.ndarray  # (2, L) uint8
    views: np.ndarray  # (2 receivers, 2 lists, L) int8

    @property
    def r0(self) -> np.ndarray:
        return self.views[0]

    @property
    def r1(self) -> np.ndarray:
        return self.views[1]


def deal_correlated_lists(length: int, rng: np.random.Generator) -> CorrelatedLists:
    """Trusted-dealer stand-in for entanglement-based dealing.  Each
    receiver sees each position of each list independently with
    probability 1/2."""
    if length < MIN_LIST_LENGTH:
        raise ConsensusError(f"list length must be >= {MIN_LIST_LENGTH}, got {length}")
    sender = rng.integers(0, 2, size=(2, length), dtype=np.uint8)
    revealed = rng.random((2, 2, length)) < 0.5
    views = np.where(revealed, sender[np.newaxis].astype(np.int8), np.int8(HIDDEN)).astype(np.int8)
    return CorrelatedLists(length=length, sender=sender, views=views)


@dataclass(frozen=True, slots=True)
class Claim:
    """Broadcast claim: ``bit`` plus the positions where list ``bit`` holds
    the opposite value."""

    bit: int
    indices: tuple[int, ...]

    def to_payload(self) -> dict[str, Any]:
        return {"bit": self.bit, "indices": list(self.indices)}

    @classmethod
    def from_payload(cls, payload: Any) -> Claim | None:
        """None for anything that is not shaped like a claim."""
        if not isinstance(payload, Mapping):
            return None
        bit, indices = payload.get("bit"), payload.get("indices")
        if not isinstance(bit, int) or not isinstance(indices, list):
            return None
        if not all(isinstance(j, int) and not isinstance(j, bool) for j in indices):
            return None
        return cls(bit=bit, indices=tuple(indices))


def honest_claim(lists: CorrelatedLists, bit: int) -> Claim:
    return Claim(bit=bit, indices=tuple(int(j) for j in np.flatnonzero(lists.sender[bit] == 1 - bit)))


def claim_mismatches(claim: Claim | None, view: np.ndarray) -> int | None:
    """Revealed positions of the receiver's view of list ``claim.bit`` that
    contradict the claim, or None for a malformed claim."""
    if claim is None or claim.bit not in (0, 1):
        return None
    length = view.shape[-1]
    indices = claim.indices
    if len(set(indices)) != len(indices) or any(not 0 <= j < length for j in indices):
        return None
    expected = np.full(length, claim.bit, dtype=np.int8)
    expected[list(indices)] = 1 - claim.bit
    own = view[claim.bit]
    revealed = own != HIDDEN
    return int(np.count_nonzero(own[revealed] != expected[revealed]))


def check_claim(claim: Claim | None, view: np.ndarray, tolerance: int = 0) -> bool:
    """Well-formed and at most ``tolerance`` revealed positions contradict it."""
    mismatches = claim_mismatches(claim, view)
    return mismatches is not None and mismatches <= tolerance


def corrupt_claim(claim: Claim, length: int, positions: int, rng: np.random.Generator) -> Claim:
    """``claim`` made wrong at ``positions`` distinct random list positions."""
    if not 0 <= positions <= length:
        raise ConsensusError(f"cannot corrupt {positions} of {length} positions")
    flipped = {int(j) for j in rng.choice(length, size=positions, replace=False)}
    return Claim(bit=claim.bit, indices=tuple(sorted(set(claim.indices) ^ flipped)))


def forge_claim(lists: CorrelatedLists, receiver: int, bit: int, rng: np.random.Generator) -> Claim:
    """A receiver's best forgery for ``bit``: true values where it can see
    list ``bit``, coin flips elsewhere."""
    own = lists.views[receiver][bit]
    guesses = rng.integers(0, 2, size=lists.length).astype(np.int8)
    believed = np.where(own != HIDDEN, own, guesses)
    return Claim(bit=bit, indices=tuple(int(j) for j in np.flatnonzero(believed == 1 - bit)))


# =============================================================================
# Detectable broadcast
# =============================================================================


class SenderBehavior(StrEnum):
    HONEST = "honest"
    EQUIVOCATE = "equivocate"
    PARTIAL_LIE = "partial-lie"
    MALFORMED = "malformed"


class ReceiverBehavior(StrEnum):
    HONEST = "honest"
    FORGE = "forge"
    SILENT = "silent"


_MALFORMED_PAYLOAD: dict[str, Any] = {"bit": 2, "indices": [-1]}

# positions a partial-lie sender gets wrong in its claim for the other bit
PARTIAL_LIE_ERRORS: int = 1


@dataclass(frozen=True, slots=True)
class BroadcastResult:
    """``decisions`` maps each honest receiver to 0, 1 or None (bottom)."""

    bit: int
    decisions: Mapping[int, int | None]
    outcome: Outcome
    transcript_digest: str


def decide(
    direct: Claim | None,
    forwarded: Claim | None,
    view: np.ndarray,
    tolerance: int = FORWARD_TOLERANCE,
) -> int | None:
    """Direct claims are checked strictly, forwarded ones with ``tolerance``."""
    direct_ok = check_claim(direct, view)
    forwarded_ok = check_claim(forwarded, view, tolerance)
    if direct_ok and forwarded_ok:
        return direct.bit if direct.bit == forwarded.bit else None
    if direct_ok:
        return direct.bit
    if forwarded_ok:
        return forwarded.bit
    return None


def _binomial_pmf(trials: int, hits: int, p: float) -> float:
    return math.comb(trials, hits) * p**hits * (1 - p) ** (trials - hits)


def forgery_acceptance_probability(length: int, tolerance: int = FORWARD_TOLERANCE) -> float:
    """Chance a best-effort forgery passes the forwarded-claim check.

    A forged position is wrong with probability 1/4 (hidden from the forger,
    then guessed wrong) and visible to the checking receiver with
    probability 1/2, so mismatches are Binomial(L, 1/8).
    """
    return sum(_binomial_pmf(length, m, 1 / 8) for m in range(min(tolerance, length) + 1))


def split_bound(tolerance: int = FORWARD_TOLERANCE) -> float:
    """Upper bound on a faulty sender splitting the two honest receivers.

    A split needs some claim, wrong at e positions, to pass the strict check
    at one receiver (probability 2^-e) while showing more than
    ``tolerance`` mismatches to the other.  The bound takes the worst e and
    both claims.
    """
    worst = max(
        sum(_binomial_pmf(e, m, 0.5) for m in range(tolerance + 1, e + 1)) / 2**e
        for e in range(tolerance + 1, 8 * (tolerance + 1) + 64)
    )
    return min(1.0, 2 * worst)


def _sender_payload(
    lists: CorrelatedLists,
    bit: int,
    slot: int,
    behavior: SenderBehavior,
    rng: np.random.Generator,
) -> dict[str, Any]:
    if behavior is SenderBehavior.HONEST:
        return honest_claim(lists, bit).to_payload()
    if behavior is SenderBehavior.EQUIVOCATE:
        return honest_claim(lists, bit if slot == 0 else 1 - bit).to_payload()
    if behavior is SenderBehavior.PARTIAL_LIE:
        if slot == 0:
            return honest_claim(lists, bit).to_payload()
        lie = corrupt_claim(honest_claim(lists, 1 - bit), lists.length, PARTIAL_LIE_ERRORS, rng)
        return lie.to_payload()
    return dict(_MALFORMED_PAYLOAD)


def detectable_broadcast(
    lists: CorrelatedLists,
    bit: int,
    rng: np.random.Generator,
    sender: SenderBehavior = SenderBehavior.HONEST,
    receivers: Sequence[ReceiverBehavior] = (ReceiverBehavior.HONEST, ReceiverBehavior.HONEST),
    network: Network | None = None,
    tolerance: int = FORWARD_TOLERANCE,
) -> BroadcastResult:
    """Two-round broadcast of ``bit`` from node 0 to nodes 1 and 2.

    Round 1: the sender sends (b, T) to each receiver.  Round 2: each honest
    receiver relays the claim it got, but only if that claim passed its
    strict check; otherwise it relays nothing.  Each honest receiver then
    applies ``decide``.  A lying sender splits the honest receivers with
    probability at most ``split_bound(tolerance)``.
    """
    if bit not in (0, 1):
        raise ConsensusError(f"broadcast bit must be 0 or 1, got {bit}")
    if len(receivers) != 2:
        raise ConsensusError(f"detectable broadcast needs exactly two receivers, got {len(receivers)}")
    if tolerance < 0:
        raise ConsensusError(f"tolerance must be >= 0, got {tolerance}")
    sender, receivers = SenderBehavior(sender), tuple(ReceiverBehavior(r) for r in receivers)
    net = network if network is not None else Network(Topology(node_count=3))
    first_event = net.event_count

    # round 1
    for slot, node in enumerate(RECEIVERS):
        net.post_message(SENDER, node, _sender_payload(lists, bit, slot, sender, rng))
    direct = {m.dst: Claim.from_payload(m.payload) for m in net.drain()}

    # round 2
    for slot, node in enumerate(RECEIVERS):
        other = RECEIVERS[1 - slot]
        behavior = receivers[slot]
        received = direct.get(node)
        if behavior is ReceiverBehavior.SILENT:
            continue
        if behavior is ReceiverBehavior.FORGE:
            claimed = received.bit if received is not None and received.bit in (0, 1) else bit
            forged = forge_claim(lists, slot, 1 - claimed, rng)
            net.post_message(node, other, forged.to_payload())
        elif check_claim(received, lists.views[slot]):
            net.post_message(node, other, received.to_payload())
        else:
            net.post_message(node, other, None)
    forwarded = {m.dst: Claim.from_payload(m.payload) for m in net.drain()}

    decisions = {
        node: decide(direct.get(node), forwarded.get(node), lists.views[slot], tolerance)
        for slot, node in enumerate(RECEIVERS)
        if receivers[slot] is ReceiverBehavior.HONEST
    }
    honest = list(decisions.values())
    if sender is SenderBehavior.HONEST:
        honest.append(bit)
    return BroadcastResult(
        bit=bit,
        decisions=decisions,
        outcome=_outcome(honest),
        transcript_digest=net.transcript_digest(first_event),
    )


# =============================================================================
# Value agreement
# =============================================================================


def value_bits(value: bytes) -> list[int]:
    """Most significant bit of each byte first."""
    return [int(b) for b in np.unpackbits(np.frombuffer(value, dtype=np.uint8))]


@dataclass(frozen=True, slots=True)
class ValueAgreement:
    """``decisions`` maps each honest node to the value it decided, or None
    when it flagged a fault."""

    value: bytes
    decisions: Mapping[int, bytes | None]
    sub_rounds: int
    outcome: Outcome
    transcript_digest: str


def agree_on_value(
    topology: Topology,
    value: bytes,
    rng: np.random.Generator,
    list_length: int = 128,
    sender_behavior: SenderBehavior = SenderBehavior.EQUIVOCATE,
) -> ValueAgreement:
    """Agree on a byte string held by node 0, one detectable broadcast per bit.

    A Byzantine sender follows ``sender_behavior`` on every bit; a Byzantine
    receiver forges every forwarded claim.  A receiver that sees bottom on
    any bit flags the whole value.
    """
    if topology.node_count != 3:
        raise ConsensusError(f"value agreement runs on exactly 3 nodes, got {topology.node_count}")
    sender = SenderBehavior(sender_behavior) if topology.is_byzantine(SENDER) else SenderBehavior.HONEST
    receivers = tuple(
        ReceiverBehavior.FORGE if topology.is_byzantine(node) else ReceiverBehavior.HONEST for node in RECEIVERS
    )
    net = Network(topology)
    first_event = net.event_count
    bits = value_bits(value)
    received: dict[int, list[int | None]] = {node: [] for node in RECEIVERS if not topology.is_byzantine(node)}
    for bit in bits:
        lists = deal_correlated_lists(list_length, rng)
        result = detectable_broadcast(lists, bit, rng, sender, receivers, network=net)
        for node, decision in result.decisions.items():
            received[node].append(decision)

    decisions: dict[int, bytes | None] = {}
    if sender is SenderBehavior.HONEST:
        decisions[SENDER] = value
    for node, got in received.items():
        decisions[node] = None if None in got else np.packbits(np.array(got, dtype=np.uint8)).tobytes()
    outcome = _outcome(list(decisions.values()))
    _LOG.debug("Value agreement on %d bits: %s", len(bits), outcome)
    return ValueAgreement(
        value=value,
        decisions=decisions,
        sub_rounds=len(bits),
        outcome=outcome,
        transcript_digest=net.transcript_digest(first_event),
    )


# =============================================================================
# Classical baseline
# =============================================================================


@dataclass(frozen=True, slots=True)
class BaselineTranscript:
    """Plain echo broadcast with one traitor among three.

    ``indistinguishable`` is True when the first honest receiver's view is
    byte-identical to its view in the world where the traitor sits
    elsewhere; None without a traitor.
    """

    bit: int
    traitor: int | None
    decisions: Mapping[int, int]
    outcome: Outcome
    events: tuple[dict[str, Any], ...]
    transcript_digest: str
    indistinguishable: bool | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "bit": self.bit,
            "traitor": self.traitor,
            "decisions": {str(k): v for k, v in sorted(self.decisions.items())},
            "outcome": str(self.outcome),
            "events": list(self.events),
            "transcript_digest": self.transcript_digest,
            "indistinguishable": self.indistinguishable,
        }


def _echo_world(
    bit: int,
    traitor: int | None,
    misled: int = RECEIVERS[1],
) -> tuple[dict[int, int], dict[int, list[str]], Network]:
    """Run plain echo broadcast; returns (decisions, per-node views, network).

    A traitor sender tells ``misled`` the inverse bit and the other receiver
    the true one.  A traitor receiver echoes the inverse of what it heard.
    Honest receivers keep the sender's direct value.
    """
    topology = Topology(node_count=3, byzantine=frozenset() if traitor is None else frozenset({traitor}))
    net = Network(topology)
    views: dict[int, list[str]] = {node: [] for node in range(3)}

    for node in RECEIVERS:
        sent = 1 - bit if traitor == SENDER and node == misled else bit
        net.post_message(SENDER, node, {"round": 1, "bit": sent})
    direct: dict[int, int] = {}
    for m in net.drain():
        direct[m.dst] = m.payload["bit"]
        views[m.dst].append(payload_digest({"from": m.src, **m.payload}))

    for slot, node in enumerate(RECEIVERS):
        echoed = 1 - direct[node] if traitor == node else direct[node]
        net.post_message(node, RECEIVERS[1 - slot], {"round": 2, "bit": echoed})
    for m in net.drain():
        views[m.dst].append(payload_digest({"from": m.src, **m.payload}))

    decisions = {node: direct[node] for node in RECEIVERS if node != traitor}
    if traitor != SENDER:
        decisions[SENDER] = bit
    return decisions, views, net


def classical_baseline_scenario(
    topology: Topology,
    rng: np.random.Generator,
    bit: int | None = None,
) -> BaselineTranscript:
    """Three nodes, at most one traitor, no correlated lists.

    With a traitor sender the honest receivers decide different bits, and
    receiver 1 cannot tell this apart from a world where receiver 2 lied.
    """
    if topology.node_count != 3:
        raise ConsensusError(f"classical baseline runs on exactly 3 nodes, got {topology.node_count}")
    if len(topology.byzantine) > 1:
        raise ConsensusError(f"classical baseline takes at most one traitor, got {sorted(topology.byzantine)}")
    bit = int(rng.integers(0, 2)) if bit is None else bit
    traitor = next(iter(topology.byzantine), None)

    decisions, views, net = _echo_world(bit, traitor)
    indistinguishable: bool | None = None
    if traitor is not None:
        if traitor == SENDER:
            # same view if instead the misled receiver had lied in its echo
            observer = RECEIVERS[0]
            _, alt_views, _ = _echo_world(bit, RECEIVERS[1])
        else:
            # same view if instead the sender had misled the traitor
            observer = next(node for node in RECEIVERS if node != traitor)
            _, alt_views, _ = _echo_world(bit, SENDER, misled=traitor)
        indistinguishable = views[observer] == alt_views[observer]

    events = tuple(e.to_dict() for e in net.transcript())
    transcript = BaselineTranscript(
        bit=bit,
        traitor=traitor,
        decisions=decisions,
        outcome=_outcome(list(decisions.values())),
        events=events,
        transcript_digest=net.transcript_digest(),
        indistinguishable=indistinguishable,
    )
    _LOG.debug("Classical baseline traitor=%s outcome=%s", traitor, transcript.outcome)
    return transcript


def transcript_hash(digests: Sequence[str]) -> str:
    """Fold per-round transcript digests into one."""
    h = hashlib.sha256()
    for digest in digests:
        h.update(bytes.fromhex(digest))
    return h.hexdigest()
