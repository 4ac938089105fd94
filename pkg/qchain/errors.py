"""Exception hierarchy for qchain.

Leaf module -- zero internal imports.
"""
from __future__ import annotations


class QchainError(Exception):
    """Base exception for every qchain failure."""


# =============================================================================
# Chain core
# =============================================================================


class ChainError(QchainError):
    """Malformed chain data or an operation called outside its precondition."""


class MiningExhausted(ChainError):
    """Classical mining ran out of attempts before meeting the difficulty."""

    def __init__(self, message: str, *, attempts: int) -> None:
        super().__init__(message)
        self.attempts = attempts


# =============================================================================
# Quantum simulation
# =============================================================================


class QSimError(QchainError):
    """Statevector misuse: qubit count out of range, no marked states, bad input."""


# =============================================================================
# Adversary
# =============================================================================


class AdversaryError(QchainError):
    """Invalid attack parameters (group, puzzle, race)."""


class UnsolvablePuzzle(AdversaryError):
    """The PoW puzzle has no marked nonce, so Grover has nothing to amplify."""


# =============================================================================
# QKD
# =============================================================================


class QKDError(QchainError):
    """BB84 session could not produce a usable key."""


class KeyExhausted(QKDError):
    """The one-time pad holds fewer unspent bits than the message needs."""


class KeyReuseError(QKDError):
    """A one-time pad segment was requested a second time."""


# =============================================================================
# Network / consensus
# =============================================================================


class NetworkError(QchainError):
    """Unknown node, missing link latency, or a message posted in the past."""


class ConsensusError(QchainError):
    """Protocol called outside its precondition (party count, list length)."""


# =============================================================================
# Configuration
# =============================================================================


class ConfigError(QchainError):
    """Scenario configuration rejected before any run starts."""

    def __init__(self, field: str, reason: str) -> None:
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason
