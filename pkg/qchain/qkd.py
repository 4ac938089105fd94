"""BB84 key distribution with an intercept-resend eavesdropper, plus a
one-time pad that refuses to reuse key bits.

Qubits are simulated per position with exact single-qubit outcomes:
measuring in the preparation basis returns the prepared bit, measuring in
the other basis returns a fair coin.  Basis 0 is rectilinear (+), basis 1
diagonal (x).  There is no error correction or privacy amplification; the
session reports raw sifted statistics.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import KeyExhausted, KeyReuseError, QKDError
from .models import Ciphertext, QKDConfig

_LOG = logging.getLogger(__name__)

MIN_QUBITS: int = 16
_BASIS_SYMBOLS = np.array(["+", "x"])


def bits_to_hex(bits: np.ndarray) -> str:
    """Pack a 0/1 array MSB-first; the last byte is zero-padded."""
    return np.packbits(bits.astype(np.uint8)).tobytes().hex()


def _bases_text(bases: np.ndarray) -> str:
    return "".join(_BASIS_SYMBOLS[bases.astype(np.intp)])


# =============================================================================
# Session
# =============================================================================


@dataclass(slots=True, eq=False)
class QKDSession:
    """Outcome of one BB84 exchange between sender A and receiver B.

    ``sample_positions`` index into the sifted keys; ``final_key`` is A's
    residual key and ``final_key_b`` B's.  Both are empty when aborted.
    ``residual_error_rate`` compares the residual keys directly, which only
    a simulation can do.
    """

    config: QKDConfig
    sender_bits: np.ndarray
    sender_bases: np.ndarray
    receiver_bases: np.ndarray
    receiver_bits: np.ndarray
    kept_positions: np.ndarray
    sifted_key_a: np.ndarray
    sifted_key_b: np.ndarray
    sample_positions: np.ndarray
    qber_estimate: float
    residual_error_rate: float
    aborted: bool
    final_key: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    final_key_b: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))

    @property
    def keys_match(self) -> bool:
        return bool(np.array_equal(self.final_key, self.final_key_b))

    def to_dict(self) -> dict[str, Any]:
        """Transcript for JSON export; keys as hex, bases as '+'/'x'."""
        return {
            "n_qubits": self.config.n_qubits,
            "eve_fraction": self.config.eve_fraction,
            "sender_bases": _bases_text(self.sender_bases),
            "receiver_bases": _bases_text(self.receiver_bases),
            "kept_positions": self.kept_positions.tolist(),
            "sample_positions": self.sample_positions.tolist(),
            "qber_estimate": self.qber_estimate,
            "aborted": self.aborted,
            "final_key_bits": int(self.final_key.shape[0]),
            "final_key": bits_to_hex(self.final_key),
        }


def sift(
    bits_a: np.ndarray,
    bases_a: np.ndarray,
    bits_b: np.ndarray,
    bases_b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Keep the positions where both parties chose the same basis."""
    lengths = {len(bits_a), len(bases_a), len(bits_b), len(bases_b)}
    if len(lengths) != 1:
        raise QKDError(f"sift inputs must have equal lengths, got {sorted(lengths)}")
    kept = np.flatnonzero(np.asarray(bases_a) == np.asarray(bases_b))
    return np.asarray(bits_a)[kept], np.asarray(bits_b)[kept], kept


def bb84_run(config: QKDConfig, rng: np.random.Generator) -> QKDSession:
    n = config.n_qubits
    if n < MIN_QUBITS:
        raise QKDError(f"n_qubits must be >= {MIN_QUBITS}, got {n}")

    bits_a = rng.integers(0, 2, n, dtype=np.uint8)
    bases_a = rng.integers(0, 2, n, dtype=np.uint8)

    # intercept-resend: Eve measures in a random basis and resends what she saw
    intercepted = rng.random(n) < config.eve_fraction
    eve_bases = rng.integers(0, 2, n, dtype=np.uint8)
    eve_coins = rng.integers(0, 2, n, dtype=np.uint8)
    eve_bits = np.where(eve_bases == bases_a, bits_a, eve_coins)
    channel_bits = np.where(intercepted, eve_bits, bits_a)
    channel_bases = np.where(intercepted, eve_bases, bases_a)

    bases_b = rng.integers(0, 2, n, dtype=np.uint8)
    coins_b = rng.integers(0, 2, n, dtype=np.uint8)
    bits_b = np.where(bases_b == channel_bases, channel_bits, coins_b).astype(np.uint8)

    key_a, key_b, kept = sift(bits_a, bases_a, bits_b, bases_b)
    sifted = key_a.shape[0]
    sample_size = round(config.sample_fraction * sifted)
    if sample_size < 1 or sample_size >= sifted:
        raise QKDError(
            f"sifted key of {sifted} bits is too short to sacrifice a {config.sample_fraction} sample; "
            "raise n_qubits"
        )

    sample = np.sort(rng.choice(sifted, size=sample_size, replace=False))
    qber = float(np.mean(key_a[sample] != key_b[sample]))
    residual = np.ones(sifted, dtype=bool)
    residual[sample] = False
    final_a, final_b = key_a[residual], key_b[residual]
    residual_error = float(np.mean(final_a != final_b))
    aborted = qber > config.abort_threshold

    session = QKDSession(
        config=config,
        sender_bits=bits_a,
        sender_bases=bases_a,
        receiver_bases=bases_b,
        receiver_bits=bits_b,
        kept_positions=kept,
        sifted_key_a=key_a,
        sifted_key_b=key_b,
        sample_positions=sample,
        qber_estimate=qber,
        residual_error_rate=residual_error,
        aborted=aborted,
    )
    if aborted:
        _LOG.info("BB84 aborted: QBER %.4f above %.4f (f=%.2f)", qber, config.abort_threshold, config.eve_fraction)
    else:
        session.final_key = final_a
        session.final_key_b = final_b
        _LOG.debug("BB84 kept %d sifted bits, %d-bit final key, QBER %.4f", sifted, final_a.shape[0], qber)
    return session


# =============================================================================
# One-time pad
# =============================================================================


class OneTimePad:
    """Key bits with a spent map.  Not thread-safe; confine to one thread."""

    __slots__ = ("_bits", "_spent", "_cursor")

    def __init__(self, bits: np.ndarray | Sequence[int]) -> None:
        self._bits = np.asarray(bits, dtype=np.uint8).copy()
        if self._bits.ndim != 1 or np.any(self._bits > 1):
            raise QKDError("pad must be a flat array of 0/1 bits")
        self._spent = np.zeros(self._bits.shape[0], dtype=bool)
        self._cursor = 0

    def __len__(self) -> int:
        return self._bits.shape[0]

    @property
    def remaining(self) -> int:
        return int(np.count_nonzero(~self._spent))

    def take(self, nbits: int, offset: int | None = None) -> tuple[int, np.ndarray]:
        """Spend ``nbits`` starting at ``offset`` (default: the cursor)."""
        start = self._cursor if offset is None else offset
        if start < 0 or start + nbits > len(self):
            raise KeyExhausted(f"need {nbits} pad bits at offset {start}, pad holds {len(self)}")
        window = slice(start, start + nbits)
        if self._spent[window].any():
            raise KeyReuseError(f"pad bits {start}..{start + nbits - 1} were already spent")
        self._spent[window] = True
        self._cursor = max(self._cursor, start + nbits)
        return start, self._bits[window].copy()


def _xor(data: bytes, key_bits: np.ndarray) -> bytes:
    key = np.packbits(key_bits)
    return np.bitwise_xor(np.frombuffer(data, dtype=np.uint8), key).tobytes()


def otp_protect(pad: OneTimePad, message: bytes, offset: int | None = None) -> Ciphertext:
    start, key_bits = pad.take(8 * len(message), offset)
    return Ciphertext(offset=start, payload=_xor(message, key_bits))


def otp_open(pad: OneTimePad, ciphertext: Ciphertext) -> bytes:
    _, key_bits = pad.take(8 * len(ciphertext.payload), ciphertext.offset)
    return _xor(ciphertext.payload, key_bits)


@dataclass(frozen=True, slots=True)
class LinkTransfer:
    message: bytes
    ciphertext: Ciphertext
    opened: bytes

    @property
    def intact(self) -> bool:
        return self.opened == self.message


def protect_link_messages(session: QKDSession, messages: Sequence[bytes]) -> list[LinkTransfer]:
    """Encrypt with A's final key and decrypt with B's, one pad per side."""
    if session.aborted:
        raise QKDError("cannot protect a link with an aborted QKD session")
    sender, receiver = OneTimePad(session.final_key), OneTimePad(session.final_key_b)
    transfers = []
    for message in messages:
        ciphertext = otp_protect(sender, message)
        transfers.append(LinkTransfer(message=message, ciphertext=ciphertext, opened=otp_open(receiver, ciphertext)))
    return transfers
