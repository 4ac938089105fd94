"""Deterministic tick-driven message network.

Messages posted at tick t on link (src, dst) are delivered at
t + latency(src, dst).  Delivery order within a tick is (tick, src, dst,
sequence), so per-link FIFO holds and cross-link ties break by node ids.
Single-threaded; whole networks may run in parallel under separate seeds.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import logging
import struct
from dataclasses import dataclass
from typing import Any

from .errors import NetworkError
from .models import Topology

_LOG = logging.getLogger(__name__)

# tick, src, dst ahead of the payload digest when folding a transcript
_EVENT = struct.Struct(">QII")


def payload_digest(payload: Any) -> str:
    """Hex SHA-256 of raw bytes, or of canonical JSON for anything else."""
    if isinstance(payload, bytes | bytearray):
        data = bytes(payload)
    else:
        data = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True, slots=True)
class Message:
    sent_tick: int
    deliver_tick: int
    src: int
    dst: int
    seq: int
    payload: Any


@dataclass(frozen=True, slots=True)
class Event:
    """Transcript entry for one delivery."""

    tick: int
    src: int
    dst: int
    digest: str

    def to_dict(self) -> dict[str, Any]:
        return {"tick": self.tick, "from": self.src, "to": self.dst, "digest": self.digest}


class Network:
    """Owns the clock, the pending queue and the delivery transcript."""

    def __init__(self, topology: Topology) -> None:
        self.topology = topology
        self.now = 0
        self._seq = 0
        self._queue: list[tuple[int, int, int, int, Message]] = []
        self._events: list[Event] = []

    def _check_node(self, node: int) -> None:
        if not 0 <= node < self.topology.node_count:
            raise NetworkError(f"unknown node id {node} (topology has {self.topology.node_count})")

    def post_message(self, src: int, dst: int, payload: Any, tick: int | None = None) -> Message:
        self._check_node(src)
        self._check_node(dst)
        sent = self.now if tick is None else tick
        if sent < self.now:
            raise NetworkError(f"cannot post at tick {sent}, clock is at {self.now}")
        message = Message(
            sent_tick=sent,
            deliver_tick=sent + self.topology.latency(src, dst),
            src=src,
            dst=dst,
            seq=self._seq,
            payload=payload,
        )
        self._seq += 1
        heapq.heappush(self._queue, (message.deliver_tick, src, dst, message.seq, message))
        return message

    def advance(self, ticks: int = 1) -> list[Message]:
        """Move the clock forward and return everything delivered, in order."""
        if ticks < 0:
            raise NetworkError(f"cannot advance by {ticks} ticks")
        self.now += ticks
        delivered = []
        while self._queue and self._queue[0][0] <= self.now:
            message = heapq.heappop(self._queue)[-1]
            delivered.append(message)
            self._events.append(
                Event(
                    tick=message.deliver_tick,
                    src=message.src,
                    dst=message.dst,
                    digest=payload_digest(message.payload),
                )
            )
        return delivered

    def drain(self) -> list[Message]:
        """Advance until nothing is in flight."""
        if not self._queue:
            return []
        return self.advance(max(0, max(entry[0] for entry in self._queue) - self.now))

    @property
    def pending(self) -> int:
        return len(self._queue)

    @property
    def event_count(self) -> int:
        return len(self._events)

    def transcript(self) -> list[Event]:
        return list(self._events)

    def transcript_digest(self, start: int = 0) -> str:
        """SHA-256 over the packed (tick, src, dst, digest) of every event from
        ``start`` on."""
        h = hashlib.sha256()
        for event in self._events[start:]:
            h.update(_EVENT.pack(event.tick, event.src, event.dst))
            h.update(bytes.fromhex(event.digest))
        return h.hexdigest()
