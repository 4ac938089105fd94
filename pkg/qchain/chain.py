"""Blockchain core: hashing, Merkle trees, header codec, proof of work.

All values are immutable and every function here is pure (mining draws
from the rng it is handed), so any of them may be called from any thread.

Canonical header encoding (89 bytes, big-endian):
    height (8) | timestamp (8) | prev_hash (32) | merkle_root (32) | difficulty (1) | nonce (8)
Blocks serialise as header | tx count (4) | per-tx length (4) + payload.
"""
from __future__ import annotations

import hashlib
import logging
import struct
from collections.abc import Callable, Sequence

import numpy as np

from .config import DEFAULT_MAX_MINING_ATTEMPTS
from .errors import ChainError, MiningExhausted
from .models import (
    Block,
    BlockHeader,
    Chain,
    ChainViolation,
    Hash256,
    MerkleProof,
    Side,
    ViolationReason,
)

_LOG = logging.getLogger(__name__)

_HEADER = struct.Struct(">QQ32s32sBQ")
HEADER_SIZE: int = _HEADER.size
_U32 = struct.Struct(">I")

_LEAF_PREFIX = b"\x00"
_NODE_PREFIX = b"\x01"


# =============================================================================
# Hashing
# =============================================================================


def sha256(data: bytes) -> Hash256:
    return Hash256(hashlib.sha256(data).digest())


def leading_zero_bits(digest: bytes) -> int:
    value = int.from_bytes(digest, "big")
    return 8 * len(digest) - value.bit_length()


# =============================================================================
# Merkle tree
# =============================================================================


def leaf_hash(leaf: bytes) -> Hash256:
    return sha256(_LEAF_PREFIX + leaf)


def node_hash(left: bytes, right: bytes) -> Hash256:
    return sha256(_NODE_PREFIX + left + right)


def _merkle_levels(leaves: Sequence[bytes]) -> list[list[Hash256]]:
    """All tree levels, leaves first.  Odd levels are padded by duplicating
    their last node before pairing."""
    if not leaves:
        raise ChainError("merkle tree needs at least one leaf")
    level = [leaf_hash(bytes(leaf)) for leaf in leaves]
    levels = [level]
    while len(level) > 1:
        if len(level) % 2:
            level = [*level, level[-1]]
        level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
        levels.append(level)
    return levels


def merkle_root(leaves: Sequence[bytes]) -> Hash256:
    return _merkle_levels(leaves)[-1][0]


def merkle_prove(leaves: Sequence[bytes], index: int) -> MerkleProof:
    if not 0 <= index < len(leaves):
        raise ChainError(f"leaf index {index} out of range for {len(leaves)} leaves")
    siblings: list[tuple[Hash256, Side]] = []
    position = index
    for level in _merkle_levels(leaves)[:-1]:
        if position % 2 == 0:
            partner = position + 1 if position + 1 < len(level) else position
            siblings.append((level[partner], Side.RIGHT))
        else:
            siblings.append((level[position - 1], Side.LEFT))
        position //= 2
    return MerkleProof(leaf_index=index, siblings=tuple(siblings))


def merkle_verify(root: bytes, leaf: bytes, proof: MerkleProof, leaf_count: int | None = None) -> bool:
    """Recompute the root from ``leaf`` along ``proof``.

    The sibling sides must also agree with the bits of ``leaf_index``.  With
    ``leaf_count`` the proof is also held to the tree shape: the index must
    name a real leaf, the proof must have one sibling per level, and a node
    paired with itself by odd-level padding must carry itself as sibling.
    Without it, an index past the last leaf of an odd level can still
    verify against the padded copy.
    """
    if leaf_count is not None and not 0 <= proof.leaf_index < leaf_count:
        return False
    acc = leaf_hash(leaf)
    position = proof.leaf_index
    width = leaf_count
    for sibling, side in proof.siblings:
        expected = Side.RIGHT if position % 2 == 0 else Side.LEFT
        if side != expected:
            return False
        if width is not None:
            if width == 1:
                return False
            if position == width - 1 and position % 2 == 0 and sibling != acc:
                return False
            width = (width + 1) // 2
        acc = node_hash(acc, sibling) if side == Side.RIGHT else node_hash(sibling, acc)
        position //= 2
    if width is not None and width != 1:
        return False
    return position == 0 and acc == root


# =============================================================================
# Header / block codec
# =============================================================================


def encode_header(header: BlockHeader) -> bytes:
    return _HEADER.pack(
        header.height,
        header.timestamp,
        header.prev_hash,
        header.merkle_root,
        header.difficulty,
        header.nonce,
    )


def decode_header(data: bytes) -> BlockHeader:
    if len(data) != HEADER_SIZE:
        raise ChainError(f"header must be {HEADER_SIZE} bytes, got {len(data)}")
    height, timestamp, prev, root, difficulty, nonce = _HEADER.unpack(data)
    return BlockHeader(
        prev_hash=Hash256(prev),
        merkle_root=Hash256(root),
        nonce=nonce,
        difficulty=difficulty,
        height=height,
        timestamp=timestamp,
    )


def encode_block(block: Block) -> bytes:
    parts = [encode_header(block.header), _U32.pack(len(block.transactions))]
    for tx in block.transactions:
        parts.append(_U32.pack(len(tx)))
        parts.append(tx)
    return b"".join(parts)


def decode_block(data: bytes) -> Block:
    if len(data) < HEADER_SIZE + 4:
        raise ChainError("block bytes truncated before transaction count")
    header = decode_header(data[:HEADER_SIZE])
    (count,) = _U32.unpack_from(data, HEADER_SIZE)
    offset = HEADER_SIZE + 4
    transactions = []
    for i in range(count):
        if offset + 4 > len(data):
            raise ChainError(f"block bytes truncated at transaction {i} length")
        (length,) = _U32.unpack_from(data, offset)
        offset += 4
        if offset + length > len(data):
            raise ChainError(f"block bytes truncated inside transaction {i}")
        transactions.append(data[offset:offset + length])
        offset += length
    if offset != len(data):
        raise ChainError(f"{len(data) - offset} trailing bytes after last transaction")
    return Block(header=header, transactions=tuple(transactions))


def block_hash(header: BlockHeader) -> Hash256:
    return sha256(encode_header(header))


# =============================================================================
# Proof of work
# =============================================================================


def pow_check(header: BlockHeader, difficulty: int | None = None) -> bool:
    """True iff the header digest has at least ``difficulty`` leading zero
    bits (the header's own difficulty unless overridden, up to 256)."""
    target = header.difficulty if difficulty is None else difficulty
    if target <= 0:
        return True
    return leading_zero_bits(block_hash(header)) >= target


def nonce_digest_fn(template: BlockHeader) -> Callable[[int], bytes]:
    """Digest of ``template`` with the nonce swapped in.

    The nonce is the last encoded field, so the prefix state is hashed once
    and copied per call.
    """
    base = hashlib.sha256(encode_header(template)[:-8])

    def digest(nonce: int) -> bytes:
        h = base.copy()
        h.update(nonce.to_bytes(8, "big"))
        return h.digest()

    return digest


def mine_classical(
    template: BlockHeader,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MAX_MINING_ATTEMPTS,
    nonce_bits: int = 64,
) -> tuple[int, int]:
    """Sample nonces uniformly (with replacement) until the PoW holds.

    Returns ``(nonce, attempts)``; raises MiningExhausted past the budget.
    """
    if max_attempts < 1:
        raise ChainError(f"max_attempts must be >= 1, got {max_attempts}")
    if not 1 <= nonce_bits <= 64:
        raise ChainError(f"nonce_bits must be in 1..64, got {nonce_bits}")

    digest = nonce_digest_fn(template)
    target = template.difficulty
    shift = 64 - nonce_bits
    for attempt in range(1, max_attempts + 1):
        nonce = int.from_bytes(rng.bytes(8), "big") >> shift
        if target == 0 or leading_zero_bits(digest(nonce)) >= target:
            return nonce, attempt

    _LOG.warning("Mining exhausted %d attempts at difficulty %d", max_attempts, target)
    raise MiningExhausted(
        f"no nonce met difficulty {target} within {max_attempts} attempts",
        attempts=max_attempts,
    )


# =============================================================================
# Chains
# =============================================================================


def genesis_template(
    transactions: Sequence[bytes],
    difficulty: int,
    timestamp: int = 0,
) -> BlockHeader:
    """Unmined genesis header (nonce 0, zero prev_hash, height 0)."""
    return BlockHeader(
        prev_hash=Hash256.zero(),
        merkle_root=merkle_root(transactions),
        nonce=0,
        difficulty=difficulty,
        height=0,
        timestamp=timestamp,
    )


def mine_block(
    prev: Block | None,
    transactions: Sequence[bytes],
    difficulty: int,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MAX_MINING_ATTEMPTS,
    timestamp: int | None = None,
) -> tuple[Block, int]:
    """Mine a successor of ``prev`` (or a genesis block).  Timestamps
    default to the height, in simulation ticks."""
    if prev is None:
        template = genesis_template(transactions, difficulty, timestamp or 0)
    else:
        height = prev.header.height + 1
        template = BlockHeader(
            prev_hash=block_hash(prev.header),
            merkle_root=merkle_root(transactions),
            nonce=0,
            difficulty=difficulty,
            height=height,
            timestamp=height if timestamp is None else timestamp,
        )
    nonce, attempts = mine_classical(template, rng, max_attempts)
    return Block(header=template.with_nonce(nonce), transactions=tuple(transactions)), attempts


def default_transactions(height: int, count: int = 3) -> tuple[bytes, ...]:
    return tuple(f"block {height} tx {i}: transfer {height * 10 + i} units".encode() for i in range(count))


def mine_chain(
    n_blocks: int,
    difficulty: int,
    rng: np.random.Generator,
    genesis_transactions: Sequence[bytes] | None = None,
    max_attempts: int = DEFAULT_MAX_MINING_ATTEMPTS,
) -> tuple[Chain, int]:
    """Mine a fresh chain of ``n_blocks`` (genesis included).

    Returns the chain and the total number of hash attempts spent.
    """
    if n_blocks < 1:
        raise ChainError(f"n_blocks must be >= 1, got {n_blocks}")
    from .config import GENESIS_TRANSACTIONS

    blocks: list[Block] = []
    total = 0
    prev: Block | None = None
    for height in range(n_blocks):
        if height == 0:
            txs = tuple(genesis_transactions or GENESIS_TRANSACTIONS)
        else:
            txs = default_transactions(height)
        block, attempts = mine_block(prev, txs, difficulty, rng, max_attempts)
        blocks.append(block)
        total += attempts
        prev = block
    _LOG.info("Mined %d-block chain at difficulty %d in %d attempts", n_blocks, difficulty, total)
    return Chain(blocks=tuple(blocks)), total


def validate_chain(chain: Chain) -> ChainViolation | None:
    """Return the first violation, or None when the chain is valid.

    Per block, in order: genesis form (block 0) or height and hash-pointer
    linkage, Merkle-root consistency, fixed chain difficulty, PoW.
    """
    if not chain.blocks:
        return ChainViolation(0, ViolationReason.GENESIS)

    difficulty = chain.blocks[0].header.difficulty
    for i, block in enumerate(chain.blocks):
        header = block.header
        if i == 0:
            if header.height != 0 or header.prev_hash != Hash256.zero():
                return ChainViolation(0, ViolationReason.GENESIS)
        else:
            prev = chain.blocks[i - 1].header
            if header.height != prev.height + 1:
                return ChainViolation(i, ViolationReason.HEIGHT)
            if header.prev_hash != block_hash(prev):
                return ChainViolation(i, ViolationReason.LINK)
        if not block.transactions or merkle_root(block.transactions) != header.merkle_root:
            return ChainViolation(i, ViolationReason.MERKLE)
        if header.difficulty != difficulty:
            return ChainViolation(i, ViolationReason.DIFFICULTY)
        if not pow_check(header):
            return ChainViolation(i, ViolationReason.POW)
    return None


# =============================================================================
# Mutation (tamper experiments)
# =============================================================================


def mutable_spans(block: Block) -> list[tuple[int, int]]:
    """Byte ranges of ``encode_block(block)`` holding header fields or
    transaction payloads (length prefixes excluded)."""
    spans = [(0, HEADER_SIZE)]
    offset = HEADER_SIZE + 4
    for tx in block.transactions:
        offset += 4
        if tx:
            spans.append((offset, offset + len(tx)))
        offset += len(tx)
    return spans


def mutable_bit_count(block: Block) -> int:
    return 8 * sum(end - start for start, end in mutable_spans(block))


def flip_bit(chain: Chain, block_index: int, bit: int) -> Chain:
    """Copy of ``chain`` with one header or transaction bit of block
    ``block_index`` inverted; ``bit`` counts over ``mutable_spans``."""
    if not 0 <= block_index < len(chain):
        raise ChainError(f"block index {block_index} out of range for a {len(chain)}-block chain")
    block = chain.blocks[block_index]
    if not 0 <= bit < mutable_bit_count(block):
        raise ChainError(f"bit {bit} out of range for block {block_index}")
    data = bytearray(encode_block(block))
    byte_offset = bit // 8
    for start, end in mutable_spans(block):
        if byte_offset < end - start:
            data[start + byte_offset] ^= 0x80 >> (bit % 8)
            break
        byte_offset -= end - start
    blocks = list(chain.blocks)
    blocks[block_index] = decode_block(bytes(data))
    return Chain(blocks=tuple(blocks))
