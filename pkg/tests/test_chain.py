"""Tests for qchain.chain: hashing, Merkle proofs, codec, mining, validation."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qchain.chain import (
    HEADER_SIZE,
    block_hash,
    decode_block,
    decode_header,
    encode_block,
    encode_header,
    flip_bit,
    genesis_template,
    leading_zero_bits,
    leaf_hash,
    merkle_prove,
    merkle_root,
    merkle_verify,
    mine_block,
    mine_chain,
    mine_classical,
    mutable_bit_count,
    node_hash,
    pow_check,
    sha256,
    validate_chain,
)
from qchain.errors import ChainError, MiningExhausted
from qchain.models import Block, Chain, Hash256, MerkleProof, Side, ViolationReason


def _replace_block(chain, index, block):
    blocks = list(chain.blocks)
    blocks[index] = block
    return Chain(blocks=tuple(blocks))


# =============================================================================
# Hashing
# =============================================================================


class TestHashing:
    def test_sha256_known_vectors(self):
        assert sha256(b"").hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        assert sha256(b"abc").hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"

    def test_leading_zero_bits(self):
        assert leading_zero_bits(bytes(32)) == 256
        assert leading_zero_bits(b"\x0f" + bytes(31)) == 4
        assert leading_zero_bits(b"\x00\x80" + bytes(30)) == 8
        assert leading_zero_bits(b"\xff" * 32) == 0

    def test_hash256_rejects_wrong_length(self):
        with pytest.raises(ChainError):
            Hash256(b"short")


# =============================================================================
# Merkle tree
# =============================================================================


class TestMerkle:
    LEAVES = [b"L0", b"L1", b"L2", b"L3"]

    def test_four_leaf_proof_for_index_two(self):
        """Siblings are h(L3) on the right, then h(h(L0), h(L1)) on the left."""
        proof = merkle_prove(self.LEAVES, 2)
        h01 = node_hash(leaf_hash(b"L0"), leaf_hash(b"L1"))

        assert proof.siblings == ((leaf_hash(b"L3"), Side.RIGHT), (h01, Side.LEFT))
        assert merkle_verify(merkle_root(self.LEAVES), b"L2", proof)

    def test_wrong_leaf_fails(self):
        proof = merkle_prove(self.LEAVES, 2)
        assert not merkle_verify(merkle_root(self.LEAVES), b"L3", proof)

    def test_proof_with_other_index_fails(self):
        proof = dataclasses.replace(merkle_prove(self.LEAVES, 2), leaf_index=3)
        assert not merkle_verify(merkle_root(self.LEAVES), b"L2", proof)

    def test_odd_level_duplicates_last_node(self):
        h = [leaf_hash(x) for x in (b"a", b"b", b"c")]
        expected = node_hash(node_hash(h[0], h[1]), node_hash(h[2], h[2]))
        assert merkle_root([b"a", b"b", b"c"]) == expected

    def test_single_leaf(self):
        proof = merkle_prove([b"only"], 0)
        assert merkle_root([b"only"]) == leaf_hash(b"only")
        assert proof.siblings == ()
        assert merkle_verify(leaf_hash(b"only"), b"only", proof)

    def test_leaf_and_node_domains_differ(self):
        """A 64-byte leaf equal to two concatenated hashes is not an inner node."""
        a, b = leaf_hash(b"a"), leaf_hash(b"b")
        assert leaf_hash(a + b) != node_hash(a, b)

    def test_empty_and_out_of_range(self):
        with pytest.raises(ChainError):
            merkle_root([])
        with pytest.raises(ChainError):
            merkle_prove(self.LEAVES, 4)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.binary(max_size=16), min_size=1, max_size=17), st.data())
    def test_every_proof_verifies(self, leaves, data):
        index = data.draw(st.integers(0, len(leaves) - 1))
        root = merkle_root(leaves)
        proof = merkle_prove(leaves, index)
        assert merkle_verify(root, leaves[index], proof)
        assert merkle_verify(root, leaves[index], proof, leaf_count=len(leaves))

    def test_padded_slot_index_needs_leaf_count_to_fail(self):
        """Index 3 of a three-leaf tree is the padded copy of leaf 2."""
        leaves = [b"a", b"b", b"c"]
        h_ab = node_hash(leaf_hash(b"a"), leaf_hash(b"b"))
        phantom = MerkleProof(leaf_index=3, siblings=((leaf_hash(b"c"), Side.LEFT), (h_ab, Side.LEFT)))
        root = merkle_root(leaves)

        assert merkle_verify(root, b"c", phantom)
        assert not merkle_verify(root, b"c", phantom, leaf_count=3)
        assert merkle_verify(root, b"c", merkle_prove(leaves, 2), leaf_count=3)

    def test_padded_node_must_be_its_own_sibling(self):
        leaves = [b"a", b"b", b"c"]
        proof = merkle_prove(leaves, 2)
        (_, side), upper = proof.siblings
        swapped = dataclasses.replace(proof, siblings=((leaf_hash(b"x"), side), upper))
        assert not merkle_verify(merkle_root(leaves), b"c", swapped, leaf_count=3)

    def test_proof_length_must_match_leaf_count(self):
        proof = merkle_prove(self.LEAVES, 2)
        root = merkle_root(self.LEAVES)
        short = dataclasses.replace(proof, siblings=proof.siblings[:1])
        long = dataclasses.replace(proof, siblings=(*proof.siblings, (root, Side.RIGHT)))

        assert merkle_verify(root, b"L2", proof, leaf_count=4)
        assert not merkle_verify(root, b"L2", short, leaf_count=4)
        assert not merkle_verify(root, b"L2", long, leaf_count=4)
        assert not merkle_verify(root, b"L2", proof, leaf_count=8)
        assert not merkle_verify(root, b"L2", proof, leaf_count=2)


# =============================================================================
# Codec
# =============================================================================


class TestCodec:
    def test_header_is_89_bytes(self):
        header = genesis_template([b"tx"], 8)
        assert HEADER_SIZE == 89
        assert len(encode_header(header)) == 89
        assert decode_header(encode_header(header)) == header

    def test_nonce_is_last_field(self):
        header = genesis_template([b"tx"], 8).with_nonce(0x0102030405060708)
        assert encode_header(header)[-8:] == bytes(range(1, 9))

    def test_block_decode_rejects_truncation(self, small_chain):
        data = encode_block(small_chain.blocks[1])
        assert decode_block(data) == small_chain.blocks[1]
        with pytest.raises(ChainError):
            decode_block(data[:-1])
        with pytest.raises(ChainError):
            decode_block(data[:HEADER_SIZE])

    def test_block_decode_rejects_trailing_bytes(self, small_chain):
        with pytest.raises(ChainError, match="trailing"):
            decode_block(encode_block(small_chain.blocks[1]) + b"\x00")

    def test_golden_genesis_hash(self, golden):
        genesis = golden["genesis"]
        txs = [t.encode() for t in genesis["transactions"]]
        header = genesis_template(txs, genesis["difficulty"])

        assert header.merkle_root.hex() == genesis["merkle_root"]
        assert block_hash(header).hex() == genesis["block_hash"]


# =============================================================================
# Proof of work and mining
# =============================================================================


class TestMining:
    def test_mined_header_meets_difficulty(self, rng):
        template = genesis_template([b"tx"], 8)
        nonce, attempts = mine_classical(template, rng)
        header = template.with_nonce(nonce)

        assert attempts >= 1
        assert pow_check(header)
        assert leading_zero_bits(block_hash(header)) >= 8

    def test_difficulty_zero_takes_one_attempt(self, rng):
        _, attempts = mine_classical(genesis_template([b"tx"], 0), rng)
        assert attempts == 1

    def test_exhaustion_reports_attempts(self, rng):
        with pytest.raises(MiningExhausted) as exc:
            mine_classical(genesis_template([b"tx"], 255), rng, max_attempts=5)
        assert exc.value.attempts == 5

    def test_pow_check_override(self, rng):
        template = genesis_template([b"tx"], 8)
        nonce, _ = mine_classical(template, rng)
        header = template.with_nonce(nonce)
        assert pow_check(header, difficulty=0)
        assert not pow_check(header, difficulty=256)

    @settings(max_examples=100, deadline=None)
    @given(nonce=st.integers(0, 2**64 - 1), difficulty=st.integers(0, 16))
    def test_pow_check_is_monotone(self, nonce, difficulty):
        """Passing at d means passing at every d' <= d, and failing above the digest's zero count."""
        header = genesis_template([b"tx"], 8).with_nonce(nonce)
        zeros = leading_zero_bits(block_hash(header))
        assert pow_check(header, difficulty) == (difficulty <= zeros)
        assert all(pow_check(header, d) for d in range(min(difficulty, zeros) + 1))

    def test_mining_is_deterministic_per_seed(self):
        a, _ = mine_chain(3, 6, np.random.default_rng(11))
        b, _ = mine_chain(3, 6, np.random.default_rng(11))
        assert a == b

    def test_mean_attempts_is_two_to_the_difficulty(self):
        rng = np.random.default_rng(256)
        template = genesis_template([b"tx"], 8)
        total = sum(mine_classical(template, rng)[1] for _ in range(10_000))
        assert abs(total / 10_000 - 256) / 256 < 0.05

    def test_mine_block_links_to_prev(self, small_chain, rng):
        block, _ = mine_block(small_chain.tip, [b"next"], 8, rng)
        assert block.header.prev_hash == block_hash(small_chain.tip.header)
        assert block.header.height == len(small_chain)


# =============================================================================
# Validation
# =============================================================================


class TestValidateChain:
    def test_fresh_chain_is_valid(self, small_chain):
        assert len(small_chain) == 5
        assert validate_chain(small_chain) is None

    def test_empty_chain(self):
        violation = validate_chain(Chain(blocks=()))
        assert violation.reason == ViolationReason.GENESIS

    def test_bad_genesis(self, small_chain):
        genesis = small_chain.blocks[0]
        header = dataclasses.replace(genesis.header, prev_hash=Hash256(b"\x01" * 32))
        violation = validate_chain(_replace_block(small_chain, 0, Block(header, genesis.transactions)))
        assert (violation.index, violation.reason) == (0, ViolationReason.GENESIS)

    def test_transaction_edit_is_merkle_mismatch(self, small_chain):
        block = small_chain.blocks[2]
        edited = Block(block.header, (b"steal everything", *block.transactions[1:]))
        violation = validate_chain(_replace_block(small_chain, 2, edited))
        assert (violation.index, violation.reason) == (2, ViolationReason.MERKLE)

    def test_empty_transaction_list_is_merkle_mismatch(self, small_chain):
        block = small_chain.blocks[1]
        violation = validate_chain(_replace_block(small_chain, 1, Block(block.header, ())))
        assert (violation.index, violation.reason) == (1, ViolationReason.MERKLE)

    def test_nonce_edit_is_pow_failure(self, small_chain):
        block = small_chain.blocks[3]
        nonce = block.header.nonce
        header = block.header
        while pow_check(header):
            nonce = (nonce + 1) % 2**64
            header = block.header.with_nonce(nonce)
        violation = validate_chain(_replace_block(small_chain, 3, Block(header, block.transactions)))
        assert (violation.index, violation.reason) == (3, ViolationReason.POW)

    def test_remined_block_breaks_next_link(self, small_chain, rng):
        """Re-mining block 2 keeps its own PoW valid but orphans block 3."""
        block = small_chain.blocks[2]
        template = dataclasses.replace(block.header, timestamp=block.header.timestamp + 1000)
        nonce, _ = mine_classical(template, rng)
        remined = Block(template.with_nonce(nonce), block.transactions)
        violation = validate_chain(_replace_block(small_chain, 2, remined))
        assert (violation.index, violation.reason) == (3, ViolationReason.LINK)

    def test_height_edit(self, small_chain):
        block = small_chain.blocks[3]
        header = dataclasses.replace(block.header, height=7)
        violation = validate_chain(_replace_block(small_chain, 3, Block(header, block.transactions)))
        assert (violation.index, violation.reason) == (3, ViolationReason.HEIGHT)

    def test_difficulty_edit(self, small_chain):
        block = small_chain.blocks[1]
        header = dataclasses.replace(block.header, difficulty=9)
        violation = validate_chain(_replace_block(small_chain, 1, Block(header, block.transactions)))
        assert (violation.index, violation.reason) == (1, ViolationReason.DIFFICULTY)


# =============================================================================
# Bit flips
# =============================================================================


class TestFlipBit:
    def test_every_sampled_flip_in_middle_block_is_detected(self, small_chain):
        """Block 2 has a successor, so a flip that survives PoW still breaks the link."""
        count = mutable_bit_count(small_chain.blocks[2])
        for bit in range(0, count, 5):
            tampered = flip_bit(small_chain, 2, bit)
            violation = validate_chain(tampered)
            assert violation is not None, f"bit {bit} went undetected"
            assert violation.index in (2, 3)

    def test_double_flip_restores_chain(self, small_chain):
        once = flip_bit(small_chain, 1, 100)
        assert once != small_chain
        assert flip_bit(once, 1, 100) == small_chain

    def test_out_of_range(self, small_chain):
        with pytest.raises(ChainError):
            flip_bit(small_chain, 5, 0)
        with pytest.raises(ChainError):
            flip_bit(small_chain, 0, mutable_bit_count(small_chain.blocks[0]))


@pytest.fixture(scope="module")
def hard_chain():
    """Three blocks at difficulty 16, so a flip survives PoW with odds 2^-16."""
    chain, _ = mine_chain(3, 16, np.random.default_rng(16))
    return chain


class TestFlipBitAtChainEnds:
    def test_genesis_flips_are_detected(self, hard_chain):
        count = mutable_bit_count(hard_chain.blocks[0])
        for bit in range(0, count, 7):
            violation = validate_chain(flip_bit(hard_chain, 0, bit))
            assert violation is not None, f"genesis bit {bit} went undetected"
            assert violation.index in (0, 1)

    def test_tip_flips_are_detected_at_the_tip(self, hard_chain):
        """The tip has no successor, so detection rests on its own checks."""
        last = len(hard_chain) - 1
        count = mutable_bit_count(hard_chain.blocks[last])
        for bit in range(0, count, 7):
            violation = validate_chain(flip_bit(hard_chain, last, bit))
            assert violation is not None, f"tip bit {bit} went undetected"
            assert violation.index == last
