"""Attacker models: Grover-boosted mining, fork races, signature breaking.

The PoW oracle is the genuine SHA-256 header digest evaluated per nonce;
Grover runs on an exact statevector over the nonce space, so puzzles are
capped at 24 nonce bits.  Signatures are Schnorr-style over a small prime
field, and discrete logs are broken by baby-step giant-step (or plain
exhaustion) in place of Shor.
"""
from __future__ import annotations

import functools
import hashlib
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from .chain import (
    block_hash,
    genesis_template,
    leading_zero_bits,
    merkle_root,
    mine_classical,
    nonce_digest_fn,
)
from .config import (
    CITED_BREAK_DATAPOINT,
    DEFAULT_MAX_MINING_ATTEMPTS,
    GENESIS_TRANSACTIONS,
    GOLDEN_GROUP_G,
    GOLDEN_GROUP_P,
    GOLDEN_PRIVATE_KEY,
    GOLDEN_PUZZLE_DIFFICULTY,
    GOLDEN_PUZZLE_NONCE_BITS,
    MAX_TOY_MODULUS,
)
from .errors import AdversaryError, ChainError, UnsolvablePuzzle
from .models import (
    AttackerKind,
    Block,
    BlockHeader,
    Chain,
    MiningPuzzle,
    RaceConfig,
    ToyGroup,
    ToyKeypair,
    ToySignature,
)
from .qsim import grover_state, optimal_iterations
from .seeding import run_batches, spawn_seed

_LOG = logging.getLogger(__name__)

_GROWTH = 6 / 5  # unknown-M schedule growth factor


# =============================================================================
# PoW oracle
# =============================================================================


class PowOracle:
    """Predicate over nonce indices: does the truncated header digest clear
    the puzzle difficulty?"""

    __slots__ = ("puzzle", "_digest")

    def __init__(self, puzzle: MiningPuzzle) -> None:
        self.puzzle = puzzle
        self._digest = nonce_digest_fn(puzzle.template)

    def __call__(self, nonce: int) -> bool:
        if not 0 <= nonce < self.puzzle.search_space:
            raise AdversaryError(f"nonce {nonce} outside the {self.puzzle.nonce_bits}-bit nonce space")
        if self.puzzle.difficulty == 0:
            return True
        truncated = self._digest(nonce)[: self.puzzle.truncate_bytes]
        return leading_zero_bits(truncated) >= self.puzzle.difficulty

    def mask(self) -> np.ndarray:
        """Truth table over the whole nonce space (read-only, cached per puzzle)."""
        return _solution_mask(self.puzzle)


@functools.lru_cache(maxsize=64)
def _solution_mask(puzzle: MiningPuzzle) -> np.ndarray:
    oracle = PowOracle(puzzle)
    size = puzzle.search_space
    mask = np.fromiter((oracle(i) for i in range(size)), dtype=bool, count=size)
    mask.flags.writeable = False
    _LOG.debug("Scanned %d nonces at difficulty %d: %d solutions", size, puzzle.difficulty, int(mask.sum()))
    return mask


def pow_oracle(puzzle: MiningPuzzle) -> PowOracle:
    return PowOracle(puzzle)


def count_solutions(puzzle: MiningPuzzle) -> int:
    """Exhaustive count of marked nonces; 0 is a valid answer."""
    return int(_solution_mask(puzzle).sum())


def puzzle_template(transactions: Sequence[bytes], difficulty: int) -> BlockHeader:
    return genesis_template(transactions, difficulty)


def golden_puzzle() -> MiningPuzzle:
    """Fixed puzzle over the default genesis transactions."""
    return MiningPuzzle(
        template=puzzle_template(GENESIS_TRANSACTIONS, GOLDEN_PUZZLE_DIFFICULTY),
        nonce_bits=GOLDEN_PUZZLE_NONCE_BITS,
        difficulty=GOLDEN_PUZZLE_DIFFICULTY,
    )


def find_puzzle(
    nonce_bits: int,
    difficulty: int,
    target_solutions: int,
    rng: np.random.Generator,
    max_salts: int = 10_000,
) -> MiningPuzzle:
    """Vary a salt transaction until the puzzle has exactly
    ``target_solutions`` marked nonces."""
    for _ in range(max_salts):
        salt = b"salt:" + rng.bytes(8)
        puzzle = MiningPuzzle(
            template=puzzle_template([salt], min(difficulty, 255)),
            nonce_bits=nonce_bits,
            difficulty=difficulty,
        )
        if count_solutions(puzzle) == target_solutions:
            return puzzle
    raise AdversaryError(
        f"no {nonce_bits}-bit puzzle with {target_solutions} solutions at difficulty {difficulty} "
        f"within {max_salts} salts"
    )


# =============================================================================
# Mining attacks
# =============================================================================


@dataclass(frozen=True, slots=True)
class MiningOutcome:
    """``nonce`` is None when the budget ran out.  ``queries`` counts oracle
    invocations (Grover iterations for the quantum miner)."""

    nonce: int | None
    queries: int
    samples: int


def _sampler(probabilities: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probabilities)
    cdf /= cdf[-1]
    return cdf


def _draw(cdf: np.ndarray, rng: np.random.Generator) -> int:
    return min(int(np.searchsorted(cdf, rng.random(), side="right")), cdf.shape[0] - 1)


def grover_mine(puzzle: MiningPuzzle, rng: np.random.Generator, max_samples: int = 1000) -> MiningOutcome:
    """Grover with k = optimal_iterations(N, M), resampled until the measured
    nonce satisfies the oracle.  Each sample costs k oracle queries."""
    mask = _solution_mask(puzzle)
    solutions = int(mask.sum())
    if solutions == 0:
        raise UnsolvablePuzzle(
            f"{puzzle.nonce_bits}-bit puzzle at difficulty {puzzle.difficulty} has no solution"
        )
    k = optimal_iterations(puzzle.search_space, solutions)
    state, _ = grover_state(puzzle.nonce_bits, mask, k)
    cdf = _sampler(state.probabilities())

    queries = 0
    for sample in range(1, max_samples + 1):
        nonce = _draw(cdf, rng)
        queries += k
        if mask[nonce]:
            return MiningOutcome(nonce=nonce, queries=queries, samples=sample)
    _LOG.warning("Grover mining gave up after %d samples", max_samples)
    return MiningOutcome(nonce=None, queries=queries, samples=max_samples)


def grover_mine_unknown(
    puzzle: MiningPuzzle,
    rng: np.random.Generator,
    max_queries: int | None = None,
) -> MiningOutcome:
    """Grover without knowing M: iteration counts drawn uniformly below a
    bound that grows by 6/5 per failure, capped at sqrt(N).

    Every round also pays one classical check of the measured nonce.
    """
    N = puzzle.search_space
    mask = _solution_mask(puzzle)
    budget = max_queries if max_queries is not None else 50 * math.isqrt(N) + 50
    bound = 1.0
    queries = 0
    samples = 0
    while queries < budget:
        k = int(rng.integers(0, max(1, math.ceil(bound))))
        if mask.any():
            state, _ = grover_state(puzzle.nonce_bits, mask, k)
            nonce = _draw(_sampler(state.probabilities()), rng)
        else:
            # nothing marked: the oracle acts as identity and H^n yields uniform
            nonce = int(rng.integers(0, N))
        queries += k + 1
        samples += 1
        if mask[nonce]:
            return MiningOutcome(nonce=nonce, queries=queries, samples=samples)
        bound = min(bound * _GROWTH, math.sqrt(N))
    return MiningOutcome(nonce=None, queries=queries, samples=samples)


def mine_puzzle_classical(
    puzzle: MiningPuzzle,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MAX_MINING_ATTEMPTS,
    batch: int = 4096,
) -> MiningOutcome:
    """Uniform nonce sampling with replacement against the puzzle oracle."""
    mask = _solution_mask(puzzle)
    attempts = 0
    while attempts < max_attempts:
        draw = rng.integers(0, puzzle.search_space, size=min(batch, max_attempts - attempts))
        hits = np.flatnonzero(mask[draw])
        if hits.size:
            first = int(hits[0])
            return MiningOutcome(nonce=int(draw[first]), queries=attempts + first + 1, samples=attempts + first + 1)
        attempts += draw.shape[0]
    return MiningOutcome(nonce=None, queries=attempts, samples=attempts)


def expected_queries(kind: AttackerKind | str, N: int, M: int) -> float:
    """classical: N/M.  grover: (pi/4) sqrt(N/M), unfloored."""
    if not 1 <= M <= N:
        raise AdversaryError(f"need 1 <= M <= N, got N={N}, M={M}")
    if AttackerKind(kind) is AttackerKind.CLASSICAL:
        return N / M
    return math.pi / 4 * math.sqrt(N / M)


@dataclass(frozen=True, slots=True)
class SpeedupPoint:
    nonce_bits: int
    trials: int
    mean_grover_queries: float
    mean_classical_queries: float
    analytic_ratio: float

    @property
    def measured_ratio(self) -> float:
        return self.mean_grover_queries / self.mean_classical_queries

    @property
    def relative_error(self) -> float:
        return abs(self.measured_ratio - self.analytic_ratio) / self.analytic_ratio


def measure_speedup(nonce_bits: int, trials: int, rng: np.random.Generator) -> SpeedupPoint:
    """Mean Grover queries vs mean classical attempts on a single-solution
    puzzle of ``nonce_bits`` nonce bits."""
    puzzle = find_puzzle(nonce_bits, nonce_bits, 1, rng)
    grover_total = 0
    classical_total = 0
    for _ in range(trials):
        grover_total += grover_mine(puzzle, rng).queries
        classical_total += mine_puzzle_classical(puzzle, rng).queries
    N = puzzle.search_space
    point = SpeedupPoint(
        nonce_bits=nonce_bits,
        trials=trials,
        mean_grover_queries=grover_total / trials,
        mean_classical_queries=classical_total / trials,
        analytic_ratio=expected_queries(AttackerKind.GROVER, N, 1) / expected_queries(AttackerKind.CLASSICAL, N, 1),
    )
    _LOG.info(
        "Speedup at %d nonce bits: measured %.5f, analytic %.5f",
        nonce_bits, point.measured_ratio, point.analytic_ratio,
    )
    return point


# =============================================================================
# Fork race
# =============================================================================


def catchup_probability(q: float, z: int) -> float:
    if not 0.0 < q < 1.0:
        raise AdversaryError(f"q must be in (0, 1), got {q}")
    if q >= 0.5:
        return 1.0
    return (q / (1.0 - q)) ** z


def effective_attacker_share(config: RaceConfig) -> float:
    """Attacker's share of block production.

    Classical: q itself.  Grover: each side's block rate is its query
    throughput over its expected queries per block (N/M = 2^difficulty_bits).
    """
    if config.attacker_kind is AttackerKind.CLASSICAL:
        return config.q
    N = 2**config.difficulty_bits
    rate_attacker = config.q / expected_queries(AttackerKind.GROVER, N, 1)
    rate_honest = config.p / expected_queries(AttackerKind.CLASSICAL, N, 1)
    return rate_attacker / (rate_attacker + rate_honest)


@dataclass(frozen=True, slots=True)
class RaceResult:
    config: RaceConfig
    q_eff: float
    successes: int
    analytic: float

    @property
    def frequency(self) -> float:
        return self.successes / self.config.trials


def _race_batch(q_eff: float, z: int, lead_cap: int):
    def run(rng: np.random.Generator, size: int) -> int:
        if z == 0:
            return size
        deficit = np.full(size, z, dtype=np.int64)
        successes = 0
        while deficit.size:
            deficit += np.where(rng.random(deficit.size) < q_eff, -1, 1)
            caught = deficit <= 0
            successes += int(np.count_nonzero(caught))
            deficit = deficit[~caught & (deficit < lead_cap)]
        return successes
    return run


def simulate_race(config: RaceConfig, rng: np.random.Generator) -> RaceResult:
    """Gambler's-ruin walk from ``z`` behind, absorbed at catch-up or at an
    honest lead of ``lead_cap``."""
    q_eff = effective_attacker_share(config)
    batches = run_batches(_race_batch(q_eff, config.z, config.lead_cap), config.trials, spawn_seed(rng))
    result = RaceResult(
        config=config,
        q_eff=q_eff,
        successes=sum(batches),
        analytic=catchup_probability(q_eff, config.z),
    )
    _LOG.debug(
        "Race %s q=%.3f z=%d: %d/%d caught up (q_eff %.4f)",
        config.attacker_kind, config.q, config.z, result.successes, config.trials, q_eff,
    )
    return result


# =============================================================================
# Chain rewrite
# =============================================================================


def rewrite_chain(
    chain: Chain,
    index: int,
    transactions: Sequence[bytes],
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MAX_MINING_ATTEMPTS,
) -> tuple[Chain, int]:
    """Replace block ``index``'s transactions and re-mine it and every
    successor so the forged chain validates.  Returns (chain, attempts)."""
    if not 0 <= index < len(chain):
        raise ChainError(f"block index {index} out of range for a {len(chain)}-block chain")
    blocks: list[Block] = list(chain.blocks[:index])
    total = 0
    for i in range(index, len(chain)):
        original = chain.blocks[i]
        txs = tuple(transactions) if i == index else original.transactions
        template = BlockHeader(
            prev_hash=block_hash(blocks[-1].header) if blocks else original.header.prev_hash,
            merkle_root=merkle_root(txs),
            nonce=0,
            difficulty=original.header.difficulty,
            height=original.header.height,
            timestamp=original.header.timestamp,
        )
        nonce, attempts = mine_classical(template, rng, max_attempts)
        blocks.append(Block(header=template.with_nonce(nonce), transactions=txs))
        total += attempts
    _LOG.info("Rewrote %d blocks from index %d in %d attempts", len(chain) - index, index, total)
    return Chain(blocks=tuple(blocks)), total


def rewrite_cost(blocks: int, difficulty: int, kind: AttackerKind | str) -> float:
    """Expected oracle queries to re-mine ``blocks`` blocks."""
    return blocks * expected_queries(kind, 2**difficulty, 1)


# =============================================================================
# Toy discrete-log groups
# =============================================================================

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 3.3e24."""
    if n < 2:
        return False
    for b in _MR_BASES:
        if n % b == 0:
            return n == b
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def prime_factors(n: int) -> list[int]:
    factors = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            factors.append(f)
            while n % f == 0:
                n //= f
        f += 1 if f == 2 else 2
    if n > 1:
        factors.append(n)
    return factors


def multiplicative_order(g: int, p: int) -> int:
    order = p - 1
    for f in prime_factors(p - 1):
        while order % f == 0 and pow(g, order // f, p) == 1:
            order //= f
    return order


def primitive_root(p: int) -> int:
    factors = prime_factors(p - 1)
    for g in range(2, p):
        if all(pow(g, (p - 1) // f, p) != 1 for f in factors):
            return g
    raise AdversaryError(f"no primitive root mod {p}")


def make_group(p: int, g: int | None = None) -> ToyGroup:
    if not 5 <= p <= MAX_TOY_MODULUS or not is_prime(p):
        raise AdversaryError(f"modulus must be a prime in 5..2^32, got {p}")
    if g is None:
        g = primitive_root(p)
    if not 2 <= g < p:
        raise AdversaryError(f"generator must be in 2..p-1, got {g}")
    return ToyGroup(p=p, g=g, order=multiplicative_order(g, p))


def random_group(bits: int, rng: np.random.Generator) -> ToyGroup:
    """Random prime with exactly ``bits`` bits, with its smallest primitive root."""
    if not 4 <= bits <= 32:
        raise AdversaryError(f"group bits must be in 4..32, got {bits}")
    while True:
        candidate = int(rng.integers(2 ** (bits - 1), 2**bits)) | 1
        if candidate <= MAX_TOY_MODULUS and is_prime(candidate):
            return make_group(candidate)


def golden_keypair() -> ToyKeypair:
    group = make_group(GOLDEN_GROUP_P, GOLDEN_GROUP_G)
    return ToyKeypair(group=group, x=GOLDEN_PRIVATE_KEY, y=pow(group.g, GOLDEN_PRIVATE_KEY, group.p))


def generate_keypair(group: ToyGroup, rng: np.random.Generator) -> ToyKeypair:
    x = int(rng.integers(1, group.p - 1))
    return ToyKeypair(group=group, x=x, y=pow(group.g, x, group.p))


# =============================================================================
# Signatures
# =============================================================================


def _challenge(r: int, y: int, message: bytes, order: int) -> int:
    digest = hashlib.sha256(r.to_bytes(4, "big") + y.to_bytes(4, "big") + message).digest()
    return int.from_bytes(digest, "big") % order


def toy_sign(keypair: ToyKeypair, message: bytes) -> ToySignature:
    """Deterministic Schnorr signature; a zero nonce bumps the counter."""
    group = keypair.group
    counter = 0
    while True:
        seed = b"qchain-nonce" + keypair.x.to_bytes(4, "big") + counter.to_bytes(4, "big") + message
        k = int.from_bytes(hashlib.sha256(seed).digest(), "big") % group.order
        if k:
            break
        counter += 1
    r = pow(group.g, k, group.p)
    e = _challenge(r, keypair.y, message, group.order)
    return ToySignature(r=r, s=(k + e * keypair.x) % group.order)


def toy_verify(public: int, message: bytes, signature: ToySignature, group: ToyGroup) -> bool:
    """Accept iff g^s == r * y^e (mod p)."""
    p = group.p
    if not (1 <= public < p and 1 <= signature.r < p and 0 <= signature.s < group.order):
        return False
    e = _challenge(signature.r, public, message, group.order)
    return pow(group.g, signature.s, p) == signature.r * pow(public, e, p) % p


def solve_discrete_log(y: int, group: ToyGroup, method: str = "bsgs") -> tuple[int, int]:
    """Smallest x in [0, order) with g^x = y (mod p).  Returns (x, steps)."""
    p, g, order = group.p, group.g, group.order
    if not 1 <= y < p:
        raise AdversaryError(f"public key must be in 1..p-1, got {y}")

    if method == "exhaustive":
        acc = 1
        for x in range(order):
            if acc == y:
                return x, x + 1
            acc = acc * g % p
    elif method == "bsgs":
        m = math.isqrt(order - 1) + 1
        baby: dict[int, int] = {}
        acc = 1
        for j in range(m):
            baby.setdefault(acc, j)
            acc = acc * g % p
        giant = pow(g, -m, p)
        gamma = y
        for i in range(m):
            j = baby.get(gamma)
            if j is not None:
                return i * m + j, m + i + 1
            gamma = gamma * giant % p
    else:
        raise AdversaryError(f"unknown discrete-log method {method!r}")
    raise AdversaryError(f"{y} is not in the subgroup generated by {g} mod {p}")


def break_key(public: int, group: ToyGroup, method: str = "bsgs") -> int:
    """Recover a private exponent from the public key."""
    x, steps = solve_discrete_log(public, group, method)
    _LOG.info("Broke key y=%d mod %d in %d steps (%s)", public, group.p, steps, method)
    return x


def forge_keypair(public: int, group: ToyGroup) -> ToyKeypair:
    """Keypair rebuilt from a broken public key, ready to sign."""
    x = break_key(public, group)
    if x == 0:
        raise AdversaryError("public key 1 has private exponent 0, which cannot sign")
    return ToyKeypair(group=group, x=x, y=public)


@dataclass(frozen=True, slots=True)
class TheftWindow:
    break_ticks: int
    confirmation_ticks: int
    forged_valid: bool

    @property
    def succeeds(self) -> bool:
        return self.forged_valid and self.break_ticks < self.confirmation_ticks


def theft_window(
    break_steps: int,
    ops_per_tick: int,
    confirmation_depth: int,
    block_interval: int,
    forged_valid: bool,
) -> TheftWindow:
    """Does the key break finish before the victim's spend confirms?"""
    if ops_per_tick < 1:
        raise AdversaryError(f"ops_per_tick must be >= 1, got {ops_per_tick}")
    return TheftWindow(
        break_ticks=math.ceil(break_steps / ops_per_tick),
        confirmation_ticks=confirmation_depth * block_interval,
        forged_valid=forged_valid,
    )


# =============================================================================
# Threat report
# =============================================================================


def threat_report(assumptions: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Cited resource datapoint plus any measured toy-scale values, keyed
    in sorted order.  Nothing is extrapolated."""
    report: dict[str, Any] = {"cited_datapoint": dict(CITED_BREAK_DATAPOINT)}
    if assumptions:
        report["measured"] = {key: assumptions[key] for key in sorted(assumptions)}
    return report
