"""Named experiments wiring the modules together.

Each runner fills a Report with metrics, digests and pass/fail
expectations.  Every random stream is derived from the master seed and a
label, so runs are reproducible and scenarios do not share draws.
"""
from __future__ import annotations

import logging
import time
from collections.abc import Callable

import numpy as np

from . import adversary, chain, consensus, qkd, qsim
from .config import (
    DEFAULT_ABORT_THRESHOLD,
    GOLDEN_MESSAGE,
    ITERATION_TOLERANCE,
    NORM_TOLERANCE,
)
from .errors import ConfigError
from .models import (
    AttackerKind,
    BlockHeader,
    MiningPuzzle,
    Outcome,
    QKDConfig,
    RaceConfig,
    ScenarioConfig,
    ToyKeypair,
    ToySignature,
    Topology,
)
from .network import payload_digest
from .report import Report
from .seeding import make_rng

_LOG = logging.getLogger(__name__)

Runner = Callable[[ScenarioConfig, Report], None]

# acceptance thresholds
SPEEDUP_TOLERANCE: float = 0.15
RACE_TOLERANCE: float = 0.02
QBER_FULL_INTERCEPT: tuple[float, float] = (0.23, 0.27)
SAMPLE_RESIDUAL_TOLERANCE: float = 0.03
FAIRNESS_BAND: tuple[float, float] = (0.48, 0.52)
FORGERY_DETECTION_FLOOR: float = 0.999
STATISTICS_MIN_QUBITS: int = 100_000
STATISTICS_MIN_ROUNDS: int = 10_000


def _label(value: float) -> str:
    return format(value, "g")


# =============================================================================
# grover-demo
# =============================================================================


def _run_grover_demo(config: ScenarioConfig, report: Report) -> None:
    p = config.params
    n, marked = p["n"], p["marked"]
    N = 2**n
    rng = make_rng(config.master_seed, "grover-demo")

    targets = np.sort(rng.choice(N, size=marked, replace=False))
    mask = np.zeros(N, dtype=bool)
    mask[targets] = True
    plan = qsim.grover_plan(N, marked)
    state, _ = qsim.grover_state(n, mask, plan.iterations)
    mass = qsim.marked_mass(state, mask)
    analytic = qsim.grover_success_probability(N, marked, plan.iterations)
    hits = int(np.count_nonzero(mask[qsim.sample_indices(state, p["shots"], rng)]))

    report.metric("search_space", N)
    report.metric("marked", marked)
    report.metric("iterations", plan.iterations)
    report.metric("theta", plan.theta, "rad")
    report.metric("marked_mass", mass)
    report.metric("analytic_success", analytic)
    report.metric("empirical_success", hits / p["shots"])
    report.digests["marked_indices"] = payload_digest(targets.tolist())
    report.expect(
        "marked_mass_matches_analytic",
        abs(mass - analytic) <= ITERATION_TOLERANCE,
        f"|{mass!r} - {analytic!r}| <= {ITERATION_TOLERANCE}",
    )

    worst_error = 0.0
    worst_norm = 0.0
    checked = 0
    for size in range(2, p["sweep_max_n"] + 1):
        for m in p["sweep_marked"]:
            if m > 2**size:
                continue
            sweep_mask = np.zeros(2**size, dtype=bool)
            sweep_mask[:m] = True
            for k in range(qsim.optimal_iterations(2**size, m) + 1):
                swept, _ = qsim.grover_state(size, sweep_mask, k)
                error = abs(qsim.marked_mass(swept, sweep_mask) - qsim.grover_success_probability(2**size, m, k))
                worst_error = max(worst_error, error)
                worst_norm = max(worst_norm, abs(swept.norm() - 1.0))
                checked += 1
    report.metric("sweep_cases", checked)
    report.metric("sweep_max_error", worst_error)
    report.metric("sweep_max_norm_drift", worst_norm)
    report.expect("sweep_matches_analytic", worst_error <= ITERATION_TOLERANCE, f"max error {worst_error!r}")
    report.expect("sweep_preserves_norm", worst_norm <= NORM_TOLERANCE, f"max drift {worst_norm!r}")


# =============================================================================
# mine-race
# =============================================================================


def _run_mine_race(config: ScenarioConfig, report: Report) -> None:
    p = config.params
    seed = config.master_seed

    golden = adversary.golden_puzzle()
    report.metric("golden_puzzle_solutions", adversary.count_solutions(golden))

    template = chain.genesis_template([b"mine-race classical baseline"], 8)
    rng = make_rng(seed, "mine-race", "classical")
    attempts = [chain.mine_classical(template, rng)[1] for _ in range(p["trials"])]
    report.metric("classical_mean_attempts_t8", float(np.mean(attempts)), "hashes")

    worst_speedup = 0.0
    for bits in p["nonce_bits"]:
        point = adversary.measure_speedup(bits, p["trials"], make_rng(seed, "speedup", bits))
        report.metric(f"grover_mean_queries.n{bits}", point.mean_grover_queries, "queries")
        report.metric(f"classical_mean_queries.n{bits}", point.mean_classical_queries, "queries")
        report.metric(f"query_ratio.n{bits}", point.measured_ratio)
        report.metric(f"analytic_ratio.n{bits}", point.analytic_ratio)
        worst_speedup = max(worst_speedup, point.relative_error)
    report.expect(
        "speedup_tracks_inverse_sqrt_n",
        worst_speedup <= SPEEDUP_TOLERANCE,
        f"worst relative error {worst_speedup:.4f}",
    )

    worst_race = 0.0
    for qi, q in enumerate(p["q"]):
        for z in p["z"]:
            race = RaceConfig(q=q, z=z, trials=p["race_trials"], lead_cap=p["lead_cap"])
            result = adversary.simulate_race(race, make_rng(seed, "race", qi, z))
            report.metric(f"catchup.q{_label(q)}.z{z}", result.frequency)
            worst_race = max(worst_race, abs(result.frequency - result.analytic))
    report.expect("classical_race_matches_catchup", worst_race <= RACE_TOLERANCE, f"worst gap {worst_race:.4f}")

    quantum = RaceConfig(
        q=0.5,
        z=max(p["z"]),
        attacker_kind=AttackerKind.GROVER,
        trials=p["race_trials"],
        difficulty_bits=p["grover_difficulty"],
        lead_cap=p["lead_cap"],
    )
    result = adversary.simulate_race(quantum, make_rng(seed, "race", "grover"))
    report.metric("grover_q_eff", result.q_eff)
    report.metric("grover_catchup", result.frequency)
    report.expect("grover_attacker_dominates", result.frequency > 0.99, f"frequency {result.frequency:.4f}")


# =============================================================================
# bb84
# =============================================================================


def _run_bb84(config: ScenarioConfig, report: Report) -> None:
    p = config.params
    n = p["n_qubits"]
    qbers = []
    for i, f in enumerate(p["eve_fraction"]):
        qkd_config = QKDConfig(
            n_qubits=n,
            eve_fraction=f,
            sample_fraction=p["sample_fraction"],
            abort_threshold=p["abort_threshold"],
        )
        session = qkd.bb84_run(qkd_config, make_rng(config.master_seed, "bb84", i))
        tag = _label(f)
        qbers.append(session.qber_estimate)
        report.metric(f"sifted_bits.f{tag}", int(session.sifted_key_a.shape[0]), "bits")
        report.metric(f"qber.f{tag}", session.qber_estimate)
        report.metric(f"residual_error.f{tag}", session.residual_error_rate)
        report.metric(f"aborted.f{tag}", session.aborted)
        report.metric(f"final_key_bits.f{tag}", int(session.final_key.shape[0]), "bits")
        report.digests[f"session.f{tag}"] = payload_digest(session.to_dict())

        report.expect(
            f"abort_rule.f{tag}",
            session.aborted == (session.qber_estimate > p["abort_threshold"])
            and (not session.aborted or session.final_key.shape[0] == 0),
        )
        if f == 0.0:
            report.expect(
                "no_eavesdropper_no_errors",
                session.qber_estimate == 0.0
                and np.array_equal(session.sifted_key_a, session.sifted_key_b)
                and session.keys_match,
            )
        if n >= STATISTICS_MIN_QUBITS:
            gap = abs(session.qber_estimate - session.residual_error_rate)
            report.expect(f"sample_predicts_residual.f{tag}", gap <= SAMPLE_RESIDUAL_TOLERANCE, f"gap {gap:.4f}")
            if f == 1.0:
                lo, hi = QBER_FULL_INTERCEPT
                report.expect(
                    "full_intercept_qber", lo <= session.qber_estimate <= hi, f"qber {session.qber_estimate:.4f}"
                )

    order = np.argsort(p["eve_fraction"], kind="stable")
    ordered = [qbers[i] for i in order]
    report.expect(
        "qber_nondecreasing_in_f",
        all(a <= b + SAMPLE_RESIDUAL_TOLERANCE for a, b in zip(ordered, ordered[1:])),
    )


# =============================================================================
# ghz-consensus
# =============================================================================


def _ghz_rounds(topology: Topology, rounds: int, rng: np.random.Generator) -> tuple[int, int, int, str]:
    """Returns (agreed rounds, rounds agreeing on 1, rounds exposing a liar,
    folded transcript digest)."""
    agreed = ones = exposed = 0
    digests = []
    for r in range(rounds):
        result = consensus.ghz_consensus_round(topology, rng, round_id=r)
        if result.outcome is Outcome.AGREED:
            agreed += 1
            ones += result.bit
        exposed += bool(result.suspects)
        digests.append(result.transcript_digest)
    return agreed, ones, exposed, consensus.transcript_hash(digests)


def _run_ghz_consensus(config: ScenarioConfig, report: Report) -> None:
    p = config.params
    topology = Topology(node_count=p["nodes"], byzantine=frozenset(p["byzantine"]))
    rounds = p["rounds"]
    agreed, ones, exposed, digest = _ghz_rounds(topology, rounds, make_rng(config.master_seed, "ghz"))

    report.metric("nodes", topology.node_count)
    report.metric("byzantine", len(topology.byzantine))
    report.metric("agreement_rate", agreed / rounds)
    report.metric("ones_frequency", ones / agreed if agreed else 0.0)
    report.metric("rounds_exposing_liar", exposed)
    report.digests["transcript"] = digest
    report.expect("honest_always_agree", agreed == rounds, f"{agreed}/{rounds}")
    if rounds >= STATISTICS_MIN_ROUNDS and agreed:
        lo, hi = FAIRNESS_BAND
        report.expect("coin_is_fair", lo <= ones / agreed <= hi, f"frequency {ones / agreed:.4f}")


# =============================================================================
# dba
# =============================================================================


def _run_dba(config: ScenarioConfig, report: Report) -> None:
    p = config.params
    length, trials = p["list_length"], p["trials"]
    rng = make_rng(config.master_seed, "dba")
    Sender, Receiver = consensus.SenderBehavior, consensus.ReceiverBehavior

    complete = detected = resisted = split = flagged = 0
    for _ in range(trials):
        bit = int(rng.integers(0, 2))
        result = consensus.detectable_broadcast(consensus.deal_correlated_lists(length, rng), bit, rng)
        complete += all(d == bit for d in result.decisions.values())
    for _ in range(trials):
        bit = int(rng.integers(0, 2))
        result = consensus.detectable_broadcast(
            consensus.deal_correlated_lists(length, rng), bit, rng, sender=Sender.EQUIVOCATE
        )
        detected += all(d is None for d in result.decisions.values())
    for _ in range(trials):
        bit = int(rng.integers(0, 2))
        result = consensus.detectable_broadcast(
            consensus.deal_correlated_lists(length, rng),
            bit,
            rng,
            receivers=(Receiver.FORGE, Receiver.HONEST),
        )
        resisted += result.decisions[consensus.RECEIVERS[1]] == bit
    for _ in range(trials):
        bit = int(rng.integers(0, 2))
        result = consensus.detectable_broadcast(
            consensus.deal_correlated_lists(length, rng), bit, rng, sender=Sender.PARTIAL_LIE
        )
        split += result.outcome is Outcome.DISAGREEMENT
        flagged += result.outcome is Outcome.DETECTED_FAULT

    report.metric("list_length", length)
    report.metric("forward_tolerance", consensus.FORWARD_TOLERANCE)
    report.metric("completeness_rate", complete / trials)
    report.metric("equivocation_detection_rate", detected / trials)
    report.metric("forgery_resistance_rate", resisted / trials)
    report.metric("forgery_bound", consensus.forgery_acceptance_probability(length))
    report.metric("partial_lie_split_rate", split / trials)
    report.metric("partial_lie_detection_rate", flagged / trials)
    report.metric("split_bound", consensus.split_bound())
    report.expect("completeness", complete == trials, f"{complete}/{trials}")
    report.expect("equivocation_detected", detected == trials, f"{detected}/{trials}")
    report.expect(
        "forgery_resisted", resisted / trials >= FORGERY_DETECTION_FLOOR, f"{resisted}/{trials}"
    )
    report.expect("partial_lie_never_splits", split == 0, f"{split}/{trials}")

    value = p["value"].encode("utf-8")
    honest = consensus.agree_on_value(Topology(node_count=3), value, rng, length)
    traitor = consensus.agree_on_value(Topology(node_count=3, byzantine=frozenset({0})), value, rng, length)
    liar = consensus.agree_on_value(
        Topology(node_count=3, byzantine=frozenset({0})), value, rng, length, Sender.PARTIAL_LIE
    )
    report.metric("value_sub_rounds", honest.sub_rounds)
    report.metric("value_outcome_honest", honest.outcome)
    report.metric("value_outcome_traitor_sender", traitor.outcome)
    report.metric("value_outcome_partial_lie_sender", liar.outcome)
    report.digests["value_agreement"] = honest.transcript_digest
    report.expect(
        "value_agreed",
        honest.outcome is Outcome.AGREED and all(v == value for v in honest.decisions.values()),
    )
    report.expect("traitor_sender_flagged", traitor.outcome is Outcome.DETECTED_FAULT)
    report.expect("partial_lie_sender_consistent", liar.outcome is not Outcome.DISAGREEMENT)

    baseline = consensus.classical_baseline_scenario(Topology(node_count=3, byzantine=frozenset({0})), rng)
    report.metric("classical_baseline_outcome", baseline.outcome)
    report.metric("classical_baseline_indistinguishable", baseline.indistinguishable)
    report.digests["classical_baseline"] = baseline.transcript_digest
    report.details["classical_baseline"] = baseline.to_dict()
    report.expect(
        "classical_baseline_splits_undetectably",
        baseline.outcome is Outcome.DISAGREEMENT and bool(baseline.indistinguishable),
    )


# =============================================================================
# sign-attack
# =============================================================================


def _run_sign_attack(config: ScenarioConfig, report: Report) -> None:
    p = config.params
    keypairs = p["keypairs"]
    message = p["message"].encode("utf-8")
    rng = make_rng(config.master_seed, "sign-attack")

    genuine = recovered = forged = 0
    steps_total = 0
    for _ in range(keypairs):
        group = adversary.random_group(p["group_bits"], rng)
        victim = adversary.generate_keypair(group, rng)
        genuine += adversary.toy_verify(victim.y, message, adversary.toy_sign(victim, message), group)
        x, steps = adversary.solve_discrete_log(victim.y, group)
        steps_total += steps
        if pow(group.g, x, group.p) == victim.y:
            recovered += 1
            thief = ToyKeypair(group=group, x=x, y=victim.y)
            forged += adversary.toy_verify(victim.y, message, adversary.toy_sign(thief, message), group)

    golden = adversary.golden_keypair()
    signature = adversary.toy_sign(golden, GOLDEN_MESSAGE)
    random_accepts = 0
    for _ in range(p["forgery_attempts"]):
        guess = ToySignature(
            r=int(rng.integers(1, golden.group.p)),
            s=int(rng.integers(0, golden.group.order)),
        )
        random_accepts += adversary.toy_verify(golden.y, message, guess, golden.group)

    report.metric("keypairs", keypairs)
    report.metric("genuine_verified", genuine)
    report.metric("keys_recovered", recovered)
    report.metric("forgeries_verified", forged)
    report.metric("mean_break_steps", steps_total / keypairs, "group ops")
    report.metric("random_forgery_accepts", random_accepts)
    report.digests["golden_signature"] = signature.to_bytes().hex()
    report.details["threat_report"] = adversary.threat_report(
        {"group_bits": p["group_bits"], "keys_recovered": recovered, "mean_break_steps": steps_total / keypairs}
    )
    report.expect("signatures_complete", genuine == keypairs, f"{genuine}/{keypairs}")
    report.expect("all_keys_recovered", recovered == keypairs, f"{recovered}/{keypairs}")
    report.expect("recovered_keys_forge", forged == keypairs, f"{forged}/{keypairs}")
    report.expect("random_forgeries_rejected", random_accepts == 0, f"{random_accepts} accepted")


# =============================================================================
# tamper
# =============================================================================


def _run_tamper(config: ScenarioConfig, report: Report) -> None:
    p = config.params
    rng = make_rng(config.master_seed, "tamper")
    mined, attempts = chain.mine_chain(p["blocks"], p["difficulty"], rng)
    report.metric("mining_attempts", attempts, "hashes")
    report.digests["tip"] = chain.block_hash(mined.tip.header).hex()
    report.expect("fresh_chain_valid", chain.validate_chain(mined) is None)

    misses = early = 0
    reasons: dict[str, int] = {}
    for _ in range(p["mutations"]):
        index = int(rng.integers(0, len(mined)))
        bit = int(rng.integers(0, chain.mutable_bit_count(mined.blocks[index])))
        violation = chain.validate_chain(chain.flip_bit(mined, index, bit))
        if violation is None:
            misses += 1
            continue
        early += violation.index < index
        reasons[violation.reason.value] = reasons.get(violation.reason.value, 0) + 1

    report.metric("mutations", p["mutations"])
    report.metric("undetected", misses)
    report.metric("reported_before_mutation", early)
    report.details["violation_reasons"] = dict(sorted(reasons.items()))
    report.expect("every_mutation_detected", misses == 0, f"{misses} undetected")
    report.expect("violation_at_or_after_mutation", early == 0, f"{early} early")


# =============================================================================
# full-demo
# =============================================================================


def _run_full_demo(config: ScenarioConfig, report: Report) -> None:
    p = config.params
    seed = config.master_seed

    # 1. honest chain
    mined, attempts = chain.mine_chain(p["blocks"], p["difficulty"], make_rng(seed, "full-demo", "chain"))
    report.metric("chain_blocks", len(mined))
    report.metric("chain_mining_attempts", attempts, "hashes")
    report.digests["genesis"] = chain.block_hash(mined.blocks[0].header).hex()
    report.digests["tip"] = chain.block_hash(mined.tip.header).hex()
    report.expect("chain_valid", chain.validate_chain(mined) is None)

    # 2. Grover miner races for the next block
    rng = make_rng(seed, "full-demo", "grover")
    height = mined.tip.header.height + 1
    next_txs = chain.default_transactions(height)
    puzzle = MiningPuzzle(
        template=BlockHeader(
            prev_hash=chain.block_hash(mined.tip.header),
            merkle_root=chain.merkle_root(next_txs),
            nonce=0,
            difficulty=p["difficulty"],
            height=height,
            timestamp=height,
        ),
        nonce_bits=p["nonce_bits"],
        difficulty=p["difficulty"],
    )
    solutions = adversary.count_solutions(puzzle)
    oracle = adversary.pow_oracle(puzzle)
    grover = [adversary.grover_mine(puzzle, rng) for _ in range(p["grover_trials"])]
    classical = [adversary.mine_puzzle_classical(puzzle, rng) for _ in range(p["grover_trials"])]
    grover_mean = float(np.mean([o.queries for o in grover]))
    classical_mean = float(np.mean([o.queries for o in classical]))
    N = puzzle.search_space
    report.metric("next_block_solutions", solutions)
    report.metric("grover_mean_queries", grover_mean, "queries")
    report.metric("classical_mean_queries", classical_mean, "queries")
    report.metric("grover_expected_queries", adversary.expected_queries(AttackerKind.GROVER, N, solutions), "queries")
    report.metric(
        "classical_expected_queries", adversary.expected_queries(AttackerKind.CLASSICAL, N, solutions), "queries"
    )
    report.expect(
        "grover_nonces_valid",
        all(o.nonce is not None and oracle(o.nonce) for o in grover),
    )

    index = len(mined) // 2
    forged_chain, rewrite_attempts = adversary.rewrite_chain(mined, index, [b"attacker rewrites history"], rng)
    rewritten = len(mined) - index
    report.metric("rewrite_blocks", rewritten)
    report.metric("rewrite_attempts", rewrite_attempts, "hashes")
    report.metric("rewrite_cost_classical", adversary.rewrite_cost(rewritten, p["difficulty"], "classical"), "queries")
    report.metric("rewrite_cost_grover", adversary.rewrite_cost(rewritten, p["difficulty"], "grover"), "queries")
    report.expect("rewritten_chain_validates", chain.validate_chain(forged_chain) is None)

    # 3. signature theft
    rng = make_rng(seed, "full-demo", "theft")
    group = adversary.random_group(p["group_bits"], rng)
    victim = adversary.generate_keypair(group, rng)
    spend = b"victim pays bob 10 coins"
    signature = adversary.toy_sign(victim, spend)
    report.expect("victim_spend_verifies", adversary.toy_verify(victim.y, spend, signature, group))
    x, steps = adversary.solve_discrete_log(victim.y, group)
    theft = b"victim pays mallory 10 coins"
    forged_sig = adversary.toy_sign(ToyKeypair(group=group, x=x, y=victim.y), theft)
    window = adversary.theft_window(
        steps,
        p["attacker_ops_per_tick"],
        p["confirmation_depth"],
        p["block_interval"],
        adversary.toy_verify(victim.y, theft, forged_sig, group),
    )
    report.metric("break_steps", steps, "group ops")
    report.metric("break_ticks", window.break_ticks, "ticks")
    report.metric("confirmation_ticks", window.confirmation_ticks, "ticks")
    report.metric("theft_succeeds", window.succeeds)
    report.expect("forged_theft_verifies", window.forged_valid)
    confirmation_ticks = p["confirmation_depth"] * p["block_interval"]
    report.expect(
        "theft_matches_raw_timing",
        window.succeeds == (window.forged_valid and steps <= (confirmation_ticks - 1) * p["attacker_ops_per_tick"]),
        f"{steps} ops at {p['attacker_ops_per_tick']}/tick vs {confirmation_ticks} ticks",
    )
    # confirmations at or before the break, then one block after it
    shallow_depth = window.break_ticks // p["block_interval"]
    shallow = adversary.theft_window(
        steps, p["attacker_ops_per_tick"], shallow_depth, p["block_interval"], window.forged_valid
    )
    deep = adversary.theft_window(
        steps, p["attacker_ops_per_tick"], shallow_depth + 1, p["block_interval"], window.forged_valid
    )
    report.metric("theft_succeeds_shallow_confirmation", shallow.succeeds)
    report.metric("theft_succeeds_deep_confirmation", deep.succeeds)
    report.expect("theft_fails_when_confirmed_first", not shallow.succeeds, f"depth {shallow_depth}")
    report.expect(
        "theft_succeeds_when_break_is_first", deep.succeeds == window.forged_valid, f"depth {shallow_depth + 1}"
    )

    # 4. QKD-protected link between nodes 0 and 1
    rng = make_rng(seed, "full-demo", "qkd")
    session = qkd.bb84_run(QKDConfig(n_qubits=p["qkd_qubits"], eve_fraction=p["eve_fraction"]), rng)
    report.metric("qkd_qber", session.qber_estimate)
    report.metric("qkd_aborted", session.aborted)
    report.digests["qkd_session"] = payload_digest(session.to_dict())
    if session.aborted:
        report.expect("qkd_abort_rule", session.qber_estimate > DEFAULT_ABORT_THRESHOLD)
    else:
        messages = [chain.block_hash(mined.tip.header), p["dba_value"].encode("utf-8")]
        transfers = qkd.protect_link_messages(session, messages)
        intact = sum(t.intact for t in transfers)
        report.metric("link_messages_intact", intact)
        if p["eve_fraction"] == 0.0:
            report.expect("link_delivers_intact", intact == len(messages), f"{intact}/{len(messages)}")

    # 5. consensus on the next block
    topology = Topology(node_count=p["nodes"], byzantine=frozenset(p["byzantine"]))
    agreed, ones, _, digest = _ghz_rounds(topology, p["ghz_rounds"], make_rng(seed, "full-demo", "ghz"))
    report.metric("ghz_agreement_rate", agreed / p["ghz_rounds"])
    report.digests["ghz_transcript"] = digest
    report.expect("ghz_honest_agree", agreed == p["ghz_rounds"])

    value = p["dba_value"].encode("utf-8")
    agreement = consensus.agree_on_value(
        Topology(node_count=3), value, make_rng(seed, "full-demo", "dba"), p["list_length"]
    )
    report.metric("dba_outcome", agreement.outcome)
    report.metric("dba_sub_rounds", agreement.sub_rounds)
    report.digests["dba_transcript"] = agreement.transcript_digest
    report.expect("dba_agreed", agreement.outcome is Outcome.AGREED)

    report.details["threat_report"] = adversary.threat_report(
        {
            "break_steps": steps,
            "grover_query_ratio": grover_mean / classical_mean,
            "rewrite_speedup": adversary.rewrite_cost(rewritten, p["difficulty"], "classical")
            / adversary.rewrite_cost(rewritten, p["difficulty"], "grover"),
        }
    )


# =============================================================================
# Dispatch
# =============================================================================

SCENARIOS: dict[str, Runner] = {
    "grover-demo": _run_grover_demo,
    "mine-race": _run_mine_race,
    "bb84": _run_bb84,
    "ghz-consensus": _run_ghz_consensus,
    "dba": _run_dba,
    "sign-attack": _run_sign_attack,
    "tamper": _run_tamper,
    "full-demo": _run_full_demo,
}


def run_scenario(config: ScenarioConfig) -> Report:
    """Run a validated scenario and return its report.

    Module precondition errors propagate unchanged.
    """
    runner = SCENARIOS.get(config.name)
    if runner is None:
        raise ConfigError("scenario", f"unknown scenario {config.name!r}")

    report = Report(scenario=config.name, seed=config.master_seed, config=config.to_dict())
    _LOG.info("Running scenario %s (seed %d)", config.name, config.master_seed)
    started = time.perf_counter()
    runner(config, report)
    report.wall_time = time.perf_counter() - started

    for failure in report.failures:
        _LOG.warning("Expectation failed: %s %s", failure.name, failure.detail)
    _LOG.info(
        "Scenario %s finished in %.2fs: %s",
        config.name, report.wall_time, "passed" if report.passed else "FAILED",
    )
    return report
