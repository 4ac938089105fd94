"""Configuration parsing and constants.

Leaf module -- imports only qchain.errors and qchain.models.
"""
from __future__ import annotations

import json
import logging
import os
from collections.abc import Callable, Mapping
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .models import ScenarioConfig

_LOG = logging.getLogger(__name__)

# =============================================================================
# Simulation limits and tolerances
# =============================================================================

MAX_QUBITS: int = 24
NORM_TOLERANCE: float = 1e-12
ITERATION_TOLERANCE: float = 1e-9
MAX_TOY_MODULUS: int = 2**32
DEFAULT_MAX_MINING_ATTEMPTS: int = 10_000_000

# =============================================================================
# Protocol defaults
# =============================================================================

DEFAULT_ABORT_THRESHOLD: float = 0.11
DEFAULT_SAMPLE_FRACTION: float = 0.5
DEFAULT_LIST_LENGTH: int = 128
RACE_LEAD_CAP: int = 200
GENESIS_TRANSACTIONS: tuple[bytes, ...] = (b"qchain genesis",)
DEFAULT_CHAIN_DIFFICULTY: int = 8

# Golden fixtures frozen in tests/golden/default.json.
GOLDEN_PUZZLE_NONCE_BITS: int = 12
GOLDEN_PUZZLE_DIFFICULTY: int = 4
GOLDEN_GROUP_P: int = 2_147_483_647
GOLDEN_GROUP_G: int = 7
GOLDEN_PRIVATE_KEY: int = 123_456_789
GOLDEN_MESSAGE: bytes = b"pay 10 coins to alice"

CITED_BREAK_DATAPOINT: dict[str, Any] = {
    "target": "RSA-2048",
    "hours": 8,
    "noisy_qubits": 20_000_000,
    "statement": "RSA-2048 factored in 8 hours using 20 million noisy qubits",
}

# =============================================================================
# Monte Carlo execution
# =============================================================================

# Batch size fixes the per-batch seed layout, so it is not tunable at runtime.
MC_BATCH_SIZE: int = 10_000
WORKERS: int = max(1, int(os.getenv("QCHAIN_WORKERS", "1")))

# =============================================================================
# Scenario parameter validation
# =============================================================================

Checker = Callable[[str, Any], Any]


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _int(lo: int, hi: int | None = None) -> Checker:
    def check(field: str, value: Any) -> int:
        if not _is_int(value):
            raise ConfigError(field, f"expected an integer, got {value!r}")
        if value < lo or (hi is not None and value > hi):
            bound = f"{lo}..{hi}" if hi is not None else f">= {lo}"
            raise ConfigError(field, f"must be {bound}, got {value}")
        return value
    return check


def _float(lo: float, hi: float, *, open_lo: bool = False, open_hi: bool = False) -> Checker:
    def check(field: str, value: Any) -> float:
        if not (_is_int(value) or isinstance(value, float)):
            raise ConfigError(field, f"expected a number, got {value!r}")
        value = float(value)
        low_ok = value > lo if open_lo else value >= lo
        high_ok = value < hi if open_hi else value <= hi
        if not (low_ok and high_ok):
            left = "(" if open_lo else "["
            right = ")" if open_hi else "]"
            raise ConfigError(field, f"must be in {left}{lo}, {hi}{right}, got {value}")
        return value
    return check


def _list_of(item: Checker, *, min_len: int = 1) -> Checker:
    def check(field: str, value: Any) -> list:
        if not isinstance(value, list):
            raise ConfigError(field, f"expected a list, got {value!r}")
        if len(value) < min_len:
            raise ConfigError(field, f"needs at least {min_len} entries")
        return [item(f"{field}[{i}]", v) for i, v in enumerate(value)]
    return check


def _str(max_len: int) -> Checker:
    def check(field: str, value: Any) -> str:
        if not isinstance(value, str):
            raise ConfigError(field, f"expected a string, got {value!r}")
        if len(value.encode("utf-8")) > max_len:
            raise ConfigError(field, f"longer than {max_len} bytes")
        return value
    return check


_PROBABILITY = _float(0.0, 1.0)
_OPEN_UNIT = _float(0.0, 1.0, open_lo=True, open_hi=True)

# scenario -> parameter -> (default, checker)
SCENARIO_PARAMS: dict[str, dict[str, tuple[Any, Checker]]] = {
    "grover-demo": {
        "n": (3, _int(1, MAX_QUBITS)),
        "marked": (1, _int(1)),
        "shots": (1000, _int(1, 10_000_000)),
        "sweep_max_n": (10, _int(2, 16)),
        "sweep_marked": ([1, 2, 4], _list_of(_int(1))),
    },
    "mine-race": {
        "nonce_bits": ([8, 10, 12], _list_of(_int(2, 16))),
        "trials": (1000, _int(1)),
        "q": ([0.1, 0.3, 0.45], _list_of(_OPEN_UNIT)),
        "z": ([1, 2, 3, 4, 5, 6], _list_of(_int(0, 10_000))),
        "race_trials": (100_000, _int(1)),
        "grover_difficulty": (16, _int(1, 64)),
        "lead_cap": (RACE_LEAD_CAP, _int(2)),
    },
    "bb84": {
        "n_qubits": (100_000, _int(16, 100_000_000)),
        "eve_fraction": ([0.0, 0.5, 1.0], _list_of(_PROBABILITY)),
        "sample_fraction": (DEFAULT_SAMPLE_FRACTION, _OPEN_UNIT),
        "abort_threshold": (DEFAULT_ABORT_THRESHOLD, _PROBABILITY),
    },
    "ghz-consensus": {
        "nodes": (7, _int(1, MAX_QUBITS)),
        "byzantine": ([4, 5, 6], _list_of(_int(0, MAX_QUBITS - 1), min_len=0)),
        "rounds": (10_000, _int(1)),
    },
    "dba": {
        "list_length": (DEFAULT_LIST_LENGTH, _int(8, 65_536)),
        "trials": (10_000, _int(1)),
        "value": ("qc", _str(64)),
    },
    "sign-attack": {
        "group_bits": (20, _int(4, 32)),
        "keypairs": (100, _int(1)),
        "forgery_attempts": (10_000, _int(0)),
        "message": ("pay 10 coins to alice", _str(256)),
    },
    "tamper": {
        "blocks": (10, _int(2, 1000)),
        "difficulty": (16, _int(0, 24)),
        "mutations": (1000, _int(1)),
    },
    "full-demo": {
        "blocks": (10, _int(2, 1000)),
        "difficulty": (DEFAULT_CHAIN_DIFFICULTY, _int(0, 24)),
        "nonce_bits": (12, _int(2, 16)),
        "grover_trials": (200, _int(1)),
        "group_bits": (20, _int(4, 32)),
        "confirmation_depth": (6, _int(0)),
        "block_interval": (600, _int(1)),
        "attacker_ops_per_tick": (10, _int(1)),
        "qkd_qubits": (4096, _int(16, 100_000_000)),
        "eve_fraction": (0.0, _PROBABILITY),
        "nodes": (7, _int(1, MAX_QUBITS)),
        "byzantine": ([5, 6], _list_of(_int(0, MAX_QUBITS - 1), min_len=0)),
        "ghz_rounds": (1000, _int(1)),
        "list_length": (DEFAULT_LIST_LENGTH, _int(8, 65_536)),
        "dba_value": ("block-10", _str(64)),
    },
}

SCENARIO_NAMES: tuple[str, ...] = tuple(SCENARIO_PARAMS)
_TOP_LEVEL_KEYS = {"scenario", "master_seed", "params"}


def _cross_check(name: str, params: dict[str, Any]) -> None:
    if name == "grover-demo" and params["marked"] > 2 ** params["n"]:
        raise ConfigError("params.marked", f"cannot exceed 2^n = {2 ** params['n']}")
    if "byzantine" in params:
        nodes = params["nodes"]
        for i, node in enumerate(params["byzantine"]):
            if node >= nodes:
                raise ConfigError(f"params.byzantine[{i}]", f"node {node} outside 0..{nodes - 1}")
        if len(set(params["byzantine"])) != len(params["byzantine"]):
            raise ConfigError("params.byzantine", "duplicate node ids")
    if name == "mine-race":
        for i, depth in enumerate(params["z"]):
            if depth >= params["lead_cap"]:
                raise ConfigError(f"params.z[{i}]", f"must be below lead_cap {params['lead_cap']}")


def parse_scenario_config(raw: Any, seed_override: int | None = None) -> ScenarioConfig:
    """Validate a raw config mapping and fill scenario defaults.

    Raises ConfigError naming the first offending field.  Nothing is run
    here, so a rejected config has no side effects.
    """
    if not isinstance(raw, Mapping):
        raise ConfigError("config", "must be a mapping with a 'scenario' key")

    unknown = sorted(set(raw) - _TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown top-level key")

    name = raw.get("scenario")
    if name not in SCENARIO_PARAMS:
        raise ConfigError("scenario", f"unknown scenario {name!r}; expected one of {', '.join(SCENARIO_NAMES)}")

    seed = seed_override if seed_override is not None else raw.get("master_seed")
    if seed is None:
        raise ConfigError("master_seed", "required (in the file or via --seed)")
    if not _is_int(seed) or not 0 <= seed < 2**64:
        raise ConfigError("master_seed", f"must be an unsigned 64-bit integer, got {seed!r}")

    params_raw = raw.get("params") or {}
    if not isinstance(params_raw, Mapping):
        raise ConfigError("params", "must be a mapping")

    schema = SCENARIO_PARAMS[name]
    stray = sorted(set(params_raw) - set(schema))
    if stray:
        raise ConfigError(f"params.{stray[0]}", f"unknown parameter for scenario {name}")

    params: dict[str, Any] = {}
    for key, (default, check) in schema.items():
        value = params_raw.get(key, default)
        params[key] = check(f"params.{key}", list(value) if isinstance(value, list) else value)

    _cross_check(name, params)
    return ScenarioConfig(name=name, master_seed=seed, params=params)


def load_scenario_config(path: Path | str, seed_override: int | None = None) -> ScenarioConfig:
    """Read a JSON or YAML scenario file and validate it."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from e

    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            raw = yaml.safe_load(text)
        else:
            raw = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError("config", f"cannot parse {path}: {e}") from e

    config = parse_scenario_config(raw, seed_override=seed_override)
    _LOG.info("Loaded scenario %s (seed %d) from %s", config.name, config.master_seed, path)
    return config
