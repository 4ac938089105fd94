"""Tests for scenario config parsing and validation."""

import json

import pytest

from qchain.config import SCENARIO_NAMES, SCENARIO_PARAMS, load_scenario_config, parse_scenario_config
from qchain.errors import ConfigError


def _raw(scenario="grover-demo", seed=42, **params):
    return {"scenario": scenario, "master_seed": seed, "params": params}


def _field(raw, **kwargs):
    with pytest.raises(ConfigError) as exc:
        parse_scenario_config(raw, **kwargs)
    return exc.value.field


# =============================================================================
# Defaults
# =============================================================================


class TestDefaults:
    @pytest.mark.parametrize("name", SCENARIO_NAMES)
    def test_every_scenario_parses_with_defaults(self, name):
        config = parse_scenario_config({"scenario": name, "master_seed": 1})
        assert config.name == name
        assert set(config.params) == set(SCENARIO_PARAMS[name])

    def test_overrides_replace_defaults(self):
        config = parse_scenario_config(_raw(n=5, marked=3))
        assert config.params["n"] == 5
        assert config.params["marked"] == 3
        assert config.params["shots"] == 1000

    def test_seed_override_wins(self):
        assert parse_scenario_config(_raw(), seed_override=7).master_seed == 7
        assert parse_scenario_config({"scenario": "dba"}, seed_override=3).master_seed == 3

    def test_to_dict(self):
        data = parse_scenario_config(_raw(n=4)).to_dict()
        assert data["scenario"] == "grover-demo"
        assert data["master_seed"] == 42
        assert data["params"]["n"] == 4


# =============================================================================
# Rejections
# =============================================================================


class TestRejections:
    def test_not_a_mapping(self):
        assert _field(["grover-demo"]) == "config"

    def test_unknown_scenario(self):
        assert _field(_raw(scenario="moon-landing")) == "scenario"

    def test_unknown_top_level_key(self):
        assert _field({**_raw(), "extra": 1}) == "extra"

    def test_missing_seed(self):
        assert _field({"scenario": "bb84"}) == "master_seed"

    @pytest.mark.parametrize("seed", [-1, 2**64, "42", 1.5, True])
    def test_bad_seed(self, seed):
        assert _field(_raw(seed=seed)) == "master_seed"

    def test_unknown_param(self):
        assert _field(_raw(qubits=3)) == "params.qubits"

    @pytest.mark.parametrize(
        ("scenario", "params", "field"),
        [
            ("grover-demo", {"n": 0}, "params.n"),
            ("grover-demo", {"n": 25}, "params.n"),
            ("grover-demo", {"n": True}, "params.n"),
            ("grover-demo", {"sweep_marked": []}, "params.sweep_marked"),
            ("bb84", {"eve_fraction": [0.0, 1.5]}, "params.eve_fraction[1]"),
            ("bb84", {"sample_fraction": 1.0}, "params.sample_fraction"),
            ("bb84", {"n_qubits": 8}, "params.n_qubits"),
            ("mine-race", {"q": [0.0]}, "params.q[0]"),
            ("dba", {"list_length": 4}, "params.list_length"),
            ("dba", {"value": "x" * 65}, "params.value"),
            ("sign-attack", {"group_bits": 40}, "params.group_bits"),
            ("tamper", {"blocks": 1}, "params.blocks"),
        ],
    )
    def test_out_of_range(self, scenario, params, field):
        assert _field(_raw(scenario=scenario, **params)) == field

    def test_marked_cannot_exceed_search_space(self):
        assert _field(_raw(n=2, marked=5)) == "params.marked"

    def test_byzantine_must_name_existing_nodes(self):
        assert _field(_raw(scenario="ghz-consensus", nodes=4, byzantine=[1, 4])) == "params.byzantine[1]"

    def test_byzantine_duplicates(self):
        assert _field(_raw(scenario="ghz-consensus", nodes=4, byzantine=[1, 1])) == "params.byzantine"

    def test_race_depth_below_lead_cap(self):
        assert _field(_raw(scenario="mine-race", z=[1, 50], lead_cap=20)) == "params.z[1]"

    def test_message_names_field(self):
        with pytest.raises(ConfigError, match=r"^params\.n: "):
            parse_scenario_config(_raw(n=0))


# =============================================================================
# Files
# =============================================================================


class TestLoadFile:
    def test_json(self, tmp_path):
        path = tmp_path / "demo.json"
        path.write_text(json.dumps(_raw(n=3)))
        config = load_scenario_config(path)
        assert (config.name, config.master_seed) == ("grover-demo", 42)

    def test_yaml(self, tmp_path):
        path = tmp_path / "demo.yaml"
        path.write_text("scenario: bb84\nmaster_seed: 5\nparams:\n  n_qubits: 4096\n  eve_fraction: [0.0, 1.0]\n")
        config = load_scenario_config(path)
        assert config.params["n_qubits"] == 4096
        assert config.params["eve_fraction"] == [0.0, 1.0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_scenario_config(tmp_path / "absent.json")

    def test_unparseable(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="cannot parse"):
            load_scenario_config(path)

    def test_shipped_configs_are_valid(self):
        from pathlib import Path

        shipped = sorted((Path(__file__).parent.parent / "config" / "scenarios").glob("*.*"))
        assert shipped
        for path in shipped:
            load_scenario_config(path)
