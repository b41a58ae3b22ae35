"""
Configuration validation test suite for nlmodes.

Tests the run-config schema:
1. Unknown sections and keys (CFG-01)
2. Numeric range validation (NaN, infinity, bounds, quoted numbers)
3. Type checking for ints, lists and pairs
4. Cross-field checks (step bounds, q range, detuning, time span)
5. --set overrides and config hashing
6. File loading (TOML, YAML, JSON) and parse errors
"""

import json
import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from nlmodes.core.config_validator import (
    ConfigError,
    ConfigValidationError,
    apply_overrides,
    config_hash,
    ensure_list,
    load_config_strict,
    parse_override_value,
    validate_and_load_config,
    validate_config_schema,
    validate_number,
    validate_positive_int,
)

PENDULUM_TOML = """
[model]
name = "pendulum"

[family]
q0 = 0.001
delta_q = 0.01
q_max = 0.5

[family.lattice]
q2_range = [-0.1, 0.1]

[simulation]
t_span = [0.0, 60.0]
input = {kind = "ramp-sine", rate = 0.2, period = 12.0}
"""


class TestNumericRangeValidation:
    """Test numeric validators reject bad values."""

    def test_valid_number_accepted(self):
        assert validate_number(0.5, "family.q0", min_val=0.0) == 0.5

    def test_int_as_number_accepted(self):
        result = validate_number(2, "family.q_max")
        assert result == 2.0
        assert isinstance(result, float)

    def test_below_minimum_rejected(self):
        with pytest.raises(ConfigError) as exc_info:
            validate_number(-1.0, "family.retune_threshold", 0.0, 1.0)
        assert "too low" in str(exc_info.value)

    def test_above_maximum_rejected(self):
        with pytest.raises(ConfigError) as exc_info:
            validate_number(1.5, "family.retune_threshold", 0.0, 1.0)
        assert "too high" in str(exc_info.value)

    def test_exclusive_minimum(self):
        with pytest.raises(ConfigError) as exc_info:
            validate_number(0.0, "family.delta_q", 0.0, exclusive_min=True)
        assert "greater than" in str(exc_info.value)

    def test_nan_rejected(self):
        with pytest.raises(ConfigError) as exc_info:
            validate_number(float("nan"), "family.q0")
        assert "NaN" in str(exc_info.value)

    def test_infinity_rejected(self):
        with pytest.raises(ConfigError) as exc_info:
            validate_number(math.inf, "family.q_max")
        assert "infinite" in str(exc_info.value)

    def test_quoted_number_rejected(self):
        """A quoted "0.1" gets a hint to drop the quotes."""
        with pytest.raises(ConfigError) as exc_info:
            validate_number("0.1", "family.delta_q")
        assert "Remove quotes" in str(exc_info.value)

    def test_bool_rejected(self):
        with pytest.raises(ConfigError):
            validate_number(True, "family.q0")


class TestTypeCheckingEnforcement:
    """Integers, lists and strings are not interchangeable."""

    def test_positive_int_rejects_float(self):
        with pytest.raises(ConfigError):
            validate_positive_int(256.0, "family.n_theta")

    def test_positive_int_rejects_bool(self):
        with pytest.raises(ConfigError):
            validate_positive_int(True, "family.n_theta")

    def test_positive_int_minimum(self):
        with pytest.raises(ConfigError) as exc_info:
            validate_positive_int(8, "family.n_theta", minimum=16)
        assert "at least 16" in str(exc_info.value)

    def test_string_list_rejected(self):
        """A bare string would iterate per character."""
        with pytest.raises(ConfigError) as exc_info:
            ensure_list("phi", "compare.observables")
        assert '["phi"]' in str(exc_info.value)

    def test_list_passed_through(self):
        assert ensure_list([1, 2], "family.retain_modes") == [1, 2]
        assert ensure_list((1,), "family.retain_modes") == [1]

    def test_none_returns_empty_list(self):
        assert ensure_list(None, "family.retain_modes") == []

    def test_dict_rejected(self):
        with pytest.raises(ConfigError):
            ensure_list({"a": 1}, "sweep.amplitudes")


class TestSchema:
    """Whole-config validation."""

    def test_defaults_filled(self):
        result = validate_config_schema({"model": {"name": "pendulum"}}, known_models=["pendulum"])
        assert result.is_valid
        config = result.validated_config
        assert config["family"]["q0"] == 1e-3
        assert config["family"]["n_theta"] == 256
        assert config["family"]["lattice"]["second_mode_index"] == 2
        assert config["simulation"]["t_span"] == [0.0, 50.0]
        assert config["tolerances"]["normalization"] == 1e-6

    def test_unknown_section(self):
        result = validate_config_schema({"solver": {}}, known_models=[])
        assert not result.is_valid
        assert any("CFG-01" in e and "solver" in e for e in result.errors)

    def test_unknown_key_with_suggestion(self):
        result = validate_config_schema({"family": {"q_maximum": 2.0}}, known_models=[])
        assert not result.is_valid
        assert any("family.q_maximum" in e and "q_max" in e for e in result.errors)

    def test_nested_lattice_section_is_known(self):
        config = {"family": {"lattice": {"q2_range": [-0.1, 0.1], "delta_q2": 0.05}}}
        result = validate_config_schema(config, known_models=[])
        assert result.is_valid
        assert result.validated_config["family"]["lattice"]["delta_q2"] == 0.05

    def test_delta_q_outside_step_bounds(self):
        result = validate_config_schema({"family": {"delta_q": 0.5, "delta_q_max": 0.1}}, known_models=[])
        assert any("family.delta_q" in e and "delta_q_min" in e for e in result.errors)

    def test_q_max_must_exceed_q0(self):
        result = validate_config_schema({"family": {"q0": 0.1, "q_max": 0.05}}, known_models=[])
        assert any("family.q_max" in e for e in result.errors)

    def test_zero_detuning_rejected(self):
        result = validate_config_schema({"family": {"delta_omega": 0.0}}, known_models=[])
        assert any("family.delta_omega" in e for e in result.errors)

    def test_reversed_t_span(self):
        result = validate_config_schema({"simulation": {"t_span": [10.0, 5.0]}}, known_models=[])
        assert not result.is_valid

    def test_empty_t_span(self):
        result = validate_config_schema({"simulation": {"t_span": [5.0, 5.0]}}, known_models=[])
        assert any("simulation.t_span" in e for e in result.errors)

    def test_unknown_model(self):
        result = validate_config_schema({"model": {"name": "duffing"}}, known_models=["pendulum"])
        assert any("Unknown model 'duffing'" in e for e in result.errors)

    def test_registry_used_by_default(self):
        assert validate_config_schema({"model": {"name": "ieee9bus"}}).is_valid

    def test_missing_model_warns(self):
        result = validate_config_schema({}, known_models=[])
        assert result.is_valid
        assert any("model.name" in w for w in result.warnings)

    def test_odd_grid_warns(self):
        result = validate_config_schema({"family": {"n_theta": 65}}, known_models=[])
        assert result.is_valid
        assert any("n_theta" in w for w in result.warnings)

    def test_simulation_kind_choice(self):
        result = validate_config_schema({"simulation": {"kind": "spectral"}}, known_models=[])
        assert any("reduced, full, linear" in e for e in result.errors)

    def test_none_config(self):
        result = validate_config_schema(None)
        assert not result.is_valid

    def test_non_mapping_config(self):
        result = validate_config_schema([1, 2])
        assert "must be a mapping" in result.errors[0]

    def test_deep_nesting_rejected(self):
        config = {"model": {"params": {}}}
        node = config["model"]["params"]
        for _ in range(25):
            node["x"] = {}
            node = node["x"]
        result = validate_config_schema(config, known_models=[])
        assert any("nesting too deep" in e for e in result.errors)

    def test_raise_if_invalid(self):
        result = validate_config_schema({"bogus": 1}, known_models=[])
        with pytest.raises(ConfigValidationError) as exc_info:
            result.raise_if_invalid()
        assert exc_info.value.exit_code == 2
        assert "1 error" in str(exc_info.value)


class TestOverrides:
    """--set section.key=value overrides."""

    def test_scalar_types(self):
        assert parse_override_value("2.5") == 2.5
        assert parse_override_value("3") == 3
        assert parse_override_value("true") is True
        assert parse_override_value("[0.0, 10.0]") == [0.0, 10.0]
        assert parse_override_value('"pendulum"') == "pendulum"

    def test_bare_word_kept_as_string(self):
        assert parse_override_value("pendulum") == "pendulum"

    def test_nested_override(self):
        config = apply_overrides({"family": {"q0": 1e-3}}, ["family.q_max=2.0", "family.lattice.delta_q2=0.05"])
        assert config["family"]["q_max"] == 2.0
        assert config["family"]["q0"] == 1e-3
        assert config["family"]["lattice"]["delta_q2"] == 0.05

    def test_original_untouched(self):
        original = {"family": {"q0": 1e-3}}
        apply_overrides(original, ["family.q0=0.01"])
        assert original["family"]["q0"] == 1e-3

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            apply_overrides({}, ["family.q_max"])

    def test_missing_section(self):
        with pytest.raises(ConfigError) as exc_info:
            apply_overrides({}, ["q_max=2"])
        assert "family.q_max" in str(exc_info.value)

    def test_scalar_is_not_a_section(self):
        with pytest.raises(ConfigError):
            apply_overrides({"model": {"name": "pendulum"}}, ["model.name.x=1"])


class TestConfigHash:
    """Stable provenance hash."""

    def test_key_order_irrelevant(self):
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})

    def test_value_change_detected(self):
        assert config_hash({"family": {"q0": 1e-3}}) != config_hash({"family": {"q0": 2e-3}})

    def test_hex_digest(self):
        digest = config_hash({})
        assert len(digest) == 64
        int(digest, 16)


class TestFileLoading:
    """Config files in every supported format."""

    def test_toml(self, tmp_path):
        path = tmp_path / "pendulum.toml"
        path.write_text(PENDULUM_TOML)
        config = load_config_strict(path)
        assert config["model"]["name"] == "pendulum"
        assert config["family"]["q_max"] == 0.5
        assert config["family"]["lattice"]["q2_range"] == [-0.1, 0.1]
        assert config["simulation"]["input"]["kind"] == "ramp-sine"

    def test_overrides_applied_before_validation(self, tmp_path):
        path = tmp_path / "pendulum.toml"
        path.write_text(PENDULUM_TOML)
        config = load_config_strict(path, ["family.q_max=0.8"])
        assert config["family"]["q_max"] == 0.8

    def test_invalid_override_reported(self, tmp_path):
        path = tmp_path / "pendulum.toml"
        path.write_text(PENDULUM_TOML)
        _, result = validate_and_load_config(path, ["family.q_max=-1"])
        assert not result.is_valid

    def test_yaml(self, tmp_path):
        pytest.importorskip("yaml")
        path = tmp_path / "run.yaml"
        path.write_text("model:\n  name: pendulum\nfamily:\n  q_max: 0.3\n")
        assert load_config_strict(path)["family"]["q_max"] == 0.3

    def test_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"model": {"name": "planar10"}}))
        assert load_config_strict(path)["model"]["name"] == "planar10"

    def test_toml_parse_error(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[family\nq0 = ")
        _, result = validate_and_load_config(path)
        assert not result.is_valid
        assert "CFG-03" in result.errors[0]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.toml"
        path.write_text("   \n")
        _, result = validate_and_load_config(path)
        assert "empty" in result.errors[0]

    def test_missing_file(self, tmp_path):
        _, result = validate_and_load_config(tmp_path / "absent.toml")
        assert "File not found" in result.errors[0]

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[model]\nname=pendulum\n")
        _, result = validate_and_load_config(path)
        assert "Unsupported config format" in result.errors[0]

    def test_top_level_list(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2, 3]")
        _, result = validate_and_load_config(path)
        assert "dictionary/mapping" in result.errors[0]

    def test_no_file_uses_overrides_only(self):
        config = load_config_strict(None, ["model.name=pendulum"])
        assert config["model"]["name"] == "pendulum"

    def test_strict_raises(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[unknown]\nx = 1\n")
        with pytest.raises(ConfigValidationError):
            load_config_strict(path)


FIGURE_CONFIGS = sorted((Path(__file__).parent.parent / "integration-tests" / "figures").glob("*.toml"))


class TestFigureConfigs:
    """Shipped figure configs stay valid against the schema."""

    def test_configs_present(self):
        assert len(FIGURE_CONFIGS) >= 5

    @pytest.mark.parametrize("path", FIGURE_CONFIGS, ids=lambda p: p.stem)
    def test_config_is_valid(self, path):
        config, result = validate_and_load_config(path)
        assert result.is_valid, result.errors
        assert config["model"]["name"] in ("pendulum", "planar10", "ieee9bus")
