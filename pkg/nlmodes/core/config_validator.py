"""
Configuration validation for nlmodes runs.

Every run is described by one config file (TOML, YAML or JSON). The file is
validated against a declarative schema before any computation starts:

1. Unknown sections and keys are rejected (CFG-01)
2. Numbers are type- and range-checked; NaN, infinity and quoted numbers fail
3. Lists are never confused with strings
4. Defaults are filled in so downstream code reads one complete mapping

Usage:
    config, result = validate_and_load_config(Path("pendulum.toml"), overrides)
    result.raise_if_invalid()
    family_cfg = result.validated_config["family"]
"""

import copy
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

MAX_FILE_SIZE = 10 * 1024 * 1024
MAX_ARRAY_SIZE = 100000
MAX_NESTING_DEPTH = 20


class ConfigError(Exception):
    """Configuration validation error with context."""

    error_code = "CFG-02"

    def __init__(self, key: str, message: str, value: Any = None, suggestion: Optional[str] = None):
        self.key = key
        self.value = value
        self.suggestion = suggestion
        full_message = f"Config error at '{key}': {message}"
        if value is not None:
            full_message += f" (got: {value!r})"
        if suggestion:
            full_message += f". Suggestion: {suggestion}"
        super().__init__(full_message)


class ConfigValidationError(Exception):
    """
    Raised when configuration validation fails with multiple errors.

    Use this exception when aggregating validation errors.
    """

    error_code = "CFG-02"
    exit_code = 2

    def __init__(self, errors: List[str], warnings: Optional[List[str]] = None):
        self.errors = errors
        self.warnings = warnings or []
        message = f"Configuration validation failed with {len(errors)} error(s):\n"
        message += "\n".join(f"  - {err}" for err in errors[:20])
        if len(errors) > 20:
            message += f"\n  ... and {len(errors) - 20} more errors"
        super().__init__(message)


@dataclass
class ValidationResult:
    """Result of configuration validation."""
    is_valid: bool
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    validated_config: Dict[str, Any] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.is_valid

    def raise_if_invalid(self) -> "ValidationResult":
        """Raise ConfigValidationError if validation failed."""
        if not self.is_valid:
            raise ConfigValidationError(self.errors, self.warnings)
        return self

    def log_warnings(self) -> "ValidationResult":
        """Log any warnings."""
        for warning in self.warnings:
            logger.warning(f"Config warning: {warning}")
        return self


# =============================================================================
# Scalar validators
# =============================================================================

def validate_number(
    value: Any,
    key_name: str,
    min_val: float = -math.inf,
    max_val: float = math.inf,
    exclusive_min: bool = False,
) -> float:
    """
    Validate a finite number within [min_val, max_val].

    Raises:
        ConfigError: If value is missing, non-numeric, non-finite or out of range
    """
    if value is None:
        raise ConfigError(key_name, "Value is null/None", None, "Set a number")

    # Quoted numbers are a common TOML/YAML slip
    if isinstance(value, str):
        raise ConfigError(
            key_name,
            "Must be a number, got string",
            value,
            f"Remove quotes: use {key_name.split('.')[-1]} = {value} instead of \"{value}\"",
        )

    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key_name, f"Must be numeric, got {type(value).__name__}", value, "Use a number like 0.1")

    if isinstance(value, float):
        if value != value:
            raise ConfigError(key_name, "Value is NaN (Not a Number)", "NaN", "Use a finite number")
        if math.isinf(value):
            raise ConfigError(key_name, "Value is infinite", "Infinity", "Use a finite number")

    if exclusive_min and value <= min_val:
        raise ConfigError(key_name, f"Must be greater than {min_val}", value, f"Use a value above {min_val}")
    if value < min_val:
        raise ConfigError(key_name, f"Value too low (minimum is {min_val})", value, f"Increase to at least {min_val}")
    if value > max_val:
        raise ConfigError(key_name, f"Value too high (maximum is {max_val})", value, f"Decrease to at most {max_val}")

    return float(value)


def validate_positive_int(value: Any, key_name: str, minimum: int = 1) -> int:
    """
    Validate an integer ≥ ``minimum``.

    Raises:
        ConfigError: If value is not an integer or too small
    """
    if value is None:
        raise ConfigError(key_name, "Value cannot be None")

    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(key_name, f"Must be an integer, got {type(value).__name__}", value)

    if value < minimum:
        raise ConfigError(key_name, f"Must be at least {minimum}", value)

    return value


def ensure_list(value: Any, key_name: str) -> List[Any]:
    """
    Ensure value is a list.

    A bare string where a list is expected would iterate character by
    character, so strings are rejected rather than coerced.

    Raises:
        ConfigError: If value cannot be used as a list
    """
    if value is None:
        return []

    if isinstance(value, str):
        raise ConfigError(
            key_name,
            "Expected a list, got a string",
            value,
            f"Use [\"{value}\"] for a single-item list, or [] for empty",
        )

    if isinstance(value, (list, tuple)):
        if len(value) > MAX_ARRAY_SIZE:
            raise ConfigError(
                key_name,
                f"List has {len(value)} items, exceeds limit of {MAX_ARRAY_SIZE}",
                f"[{len(value)} items]",
            )
        return list(value)

    if isinstance(value, dict):
        raise ConfigError(key_name, "Expected list, got dict/object", value, "Use list syntax: [item1, item2]")

    raise ConfigError(key_name, f"Expected list, got {type(value).__name__}", value, "Use list syntax: [item1, item2]")


def validate_choice(value: Any, key_name: str, choices: Sequence[str]) -> str:
    if not isinstance(value, str) or value not in choices:
        raise ConfigError(key_name, f"Must be one of {', '.join(choices)}", value)
    return value


# =============================================================================
# Schema
# =============================================================================

@dataclass(frozen=True)
class Field:
    """
    One schema entry.

    kind is one of: number, int, bool, str, choice, numbers, ints, strs,
    pair, table.
    """
    kind: str
    default: Any = None
    min_val: float = -math.inf
    max_val: float = math.inf
    exclusive_min: bool = False
    choices: Tuple[str, ...] = ()
    help: str = ""


POSITIVE = dict(min_val=0.0, exclusive_min=True)

SCHEMA: Dict[str, Dict[str, Field]] = {
    "model": {
        "name": Field("str", None, help="registered model name"),
        "params": Field("table", {}),
    },
    "spectrum": {
        "guess": Field("numbers", None),
        "tol": Field("number", 1e-10, **POSITIVE),
        "max_iter": Field("int", 50, min_val=1),
    },
    "family": {
        "mode_index": Field("int", 1, min_val=1),
        "eigen_index": Field("int", None, min_val=0),
        "anchor_index": Field("int", None, min_val=0),
        "q0": Field("number", 1e-3, **POSITIVE),
        "delta_q": Field("number", 0.01, **POSITIVE),
        "delta_q_min": Field("number", 1e-5, **POSITIVE),
        "delta_q_max": Field("number", 0.05, **POSITIVE),
        "q_max": Field("number", 1.0, **POSITIVE),
        "delta_omega": Field("number", None),
        "n_theta": Field("int", 256, min_val=16),
        "retain_modes": Field("ints", None),
        "psi_decay_threshold": Field("number", -0.5),
        "max_retunes": Field("int", 3, min_val=0),
        "retune_threshold": Field("number", 0.05, min_val=0.0, max_val=1.0),
        "retune_step": Field("number", 0.02, **POSITIVE),
        "boundary_refinements": Field("int", 3, min_val=0),
        "max_nodes": Field("int", 5000, min_val=2),
    },
    "family.lattice": {
        "second_mode_index": Field("int", 2, min_val=1),
        "q1_values": Field("numbers", None),
        "q1_stride": Field("int", 1, min_val=1),
        "q2_range": Field("pair", [0.0, 0.0]),
        "delta_q2": Field("number", 0.1, **POSITIVE),
        "q3_range": Field("pair", [0.0, 0.0]),
        "delta_q3": Field("number", 0.1, **POSITIVE),
        "workers": Field("int", None, min_val=1),
    },
    "tolerances": {
        "shooting": Field("number", 1e-10, **POSITIVE),
        "rtol": Field("number", 1e-10, **POSITIVE),
        "atol": Field("number", 1e-12, **POSITIVE),
        "normalization": Field("number", 1e-6, **POSITIVE),
        "max_newton": Field("int", 20, min_val=1),
    },
    "simulation": {
        "kind": Field("choice", "reduced", choices=("reduced", "full", "linear")),
        "t_span": Field("pair", [0.0, 50.0]),
        "dt_out": Field("number", 0.05, **POSITIVE),
        "input": Field("table", {"kind": "zero"}),
        "init": Field("table", {}),
        "observable": Field("str", None),
    },
    "compare": {
        "psi_levels": Field("numbers", [0.0]),
        "observables": Field("strs", None),
        "two_mode_family": Field("str", None),
    },
    "sweep": {
        "amplitudes": Field("numbers", [0.04, 0.07, 0.10]),
        "frequencies": Field("numbers", None),
        "observable": Field("str", None),
        "workers": Field("int", None, min_val=1),
        "warmup_periods": Field("int", 40, min_val=0),
        "max_periods": Field("int", 400, min_val=1),
    },
    "output": {
        "dir": Field("str", "results"),
        "family": Field("str", "family.nlz"),
        "prefix": Field("str", ""),
        "log_file": Field("str", None),
    },
}


def _check_field(spec: Field, value: Any, key: str) -> Any:
    if value is None:
        return None
    if spec.kind == "number":
        return validate_number(value, key, spec.min_val, spec.max_val, spec.exclusive_min)
    if spec.kind == "int":
        return validate_positive_int(value, key, int(spec.min_val) if math.isfinite(spec.min_val) else -10**9)
    if spec.kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(key, "Must be true or false", value)
        return value
    if spec.kind == "str":
        if not isinstance(value, str):
            raise ConfigError(key, f"Must be a string, got {type(value).__name__}", value)
        return value
    if spec.kind == "choice":
        return validate_choice(value, key, spec.choices)
    if spec.kind == "numbers":
        return [validate_number(v, f"{key}[{i}]") for i, v in enumerate(ensure_list(value, key))]
    if spec.kind == "ints":
        return [validate_positive_int(v, f"{key}[{i}]") for i, v in enumerate(ensure_list(value, key))]
    if spec.kind == "strs":
        items = ensure_list(value, key)
        for i, item in enumerate(items):
            if not isinstance(item, str):
                raise ConfigError(f"{key}[{i}]", "Must be a string", item)
        return items
    if spec.kind == "pair":
        items = ensure_list(value, key)
        if len(items) != 2:
            raise ConfigError(key, "Must be a two-element list [low, high]", value)
        low, high = (validate_number(v, f"{key}[{i}]") for i, v in enumerate(items))
        if high < low:
            raise ConfigError(key, "Upper bound is below lower bound", value, f"Use [{high}, {low}]")
        return [low, high]
    if spec.kind == "table":
        if not isinstance(value, dict):
            raise ConfigError(key, f"Must be a table/mapping, got {type(value).__name__}", value)
        return copy.deepcopy(value)
    raise ConfigError(key, f"Unknown schema kind {spec.kind!r}")


def _section(config: Mapping[str, Any], dotted: str) -> Any:
    node: Any = config
    for part in dotted.split("."):
        if not isinstance(node, dict):
            return None
        node = node.get(part)
    return node


def validate_config_schema(
    config: Dict[str, Any],
    known_models: Optional[Iterable[str]] = None,
) -> ValidationResult:
    """
    Validate an entire configuration against ``SCHEMA``.

    Args:
        config: Parsed configuration mapping
        known_models: Model names accepted for ``model.name`` (default: registry)

    Returns:
        ValidationResult whose ``validated_config`` holds every section with
        defaults filled in
    """
    errors: List[str] = []
    warnings: List[str] = []
    validated: Dict[str, Any] = {}

    def add_error(key: str, msg: str, suggestion: Optional[str] = None):
        full_msg = f"[{key}] {msg}"
        if suggestion:
            full_msg += f" | Suggestion: {suggestion}"
        errors.append(full_msg)

    def add_warning(key: str, msg: str):
        warnings.append(f"[{key}] {msg}")

    if config is None:
        add_error("config", "Configuration is None (file may be empty)", "Provide a valid config file")
        return ValidationResult(is_valid=False, errors=errors, warnings=warnings)

    if not isinstance(config, dict):
        add_error("config", f"Configuration must be a mapping, got {type(config).__name__}",
                  "Use TOML sections like [model] or YAML mappings")
        return ValidationResult(is_valid=False, errors=errors, warnings=warnings)

    def check_depth(obj: Any, path: str, depth: int) -> bool:
        if depth > MAX_NESTING_DEPTH:
            add_error(path, f"Config nesting too deep (max {MAX_NESTING_DEPTH})", "Flatten config structure")
            return False
        if isinstance(obj, dict):
            return all(check_depth(v, f"{path}.{k}", depth + 1) for k, v in obj.items())
        return True

    if not check_depth(config, "config", 0):
        return ValidationResult(is_valid=False, errors=errors, warnings=warnings)

    # Unknown sections; "family.lattice" is nested under [family]
    top_level = {name.split(".")[0] for name in SCHEMA}
    for section_name in config:
        if section_name not in top_level:
            add_error(section_name, "Unknown section (CFG-01)",
                      f"Known sections: {', '.join(sorted(top_level))}")

    for section_name, fields in SCHEMA.items():
        raw = _section(config, section_name)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            add_error(section_name, f"Must be a section/table, got {type(raw).__name__}")
            continue

        nested = {name.split(".", 1)[1].split(".")[0] for name in SCHEMA if name.startswith(section_name + ".")}
        out: Dict[str, Any] = {}
        for key in raw:
            if key not in fields and key not in nested:
                close = [k for k in fields if k.startswith(key[:3])]
                add_error(f"{section_name}.{key}", "Unknown key (CFG-01)",
                          f"Did you mean {close[0]}?" if close else f"Known keys: {', '.join(fields)}")

        for key, spec in fields.items():
            full_key = f"{section_name}.{key}"
            value = raw.get(key, copy.deepcopy(spec.default))
            try:
                out[key] = _check_field(spec, value, full_key)
            except ConfigError as e:
                errors.append(str(e))

        if "." in section_name:
            parent, child = section_name.split(".", 1)
            validated.setdefault(parent, {})[child] = out
        else:
            validated.setdefault(section_name, {}).update(out)

    # Cross-field checks
    family = validated.get("family", {})
    if family:
        lo, step, hi = family.get("delta_q_min"), family.get("delta_q"), family.get("delta_q_max")
        if None not in (lo, step, hi) and not lo <= step <= hi:
            add_error("family.delta_q", f"Must lie in [delta_q_min, delta_q_max] = [{lo}, {hi}]", f"got {step}")
        if None not in (family.get("q0"), family.get("q_max")) and family["q_max"] <= family["q0"]:
            add_error("family.q_max", "Must exceed family.q0")
        if family.get("delta_omega") == 0.0:
            add_error("family.delta_omega", "Must be nonzero",
                      "Leave unset for the default 0.1*Imag(lambda_1)")
        if family.get("n_theta") is not None and family["n_theta"] % 2:
            add_warning("family.n_theta", "Odd grid size; an even size is recommended")

    simulation = validated.get("simulation", {})
    t_span = simulation.get("t_span")
    if t_span is not None and t_span[1] <= t_span[0]:
        add_error("simulation.t_span", "End time must exceed start time", "Use [0.0, 50.0]")

    model = validated.get("model", {})
    name = model.get("name")
    if name is not None:
        if known_models is None:
            from ..models import available_models
            known_models = available_models()
        known = list(known_models)
        if name not in known:
            add_error("model.name", f"Unknown model '{name}'", f"Available: {', '.join(known)}")
    else:
        add_warning("model.name", "No model selected; commands that need one will fail")

    return ValidationResult(
        is_valid=not errors,
        errors=errors,
        warnings=warnings,
        validated_config=validated if not errors else {},
    )


# =============================================================================
# Overrides and hashing
# =============================================================================

def parse_override_value(text: str) -> Any:
    """Parse the right-hand side of KEY=VALUE as a TOML scalar or array."""
    try:
        import tomllib
    except ImportError:
        import toml as tomllib  # type: ignore[no-redef]
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except Exception:
        return text


def apply_overrides(config: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """
    Return a copy of ``config`` with ``section.key=value`` overrides applied.

    Raises:
        ConfigError: If an override is not of the form KEY=VALUE
    """
    result = copy.deepcopy(config) if config else {}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(item, "Override must look like section.key=value", suggestion="family.q_max=2.0")
        dotted, text = item.split("=", 1)
        parts = [p for p in dotted.strip().split(".") if p]
        if len(parts) < 2:
            raise ConfigError(dotted, "Override key needs a section", suggestion=f"family.{dotted.strip()}")
        node = result
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(dotted, f"'{part}' is not a section")
            node = child
        node[parts[-1]] = parse_override_value(text.strip())
    return result


def config_hash(config: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a validated config."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# =============================================================================
# Loading
# =============================================================================

def safe_read_bytes(path: Path, max_size: int = MAX_FILE_SIZE) -> bytes:
    """
    Read a file with a size limit.

    Raises:
        ValueError: If file exceeds size limit
        FileNotFoundError: If file doesn't exist
    """
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    size = path.stat().st_size
    if size > max_size:
        raise ValueError(f"File too large: {path} ({size:,} bytes). Maximum allowed: {max_size:,} bytes")
    return path.read_bytes()


def parse_config_file(config_path: Path) -> Tuple[Optional[Dict[str, Any]], Optional[str]]:
    """Parse a config file; returns (config, parse_error)."""
    suffix = config_path.suffix.lower()
    try:
        raw = safe_read_bytes(config_path)
    except (OSError, ValueError) as e:
        return None, str(e)

    if not raw.strip():
        return None, f"Config file is empty: {config_path}"

    if suffix in (".yaml", ".yml"):
        try:
            import yaml
        except ImportError:
            return None, "YAML support requires PyYAML. Install with: pip install pyyaml"
        try:
            return yaml.safe_load(raw.decode("utf-8")), None
        except yaml.YAMLError as e:
            return None, f"YAML parse error: {e}"

    if suffix == ".toml":
        try:
            import tomllib
            try:
                return tomllib.loads(raw.decode("utf-8")), None
            except tomllib.TOMLDecodeError as e:
                return None, f"TOML parse error: {e}"
        except ImportError:
            try:
                import toml
            except ImportError:
                return None, "TOML support requires toml. Install with: pip install toml"
            try:
                return toml.loads(raw.decode("utf-8")), None
            except toml.TomlDecodeError as e:
                return None, f"TOML parse error: {e}"

    if suffix == ".json":
        try:
            return json.loads(raw.decode("utf-8")), None
        except json.JSONDecodeError as e:
            return None, f"JSON parse error at line {e.lineno}: {e.msg}"

    return None, f"Unsupported config format: {suffix}. Use .toml, .yaml, .yml, or .json"


def validate_and_load_config(
    config_path: Optional[Path],
    overrides: Iterable[str] = (),
) -> Tuple[Dict[str, Any], ValidationResult]:
    """
    Load, override and validate a configuration file.

    Parse problems come back as an invalid result (CFG-03) rather than an
    exception. ``config_path=None`` validates the overrides alone.

    Returns:
        (raw_config_with_overrides, validation_result)
    """
    config: Dict[str, Any] = {}
    if config_path is not None:
        parsed, parse_error = parse_config_file(Path(config_path))
        if parse_error:
            return {}, ValidationResult(is_valid=False, errors=[f"[config_file] {parse_error} (CFG-03)"])
        if not isinstance(parsed, dict):
            return {}, ValidationResult(
                is_valid=False,
                errors=["[config] Config must be a dictionary/mapping, got " + type(parsed).__name__],
            )
        config = parsed

    try:
        config = apply_overrides(config, overrides)
    except ConfigError as e:
        return config, ValidationResult(is_valid=False, errors=[f"[{e.key}] {e}"])

    return config, validate_config_schema(config)


def load_config_strict(config_path: Optional[Path], overrides: Iterable[str] = ()) -> Dict[str, Any]:
    """
    Load config and raise immediately if validation fails.

    Returns:
        Validated configuration with defaults filled in

    Raises:
        ConfigValidationError: If any validation errors occur
    """
    _, result = validate_and_load_config(config_path, overrides)
    result.raise_if_invalid().log_warnings()
    return result.validated_config
