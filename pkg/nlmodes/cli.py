#!/usr/bin/env python3
"""
nlmodes command-line front end.

Every subcommand reads one validated run config (TOML, YAML or JSON); flags
and ``--set section.key=value`` overrides are applied on top before
validation, so a run is reproducible from the config file plus the command
line recorded in the CSV provenance line.

Exit codes:
    0  success
    2  configuration error (also unreadable artifacts, unwritable outputs)
    3  numerical failure
    4  family boundary reached before q_max (build-family; partial artifact written)
  130  interrupted (partial artifact written)
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .artifact import load_family, save_family
from .core.atomic_write import AtomicWriteError, atomic_write, check_write_permissions
from .core.base import DynamicalSystem
from .core.config_validator import ConfigError, ConfigValidationError, config_hash, validate_and_load_config
from .core.errors import (
    EXIT_BOUNDARY,
    EXIT_CONFIG,
    EXIT_OK,
    ContractViolationError,
    NlmodesError,
    NoConvergenceError,
    ParameterError,
)
from .core.integrate import IntegratorSettings
from .core.logger import StageLogger, setup_logger
from .core.reporting import provenance_line, summarize_run, write_table
from .core.signal_handlers import shutdown_manager
from .family import (
    ContinuationOptions,
    OrbitFamily,
    backbone,
    build_family,
    default_workers,
    extend_family_two_mode,
    select_modes,
)
from .models import build_model, linearized_model
from .periodic import normalization_defects
from .reduce import ReducedModel, ReducedState, SimulationTrace, lift_state, reconstruct_state, simulate_reduced
from .response import amplitude_sweep, compare_traces, simulate_full
from .signals import signal_from_config
from .spectral import compute_spectrum, find_fixed_point, oscillatory_mode

logger = logging.getLogger("nlmodes.cli")

EXIT_INTERRUPTED = 130
COMMANDS = ("spectrum", "build-family", "simulate", "compare", "amplitude-sweep", "export")


@dataclass
class RunContext:
    """Validated config plus the bookkeeping of one command."""
    command: str
    config: Dict[str, Any]
    config_sha256: str
    output_dir: Path
    prefix: str = ""
    outputs: List[Path] = field(default_factory=list)
    facts: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def path(self, name: str) -> Path:
        return self.output_dir / f"{self.prefix}{name}"

    def provenance(self, **fields: Any) -> str:
        model = self.config.get("model", {}).get("name")
        return provenance_line(__version__, self.config_sha256, command=self.command, model=model, **fields)

    def table(self, name: str, frame: pd.DataFrame, footer: Optional[Mapping[str, Any]] = None,
              **fields: Any) -> Path:
        path = write_table(self.path(name), frame, self.provenance(**fields), footer)
        self.outputs.append(path)
        return path

    def artifact_provenance(self) -> Dict[str, Any]:
        return {"config_sha256": self.config_sha256, "package_version": __version__,
                "command": self.command, "model": self.config.get("model", {}).get("name")}


# =============================================================================
# Shared helpers
# =============================================================================

def _system(config: Mapping[str, Any]) -> DynamicalSystem:
    model = config.get("model", {})
    name = model.get("name")
    if not name:
        raise ConfigError("model.name", "A model is required for this command", suggestion="--model pendulum")
    return build_model(name, model.get("params") or {})


def _fixed_point(system: DynamicalSystem, config: Mapping[str, Any]) -> np.ndarray:
    spectrum = config.get("spectrum", {})
    return find_fixed_point(system, spectrum.get("guess"), spectrum.get("tol", 1e-10), spectrum.get("max_iter", 50))


def _family_path(ctx: RunContext, override: Optional[Path] = None) -> Path:
    if override is not None:
        return Path(override)
    name = Path(ctx.config["output"]["family"])
    return name if name.is_absolute() else ctx.output_dir / name


def _integrator(config: Mapping[str, Any]) -> IntegratorSettings:
    tol = config.get("tolerances", {})
    return IntegratorSettings(rtol=tol.get("rtol", 1e-10), atol=tol.get("atol", 1e-12))


def _complex_values(values: Optional[Sequence[Any]], key: str) -> np.ndarray:
    """ψ entries: plain numbers or [re, im] pairs."""
    out = []
    for i, value in enumerate(values or []):
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ConfigError(f"{key}[{i}]", "Complex entries must be [re, im] pairs", value)
            out.append(complex(float(value[0]), float(value[1])))
        else:
            out.append(complex(float(value)))
    return np.array(out, dtype=complex)


def _reduced_init(model: ReducedModel, init: Mapping[str, Any]) -> ReducedState:
    """Reduced initial state from ``[simulation.init]`` (reduced coordinates or a full state)."""
    if init.get("state") is not None:
        return lift_state(model, np.asarray(init["state"], dtype=float), init.get("lift_limit"))
    q = init.get("q")
    if q is None:
        q = [2.0 * model.q_first] + [0.0] * (model.n_q - 1)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.size != model.n_q:
        raise ConfigError("simulation.init.q", f"Needs {model.n_q} amplitude(s) for this family", q.tolist())
    psi = _complex_values(init.get("psi"), "simulation.init.psi")
    if psi.size == 0:
        psi = np.zeros(model.n_psi, dtype=complex)
    if psi.size != model.n_psi:
        raise ConfigError("simulation.init.psi", f"Needs {model.n_psi} value(s) for retained modes {model.retained}",
                          psi.size)
    return ReducedState.make(float(init.get("theta", 0.0)), q, psi)


def _observable_weights(system: DynamicalSystem, names: Optional[Sequence[str]]) -> Dict[str, np.ndarray]:
    if not names:
        names = list(system.state_labels)
    return {name: system.observable(name) for name in names}


def _reduced_model(family: OrbitFamily, system: DynamicalSystem, config: Mapping[str, Any]) -> ReducedModel:
    fam = config.get("family", {})
    return ReducedModel.from_family(family, system, psi_decay_threshold=fam.get("psi_decay_threshold", -0.5))


def _write_trace(ctx: RunContext, name: str, trace: SimulationTrace, system: DynamicalSystem,
                 observable: Optional[str]) -> Path:
    frame = trace.to_frame(system.state_labels, system.input_labels)
    if observable and observable not in frame.columns:
        frame[observable] = trace.observable(system.observable(observable))
    return ctx.table(name, frame, footer={"termination": trace.termination}, kind=trace.kind)


# =============================================================================
# Commands
# =============================================================================

def cmd_spectrum(ctx: RunContext, args: argparse.Namespace) -> int:
    """Fixed point and ordered Jacobian spectrum."""
    system = _system(ctx.config)
    x_ss = _fixed_point(system, ctx.config)
    spectrum = compute_spectrum(system.jac_state(x_ss, system.zero_input()))
    oscillatory = spectrum.oscillatory_indices
    # decay over one period of the slowest oscillatory mode, as used for ψ retention
    period = 2.0 * np.pi / spectrum.eigenvalues[oscillatory[0]].imag if oscillatory else np.nan

    rows = []
    for index, lam in enumerate(spectrum.eigenvalues):
        label = oscillatory.index(index) + 1 if index in oscillatory else None
        ratio = lam.real * period if label else np.nan
        rows.append({
            "index": index,
            "re": lam.real,
            "im": lam.imag,
            "mode_index": label if label is not None else "",
            "decay_ratio": ratio,
        })
    ctx.table("spectrum.csv", pd.DataFrame(rows))
    ctx.table("fixed_point.csv", pd.DataFrame({"state": list(system.state_labels), "value": x_ss}))

    ctx.facts.update({
        "model": system.name,
        "fixed point": ", ".join(f"{v:.6g}" for v in x_ss),
        "hurwitz": spectrum.hurwitz,
        "oscillatory modes": len(oscillatory),
    })
    for label, index in enumerate(oscillatory, start=1):
        lam = spectrum.eigenvalues[index]
        ctx.notes.append(f"mode {label}: lambda = {lam.real:.6g} ± {lam.imag:.6g}i")
    return EXIT_OK


def cmd_build_family(ctx: RunContext, args: argparse.Namespace) -> int:
    """Continue a forced-orbit family and persist the artifact and backbone."""
    config = ctx.config
    fam = config["family"]
    lattice = fam.get("lattice", {})
    two_mode = args.two_mode or any(hi > lo for lo, hi in (lattice["q2_range"], lattice["q3_range"]))
    log = StageLogger("build", logger, model=config["model"].get("name"))

    target = _family_path(ctx, args.family)
    ok, reason = check_write_permissions(target)
    if not ok:
        raise ConfigError("output.dir", reason)

    system = _system(config)
    x_ss = _fixed_point(system, config)
    spectrum = compute_spectrum(system.jac_state(x_ss, system.zero_input()))
    modes = select_modes(
        spectrum,
        mode_index=fam["mode_index"],
        eigen_index=fam.get("eigen_index"),
        anchor_index=fam.get("anchor_index"),
        retain_modes=fam.get("retain_modes"),
        psi_decay_threshold=fam["psi_decay_threshold"],
        second_mode_index=lattice["second_mode_index"] if two_mode else None,
    )
    options = ContinuationOptions.from_config(config)
    log.info(f"Tracking modes {[m.mode_index for m in modes]}, Imag(lambda_1)={modes[0].frequency:.6g}")

    shutdown_manager.install()
    exit_code = EXIT_OK
    try:
        family = build_family(
            system, modes[0], fam["q0"], fam["delta_q"], fam["q_max"],
            delta_omega=fam.get("delta_omega"),
            x_ss=x_ss,
            extra_modes=modes[1:],
            options=options,
            should_stop=shutdown_manager.check_shutdown,
        )
    except NoConvergenceError as exc:
        partial = getattr(exc, "family", None)
        if partial is not None:
            save_family(target, partial, ctx.artifact_provenance())
            ctx.outputs.append(target)
            log.error(f"Partial family with {len(partial)} orbit(s) written to {target}")
        raise
    finally:
        shutdown_manager.uninstall()

    if family.termination == "family-boundary":
        exit_code = EXIT_BOUNDARY
        ctx.notes.append(f"family boundary reached at q={float(family.terminal_q[0]):.6g} before q_max={fam['q_max']}")
    elif family.termination == "interrupted":
        exit_code = EXIT_INTERRUPTED
        ctx.notes.append(f"interrupted by {shutdown_manager.signal_name}; partial family written")
    elif family.termination == "max-nodes":
        ctx.notes.append(f"stopped after family.max_nodes={options.max_nodes} orbits")

    curve = backbone(family, system, config["simulation"].get("observable"))
    frame = pd.DataFrame({"q": curve.q, "omega_bar": curve.omega_bar, "amplitude": curve.amplitude,
                          "omega": curve.omega})
    for k, label in enumerate(curve.mode_labels):
        frame[f"re_kappa_{label}"] = curve.re_kappa[:, k]
    ctx.table("backbone.csv", frame, footer={"termination": family.termination})

    if two_mode and exit_code == EXIT_OK:
        family = extend_family_two_mode(
            family, system, lattice["delta_q2"], lattice["delta_q3"],
            (lattice["q2_range"], lattice["q3_range"]),
            second_mode_index=lattice["second_mode_index"],
            q1_values=lattice.get("q1_values"),
            q1_stride=lattice["q1_stride"],
            options=options,
            workers=lattice.get("workers"),
        )
        ctx.facts["lattice shape"] = "x".join(str(n) for n in family.lattice_shape)
    elif two_mode:
        ctx.notes.append("lattice skipped: the one-parameter family did not complete")

    worst = max(max(normalization_defects(system, orbit)) for orbit in family.orbits)
    ctx.facts["normalization defect"] = f"{worst:.2e}"
    if worst > config["tolerances"]["normalization"]:
        log.warning(f"Adjoint normalization defect {worst:.2e} exceeds "
                    f"tolerances.normalization={config['tolerances']['normalization']:g}")
        ctx.notes.append(f"normalization defect {worst:.2e}; refine family.n_theta or tolerances.rtol")

    save_family(target, family, ctx.artifact_provenance())
    ctx.outputs.append(target)

    for event in family.provenance.get("retune_events", []):
        ctx.notes.append(f"retuned at q={event['q']:.6g} by delta_omega={event['delta_omega']:.4g}")
    ctx.facts.update({
        "model": system.name,
        "orbits": len(family),
        "q range": f"[{family.q0:.6g}, {float(family.orbits[-1].q[0]):.6g}]",
        "termination": family.termination,
        "tracked modes": ", ".join(str(m.mode_index) for m in family.modes),
    })
    return exit_code


def _simulation_kind(args: argparse.Namespace, config: Mapping[str, Any]) -> str:
    for kind in ("reduced", "full", "linear"):
        if getattr(args, kind, False):
            return kind
    return config["simulation"]["kind"]


def cmd_simulate(ctx: RunContext, args: argparse.Namespace) -> int:
    """One reduced, full or linear simulation."""
    config = ctx.config
    sim = config["simulation"]
    kind = _simulation_kind(args, config)
    system = _system(config)
    signal = signal_from_config(sim["input"], system.dim_input)
    init = sim.get("init") or {}

    family_file = _family_path(ctx, args.family)
    model: Optional[ReducedModel] = None
    if kind == "reduced" or (init.get("state") is None and family_file.exists()):
        model = _reduced_model(load_family(family_file), system, config)

    if kind == "reduced":
        state = _reduced_init(model, init)
        trace = simulate_reduced(model, signal, state, sim["t_span"], sim["dt_out"])
    else:
        if init.get("state") is not None:
            x0 = np.asarray(init["state"], dtype=float)
        elif model is not None:
            x0 = reconstruct_state(model, _reduced_init(model, init))
        else:
            x0 = _fixed_point(system, config)
            ctx.notes.append("no family and no simulation.init.state; started at the fixed point")
        target = system
        if kind == "linear":
            target = linearized_model(system, _fixed_point(system, config))
        trace = simulate_full(target, signal, x0, sim["t_span"], sim["dt_out"], _integrator(config))

    _write_trace(ctx, f"trajectory_{kind}.csv", trace, system, sim.get("observable"))
    ctx.facts.update({
        "model": system.name,
        "kind": kind,
        "input": signal.describe(),
        "t": f"[{trace.t[0]:.6g}, {trace.t[-1]:.6g}]",
        "termination": trace.termination,
    })
    if model is not None:
        ctx.facts["retained psi"] = ", ".join(str(label) for label in model.retained) or "none"
    return EXIT_OK


def _comparison_rows(
    label: str,
    level: float,
    reference: SimulationTrace,
    traces: Mapping[str, SimulationTrace],
    observables: Mapping[str, np.ndarray],
) -> Tuple[List[pd.DataFrame], List[Dict[str, Any]]]:
    frames, rows = [], []
    # models that stop early are ranked against the others only up to the earliest stop
    shared = min(float(trace.t[-1]) for trace in traces.values())
    for name, trace in traces.items():
        frame, summary = compare_traces(reference, trace, observables)
        _, within = compare_traces(reference, trace, observables, t_max=shared)
        frame.insert(0, "model", name)
        frame.insert(0, label, level)
        frames.append(frame)
        rows.append({label: level, "model": name, "termination": trace.termination, **summary,
                     "l2_norm_shared": within["l2_norm"], "t_shared": shared})
    return frames, rows


def cmd_compare(ctx: RunContext, args: argparse.Namespace) -> int:
    """Reduced and linear models against the full model from matched initial conditions."""
    config = ctx.config
    sim = config["simulation"]
    cmp_cfg = config["compare"]
    system = _system(config)
    signal = signal_from_config(sim["input"], system.dim_input)
    settings = _integrator(config)
    observables = _observable_weights(system, cmp_cfg.get("observables"))
    linear = linearized_model(system, _fixed_point(system, config))
    init = dict(sim.get("init") or {})
    log = StageLogger("compare", logger, model=system.name)

    model = _reduced_model(load_family(_family_path(ctx, args.family)), system, config)
    frames: List[pd.DataFrame] = []
    rows: List[Dict[str, Any]] = []

    two_mode_path = args.two_mode_family or cmp_cfg.get("two_mode_family")
    if two_mode_path:
        path = Path(two_mode_path)
        two_mode = _reduced_model(load_family(path if path.is_absolute() else ctx.output_dir / path), system, config)
        start = _reduced_init(two_mode, init)
        x0 = reconstruct_state(two_mode, start)
        one_mode_start = lift_state(model, x0, limit=np.inf)
        log.info(f"Mixed initial state lifted onto the one-mode family at q={one_mode_start.q[0]:.4g}")
        reference = simulate_full(system, signal, x0, sim["t_span"], sim["dt_out"], settings)
        traces = {
            "two-mode": simulate_reduced(two_mode, signal, start, sim["t_span"], sim["dt_out"]),
            "reduced": simulate_reduced(model, signal, one_mode_start, sim["t_span"], sim["dt_out"]),
            "linear": simulate_full(linear, signal, x0, sim["t_span"], sim["dt_out"], settings),
        }
        level = float(np.linalg.norm(start.q[1:]))
        frames, rows = _comparison_rows("q_second", level, reference, traces, observables)
    else:
        levels = cmp_cfg["psi_levels"]
        if model.n_psi == 0 and any(level != 0.0 for level in levels):
            raise ParameterError("compare.psi_levels", "nonzero levels need a retained ψ coordinate", levels)
        base = _reduced_init(model, init)
        for level in levels:
            psi = base.psi.copy()
            if psi.size:
                psi[0] = complex(level)
            start = ReducedState.make(base.theta, base.q, psi)
            x0 = reconstruct_state(model, start)
            reference = simulate_full(system, signal, x0, sim["t_span"], sim["dt_out"], settings)
            traces = {
                "reduced": simulate_reduced(model, signal, start, sim["t_span"], sim["dt_out"]),
                "linear": simulate_full(linear, signal, x0, sim["t_span"], sim["dt_out"], settings),
            }
            level_frames, level_rows = _comparison_rows("psi_level", float(level), reference, traces, observables)
            frames.extend(level_frames)
            rows.extend(level_rows)
            log.info(f"psi level {level:g}: reduced l2={level_rows[0]['l2_norm_shared']:.4g}, "
                     f"linear l2={level_rows[1]['l2_norm_shared']:.4g} up to t={level_rows[0]['t_shared']:.4g}")

    ctx.table("compare_errors.csv", pd.concat(frames, ignore_index=True))
    summary = pd.DataFrame(rows)
    ctx.table("compare_summary.csv", summary)
    ctx.facts.update({
        "model": system.name,
        "observables": ", ".join(observables),
        "runs": len(rows),
    })
    for row in rows:
        ctx.notes.append(f"{row['model']}: l2_norm={row['l2_norm']:.4g} (t_end={row['t_end']:.4g}), "
                         f"{row['l2_norm_shared']:.4g} up to the shared t={row['t_shared']:.4g}")
    return EXIT_OK


def cmd_amplitude_sweep(ctx: RunContext, args: argparse.Namespace) -> int:
    """Steady-state amplitude response curves of the full, reduced and linear models."""
    config = ctx.config
    sweep = config["sweep"]
    system = _system(config)
    x_ss = _fixed_point(system, config)
    linear = linearized_model(system, x_ss)

    name = sweep.get("observable") or config["simulation"].get("observable")
    weights = system.observable(name) if name else _anchor_weights(system, x_ss)

    frequencies = sweep.get("frequencies")
    if not frequencies:
        spectrum = compute_spectrum(linear.A)
        centre = oscillatory_mode(spectrum, config["family"]["mode_index"]).frequency
        frequencies = list(np.linspace(0.8 * centre, 1.2 * centre, 21))

    reduced = None
    family_file = _family_path(ctx, args.family)
    if not args.no_reduced and family_file.exists():
        reduced = _reduced_model(load_family(family_file), system, config)
    elif not args.no_reduced:
        ctx.notes.append(f"no family artifact at {family_file}; reduced model skipped")

    workers = sweep.get("workers") or default_workers()
    frame = amplitude_sweep(
        system, sweep["amplitudes"], frequencies, weights,
        reduced=reduced, linear=linear,
        warmup_periods=sweep["warmup_periods"], max_periods=sweep["max_periods"],
        workers=workers,
    )
    ctx.table("amplitude_sweep.csv", frame, observable=name)

    ctx.facts.update({
        "model": system.name,
        "amplitudes": ", ".join(f"{a:g}" for a in sweep["amplitudes"]),
        "frequencies": f"{len(frequencies)} in [{min(frequencies):.4g}, {max(frequencies):.4g}]",
        "workers": workers,
    })
    for a, group in frame.groupby("a"):
        for column in [c for c in frame.columns if c.startswith("amplitude_")]:
            if group[column].notna().any():
                peak = group.loc[group[column].idxmax()]
                ctx.notes.append(f"a={a:g} {column[len('amplitude_'):]}: peak {peak[column]:.4g} "
                                 f"at omega_f={peak['omega_f']:.4g}")
    return EXIT_OK


def _anchor_weights(system: DynamicalSystem, x_ss: np.ndarray) -> np.ndarray:
    spectrum = compute_spectrum(system.jac_state(x_ss, system.zero_input()))
    weights = np.zeros(system.dim_state)
    weights[oscillatory_mode(spectrum, 1).anchor_index] = 1.0
    return weights


def cmd_export(ctx: RunContext, args: argparse.Namespace) -> int:
    """Orbit samples, Floquet data or the backbone of a stored family as CSV."""
    family = load_family(_family_path(ctx, args.family))
    system = _system(ctx.config) if ctx.config.get("model", {}).get("name") else None
    labels = list(system.state_labels) if system is not None else [f"x{i + 1}" for i in range(family.x_ss.size)]
    q_names = [f"q{k + 1}" for k in range(family.orbits[0].q.size)]

    if args.what == "orbits":
        frames = []
        for node, orbit in enumerate(family.orbits):
            frame = pd.DataFrame({"node": node, "theta": orbit.theta})
            for k, name in enumerate(q_names):
                frame[name] = orbit.q[k]
            for k, label in enumerate(labels):
                frame[label] = orbit.x_gamma[:, k]
            for k, label in enumerate(labels):
                frame[f"alpha_{label}"] = orbit.alpha[:, k]
            frames.append(frame)
        ctx.table("orbits.csv", pd.concat(frames, ignore_index=True))

    elif args.what == "floquet":
        rows, frames = [], []
        for node, orbit in enumerate(family.orbits):
            for position, label in enumerate(orbit.modes):
                row = {"node": node, **{name: orbit.q[k] for k, name in enumerate(q_names)},
                       "omega": orbit.omega, "mode_index": label,
                       "kappa_re": orbit.kappa[position].real, "kappa_im": orbit.kappa[position].imag,
                       "multiplier_re": orbit.mode_multipliers[position].real,
                       "multiplier_im": orbit.mode_multipliers[position].imag,
                       "branch": int(orbit.branch[position])}
                rows.append(row)
            frame = pd.DataFrame({"node": node, "theta": orbit.theta})
            for k, label in enumerate(labels + ["s"]):
                frame[f"Z_{label}"] = orbit.Z[:, k]
            frames.append(frame)
        ctx.table("floquet.csv", pd.DataFrame(rows))
        ctx.table("phase_response.csv", pd.concat(frames, ignore_index=True))

    else:
        if system is None:
            raise ConfigError("model.name", "export --what backbone needs the model", suggestion="--model pendulum")
        if family.mode_count != 1:
            raise ContractViolationError("Backbone export needs a one-parameter family")
        curve = backbone(family, system, ctx.config["simulation"].get("observable"))
        frame = pd.DataFrame({"q": curve.q, "omega_bar": curve.omega_bar, "amplitude": curve.amplitude,
                              "omega": curve.omega})
        for k, label in enumerate(curve.mode_labels):
            frame[f"re_kappa_{label}"] = curve.re_kappa[:, k]
        ctx.table("backbone.csv", frame, footer={"termination": family.termination})

    ctx.facts.update({"orbits": len(family), "what": args.what, "termination": family.termination})
    return EXIT_OK


HANDLERS = {
    "spectrum": cmd_spectrum,
    "build-family": cmd_build_family,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "amplitude-sweep": cmd_amplitude_sweep,
    "export": cmd_export,
}


# =============================================================================
# Argument parsing
# =============================================================================

def _toml_value(value: Any) -> str:
    return json.dumps(value) if isinstance(value, str) else repr(value)


FLAG_KEYS = {
    "model": "model.name",
    "mode_index": "family.mode_index",
    "q0": "family.q0",
    "delta_q": "family.delta_q",
    "q_max": "family.q_max",
    "delta_omega": "family.delta_omega",
    "n_theta": "family.n_theta",
    "shooting_tol": "tolerances.shooting",
}


def flag_overrides(args: argparse.Namespace) -> List[str]:
    """Flags that map onto config keys, as ``key=value`` overrides (applied before ``--set``)."""
    overrides = []
    for attr, key in FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides.append(f"{key}={_toml_value(value)}")
    return overrides


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config',
        type=Path,
        help='Run configuration (TOML, YAML or JSON)'
    )
    common.add_argument(
        '--set',
        dest='overrides',
        action='append',
        default=[],
        metavar='KEY=VALUE',
        help='Override a config key, e.g. --set family.q_max=2.0 (repeatable)'
    )
    common.add_argument(
        '--output-dir',
        type=Path,
        help='Directory for CSV tables and artifacts (default: output.dir)'
    )
    common.add_argument(
        '--model',
        help='Model name (overrides model.name)'
    )
    common.add_argument(
        '--family',
        type=Path,
        help='Family artifact path (default: <output-dir>/<output.family>)'
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument(
        '--verbose', '-v',
        action='store_true',
        help='Debug output, including Newton residuals'
    )
    verbosity.add_argument(
        '--quiet', '-q',
        action='store_true',
        help='Warnings and errors only'
    )
    common.add_argument(
        '--log-file',
        type=Path,
        help='Also write JSON-lines logs to this file (default: output.log_file)'
    )

    parser = argparse.ArgumentParser(
        prog="nlmodes",
        description="Adaptive phase-amplitude reduced-order models of forced oscillators",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s spectrum --model pendulum
  %(prog)s build-family --config integration-tests/figures/fig1_pendulum_family.toml
  %(prog)s build-family --config run.toml --q-max 1.5 --set family.delta_q_max=0.02
  %(prog)s simulate --config run.toml --reduced
  %(prog)s compare --config integration-tests/figures/fig5_power_mode1.toml
  %(prog)s amplitude-sweep --config integration-tests/figures/fig4_planar_sweep.toml
  %(prog)s export --config run.toml --what floquet
        """
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    sub.add_parser('spectrum', parents=[common], help='Fixed point and Jacobian spectrum')

    build = sub.add_parser('build-family', parents=[common], help='Continue a family of forced periodic orbits')
    build.add_argument('--mode-index', type=int, help='1-based oscillatory mode (family.mode_index)')
    build.add_argument('--q0', type=float, help='Seed amplitude (family.q0)')
    build.add_argument('--delta-q', type=float, help='Initial amplitude step (family.delta_q)')
    build.add_argument('--q-max', type=float, help='Target amplitude (family.q_max)')
    build.add_argument('--delta-omega', type=float, help='Seed detuning (family.delta_omega)')
    build.add_argument('--n-theta', type=int, help='Phase grid size (family.n_theta)')
    build.add_argument('--shooting-tol', type=float, help='Shooting tolerance (tolerances.shooting)')
    build.add_argument('--two-mode', action='store_true',
                       help='Extend the family to the (q1, q2, q3) lattice of [family.lattice]')

    simulate = sub.add_parser('simulate', parents=[common], help='Reduced, full or linear simulation')
    kind = simulate.add_mutually_exclusive_group()
    kind.add_argument('--reduced', action='store_true', help='Reduced model (default: simulation.kind)')
    kind.add_argument('--full', action='store_true', help='Full nonlinear model')
    kind.add_argument('--linear', action='store_true', help='Linearization about the fixed point')

    compare = sub.add_parser('compare', parents=[common], help='Reduced and linear models against the full model')
    compare.add_argument('--two-mode-family', type=Path,
                         help='Lattice artifact for a two-mode comparison (compare.two_mode_family)')

    sweep = sub.add_parser('amplitude-sweep', parents=[common], help='Steady-state amplitude response curves')
    sweep.add_argument('--no-reduced', action='store_true', help='Skip the reduced model')

    export = sub.add_parser('export', parents=[common], help='Write stored family data as CSV')
    export.add_argument('--what', choices=('orbits', 'floquet', 'backbone'), default='orbits',
                        help='Which table to export (default: orbits)')

    return parser


def _load_context(args: argparse.Namespace) -> RunContext:
    overrides = flag_overrides(args) + list(args.overrides)
    _, result = validate_and_load_config(args.config, overrides)
    if not args.quiet:
        for warning in result.warnings:
            print(f"Warning: {warning}", file=sys.stderr)
    result.raise_if_invalid()
    config = result.validated_config
    output = config["output"]
    output_dir = args.output_dir or Path(output["dir"])
    return RunContext(
        command=args.command,
        config=config,
        config_sha256=config_hash(config),
        output_dir=Path(output_dir),
        prefix=output.get("prefix") or "",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        ctx = _load_context(args)
    except ConfigValidationError as e:
        print(f"\nERROR: Configuration validation failed with {len(e.errors)} error(s):", file=sys.stderr)
        for err_msg in e.errors[:20]:
            print(f"   - {err_msg}", file=sys.stderr)
        if len(e.errors) > 20:
            print(f"   ... and {len(e.errors) - 20} more errors", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError:
        print(f"ERROR: Config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    log_file = args.log_file or ctx.config["output"].get("log_file")
    setup_logger("nlmodes", log_file=Path(log_file) if log_file else None, level=level)
    logger.debug(f"config_sha256={ctx.config_sha256}", extra={"stage": "cli"})

    try:
        code = HANDLERS[args.command](ctx, args)
    except ConfigError as e:
        logger.error(str(e), extra={"stage": "cli", "error_code": e.error_code})
        return EXIT_CONFIG
    except AtomicWriteError as e:
        logger.error(str(e), extra={"stage": "cli", "error_code": "FS-01"})
        return EXIT_CONFIG
    except NlmodesError as e:
        logger.error(str(e), extra={"stage": "cli", "error_code": e.error_code})
        return e.exit_code
    except KeyboardInterrupt:
        logger.error("Interrupted", extra={"stage": "cli", "error_code": "RT-06"})
        return EXIT_INTERRUPTED

    summary = summarize_run(args.command, ctx.outputs, ctx.facts, ctx.notes)
    summary_path = ctx.path(f"{args.command}_summary.md")
    try:
        atomic_write(summary_path, summary)
    except AtomicWriteError as e:
        logger.warning(f"Run summary not written: {e}", extra={"stage": "cli", "error_code": "FS-01"})
    if not args.quiet:
        print(summary)
    return code


def run() -> None:
    """Console-script wrapper around ``main``."""
    sys.exit(main())


if __name__ == "__main__":
    run()
