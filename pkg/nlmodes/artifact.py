"""
Family artifact: a versioned, deterministic archive of an OrbitFamily.

Layout (a zip archive readable by ``np.load`` as well):

    manifest.json            schema, version, provenance, scalar metadata
    modes/<field>.npy        tracked spectral modes
    orbits/<field>.npy       per-orbit arrays stacked on axis 0

Complex arrays are split into ``<field>.re.npy`` and ``<field>.im.npy``
float64 members. Members are written in sorted order with fixed timestamps,
so the same family always gives the same bytes.
"""

import io
import json
import zipfile
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from . import __version__
from .core.atomic_write import atomic_write_bytes
from .core.errors import ArtifactError, MalformedArtifactError
from .family import OrbitFamily
from .periodic import ForcedOrbit
from .spectral import SpectralMode

SCHEMA_NAME = "nlmodes.family"
SCHEMA_VERSION = 1
FIXED_DATE = (1980, 1, 1, 0, 0, 0)

ORBIT_ARRAYS = ("q", "x_gamma", "alpha", "x_ss", "multipliers", "mode_multipliers",
                "kappa", "branch", "g", "I", "Z", "E")
ORBIT_SCALARS = ("omega", "shooting_residual", "newton_iterations", "retuned")


def jsonable(value: Any) -> Any:
    """Plain JSON types for provenance values (numpy scalars and arrays included)."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def _npy_bytes(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    np.lib.format.write_array(buffer, np.ascontiguousarray(array), allow_pickle=False)
    return buffer.getvalue()


def _add_array(members: Dict[str, bytes], name: str, array) -> None:
    array = np.asarray(array)
    if np.iscomplexobj(array):
        members[f"{name}.re.npy"] = _npy_bytes(array.real.astype(np.float64))
        members[f"{name}.im.npy"] = _npy_bytes(array.imag.astype(np.float64))
    else:
        members[f"{name}.npy"] = _npy_bytes(array)


def family_to_bytes(family: OrbitFamily, provenance: Optional[Mapping[str, Any]] = None) -> bytes:
    """Serialize ``family``; ``provenance`` entries are merged over the family's own."""
    for orbit in family.orbits:
        orbit.require_analysis()

    members: Dict[str, bytes] = {}
    for name in ORBIT_ARRAYS:
        _add_array(members, f"orbits/{name}", np.stack([np.asarray(getattr(o, name)) for o in family.orbits]))
    _add_array(members, "orbits/omega", np.array([o.omega for o in family.orbits], dtype=float))
    _add_array(members, "orbits/shooting_residual",
               np.array([o.shooting_residual for o in family.orbits], dtype=float))
    _add_array(members, "orbits/newton_iterations",
               np.array([o.newton_iterations for o in family.orbits], dtype=np.int64))
    _add_array(members, "orbits/retuned", np.array([o.retuned for o in family.orbits], dtype=bool))

    _add_array(members, "modes/eigenvalue", np.array([m.eigenvalue for m in family.modes], dtype=complex))
    _add_array(members, "modes/v", np.stack([m.v for m in family.modes]))
    _add_array(members, "modes/w", np.stack([m.w for m in family.modes]))
    if family.q_axes is not None:
        for axis, values in enumerate(family.q_axes):
            _add_array(members, f"lattice/q{axis + 1}", np.asarray(values, dtype=float))

    merged = dict(family.provenance)
    merged.update(provenance or {})
    manifest = {
        "schema": SCHEMA_NAME,
        "version": SCHEMA_VERSION,
        "package_version": __version__,
        "provenance": jsonable(merged),
        "family": {
            "mode_count": family.mode_count,
            "lattice_shape": list(family.lattice_shape) if family.lattice_shape else None,
            "termination": family.termination,
            "terminal_q": jsonable(family.terminal_q),
            "n_orbits": len(family),
            "orbit_modes": list(family.orbits[0].modes),
            "anchor_indices": list(family.orbits[0].anchor_indices),
        },
        "modes": [
            {"mode_index": m.mode_index, "eigen_index": m.eigen_index, "anchor_index": m.anchor_index}
            for m in family.modes
        ],
    }
    members["manifest.json"] = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")

    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w") as archive:
        for name in sorted(members):
            info = zipfile.ZipInfo(name, date_time=FIXED_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            archive.writestr(info, members[name])
    return buffer.getvalue()


def save_family(path: Path, family: OrbitFamily, provenance: Optional[Mapping[str, Any]] = None) -> Path:
    """Atomically write the family artifact."""
    path = Path(path)
    atomic_write_bytes(path, family_to_bytes(family, provenance))
    return path


def _read_arrays(archive: zipfile.ZipFile, prefix: str) -> Dict[str, np.ndarray]:
    arrays: Dict[str, np.ndarray] = {}
    parts: Dict[str, Dict[str, np.ndarray]] = {}
    for name in archive.namelist():
        if not name.startswith(prefix) or not name.endswith(".npy"):
            continue
        stem = name[len(prefix):-len(".npy")]
        array = np.lib.format.read_array(io.BytesIO(archive.read(name)), allow_pickle=False)
        if stem.endswith(".re") or stem.endswith(".im"):
            parts.setdefault(stem[:-3], {})[stem[-2:]] = array
        else:
            arrays[stem] = array
    for stem, pair in parts.items():
        if set(pair) != {"re", "im"}:
            raise MalformedArtifactError(f"Complex member '{prefix}{stem}' lacks its real or imaginary part")
        arrays[stem] = pair["re"] + 1j * pair["im"]
    return arrays


def read_manifest(path: Path) -> Dict[str, Any]:
    """Manifest of an artifact, after the schema check."""
    manifest, _ = _open(path)
    return manifest


def _open(path: Path) -> Tuple[Dict[str, Any], Dict[str, Dict[str, np.ndarray]]]:
    path = Path(path)
    try:
        with zipfile.ZipFile(path) as archive:
            manifest = json.loads(archive.read("manifest.json").decode("utf-8"))
            _check_schema(manifest, path)
            arrays = {prefix: _read_arrays(archive, f"{prefix}/") for prefix in ("orbits", "modes", "lattice")}
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, ValueError, OSError) as exc:
        raise MalformedArtifactError(f"Cannot read family artifact {path}: {exc}") from exc
    return manifest, arrays


def _check_schema(manifest: Mapping[str, Any], path: Path) -> None:
    if manifest.get("schema") != SCHEMA_NAME:
        raise MalformedArtifactError(f"{path} is not a family artifact (schema={manifest.get('schema')!r})")
    version = manifest.get("version")
    if version != SCHEMA_VERSION:
        raise ArtifactError(
            f"{path} uses artifact schema version {version}; this nlmodes reads version {SCHEMA_VERSION}"
        )


def load_family(path: Path) -> OrbitFamily:
    """
    Read an artifact written by ``save_family``.

    Raises:
        ArtifactError: schema version differs
        MalformedArtifactError: unreadable or incomplete archive
    """
    manifest, arrays = _open(path)
    meta = manifest["family"]
    orbit_arrays = arrays["orbits"]
    mode_arrays = arrays["modes"]
    try:
        modes = tuple(
            SpectralMode(
                eigenvalue=complex(mode_arrays["eigenvalue"][i]),
                v=mode_arrays["v"][i],
                w=mode_arrays["w"][i],
                anchor_index=int(entry["anchor_index"]),
                mode_index=int(entry["mode_index"]),
                eigen_index=int(entry["eigen_index"]),
            )
            for i, entry in enumerate(manifest["modes"])
        )
        orbits = []
        for i in range(int(meta["n_orbits"])):
            fields = {name: orbit_arrays[name][i] for name in ORBIT_ARRAYS}
            orbits.append(ForcedOrbit(
                omega=float(orbit_arrays["omega"][i]),
                shooting_residual=float(orbit_arrays["shooting_residual"][i]),
                newton_iterations=int(orbit_arrays["newton_iterations"][i]),
                retuned=bool(orbit_arrays["retuned"][i]),
                modes=tuple(meta["orbit_modes"]),
                anchor_indices=tuple(meta["anchor_indices"]),
                **fields,
            ))
    except (KeyError, IndexError) as exc:
        raise MalformedArtifactError(f"Family artifact {path} is incomplete: missing {exc}") from exc

    lattice = arrays["lattice"]
    q_axes = tuple(lattice[f"q{k}"] for k in (1, 2, 3)) if lattice else None
    terminal_q = meta.get("terminal_q")
    return OrbitFamily(
        orbits=orbits,
        modes=modes,
        mode_count=int(meta["mode_count"]),
        lattice_shape=tuple(meta["lattice_shape"]) if meta.get("lattice_shape") else None,
        q_axes=q_axes,
        provenance=dict(manifest.get("provenance", {})),
        termination=meta.get("termination", "completed"),
        terminal_q=None if terminal_q is None else np.asarray(terminal_q, dtype=float),
    )
