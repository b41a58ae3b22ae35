"""
Tabular outputs and run summaries.

Every CSV written by nlmodes has the same shape:

    # nlmodes 0.1.0 config_sha256=<hash> command=build-family model=pendulum
    q,omega_bar,amplitude,re_kappa_1
    0.001,0.99874...,...
    # termination=completed

The first line is the provenance comment, followed by a header row and data
('.' decimal, comma separator, LF line endings). Optional footer comment lines
carry run outcomes such as the termination reason.
"""

from io import StringIO
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .atomic_write import atomic_write

COMMENT = "#"


def provenance_line(version: str, config_sha256: str, **fields: Any) -> str:
    """Render the leading comment line of a table."""
    parts = [f"{COMMENT} nlmodes {version}", f"config_sha256={config_sha256}"]
    parts.extend(f"{key}={value}" for key, value in fields.items() if value is not None)
    return " ".join(parts)


def format_table(
    frame: pd.DataFrame,
    provenance: str,
    footer: Optional[Mapping[str, Any]] = None,
) -> str:
    """CSV text of ``frame`` with the provenance line and footer comments."""
    body = frame.to_csv(index=False, lineterminator="\n", float_format="%.12g")
    lines = [provenance.rstrip("\n"), body.rstrip("\n")]
    for key, value in (footer or {}).items():
        lines.append(f"{COMMENT} {key}={value}")
    return "\n".join(lines) + "\n"


def write_table(
    path: Path,
    frame: pd.DataFrame,
    provenance: str,
    footer: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Atomically write ``frame`` as a provenance-stamped CSV."""
    path = Path(path)
    atomic_write(path, format_table(frame, provenance, footer))
    return path


def parse_comment_fields(line: str) -> Dict[str, str]:
    """key=value pairs of one comment line."""
    fields: Dict[str, str] = {}
    for token in line.lstrip(COMMENT).split():
        if "=" in token:
            key, value = token.split("=", 1)
            fields[key] = value
    return fields


def read_table(path: Path) -> Tuple[pd.DataFrame, Dict[str, str], Dict[str, str]]:
    """
    Read a table written by ``write_table``.

    Returns:
        (frame, provenance fields, footer fields)
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    provenance: Dict[str, str] = {}
    footer: Dict[str, str] = {}
    data: List[str] = []
    for i, line in enumerate(lines):
        if line.startswith(COMMENT):
            if i == 0:
                provenance = parse_comment_fields(line)
                head = line.lstrip(COMMENT).split()
                if len(head) >= 2 and head[0] == "nlmodes":
                    provenance.setdefault("version", head[1])
            else:
                footer.update(parse_comment_fields(line))
        else:
            data.append(line)
    frame = pd.read_csv(StringIO("\n".join(data) + "\n"))
    return frame, provenance, footer


def summarize_run(
    command: str,
    outputs: Sequence[Path],
    facts: Mapping[str, Any],
    notes: Sequence[str] = (),
) -> str:
    """
    Markdown summary of one CLI command.

    Args:
        command: Subcommand name
        outputs: Files written
        facts: Key figures (model, q range, termination, ...)
        notes: Free-form lines such as retune events
    """
    lines = [f"# nlmodes {command}", ""]
    if facts:
        lines.append("## Summary")
        for key, value in facts.items():
            lines.append(f"- **{key}**: {value}")
        lines.append("")
    if outputs:
        lines.append("## Outputs")
        lines.extend(f"- `{p}`" for p in outputs)
        lines.append("")
    if notes:
        lines.append("## Notes")
        lines.extend(f"- {note}" for note in notes)
        lines.append("")
    return "\n".join(lines)
