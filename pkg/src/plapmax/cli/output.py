"""Result files. Each file is written once, through a temporary file and a rename."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
import structlog
from pydantic import BaseModel

from plapmax.fem.mesh import Mesh, NodalField
from plapmax.schemas import SCHEMA_VERSION

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = ".17g"


def write_atomic(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.debug("output_written", path=str(path), bytes=len(text))
    return path


def format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float | np.floating):
        return format(float(value), FLOAT_FORMAT)
    if value is None:
        return ""
    return str(value)


def write_json(path: Path, document: BaseModel) -> Path:
    return write_atomic(path, document.model_dump_json(by_alias=True, indent=2) + "\n")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    """CSV with a ``# schema_version`` comment line and fixed float formatting."""
    buffer = io.StringIO()
    buffer.write(f"# schema_version={SCHEMA_VERSION}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return write_atomic(path, buffer.getvalue())


def write_gnuplot(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[float]], *, title: str = ""
) -> Path:
    """Whitespace-separated columns with ``#`` comment lines."""
    lines = [f"# schema_version={SCHEMA_VERSION}"]
    if title:
        lines.append(f"# {title}")
    lines.append("# " + " ".join(header))
    lines.extend(" ".join(format_value(float(v)) for v in row) for row in rows)
    return write_atomic(path, "\n".join(lines) + "\n")


def write_nodal_csv(path: Path, mesh: Mesh, *fields: tuple[str, NodalField]) -> Path:
    """Coordinate columns followed by one column per named field."""
    mesh.check(*(f for _, f in fields))
    coords = ["x", "y"][: mesh.dimension]
    header = [*coords, *(name for name, _ in fields)]
    columns = [mesh.nodes[:, k] for k in range(mesh.dimension)]
    columns += [f.values for _, f in fields]
    rows = zip(*(col.tolist() for col in columns), strict=True)
    return write_csv(path, header, rows)
