"""
Output side of the CLI: text tables, CSV files and run manifests.
"""
import json
import time
from pathlib import Path

import pandas as pd

from errors import OutputError
from schemas import OutputEntry, RunManifest
from utils import atomic_write_text, format_value, generate_content_hash, logger

CSV_FLOAT_FORMAT = '%.17g'


def format_table(rows, title=None):
    """Two-column (quantity, value) text table."""
    width = max((len(name) for name, _ in rows), default=8)
    lines = []
    if title:
        lines.append(title)
        lines.append('-' * max(len(title), width + 16))
    lines.append(f"{'quantity':<{width}}  value")
    for name, value in rows:
        lines.append(f"{name:<{width}}  {format_value(value)}")
    return '\n'.join(lines)


def frame_to_csv(frame: pd.DataFrame) -> str:
    """CSV text with round-trip float precision."""
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')


def _cell(value):
    if isinstance(value, float):
        return CSV_FLOAT_FORMAT % value
    return value


def rows_to_frame(rows) -> pd.DataFrame:
    """(quantity, value) pairs; floats are pre-formatted since the value column mixes types."""
    return pd.DataFrame([(name, _cell(value)) for name, value in rows], columns=['quantity', 'value'])


class ReportWriter:
    """Writes one command's outputs into a directory and tracks them for the manifest."""

    def __init__(self, outdir, command, version, tag=None):
        self.outdir = Path(outdir)
        self.command = command
        self.tag = tag
        self.version = version
        self.outputs = []
        self.started = time.perf_counter()
        logger.info(f"Report writer for '{command}' -> {self.outdir}")

    def _write(self, name, text):
        path = self.outdir / name
        try:
            atomic_write_text(path, text)
        except OSError as e:
            raise OutputError(f"failed to write {path}: {e}") from e
        self.outputs.append(path)
        return path

    def write_frame(self, name, frame: pd.DataFrame):
        """
        Write a DataFrame as CSV.

        Args:
            name: file name inside the output directory
            frame: table to write

        Returns:
            Path: written file
        """
        return self._write(name, frame_to_csv(frame))

    def write_rows(self, name, rows):
        """Write (quantity, value) pairs as a two-column CSV."""
        return self.write_frame(name, rows_to_frame(rows))

    def write_manifest(self, parameters, master_seed=None):
        """Write <command>[_<tag>]_manifest.json listing every output written so far."""
        entries = [OutputEntry(path=p.name, sha256=generate_content_hash(p)) for p in self.outputs]
        manifest = RunManifest(
            command=self.command,
            parameters=parameters,
            master_seed=master_seed,
            version=self.version,
            outputs=entries,
            duration_s=round(time.perf_counter() - self.started, 6),
        )
        text = json.dumps(manifest.model_dump(mode='json'), indent=2, sort_keys=True) + '\n'
        stem = f"{self.command}_{self.tag}" if self.tag else self.command
        path = self._write(f"{stem}_manifest.json", text)
        return manifest, path
