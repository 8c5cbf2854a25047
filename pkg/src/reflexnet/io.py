"""CSV and JSON Lines formats for spikes, frequencies, PSTHs, references and logs."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import IO, Iterable

from .viewer import FrequencySeries, Psth, ReferenceTrace

SPIKE_HEADER = ("agent_id", "time_ms")
FREQUENCY_HEADER = ("time_ms", "frequency_hz")
PSTH_HEADER = ("bin_start_ms", "count")
TRUNCATION_MARKER = "# truncated"


class FormatError(ValueError):
    pass


def fmt(x: float) -> str:
    # repr round-trips floats exactly, which keeps logs byte-stable
    return repr(float(x))


class AppendLog:
    """An append-only text log that marks itself truncated if the run aborts.

    Use as a context manager; on an exception the marker line is written
    before the file is closed and the exception propagates.
    """

    def __init__(self, path, marker: str):
        self.path = Path(path)
        self.marker = marker
        self.stream: IO[str] | None = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.stream = self.path.open("w", newline="")
        return self

    def write(self, line: str) -> None:
        self.stream.write(line + "\n")

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self.stream.write(self.marker + "\n")
        self.stream.close()
        return False


class SpikeLog(AppendLog):
    """Streams ``agent_id,time_ms`` rows as spikes happen."""

    def __init__(self, path):
        super().__init__(path, TRUNCATION_MARKER)

    def __enter__(self):
        super().__enter__()
        self.write(",".join(SPIKE_HEADER))
        return self

    def __call__(self, agent_id: str, t: float) -> None:
        self.write(f"{agent_id},{fmt(t)}")


class JsonlLog(AppendLog):
    """Text stream for an organization log, with a JSON truncation record."""

    def __init__(self, path):
        super().__init__(path, json.dumps({"truncated": True}))


def read_spikes(path) -> list[tuple[str, float]]:
    rows = _read_csv(path, SPIKE_HEADER)
    return [(r[0], float(r[1])) for r in rows]


def _read_csv(path, header: tuple[str, ...]) -> list[list[str]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    lines = [l for l in text.splitlines() if l.strip() and l != TRUNCATION_MARKER]
    if not lines:
        raise FormatError(f"{path}: empty file, expected header {','.join(header)}")
    rows = list(csv.reader(lines))
    if tuple(c.strip() for c in rows[0]) != header:
        raise FormatError(f"{path}: expected header {','.join(header)}, got {','.join(rows[0])}")
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}:{i}: expected {len(header)} columns, got {len(row)}")
    return rows[1:]


def write_frequency(path, series: FrequencySeries) -> None:
    lines = [",".join(FREQUENCY_HEADER)]
    lines += [f"{fmt(t)},{fmt(f)}" for t, f in series.points()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_frequency(path) -> FrequencySeries:
    rows = _read_csv(path, FREQUENCY_HEADER)
    try:
        pts = [(float(t), float(f)) for t, f in rows]
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric value ({exc})") from exc
    return FrequencySeries(tuple(p[0] for p in pts), tuple(p[1] for p in pts))


def write_reference(path, reference: ReferenceTrace) -> None:
    write_frequency(path, FrequencySeries(reference.times, reference.freqs))


def read_reference(path, tolerance: float = 0.05, source: str = "experimental") -> ReferenceTrace:
    series = read_frequency(path)
    try:
        return ReferenceTrace(series.times, series.freqs, source=source, tolerance=tolerance)
    except ValueError as exc:
        raise FormatError(f"{path}: invalid reference trace ({exc})") from exc


def write_psth(path, hist: Psth) -> None:
    lines = [",".join(PSTH_HEADER)]
    lines += [f"{fmt(b)},{int(c)}" for b, c in zip(hist.bin_starts.tolist(), hist.counts.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_psth(path) -> list[tuple[float, int]]:
    return [(float(b), int(c)) for b, c in _read_csv(path, PSTH_HEADER)]


def write_json(path, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_lines(path, lines: Iterable[str]) -> None:
    Path(path).write_text("".join(l + "\n" for l in lines))
