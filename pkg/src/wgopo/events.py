"""Detector event streams and their on-disk formats.

Binary layout (little-endian)::

    header:  8 bytes magic b"WGOPOEV1", u32 record count
    record:  u8 channel, i64 timestamp in picoseconds, u8 tag

Tags: 0 photon, 1 dark count, 2 after-pulse. The CSV alternative has the
header ``channel,timestamp_ps,tag`` and one record per line. Either format may
hold several channels; readers return one stream per channel.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

TAG_PHOTON = 0
TAG_DARK = 1
TAG_AFTERPULSE = 2
TAG_NAMES = {TAG_PHOTON: "photon", TAG_DARK: "dark", TAG_AFTERPULSE: "afterpulse"}

MAGIC = b"WGOPOEV1"
RECORD_DTYPE = np.dtype([("channel", "<u1"), ("timestamp", "<i8"), ("tag", "<u1")])
CSV_HEADER = "channel,timestamp_ps,tag"


@dataclass(frozen=True)
class EventStream:
    channel: int
    timestamps: np.ndarray  # int64 ps, strictly increasing
    tags: np.ndarray  # uint8

    def __post_init__(self):
        ts = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        tags = np.ascontiguousarray(self.tags, dtype=np.uint8)
        if ts.shape != tags.shape or ts.ndim != 1:
            raise ValueError("timestamps and tags must be 1-D arrays of equal length")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError(f"channel {self.channel}: timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "tags", tags)

    def __len__(self):
        return self.timestamps.size

    @classmethod
    def empty(cls, channel: int) -> EventStream:
        return cls(channel, np.empty(0, np.int64), np.empty(0, np.uint8))

    def count(self, tag: int | None = None) -> int:
        return len(self) if tag is None else int(np.count_nonzero(self.tags == tag))

    def times_ns(self) -> np.ndarray:
        return self.timestamps / 1e3


def _records(streams) -> np.ndarray:
    n = sum(len(s) for s in streams)
    rec = np.empty(n, dtype=RECORD_DTYPE)
    pos = 0
    for s in streams:
        k = len(s)
        rec["channel"][pos:pos + k] = s.channel
        rec["timestamp"][pos:pos + k] = s.timestamps
        rec["tag"][pos:pos + k] = s.tags
        pos += k
    return rec


def _streams(rec: np.ndarray) -> dict[int, EventStream]:
    out = {}
    for ch in np.unique(rec["channel"]):
        sel = rec[rec["channel"] == ch]
        out[int(ch)] = EventStream(int(ch), sel["timestamp"], sel["tag"])
    return out


def write_binary(path: str | Path, *streams: EventStream) -> None:
    rec = _records(streams)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(rec.size).astype("<u4").tobytes())
        fh.write(rec.tobytes())


def read_binary(path: str | Path) -> dict[int, EventStream]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:8] != MAGIC:
        raise ConfigError(f"{path}: not an event file (bad magic)")
    n = int(np.frombuffer(data[8:12], "<u4")[0])
    body = data[12:]
    if len(body) != n * RECORD_DTYPE.itemsize:
        raise ConfigError(f"{path}: truncated or oversized event file "
                          f"({len(body)} bytes for {n} records)")
    try:
        return _streams(np.frombuffer(body, RECORD_DTYPE))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def write_csv(path: str | Path, *streams: EventStream) -> None:
    rec = _records(streams)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for ch, t, tag in zip(rec["channel"].tolist(), rec["timestamp"].tolist(), rec["tag"].tolist()):
            fh.write(f"{ch},{t},{tag}\n")


def read_csv(path: str | Path) -> dict[int, EventStream]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: expected header {CSV_HEADER!r}, got {header!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                ch, t, tag = (int(p) for p in parts)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: malformed record {line!r}") from None
            if len(parts) != 3 or not 0 <= ch < 256 or tag not in TAG_NAMES:
                raise ConfigError(f"{path}:{lineno}: malformed record {line!r}")
            rows.append((ch, t, tag))
    rec = np.array(rows, dtype=RECORD_DTYPE) if rows else np.empty(0, RECORD_DTYPE)
    try:
        return _streams(rec)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def read_events(path: str | Path) -> dict[int, EventStream]:
    """Read either format, chosen by content."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
        return read_binary(path) if head == MAGIC else read_csv(path)
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: neither an event file nor UTF-8 CSV") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc


def write_events(path: str | Path, *streams: EventStream) -> None:
    if str(path).endswith(".csv"):
        write_csv(path, *streams)
    else:
        write_binary(path, *streams)
