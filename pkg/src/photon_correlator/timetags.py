"""Timestamped detection events and their on-disk formats.

Every timing quantity in the package is carried as an integer number of
picoseconds (no floating-point timestamps anywhere), so multi-second runs
at tens of MHz never accumulate rounding drift.  A stream is sorted by
(t, channel); the channel tie-break makes merges deterministic and hence
every seeded Monte Carlo run reproducible.

Two interchange formats are supported:

* Binary "TTAG1": magic ``TTAG``, u16 version (=1), i64 duration_ps,
  u8 channel count, then 9-byte records (u8 channel, i64 t), all
  little-endian, records sorted.
* Text: CSV with header ``channel,timestamp_ps``.  Our writer prepends a
  ``# duration_ps=<N>`` comment so the observation window survives a
  round trip; readers accept files without it and fall back to
  (last tag + 1).
"""

from dataclasses import dataclass

import numpy as np

from .errors import FormatError

TTAG_MAGIC = b"TTAG"
TTAG_VERSION = 1
CHANNEL_MAX = 255

_RECORD_DTYPE = np.dtype([("channel", "u1"), ("t", "<i8")])


@dataclass(frozen=True)
class TimeTag:
    """A single detection: detector/clock identity and time in ps from run origin."""

    channel: int
    t: int

    def sort_key(self):
        return (self.t, self.channel)


class TagStream:
    """An ordered sequence of time tags over a fixed observation window.

    Internally two parallel numpy arrays (uint8 channels, int64 times) are
    kept read-only; `meta` holds free-form annotations (seed, wavelength,
    source description) that are *not* serialized and are excluded from
    equality.
    """

    __slots__ = ("channels", "times", "duration_ps", "meta")

    def __init__(self, channels, times, duration_ps, meta=None, _validated=False):
        channels = np.asarray(channels, dtype=np.uint8)
        times = np.asarray(times, dtype=np.int64)
        duration_ps = int(duration_ps)
        if channels.shape != times.shape or channels.ndim != 1:
            raise ValueError("channels and times must be 1-d arrays of equal length")
        if not _validated:
            _validate_sorted(channels, times)
            if times.size:
                if times[0] < 0:
                    raise ValueError(f"tag time {times[0]} < 0")
                if times[-1] >= duration_ps:
                    raise ValueError(
                        f"tag time {times[-1]} >= duration_ps={duration_ps}"
                    )
        if duration_ps < 0:
            raise ValueError("duration_ps must be >= 0")
        channels = channels.copy() if channels.flags.writeable else channels
        times = times.copy() if times.flags.writeable else times
        channels.setflags(write=False)
        times.setflags(write=False)
        self.channels = channels
        self.times = times
        self.duration_ps = duration_ps
        self.meta = dict(meta) if meta else {}

    @classmethod
    def empty(cls, duration_ps=0, meta=None):
        return cls(np.empty(0, np.uint8), np.empty(0, np.int64), duration_ps, meta)

    @classmethod
    def from_pairs(cls, pairs, duration_ps, meta=None):
        """Build a stream from an iterable of (channel, t) pairs (must be sorted)."""
        pairs = list(pairs)
        if any(not 0 <= p[0] <= CHANNEL_MAX for p in pairs):
            raise ValueError(f"channel outside [0, {CHANNEL_MAX}]")
        ch = np.array([p[0] for p in pairs], dtype=np.uint8)
        t = np.array([p[1] for p in pairs], dtype=np.int64)
        return cls(ch, t, duration_ps, meta)

    def __len__(self):
        return int(self.times.size)

    def __getitem__(self, i):
        return TimeTag(int(self.channels[i]), int(self.times[i]))

    def __iter__(self):
        for c, t in zip(self.channels, self.times):
            yield TimeTag(int(c), int(t))

    def __eq__(self, other):
        if not isinstance(other, TagStream):
            return NotImplemented
        return (
            self.duration_ps == other.duration_ps
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.times, other.times)
        )

    def __repr__(self):
        return (
            f"TagStream({len(self)} tags, duration_ps={self.duration_ps}, "
            f"meta={self.meta!r})"
        )


def _validate_sorted(channels, times):
    if times.size < 2:
        return
    dt = np.diff(times)
    bad = (dt < 0) | ((dt == 0) & (np.diff(channels.astype(np.int16)) < 0))
    if bad.any():
        idx = int(np.argmax(bad)) + 1
        raise ValueError(
            f"tags not sorted by (t, channel): violation at index {idx} "
            f"(t={int(times[idx])}, channel={int(channels[idx])})"
        )


def merge_streams(streams):
    """Merge sorted streams into one sorted stream.

    All inputs must share the same duration_ps; meta dicts are merged with
    later inputs taking precedence.  The (t, channel) tie-break keeps the
    result independent of input order.
    """
    streams = list(streams)
    if not streams:
        raise ValueError("merge_streams requires at least one stream")
    duration = streams[0].duration_ps
    for i, s in enumerate(streams):
        if s.duration_ps != duration:
            raise ValueError(
                f"duration mismatch: stream 0 has {duration} ps, "
                f"stream {i} has {s.duration_ps} ps"
            )
    channels = np.concatenate([s.channels for s in streams])
    times = np.concatenate([s.times for s in streams])
    order = np.lexsort((channels, times))
    meta = {}
    for s in streams:
        meta.update(s.meta)
    return TagStream(channels[order], times[order], duration, meta, _validated=True)


def filter_channel(stream, channel):
    """Keep only tags on `channel`, preserving order, duration, and meta."""
    mask = stream.channels == channel
    return TagStream(
        stream.channels[mask], stream.times[mask], stream.duration_ps,
        stream.meta, _validated=True,
    )


def write_tags(stream, path, format=None):
    """Write a stream to `path` in TTAG1 binary (default) or CSV format.

    `format` is "binary", "csv", or None to infer from the file suffix
    (".csv" selects text, anything else binary).
    """
    fmt = format or ("csv" if str(path).lower().endswith(".csv") else "binary")
    if fmt == "binary":
        _write_binary(stream, path)
    elif fmt == "csv":
        _write_csv(stream, path)
    else:
        raise ValueError(f"unknown timetag format {format!r}")


def read_tags(path, format=None):
    """Read a stream from `path` (same format selection as `write_tags`)."""
    fmt = format or ("csv" if str(path).lower().endswith(".csv") else "binary")
    if fmt == "binary":
        return _read_binary(path)
    if fmt == "csv":
        return _read_csv(path)
    raise ValueError(f"unknown timetag format {format!r}")


def _write_binary(stream, path):
    n_channels = int(np.unique(stream.channels).size)
    header = (
        TTAG_MAGIC
        + TTAG_VERSION.to_bytes(2, "little")
        + int(stream.duration_ps).to_bytes(8, "little", signed=True)
        + n_channels.to_bytes(1, "little")
    )
    records = np.empty(len(stream), dtype=_RECORD_DTYPE)
    records["channel"] = stream.channels
    records["t"] = stream.times
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())


def _read_binary(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 15:
        raise FormatError(f"{path}: truncated TTAG1 header ({len(raw)} bytes)")
    if raw[:4] != TTAG_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {TTAG_MAGIC!r}")
    version = int.from_bytes(raw[4:6], "little")
    if version != TTAG_VERSION:
        raise FormatError(f"{path}: unsupported TTAG version {version}")
    duration = int.from_bytes(raw[6:14], "little", signed=True)
    n_channels = raw[14]
    body = raw[15:]
    if len(body) % _RECORD_DTYPE.itemsize:
        raise FormatError(
            f"{path}: truncated record ({len(body)} bytes is not a multiple of 9)"
        )
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    try:
        stream = TagStream(records["channel"], records["t"], duration)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if int(np.unique(stream.channels).size) != n_channels:
        raise FormatError(
            f"{path}: header says {n_channels} channels, records contain "
            f"{int(np.unique(stream.channels).size)}"
        )
    return stream


def _write_csv(stream, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# duration_ps={stream.duration_ps}\n")
        fh.write("channel,timestamp_ps\n")
        for c, t in zip(stream.channels, stream.times):
            fh.write(f"{int(c)},{int(t)}\n")


def _read_csv(path):
    duration = None
    rows = []
    with open(path, "r", newline="") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "duration_ps=" in line:
                    try:
                        duration = int(line.split("duration_ps=")[1].split()[0])
                    except (IndexError, ValueError) as exc:
                        raise FormatError(f"{path}:{lineno}: bad duration comment") from exc
                continue
            if not header_seen:
                if line.replace(" ", "") != "channel,timestamp_ps":
                    raise FormatError(
                        f"{path}:{lineno}: expected header 'channel,timestamp_ps', got {line!r}"
                    )
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 fields, got {len(parts)}")
            try:
                rows.append((int(parts[0]), int(parts[1])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-integer field") from exc
        if not header_seen:
            raise FormatError(f"{path}: missing 'channel,timestamp_ps' header")
    ch = np.array([r[0] for r in rows], dtype=np.int64)
    t = np.array([r[1] for r in rows], dtype=np.int64)
    if rows and (ch.min() < 0 or ch.max() > CHANNEL_MAX):
        raise FormatError(f"{path}: channel outside [0, {CHANNEL_MAX}]")
    if duration is None:
        duration = int(t[-1]) + 1 if rows else 0
    try:
        return TagStream(ch.astype(np.uint8), t, duration)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
