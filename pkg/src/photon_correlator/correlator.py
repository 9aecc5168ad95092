"""Start/stop delay histogramming, emulating TAC + MCA electronics.

Two collection modes are provided because hardware TACs consume their
stop pulse while multi-stop analysis does not:

* FIRST_STOP — for each start, the earliest not-yet-consumed stop with
  delay in [range_min, range_max) increments a bin and is consumed; a
  start may begin while an earlier conversion's stop is still pending
  (no converter dead time is modeled).  Stops earlier than
  start + range_min are permanently ignored.
* ALL_STOPS — every (start, stop) pair with in-range delay counts.  This
  is the default for analysis: it is symmetric in delay and its peak
  areas are unbiased even at high per-window stop probabilities.

Delay binning is floor((d - range_min)/bin_width); a delay exactly at
range_max is excluded.  Histograms from disjoint chunks of the start
stream can be merged; that equals a single pass only in ALL_STOPS mode
(FIRST_STOP consumption couples starts across chunk boundaries).
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .timetags import TagStream


class Mode(enum.Enum):
    FIRST_STOP = "first_stop"
    ALL_STOPS = "all_stops"

    @classmethod
    def parse(cls, text):
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(
                f"unknown histogram mode {text!r} (use FIRST_STOP or ALL_STOPS)"
            ) from None


@dataclass(frozen=True)
class HistogramConfig:
    bin_width_ps: int
    range_min_ps: int
    range_max_ps: int
    mode: Mode = Mode.ALL_STOPS

    def __post_init__(self):
        if self.bin_width_ps <= 0:
            raise ValueError("bin_width_ps must be > 0")
        if self.range_max_ps <= self.range_min_ps:
            raise ValueError("range_max_ps must be > range_min_ps")
        if (self.range_max_ps - self.range_min_ps) % self.bin_width_ps:
            raise ValueError(
                f"range span {self.range_max_ps - self.range_min_ps} not divisible "
                f"by bin_width_ps={self.bin_width_ps}"
            )

    @classmethod
    def symmetric(cls, halfwidth_ps, bin_width_ps, mode=Mode.ALL_STOPS):
        """A [-H, +H) window with H rounded up to a whole number of bins."""
        bin_width_ps = int(bin_width_ps)
        half_bins = -(-int(halfwidth_ps) // bin_width_ps)
        h = half_bins * bin_width_ps
        return cls(bin_width_ps, -h, h, mode)

    @property
    def n_bins(self):
        return (self.range_max_ps - self.range_min_ps) // self.bin_width_ps

    def bin_starts(self):
        return self.range_min_ps + self.bin_width_ps * np.arange(self.n_bins,
                                                                 dtype=np.int64)

    def bin_centers(self):
        return self.bin_starts() + self.bin_width_ps / 2.0


@dataclass(frozen=True)
class Histogram:
    config: HistogramConfig
    counts: np.ndarray
    n_starts: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (self.config.n_bins,):
            raise ValueError(
                f"counts length {counts.size} does not match config "
                f"({self.config.n_bins} bins)"
            )
        if counts.size and counts.min() < 0:
            raise ValueError("counts must be nonnegative")
        counts = counts.copy() if counts.flags.writeable else counts
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total_counts(self):
        return int(self.counts.sum())

    def bin_starts(self):
        return self.config.bin_starts()

    def bin_centers(self):
        return self.config.bin_centers()


def _bin_delays(delays, config):
    mask = (delays >= config.range_min_ps) & (delays < config.range_max_ps)
    idx = (delays[mask] - config.range_min_ps) // config.bin_width_ps
    return np.bincount(idx, minlength=config.n_bins).astype(np.int64)


def tac_histogram(starts, stops, config):
    """Histogram stop-minus-start delays in the configured mode.

    `n_starts` records every start processed, whether or not it produced
    a count.
    """
    start_times = starts.times
    stop_times = stops.times
    if config.mode is Mode.ALL_STOPS:
        lo = np.searchsorted(stop_times, start_times + config.range_min_ps, "left")
        hi = np.searchsorted(stop_times, start_times + config.range_max_ps, "left")
        per_start = hi - lo
        total = int(per_start.sum())
        if total == 0:
            counts = np.zeros(config.n_bins, dtype=np.int64)
        else:
            offsets = np.cumsum(per_start) - per_start
            flat = np.repeat(lo - offsets, per_start) + np.arange(total)
            delays = stop_times[flat] - np.repeat(start_times, per_start)
            counts = _bin_delays(delays, config)
        return Histogram(config, counts, int(start_times.size))

    # FIRST_STOP: single forward pass; a stop below start+range_min can
    # never serve any later start either, so the scan pointer only advances.
    counts = np.zeros(config.n_bins, dtype=np.int64)
    stop_list = stop_times.tolist()
    n_stops = len(stop_list)
    j = 0
    rmin = config.range_min_ps
    rmax = config.range_max_ps
    width = config.bin_width_ps
    for s in start_times.tolist():
        lo_t = s + rmin
        while j < n_stops and stop_list[j] < lo_t:
            j += 1
        if j < n_stops and stop_list[j] - s < rmax:
            counts[(stop_list[j] - s - rmin) // width] += 1
            j += 1
    return Histogram(config, counts, int(start_times.size))


def tac_histogram_chunked(starts, stops, config, n_chunks):
    """Partition the start stream, correlate each chunk, and merge.

    Only valid in ALL_STOPS mode, where each start's contribution is
    independent; FIRST_STOP consumption makes chunking order-dependent.
    """
    if config.mode is not Mode.ALL_STOPS:
        raise ValueError("chunked correlation requires ALL_STOPS mode")
    if n_chunks < 1:
        raise ValueError("n_chunks must be >= 1")
    bounds = np.linspace(0, len(starts), n_chunks + 1).astype(int)
    result = None
    for a, b in zip(bounds[:-1], bounds[1:]):
        chunk = TagStream(starts.channels[a:b], starts.times[a:b],
                          starts.duration_ps, starts.meta, _validated=True)
        hist = tac_histogram(chunk, stops, config)
        result = hist if result is None else merge_histograms(result, hist)
    return result


def reverse_start_stop(detector, clock, config, remap_period_ps=None):
    """Reverse start-stop correlation: detector tag starts, next clock tick stops.

    Delays are t_clock - t_detector >= 0; a detection exactly on a clock
    tick gives delay 0, and detections after the last tick produce no
    count.  With `remap_period_ps` set, each delay d is remapped to
    period - d before binning so the histogram reads as time after
    excitation.  The config's collection mode is irrelevant here (the
    next tick is by construction the first stop).
    """
    if len(clock) == 0:
        raise ValueError("reverse_start_stop requires a nonempty clock stream")
    det_times = detector.times
    idx = np.searchsorted(clock.times, det_times, side="left")
    valid = idx < len(clock)
    delays = clock.times[idx[valid]] - det_times[valid]
    if remap_period_ps is not None:
        delays = int(remap_period_ps) - delays
    counts = _bin_delays(delays, config)
    return Histogram(config, counts, int(det_times.size))


def merge_histograms(a, b):
    """Element-wise sum of two histograms with identical configs."""
    if a.config != b.config:
        raise ValueError(f"histogram config mismatch: {a.config} vs {b.config}")
    return Histogram(a.config, a.counts + b.counts, a.n_starts + b.n_starts)


HIST_CSV_HEADER = "bin_start_ps,count"


def write_histogram_csv(hist, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# n_starts={hist.n_starts} bin_width_ps={hist.config.bin_width_ps}\n")
        fh.write(HIST_CSV_HEADER + "\n")
        for start, count in zip(hist.bin_starts(), hist.counts):
            fh.write(f"{int(start)},{int(count)}\n")


def read_histogram_csv(path, mode=Mode.ALL_STOPS):
    """Read a histogram CSV.  The collection mode is not stored on disk;
    `mode` only fills in the reconstructed config."""
    n_starts = None
    bin_width = None
    rows = []
    with open(path, "r", newline="") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if token.startswith("n_starts="):
                        n_starts = int(token.split("=", 1)[1])
                    elif token.startswith("bin_width_ps="):
                        bin_width = int(token.split("=", 1)[1])
                continue
            if not header_seen:
                if line.replace(" ", "") != HIST_CSV_HEADER:
                    raise FormatError(
                        f"{path}:{lineno}: expected header {HIST_CSV_HEADER!r}, "
                        f"got {line!r}"
                    )
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 fields")
            try:
                rows.append((int(parts[0]), int(parts[1])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-integer field") from exc
    if not header_seen:
        raise FormatError(f"{path}: missing {HIST_CSV_HEADER!r} header")
    if n_starts is None or bin_width is None:
        raise FormatError(f"{path}: missing '# n_starts=<N> bin_width_ps=<w>' comment")
    if not rows:
        raise FormatError(f"{path}: histogram has no bins")
    starts = [r[0] for r in rows]
    for prev, cur in zip(starts, starts[1:]):
        if cur != prev + bin_width:
            raise FormatError(
                f"{path}: bins not contiguous at bin_start_ps={cur} "
                f"(expected {prev + bin_width})"
            )
    config = HistogramConfig(bin_width, starts[0], starts[-1] + bin_width, mode)
    try:
        return Histogram(config, np.array([r[1] for r in rows], dtype=np.int64),
                         n_starts)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
