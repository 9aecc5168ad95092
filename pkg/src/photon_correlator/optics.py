"""Passive linear optics between source and detectors.

Routing is classical and probabilistic: intensity-correlation measurements
only need photon bookkeeping, not two-photon interference.  The collection
optics and monochromator are folded into a single effective transmission
applied with `attenuate`.
"""

from dataclasses import dataclass

import numpy as np

from .rng import generator
from .timetags import TagStream


@dataclass(frozen=True)
class SplitRatio:
    """Probability that a photon exits arm B (arm A gets the rest)."""

    transmission: float

    def __post_init__(self):
        if not 0.0 <= self.transmission <= 1.0:
            raise ValueError(f"transmission {self.transmission} outside [0, 1]")


def beamsplit(stream, ratio, seed):
    """Route every tag independently to arm A or arm B.

    Returns (arm_a, arm_b); each input tag appears in exactly one arm and
    both outputs keep the input ordering and duration.
    """
    rng = generator(seed)
    to_b = rng.random(len(stream)) < ratio.transmission
    arm_a = TagStream(stream.channels[~to_b], stream.times[~to_b],
                      stream.duration_ps, stream.meta, _validated=True)
    arm_b = TagStream(stream.channels[to_b], stream.times[to_b],
                      stream.duration_ps, stream.meta, _validated=True)
    return arm_a, arm_b


def attenuate(stream, transmission, seed):
    """Independent Bernoulli thinning; Poisson(mu) input stays Poisson(mu*transmission)."""
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission {transmission} outside [0, 1]")
    rng = generator(seed)
    keep = rng.random(len(stream)) < transmission
    return TagStream(stream.channels[keep], stream.times[keep],
                     stream.duration_ps, stream.meta, _validated=True)
