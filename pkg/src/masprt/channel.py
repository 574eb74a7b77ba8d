"""Diffusive molecular channel: hitting probabilities and Poisson packet sampling.

Molecules are released at slot boundaries and counted by the receiver in
windows of length ``ts``.  The transmitter clock leads the receiver by
``tau`` seconds; receivers always compute with ``tau = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc

__all__ = [
    "ChannelParams",
    "TapVector",
    "SampleMatrix",
    "two_q",
    "hitting_prob",
    "tap_vector",
    "mean_rate_at",
    "packet_means",
    "packet_rng",
    "simulate_packet",
    "DEFAULT_HORIZON",
]

# Channel memory in symbols used for packet generation: N*(B_mem+1) + N taps
# with the default receiver memory B_mem = 10.
DEFAULT_HORIZON = 12


@dataclass(frozen=True)
class ChannelParams:
    """Physical parameters of the 1-D diffusion channel.

    Parameters
    ----------
    rho : float
        d / sqrt(2 D), in s**0.5.
    ts : float
        Sampling slot duration in seconds.
    lambda0 : float
        Background noise rate in molecules per second.
    tau : float
        Synchronisation offset in seconds (transmitter truth).
    """

    rho: float = math.sqrt(0.3)
    ts: float = 0.1
    lambda0: float = 4.0
    tau: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not self.ts > 0:
            raise ValueError(f"ts must be positive, got {self.ts}")
        if self.lambda0 < 0:
            raise ValueError(f"lambda0 must be non-negative, got {self.lambda0}")
        if self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")

    @property
    def n0(self) -> float:
        """Mean noise count per sample."""
        return self.lambda0 * self.ts

    def receiver_view(self) -> "ChannelParams":
        """Copy with ``tau = 0``, as assumed by every receiver."""
        return replace(self, tau=0.0)


@dataclass(frozen=True)
class TapVector:
    taps: np.ndarray
    tau: float = 0.0

    def __len__(self) -> int:
        return len(self.taps)

    def __getitem__(self, item):
        return self.taps[item]

    @property
    def mass(self) -> float:
        return float(self.taps.sum())


@dataclass
class SampleMatrix:
    """Received counts of one packet, shape ``(symbols, N)``."""

    counts: np.ndarray
    bits: np.ndarray
    seed: int
    tail_mass: float = 0.0
    means: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_symbols(self) -> int:
        return self.counts.shape[0]

    @property
    def samples_per_symbol(self) -> int:
        return self.counts.shape[1]


def two_q(a):
    """2 Q(a) = erfc(a / sqrt 2), with 2 Q(inf) = 0."""
    return erfc(np.asarray(a, dtype=float) / math.sqrt(2.0))


def _cdf(t, rho):
    # Probability a molecule has arrived by time t; 0 for t <= 0 (Q(inf) = 0).
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = two_q(rho / np.sqrt(t[pos]))
    return out


def hitting_prob(i: int, params: ChannelParams) -> float:
    """Probability that a molecule released at time 0 is counted in slot ``i``."""
    if i < 1:
        raise ValueError(f"slot index must be >= 1, got {i}")
    t = np.array([(i - 1) * params.ts + params.tau, i * params.ts + params.tau])
    F = _cdf(t, params.rho)
    return float(F[1] - F[0])


def tap_vector(length: int, params: ChannelParams) -> TapVector:
    """Hitting probabilities ``[pi_1, ..., pi_length]`` under ``params.tau``."""
    if length < 1:
        raise ValueError(f"tap vector length must be >= 1, got {length}")
    t = np.arange(length + 1) * params.ts + params.tau
    return TapVector(np.diff(_cdf(t, params.rho)), params.tau)


def mean_rate_at(rate_history, taps: TapVector, params: ChannelParams) -> float:
    """Expected count at the last slot of ``rate_history``.

    ``rate_history[-1]`` is the release of the current slot and sees tap 1;
    ``rate_history[0]`` is the oldest release.
    """
    h = np.asarray(rate_history, dtype=float)
    if h.ndim != 1 or len(h) < 1:
        raise ValueError("rate history must be a non-empty 1-D sequence")
    if np.any(h < 0):
        raise ValueError("release rates must be non-negative")
    if len(taps) < len(h):
        raise ValueError(
            f"tap vector of length {len(taps)} shorter than history of length {len(h)}"
        )
    return float(np.dot(taps.taps[: len(h)], h[::-1]) + params.n0)


def packet_means(releases, taps: TapVector, n0: float) -> np.ndarray:
    """Per-slot mean counts for a flat release sequence (causal convolution)."""
    releases = np.asarray(releases, dtype=float)
    return np.convolve(releases, taps.taps)[: len(releases)] + n0


def packet_rng(seed) -> np.random.Generator:
    """Counter-based generator (Philox) for one packet stream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def simulate_packet(bits, modulation, params: ChannelParams, seed, horizon: int = DEFAULT_HORIZON) -> SampleMatrix:
    """Draw Poisson counts for a packet of on-off symbols.

    ``modulation`` is a :class:`~masprt.detectors.Modulation` or the bare rate
    sequence ``x1``.  Symbol 1 releases ``x1``, symbol 0 releases nothing.  The
    channel keeps ``horizon`` symbols of memory; the probability mass beyond it
    is reported as ``tail_mass``.
    """
    bits = np.asarray(bits, dtype=np.int64)
    x1 = np.asarray(getattr(modulation, "x1", modulation), dtype=float)
    if bits.ndim != 1 or np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be a 1-D sequence of 0/1")
    if np.any(x1 < 0):
        raise ValueError("release rates must be non-negative")
    n = len(x1)
    taps = tap_vector(n * horizon, params)
    releases = (bits[:, None] * x1[None, :]).ravel()
    means = packet_means(releases, taps, params.n0)
    counts = packet_rng(seed).poisson(means).reshape(len(bits), n)
    tail = float(1.0 - two_q(params.rho / math.sqrt(n * horizon * params.ts + params.tau)))
    return SampleMatrix(counts, bits.copy(), seed, tail_mass=tail, means=means.reshape(len(bits), n))
