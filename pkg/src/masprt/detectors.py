"""Receivers for on-off molecular signalling with decision-feedback ISI estimates.

Three detectors share one ISI model built from the receiver's assumed
``tau = 0`` hitting probabilities:

* MASPRT: a sequential probability ratio test over the samples of one symbol,
  truncated at the symbol boundary.
* MLDA: fixed-sample maximum likelihood, a threshold test when ``N = 1``.
* ADDF: thresholds the largest ISI-corrected sample of the window.

The single-window functions (``masprt_detect`` and friends) follow the
textbook definitions.  :func:`detect_packet` runs the same rules over whole
packets, vectorised across independent trials.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, TapVector, mean_rate_at, tap_vector

__all__ = [
    "Modulation",
    "WaldThresholds",
    "DecisionMemory",
    "DetectorOutcome",
    "ReceiverModel",
    "PacketDecisions",
    "MEAN_FLOOR",
    "wald_thresholds",
    "llr_increment",
    "estimate_isi",
    "masprt_detect",
    "mlda_threshold",
    "mlda_detect",
    "addf_detect",
    "detect_packet",
]

MEAN_FLOOR = 1e-12
TRUNCATION_MODES = ("log", "linear")
SCHEMES = ("masprt", "mlda", "addf")


@dataclass(frozen=True)
class Modulation:
    """On-off keying with rate sequence ``x1`` for symbol 1 and zeros for symbol 0."""

    x1: np.ndarray
    P: float | None = None

    def __post_init__(self):
        x1 = np.atleast_1d(np.asarray(self.x1, dtype=float))
        if x1.ndim != 1 or len(x1) < 1:
            raise ValueError("x1 must be a non-empty 1-D sequence")
        if np.any(x1 < 0):
            raise ValueError("release rates must be non-negative")
        if self.P is not None and np.linalg.norm(x1) > self.P * (1 + 1e-6):
            raise ValueError(f"||x1|| = {np.linalg.norm(x1):.6g} exceeds power budget {self.P}")
        object.__setattr__(self, "x1", x1)

    @property
    def N(self) -> int:
        return len(self.x1)

    @property
    def x0(self) -> np.ndarray:
        return np.zeros(self.N)

    def rates(self, symbol: int) -> np.ndarray:
        return self.x1 if symbol else self.x0


@dataclass(frozen=True)
class WaldThresholds:
    """Lower (``A``) and upper (``B``) likelihood-ratio thresholds.

    ``A = 0`` or ``B = inf`` disables the corresponding boundary.
    """

    A: float
    B: float

    @property
    def logA(self) -> float:
        return math.log(self.A) if self.A > 0 else -math.inf

    @property
    def logB(self) -> float:
        return math.log(self.B)


def wald_thresholds(alpha: float, beta: float) -> WaldThresholds:
    """Wald's approximate SPRT thresholds for false-alarm ``alpha`` and miss ``beta``."""
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError(f"alpha and beta must lie in (0, 1), got {alpha}, {beta}")
    return WaldThresholds(beta / (1 - alpha), (1 - beta) / alpha)


@dataclass
class DecisionMemory:
    """The last ``depth`` decoded symbols, most recent first."""

    depth: int
    entries: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("memory depth must be non-negative")
        self.entries = deque((int(e) for e in self.entries), maxlen=self.depth)
        if any(e not in (0, 1) for e in self.entries):
            raise ValueError("memory entries must be 0 or 1")

    def push(self, symbol: int) -> None:
        if self.depth:
            self.entries.appendleft(int(symbol))

    def as_array(self) -> np.ndarray:
        """Entries padded with zeros (symbol 0) to ``depth``."""
        out = np.zeros(self.depth)
        out[: len(self.entries)] = list(self.entries)
        return out


@dataclass(frozen=True)
class DetectorOutcome:
    decision: int
    stop_time: int
    truncated: bool = False
    final_llr: float = float("nan")


def llr_increment(y, lambda1, lambda0):
    """Poisson log-likelihood ratio of count ``y`` for means ``lambda1`` vs ``lambda0``."""
    lambda1 = np.asarray(lambda1, dtype=float)
    lambda0 = np.asarray(lambda0, dtype=float)
    if np.any(lambda1 <= 0) or np.any(lambda0 <= 0):
        raise ValueError("Poisson means must be positive (is the noise floor missing?)")
    if np.any(np.asarray(y) < 0):
        raise ValueError("counts must be non-negative")
    out = y * np.log(lambda1 / lambda0) - (lambda1 - lambda0)
    return float(out) if np.ndim(out) == 0 else out


def estimate_isi(k: int, memory: DecisionMemory, modulation: Modulation, taps: TapVector) -> float:
    """Mean ISI count at sample ``k`` of the current symbol from remembered decisions.

    Replays the remembered symbols (oldest first) followed by ``k`` silent
    slots through the receiver's tap vector.
    """
    N = modulation.N
    if not 1 <= k <= N:
        raise ValueError(f"sample index must lie in 1..{N}, got {k}")
    if not memory.entries:
        return 0.0
    history = [modulation.rates(s) for s in reversed(memory.entries)]
    history.append(np.zeros(k))
    zero_noise = ChannelParams(ts=1.0, lambda0=0.0)
    return mean_rate_at(np.concatenate(history), taps, zero_noise)


class ReceiverModel:
    """Precomputed means seen by a receiver that assumes ``tau = 0``.

    Parameters
    ----------
    modulation : Modulation
    params : ChannelParams
        Channel parameters; ``tau`` is ignored.
    mem_depth : int
        Number of past decisions used for ISI estimation.
    """

    def __init__(self, modulation: Modulation, params: ChannelParams, mem_depth: int):
        if mem_depth < 0:
            raise ValueError("memory depth must be non-negative")
        self.modulation = modulation
        self.params = params.receiver_view()
        self.mem_depth = mem_depth
        N = modulation.N
        self.taps = tap_vector(N * (mem_depth + 1), self.params)
        pi = self.taps.taps
        x1 = modulation.x1
        # signal[k-1] = sum_{i=1..k} pi_i x_{k-i+1}
        self.signal = np.convolve(pi[:N], x1)[:N]
        # isi_kernel[b-1, k-1]: mean at sample k from x1 released b symbols ago
        idx = np.arange(1, mem_depth + 1)[:, None, None] * N + np.arange(1, N + 1)[None, :, None] - np.arange(1, N + 1)[None, None, :]
        self.isi_kernel = (pi[idx] * x1[None, None, :]).sum(axis=2) if mem_depth else np.zeros((0, N))

    @property
    def N(self) -> int:
        return self.modulation.N

    @property
    def n0(self) -> float:
        return self.params.n0

    def isi(self, mem) -> np.ndarray:
        """ISI means for samples 1..N given memory entries (most recent first)."""
        return np.asarray(mem, dtype=float) @ self.isi_kernel

    def memory_isi(self, memory: DecisionMemory) -> np.ndarray:
        if memory.depth != self.mem_depth:
            raise ValueError(f"memory depth {memory.depth} does not match receiver depth {self.mem_depth}")
        return self.isi(memory.as_array())

    def hypothesis_means(self, isi):
        """Per-sample means under symbol 1 and symbol 0, floored at ``MEAN_FLOOR``."""
        lam0 = np.maximum(isi + self.n0, MEAN_FLOOR)
        lam1 = np.maximum(self.signal + isi + self.n0, MEAN_FLOOR)
        return lam1, lam0


def _truncation_decision(llr, thresholds: WaldThresholds, mode: str):
    if mode == "log":
        return np.abs(llr - thresholds.logA) >= np.abs(llr - thresholds.logB)
    if mode == "linear":
        L = np.exp(np.clip(llr, -700.0, 700.0))
        return np.abs(L - thresholds.A) >= np.abs(L - thresholds.B)
    raise ValueError(f"unknown truncation mode {mode!r}; expected one of {TRUNCATION_MODES}")


def _window(samples, N):
    y = np.asarray(samples)
    if y.shape != (N,):
        raise ValueError(f"expected {N} samples, got shape {y.shape}")
    return y


def masprt_detect(samples, memory: DecisionMemory, receiver: ReceiverModel,
                  thresholds: WaldThresholds, truncation: str = "log") -> DetectorOutcome:
    """Sequential test over one symbol window.

    Stops at the first sample where the accumulated LLR reaches ``log B``
    (symbol 1) or falls to ``log A`` (symbol 0).  Without a crossing by
    sample N the truncation rule picks the nearer threshold, ties going to
    symbol 1.
    """
    y = _window(samples, receiver.N)
    lam1, lam0 = receiver.hypothesis_means(receiver.memory_isi(memory))
    llr = 0.0
    for m in range(receiver.N):
        llr += y[m] * math.log(lam1[m] / lam0[m]) - (lam1[m] - lam0[m])
        if llr <= thresholds.logA:
            return DetectorOutcome(0, m + 1, False, llr)
        if llr >= thresholds.logB:
            return DetectorOutcome(1, m + 1, False, llr)
    decision = int(_truncation_decision(llr, thresholds, truncation))
    return DetectorOutcome(decision, receiver.N, True, llr)


def mlda_threshold(x0: float, x1: float, pi1: float, isi_hat: float, n0: float) -> float:
    """Count threshold at which symbol 1 becomes the ML decision for one sample."""
    if not x1 > x0:
        raise ValueError("x1 must exceed x0; equal rates make the hypotheses indistinguishable")
    denom = math.log((pi1 * x1 + isi_hat + n0) / (pi1 * x0 + isi_hat + n0))
    if not denom > 0:
        if math.isinf(isi_hat) or denom == 0:
            return math.inf
        raise ValueError("log ratio in the threshold denominator must be positive")
    return pi1 * (x1 - x0) / denom


def mlda_detect(samples, memory: DecisionMemory, receiver: ReceiverModel) -> DetectorOutcome:
    """Fixed-sample ML decision over the whole window."""
    y = _window(samples, receiver.N)
    isi = receiver.memory_isi(memory)
    if receiver.N == 1:
        gamma = mlda_threshold(0.0, receiver.modulation.x1[0], receiver.taps[0], isi[0], receiver.n0)
        decision = int(y[0] >= gamma)
        lam1, lam0 = receiver.hypothesis_means(isi)
        return DetectorOutcome(decision, 1, False, float(llr_increment(y[0], lam1[0], lam0[0])))
    lam1, lam0 = receiver.hypothesis_means(isi)
    llr = float(np.sum(llr_increment(y, lam1, lam0)))
    return DetectorOutcome(int(llr >= 0), receiver.N, False, llr)


def addf_detect(samples, memory: DecisionMemory, receiver: ReceiverModel, eta: float) -> DetectorOutcome:
    """Threshold the largest ISI-corrected sample of the window at ``eta``."""
    y = _window(samples, receiver.N)
    y_max = float(np.max(y - receiver.memory_isi(memory)))
    return DetectorOutcome(int(y_max >= eta), receiver.N, False, y_max)


@dataclass
class PacketDecisions:
    """Detector output for a batch of packets, arrays of shape ``(batch, symbols)``."""

    decisions: np.ndarray
    stop_times: np.ndarray
    truncated: np.ndarray


def detect_packet(counts, receiver: ReceiverModel, scheme: str, *,
                  thresholds: WaldThresholds | None = None, eta=None,
                  truncation: str = "log", oracle_bits=None) -> PacketDecisions:
    """Run a detector symbol by symbol over packets with decision feedback.

    Parameters
    ----------
    counts : array, shape (batch, symbols, N) or (symbols, N)
        Received samples; rows of the batch are independent packets.
    scheme : {'masprt', 'mlda', 'addf'}
    thresholds : WaldThresholds
        Required for MASPRT.
    eta : float or array of shape (batch,)
        ADDF threshold; an array gives one threshold per batch row.
    oracle_bits : array, optional
        Feed the true past symbols to the memory instead of the decisions.
        Testing aid only.
    """
    counts = np.asarray(counts)
    single = counts.ndim == 2
    if single:
        counts = counts[None]
        if oracle_bits is not None:
            oracle_bits = np.asarray(oracle_bits)[None]
    batch, n_sym, N = counts.shape
    if N != receiver.N:
        raise ValueError(f"window length {N} does not match modulation length {receiver.N}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "masprt" and thresholds is None:
        raise ValueError("MASPRT needs Wald thresholds")
    if scheme == "addf":
        if eta is None:
            raise ValueError("ADDF needs a threshold eta")
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (batch,))
    if truncation not in TRUNCATION_MODES:
        raise ValueError(f"unknown truncation mode {truncation!r}")

    mem = np.zeros((batch, receiver.mem_depth))
    decisions = np.zeros((batch, n_sym), dtype=np.int8)
    stops = np.full((batch, n_sym), N, dtype=np.int16)
    truncated = np.zeros((batch, n_sym), dtype=bool)
    rows = np.arange(batch)
    signal = receiver.signal
    scalar_mlda = scheme == "mlda" and N == 1

    for i in range(n_sym):
        isi = mem @ receiver.isi_kernel if receiver.mem_depth else np.zeros((batch, N))
        y = counts[:, i, :]
        if scheme == "addf":
            d = np.max(y - isi, axis=1) >= eta
        else:
            lam0 = np.maximum(isi + receiver.n0, MEAN_FLOOR)
            lam1 = np.maximum(signal + isi + receiver.n0, MEAN_FLOOR)
            if scalar_mlda:
                gamma = signal[0] / np.log(lam1[:, 0] / lam0[:, 0])
                d = y[:, 0] >= gamma
            else:
                inc = y * np.log(lam1 / lam0) - (lam1 - lam0)
                if scheme == "mlda":
                    d = inc.sum(axis=1) >= 0
                else:
                    L = np.cumsum(inc, axis=1)
                    low = L <= thresholds.logA
                    crossed = low | (L >= thresholds.logB)
                    hit = crossed.any(axis=1)
                    first = np.where(hit, np.argmax(crossed, axis=1), N - 1)
                    d = np.where(hit, ~low[rows, first], _truncation_decision(L[:, -1], thresholds, truncation))
                    stops[:, i] = first + 1
                    truncated[:, i] = ~hit
        decisions[:, i] = d
        if receiver.mem_depth:
            mem[:, 1:] = mem[:, :-1]
            mem[:, 0] = d if oracle_bits is None else oracle_bits[:, i]

    if single:
        return PacketDecisions(decisions[0], stops[0], truncated[0])
    return PacketDecisions(decisions, stops, truncated)
