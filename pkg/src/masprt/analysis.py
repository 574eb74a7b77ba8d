"""Analytic error-probability and stopping-time quantities for the MASPRT.

All means here assume maximal ISI: every one of the ``mem_depth`` past
symbols was a 1.  Sample index ``k`` counts from 1 at the start of the
current symbol; for ``k > N`` the current symbol's release is padded with
zeros, so the two hypotheses keep differing only through its decaying tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .channel import ChannelParams, TapVector, tap_vector
from .detectors import WaldThresholds

__all__ = [
    "BoundInputs",
    "MuResult",
    "TailResult",
    "MU_VARIANTS",
    "kl_poisson",
    "maximal_isi_means",
    "mu_factor",
    "prop1_bound",
    "prop2_lhs",
    "prop2_tail",
]

MU_VARIANTS = ("printed", "derivation")


def kl_poisson(la, lb):
    """Kullback-Leibler divergence D(Poi(la) || Poi(lb))."""
    la = np.asarray(la, dtype=float)
    lb = np.asarray(lb, dtype=float)
    if np.any(la <= 0) or np.any(lb <= 0):
        raise ValueError("Poisson means must be positive")
    out = la * np.log(la / lb) + lb - la
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundInputs:
    """Channel and test constants shared by the bound evaluations.

    ``taps`` must cover ``N * mem_depth + K`` slots to evaluate means up to
    sample ``K``; :meth:`from_params` sizes them for the default tail horizon
    ``N * (mem_depth + 2)``.
    """

    N: int
    mem_depth: int
    taps: TapVector
    thresholds: WaldThresholds
    n0: float

    @classmethod
    def from_params(cls, N: int, mem_depth: int, params: ChannelParams,
                    thresholds: WaldThresholds, horizon: int | None = None) -> "BoundInputs":
        length = N * mem_depth + max(N * (mem_depth + 2), horizon or 0)
        return cls(N, mem_depth, tap_vector(length, params), thresholds, params.n0)

    @property
    def default_horizon(self) -> int:
        return self.N * (self.mem_depth + 2)

    def means(self, x1, K: int | None = None):
        """``(lam1, lam0)`` for samples ``k = 1..K`` (default ``N``)."""
        K = self.N if K is None else K
        x1 = _check_x1(x1, self.N)
        pi = self.taps.taps
        total = self.N * self.mem_depth + K
        if len(pi) < total:
            raise ValueError(f"tap vector of length {len(pi)} cannot cover {total} slots")
        past = np.tile(x1, self.mem_depth)
        current = np.zeros(K)
        current[: min(K, self.N)] = x1[:K]
        full1 = np.convolve(pi[:total], np.concatenate([past, current]))
        full0 = np.convolve(pi[:total], np.concatenate([past, np.zeros(K)]))
        sl = slice(self.N * self.mem_depth, total)
        return full1[sl] + self.n0, full0[sl] + self.n0

    def signal(self, x1, K: int | None = None) -> np.ndarray:
        """Current-symbol mean ``sum_{i<=k} pi_i x_{k-i+1}`` for ``k = 1..K``."""
        K = self.N if K is None else K
        x1 = _check_x1(x1, self.N)
        return np.convolve(self.taps.taps[:K], x1)[:K]

    def drift(self, x1) -> np.ndarray:
        """Cumulative drift ``g_k``, ``k = 1..N``."""
        return np.cumsum(self.signal(x1))

    def llr_weights(self, x1) -> np.ndarray:
        """Per-sample log ratios ``log(lam_{k|1} / lam_{k|0})``."""
        lam1, lam0 = self.means(x1)
        return np.log(lam1 / lam0)

    def boundaries(self, x1):
        """Moving boundaries ``(c_k^A, c_k^B)`` for the weighted count sum."""
        g = self.drift(x1)
        return self.thresholds.logA + g, self.thresholds.logB + g

    def bound_assumption_holds(self, x1) -> bool:
        """Whether the step denominators ``log B + g_1`` and ``g_k - g_{k-1}`` are all >= 1."""
        g = self.drift(x1)
        denoms = np.concatenate([[self.thresholds.logB + g[0]], np.diff(g)])
        return bool(np.all(denoms >= 1))


def _check_x1(x1, N):
    x1 = np.asarray(x1, dtype=float)
    if x1.shape != (N,):
        raise ValueError(f"x1 must have shape ({N},), got {x1.shape}")
    if np.any(x1 < 0):
        raise ValueError("release rates must be non-negative")
    return x1


def maximal_isi_means(x1, k: int, inputs: BoundInputs, j: int) -> float:
    """Mean at sample ``k`` under hypothesis ``j`` with all past symbols equal to 1."""
    if k < 1:
        raise ValueError("sample index must be >= 1")
    if j not in (0, 1):
        raise ValueError("hypothesis must be 0 or 1")
    lam1, lam0 = inputs.means(x1, k)
    return float((lam1 if j else lam0)[k - 1])


@dataclass(frozen=True)
class MuResult:
    mu: float
    lower: float
    upper: float
    degenerate: bool = False


def mu_factor(x1, inputs: BoundInputs, variant: str = "printed") -> MuResult:
    """Probability that the first sample leaves the test undecided.

    The first count is Poisson with the symbol-0 mean; ``mu`` is the mass of
    integers strictly between the two first-sample thresholds.  ``variant``
    selects the threshold form: ``"printed"`` shifts by ``2 pi_1 x_1`` and
    uses the bare rate ``x_1`` in the log ratio, ``"derivation"`` shifts by
    ``pi_1 x_1`` and uses ``pi_1 x_1``.
    """
    if variant not in MU_VARIANTS:
        raise ValueError(f"unknown mu variant {variant!r}; expected one of {MU_VARIANTS}")
    x1 = _check_x1(x1, inputs.N)
    _, lam0 = inputs.means(x1, 1)
    mean0 = float(lam0[0])
    isi = mean0 - inputs.n0
    pi1 = float(inputs.taps[0])
    if variant == "printed":
        shift, signal = 2 * pi1 * x1[0], x1[0]
    else:
        shift, signal = pi1 * x1[0], pi1 * x1[0]
    base = inputs.n0 + isi
    if signal <= 0 or base <= 0:
        return MuResult(1.0, -math.inf, math.inf, degenerate=True)
    denom = math.log((signal + base) / base)
    lower = (inputs.thresholds.logA + shift) / denom
    upper = (inputs.thresholds.logB + shift) / denom
    first = max(math.floor(lower) + 1, 0)
    last = math.ceil(upper) - 1
    if last < first:
        return MuResult(0.0, lower, upper)
    mu = float(poisson.cdf(last, mean0) - poisson.cdf(first - 1, mean0))
    return MuResult(min(max(mu, 0.0), 1.0), lower, upper)


def prop1_bound(x1, inputs: BoundInputs, mu: float | None = None, variant: str = "printed") -> float:
    """Upper bound on the false-alarm probability of the sequential test.

    ``(pi_1 + mu sum_{i=2..N} pi_i) x_1 + mu sum_{k=1..N-1} x_{k+1} sum_{i=1..N-k} pi_i``
    """
    x1 = _check_x1(x1, inputs.N)
    if mu is None:
        mu = mu_factor(x1, inputs, variant).mu
    return float(np.dot(prop1_coefficients(inputs, mu), x1))


def prop1_coefficients(inputs: BoundInputs, mu: float) -> np.ndarray:
    """Weights of each ``x_k`` in :func:`prop1_bound` for a fixed ``mu``."""
    N = inputs.N
    cum = np.cumsum(inputs.taps.taps[:N])
    coef = np.empty(N)
    coef[0] = cum[0] + mu * (cum[N - 1] - cum[0])
    # x_{k+1} carries sum_{i=1..N-k} pi_i
    coef[1:] = mu * cum[N - 2::-1] if N > 1 else []
    return coef


def _kl_terms(x1, inputs: BoundInputs, j: int, K: int) -> np.ndarray:
    if j not in (0, 1):
        raise ValueError("hypothesis must be 0 or 1")
    lam1, lam0 = inputs.means(x1, K)
    if j == 1:
        d = kl_poisson(lam1, lam0)
    else:
        d = kl_poisson(lam0, lam1)
    return np.atleast_1d(d) / np.arange(1, K + 1)


def prop2_lhs(j: int, x1, T: int, inputs: BoundInputs) -> float:
    """``sum_{k=1..T} D(lam_{k|j} || lam_{k|1-j}) / k``."""
    if T < 1:
        raise ValueError("stopping time must be >= 1")
    return float(_kl_terms(x1, inputs, j, T).sum())


@dataclass(frozen=True)
class TailResult:
    value: float
    satisfied: bool
    last_term: float
    horizon: int


def prop2_tail(j: int, x1, T: int, eps: float, inputs: BoundInputs, horizon: int | None = None) -> TailResult:
    """Tail ``sum_{k=T+1..horizon} D_k / k`` compared against ``eps``."""
    horizon = inputs.default_horizon if horizon is None else horizon
    if horizon <= T:
        raise ValueError("horizon must exceed the stopping time")
    terms = _kl_terms(x1, inputs, j, horizon)[T:]
    value = float(terms.sum())
    return TailResult(value, value <= eps, float(terms[-1]), horizon)
