"""Monte Carlo BER experiments: single runs, ADDF calibration, rate and sync sweeps.

Every trial draws its packet from a stream keyed by ``(seed, trial)`` only, so
all schemes evaluated at the same sweep point see the same bits and the same
Poisson draws.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .channel import DEFAULT_HORIZON, ChannelParams, packet_rng, simulate_packet
from .detectors import SCHEMES, Modulation, ReceiverModel, detect_packet, wald_thresholds
from .optimizer import OptProblem, solve_p1

__all__ = [
    "ExperimentSpec",
    "TrialResult",
    "Calibration",
    "MissingSequenceError",
    "CSV_FIELDS",
    "CALIBRATION_SEED",
    "trial_seed",
    "run_ber_trial",
    "default_eta_grid",
    "calibrate_addf",
    "optimized_sequence",
    "sweep_rate",
    "sweep_sync",
    "result_row",
    "table_to_csv",
    "emit_outputs",
]

logger = logging.getLogger(__name__)

CSV_FIELDS = (
    "scheme", "mem_depth", "R_bps", "tau_s", "tau_norm", "bits", "errors", "ber",
    "mean_stop_0", "mean_stop_1", "truncation_rate", "seed",
)
CALIBRATION_SEED = 2_718_281
CALIBRATION_BITS = 10_000
CALIBRATION_PACKETS = 2


class MissingSequenceError(KeyError):
    """No optimised sequence is available for a requested operating point."""


@dataclass(frozen=True)
class ExperimentSpec:
    """One Monte Carlo operating point.

    ``x1`` is the symbol-1 release sequence; its length sets ``N`` and,
    with ``ts``, the bit rate ``R = 1 / (ts N)``.  ``eta`` is only used by
    ADDF; when left as ``None`` it is calibrated at ``tau = 0``.
    """

    x1: tuple = (100.0,)
    scheme: str = "masprt"
    ts: float = 0.1
    tau: float = 0.0
    rho: float = math.sqrt(0.3)
    lambda0: float = 4.0
    bits: int = 10_000
    trials: int = 1
    trial_offset: int = 0
    mem_depth: int = 10
    seed: int = 0
    alpha: float = 1e-3
    beta: float = 1e-3
    eta: float | None = None
    truncation: str = "log"
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self):
        object.__setattr__(self, "x1", tuple(float(v) for v in np.atleast_1d(self.x1)))
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.trials < 1 or self.bits < 1:
            raise ValueError("bits and trials must be >= 1")
        if self.mem_depth < 0:
            raise ValueError("memory depth must be non-negative")
        if self.horizon < self.mem_depth + 1:
            raise ValueError("channel horizon must cover the receiver memory")

    @property
    def N(self) -> int:
        return len(self.x1)

    @property
    def R(self) -> float:
        return 1.0 / (self.ts * self.N)

    @property
    def params(self) -> ChannelParams:
        return ChannelParams(rho=self.rho, ts=self.ts, lambda0=self.lambda0, tau=self.tau)

    @property
    def modulation(self) -> Modulation:
        return Modulation(np.array(self.x1))

    def at_rate(self, R: float, x1) -> "ExperimentSpec":
        """Copy operating at bit rate ``R`` with sequence ``x1`` (``ts`` follows)."""
        N = len(np.atleast_1d(x1))
        return replace(self, x1=tuple(np.atleast_1d(x1)), ts=1.0 / (R * N))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x1"] = list(self.x1)
        return d


@dataclass
class TrialResult:
    """Aggregate detector statistics; raw sums make results mergeable."""

    bits: int
    errors: int
    count_0: int
    count_1: int
    stop_sum_0: int
    stop_sum_1: int
    truncations: int
    seed: int
    eta: float | None = None
    tail_mass: float = 0.0

    @property
    def ber(self) -> float:
        return self.errors / self.bits

    @property
    def mean_stop_0(self) -> float:
        return self.stop_sum_0 / self.count_0 if self.count_0 else float("nan")

    @property
    def mean_stop_1(self) -> float:
        return self.stop_sum_1 / self.count_1 if self.count_1 else float("nan")

    @property
    def truncation_rate(self) -> float:
        return self.truncations / self.bits

    @property
    def ber_sigma(self) -> float:
        """Binomial standard error of the BER estimate."""
        p = self.ber
        return math.sqrt(p * (1 - p) / self.bits)

    def merge(self, other: "TrialResult") -> "TrialResult":
        return TrialResult(
            self.bits + other.bits,
            self.errors + other.errors,
            self.count_0 + other.count_0,
            self.count_1 + other.count_1,
            self.stop_sum_0 + other.stop_sum_0,
            self.stop_sum_1 + other.stop_sum_1,
            self.truncations + other.truncations,
            self.seed,
            self.eta,
            max(self.tail_mass, other.tail_mass),
        )


def trial_seed(master: int, trial: int) -> tuple[int, int]:
    """Key of the packet stream for ``trial``; independent of the scheme."""
    return (int(master), int(trial))


def _packets(spec: ExperimentSpec):
    counts, bits, tail = [], [], 0.0
    for t in range(spec.trial_offset, spec.trial_offset + spec.trials):
        key = trial_seed(spec.seed, t)
        b = packet_rng(key + (0,)).integers(0, 2, spec.bits)
        sm = simulate_packet(b, spec.x1, spec.params, key + (1,), horizon=spec.horizon)
        counts.append(sm.counts)
        bits.append(b)
        tail = sm.tail_mass
    return np.stack(counts), np.stack(bits), tail


def _summarise(bits, out, seed, eta=None, tail=0.0) -> TrialResult:
    zero = bits == 0
    return TrialResult(
        bits=int(bits.size),
        errors=int(np.count_nonzero(out.decisions != bits)),
        count_0=int(zero.sum()),
        count_1=int((~zero).sum()),
        stop_sum_0=int(out.stop_times[zero].sum()),
        stop_sum_1=int(out.stop_times[~zero].sum()),
        truncations=int(out.truncated.sum()),
        seed=seed,
        eta=eta,
        tail_mass=tail,
    )


def run_ber_trial(spec: ExperimentSpec) -> TrialResult:
    """Simulate ``spec.trials`` packets and decode them with ``spec.scheme``."""
    eta = spec.eta
    if spec.scheme == "addf" and eta is None:
        eta = calibrate_addf(spec).eta
    counts, bits, tail = _packets(spec)
    receiver = ReceiverModel(spec.modulation, spec.params, spec.mem_depth)
    out = detect_packet(
        counts, receiver, spec.scheme,
        thresholds=wald_thresholds(spec.alpha, spec.beta),
        eta=eta, truncation=spec.truncation,
    )
    return _summarise(bits, out, spec.seed, eta if spec.scheme == "addf" else None, tail)


@dataclass
class Calibration:
    eta: float
    best_ber: float
    grid: np.ndarray = field(repr=False)
    ber: np.ndarray = field(repr=False)


def default_eta_grid(spec: ExperimentSpec, points: int = 200) -> np.ndarray:
    """``points`` thresholds from 0 to a few standard deviations above the peak mean."""
    receiver = ReceiverModel(spec.modulation, spec.params, 0)
    peak = float(receiver.taps[0] * max(spec.x1))
    return np.linspace(0.0, peak + 5.0 * math.sqrt(peak + spec.params.n0), points)


def calibrate_addf(spec: ExperimentSpec, eta_grid=None, bits: int = CALIBRATION_BITS,
                   packets: int = CALIBRATION_PACKETS) -> Calibration:
    """Pick the ADDF threshold with the lowest BER at ``tau = 0``.

    Uses a fixed calibration seed, so the result depends only on the
    sequence, channel and memory depth.  Ties go to the smallest threshold.
    """
    grid = default_eta_grid(spec) if eta_grid is None else np.sort(np.asarray(eta_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("eta grid must be non-empty")
    return _calibrate(spec.x1, spec.ts, spec.rho, spec.lambda0, spec.mem_depth, spec.horizon,
                      tuple(grid), bits, packets)


@lru_cache(maxsize=64)
def _calibrate(x1, ts, rho, lambda0, mem_depth, horizon, grid, bits, packets) -> Calibration:
    cal = ExperimentSpec(x1=x1, scheme="addf", ts=ts, tau=0.0, rho=rho, lambda0=lambda0,
                         bits=bits, trials=packets, mem_depth=mem_depth,
                         seed=CALIBRATION_SEED, horizon=horizon)
    grid = np.asarray(grid)
    counts, true_bits, _ = _packets(cal)
    receiver = ReceiverModel(cal.modulation, cal.params, mem_depth)
    errors = np.zeros(len(grid))
    for c, b in zip(counts, true_bits):
        view = np.broadcast_to(c, (len(grid),) + c.shape)
        out = detect_packet(view, receiver, "addf", eta=grid)
        errors += np.count_nonzero(out.decisions != b[None, :], axis=1)
    ber = errors / true_bits.size
    best = int(np.argmin(ber))  # first minimum: smallest eta on ties
    logger.info("ADDF calibration: eta %.4g with BER %.4g", grid[best], ber[best])
    return Calibration(float(grid[best]), float(ber[best]), grid, ber)


@lru_cache(maxsize=32)
def _solve_cached(problem: OptProblem):
    return solve_p1(problem)


def optimized_sequence(R: float, N: int = 20, sequences: Mapping | None = None, **problem_kw) -> np.ndarray:
    """Optimised ``x1`` for bit rate ``R``.

    With ``sequences`` (a mapping from rate to sequence) the lookup must
    succeed; otherwise P1 is solved at ``tau = 0`` and cached.
    """
    if sequences is not None:
        for key, x1 in sequences.items():
            if math.isclose(float(key), R, rel_tol=1e-9):
                return np.asarray(x1, dtype=float)
        raise MissingSequenceError(
            f"no optimised sequence for R = {R} bps (ts = {1.0 / (R * N):.6g} s); "
            f"available rates: {sorted(float(k) for k in sequences)}"
        )
    problem = OptProblem(N=N, ts=1.0 / (R * N), **problem_kw)
    return _solve_cached(problem).x1_hat


def result_row(spec: ExperimentSpec, res: TrialResult) -> dict:
    return {
        "scheme": spec.scheme,
        "mem_depth": spec.mem_depth,
        "R_bps": spec.R,
        "tau_s": spec.tau,
        "tau_norm": spec.tau * spec.R,
        "bits": res.bits,
        "errors": res.errors,
        "ber": res.ber,
        "mean_stop_0": res.mean_stop_0,
        "mean_stop_1": res.mean_stop_1,
        "truncation_rate": res.truncation_rate,
        "seed": res.seed,
    }


def _run_all(specs, workers: int = 1):
    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_ber_trial, specs))
    return [run_ber_trial(s) for s in specs]


def _with_eta(specs):
    # calibration happens once per (sequence, memory) before any fan-out
    out = []
    for s in specs:
        if s.scheme == "addf" and s.eta is None:
            s = replace(s, eta=calibrate_addf(s).eta)
        out.append(s)
    return out


def _scheme_list(schemes, default_mem):
    out = []
    for s in schemes:
        if isinstance(s, str):
            out.append((s, default_mem))
        else:
            name, mem = s
            out.append((name, int(mem)))
    return out


def sweep_rate(spec: ExperimentSpec, R_values: Sequence[float], schemes=("masprt", "mlda", "addf"),
               sequences: Mapping | None = None, N: int = 20, workers: int = 1,
               **problem_kw) -> list[dict]:
    """BER against bit rate at the true offset ``spec.tau``.

    ``schemes`` holds names or ``(name, mem_depth)`` pairs.  Each rate uses
    the sequence optimised for it assuming ``tau = 0``.
    """
    specs = []
    for R in R_values:
        x1 = optimized_sequence(R, N, sequences, **problem_kw)
        base = spec.at_rate(R, x1)
        for name, mem in _scheme_list(schemes, spec.mem_depth):
            specs.append(replace(base, scheme=name, mem_depth=mem, eta=None if name == "addf" else spec.eta))
    specs = _with_eta(specs)
    return [result_row(s, r) for s, r in zip(specs, _run_all(specs, workers))]


def sweep_sync(spec: ExperimentSpec, tau_values: Sequence[float], schemes=("masprt", "mlda", "addf"),
               workers: int = 1) -> list[dict]:
    """BER against synchronisation offset for the sequence and rate in ``spec``."""
    specs = []
    for tau in tau_values:
        for name, mem in _scheme_list(schemes, spec.mem_depth):
            specs.append(replace(spec, scheme=name, mem_depth=mem, tau=float(tau)))
    specs = _with_eta(specs)
    return [result_row(s, r) for s, r in zip(specs, _run_all(specs, workers))]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def emit_outputs(rows, csv_path, svg_path=None, x: str = "R_bps") -> None:
    """Write the result table as CSV and, optionally, a log-BER line plot as SVG."""
    rows = list(rows)
    if not rows:
        raise ValueError("refusing to write an empty result table")
    Path(csv_path).write_text(table_to_csv(rows))
    if svg_path is not None:
        Path(svg_path).write_text(_svg(rows, x))


def _svg(rows, x):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "masprt", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        groups = {}
        for row in rows:
            groups.setdefault((row["scheme"], row["mem_depth"]), []).append(row)
        for (scheme, mem), rs in sorted(groups.items()):
            rs = sorted(rs, key=lambda r: r[x])
            floor = 0.5 / max(r["bits"] for r in rs)
            ax.plot([r[x] for r in rs], [max(r["ber"], floor) for r in rs], marker="o",
                    label=f"{scheme.upper()} B={mem}")
        ax.set_yscale("log")
        ax.set_xlabel({"R_bps": "R (bps)", "tau_norm": "tau * R", "tau_s": "tau (s)"}.get(x, x))
        ax.set_ylabel("BER")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize="small")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return buf.getvalue()
