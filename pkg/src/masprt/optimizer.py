"""Design of the symbol-1 release sequence.

Minimises the false-alarm bound of :func:`masprt.analysis.prop1_bound` over
``x1 >= 0`` subject to the two K-L stopping-time constraints and
``||x1||_2 <= P``.

The solver is an augmented Lagrangian on the two K-L constraints with
projected-gradient inner iterations; the power ball and the non-negative
orthant are handled exactly by projection.  The first-sample factor ``mu`` is
piecewise constant in ``x1`` and is frozen for each outer iteration.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import BoundInputs, mu_factor, prop1_bound, prop1_coefficients, prop2_lhs, prop2_tail
from .channel import ChannelParams
from .detectors import WaldThresholds, wald_thresholds

__all__ = [
    "OptProblem",
    "OptResult",
    "p1_objective",
    "p1_constraints",
    "project",
    "solve_p1",
    "save_sequence",
    "load_sequence",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptProblem:
    """Problem data; defaults reproduce the reference simulation setup."""

    N: int = 20
    ts: float = 0.1
    P: float = 100.0
    alpha: float = 1e-3
    beta: float = 1e-3
    T0: int = 5
    T1: int = 5
    mem_depth: int = 10
    rho: float = math.sqrt(0.3)
    lambda0: float = 4.0
    eps: float = 0.1
    mu_variant: str = "printed"
    rate_constraints: bool = True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.P > 0:
            raise ValueError("power budget P must be positive")
        for T in (self.T0, self.T1):
            if not 1 <= T <= self.N:
                raise ValueError(f"desired stopping times must lie in 1..N, got {T}")

    @property
    def params(self) -> ChannelParams:
        return ChannelParams(rho=self.rho, ts=self.ts, lambda0=self.lambda0, tau=0.0)

    @property
    def thresholds(self) -> WaldThresholds:
        return wald_thresholds(self.alpha, self.beta)

    @property
    def rate(self) -> float:
        return 1.0 / (self.ts * self.N)

    def bound_inputs(self) -> BoundInputs:
        return BoundInputs.from_params(self.N, self.mem_depth, self.params, self.thresholds)


@dataclass
class OptResult:
    x1_hat: np.ndarray
    objective: float
    slack0: float
    slack1: float
    norm: float
    iterations: int
    converged: bool
    mu: float = float("nan")
    tail0: float = float("nan")
    tail1: float = float("nan")
    restart: int = 0
    history: list = field(default_factory=list, repr=False)

    def tails_satisfied(self, eps: float) -> bool:
        return self.tail0 <= eps and self.tail1 <= eps


def p1_objective(x1, problem: OptProblem, inputs: BoundInputs | None = None) -> float:
    """False-alarm bound at ``x1`` with ``mu`` re-evaluated at ``x1``."""
    inputs = inputs or problem.bound_inputs()
    return prop1_bound(x1, inputs, variant=problem.mu_variant)


def p1_constraints(x1, problem: OptProblem, inputs: BoundInputs | None = None) -> dict:
    """Constraint surpluses; ``x1`` is feasible iff all are >= 0."""
    inputs = inputs or problem.bound_inputs()
    th = problem.thresholds
    return {
        "c1": prop2_lhs(1, x1, problem.T1, inputs) - th.logB / problem.T1,
        "c0": prop2_lhs(0, x1, problem.T0, inputs) + th.logA / problem.T0,
        "power": problem.P - float(np.linalg.norm(x1)),
    }


def project(x, P: float) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, ||x|| <= P}``."""
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    n = np.linalg.norm(x)
    return x * (P / n) if n > P else x


def _num_grad(f, x, h):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _rate_constraints(x, problem, inputs):
    # c1, c0 only; x may leave the orthant slightly during differencing
    x = np.maximum(x, 0.0)
    c = p1_constraints(x, problem, inputs)
    return np.array([c["c1"], c["c0"]])


def _solve_single(x, problem, inputs, tol, max_iter, max_outer):
    P = problem.P
    x = project(x, P)
    lam = np.zeros(2)
    penalty = 10.0
    total_iter = 0
    history = []
    step = 1.0
    prev_obj = math.inf
    converged = False

    def cons(z):
        if not problem.rate_constraints:
            return np.zeros(2)
        return _rate_constraints(z, problem, inputs)

    for outer in range(max_outer):
        mu = mu_factor(x, inputs, problem.mu_variant).mu
        coef = prop1_coefficients(inputs, mu)

        def merit(z, lam=lam, penalty=penalty, coef=coef):
            c = cons(z)
            return coef @ z + (np.sum(np.maximum(0.0, lam - penalty * c) ** 2) - lam @ lam) / (2 * penalty)

        for _ in range(max_iter):
            h = 1e-5 * max(1.0, np.max(np.abs(x)))
            g = _num_grad(merit, x, h)
            f0 = merit(x)
            while True:
                xn = project(x - step * g, P)
                if merit(xn) <= f0 - 1e-4 * g @ (x - xn) or step < 1e-14:
                    break
                step *= 0.5
            moved = np.linalg.norm(xn - x)
            x = xn
            step = min(step * 2.0, 1e6)
            total_iter += 1
            if moved <= tol * max(1.0, np.linalg.norm(x)):
                break

        c = cons(x)
        lam = np.maximum(0.0, lam - penalty * c)
        obj = prop1_bound(x, inputs, variant=problem.mu_variant)
        violation = max(0.0, -float(np.min(c)))
        history.append((outer, obj, violation, mu))
        logger.debug("outer %d: objective %.6g violation %.3g mu %.4f", outer, obj, violation, mu)

        new_mu = mu_factor(x, inputs, problem.mu_variant).mu
        if violation <= tol and abs(prev_obj - obj) <= tol * max(1.0, abs(obj)) and new_mu == mu:
            converged = True
            break
        if violation > tol:
            penalty = min(penalty * 5.0, 1e8)
        prev_obj = obj
    return x, total_iter, converged, history


def _result(x, problem, inputs, iterations, converged, history, restart=0):
    c = p1_constraints(x, problem, inputs)
    mu = mu_factor(x, inputs, problem.mu_variant).mu
    t0 = prop2_tail(0, x, problem.T0, problem.eps, inputs).value
    t1 = prop2_tail(1, x, problem.T1, problem.eps, inputs).value
    return OptResult(
        x1_hat=x,
        objective=prop1_bound(x, inputs, mu=mu),
        slack0=c["c0"],
        slack1=c["c1"],
        norm=float(np.linalg.norm(x)),
        iterations=iterations,
        converged=converged,
        mu=mu,
        tail0=t0,
        tail1=t1,
        restart=restart,
        history=history,
    )


def solve_p1(problem: OptProblem, init=None, tol: float = 1e-6, max_iter: int = 10_000,
             restarts: int = 4, seed: int = 0, max_outer: int = 60) -> OptResult:
    """Find a locally optimal release sequence.

    Starts from ``init`` (default: the uniform sequence on the power sphere)
    plus ``restarts`` random feasible starts drawn with ``seed``; the best
    feasible result wins, ties going to the lowest restart index.
    """
    inputs = problem.bound_inputs()
    N = problem.N
    starts = [np.full(N, problem.P / math.sqrt(N)) if init is None else np.asarray(init, dtype=float)]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        # radius chosen uniformly in the ball so starts span both small and large norms
        z = rng.uniform(0.0, 1.0, N)
        starts.append(z / np.linalg.norm(z) * problem.P * rng.uniform(0.2, 1.0))

    results = []
    for r, x0 in enumerate(starts):
        x, iters, conv, hist = _solve_single(x0, problem, inputs, tol, max_iter, max_outer)
        res = _result(x, problem, inputs, iters, conv, hist, restart=r)
        results.append(res)
        logger.info("restart %d: objective %.6g norm %.4g converged %s", r, res.objective, res.norm, conv)

    def key(res):
        violation = max(0.0, -min(res.slack0, res.slack1)) if problem.rate_constraints else 0.0
        return (violation > tol, res.objective, res.restart)

    best = min(results, key=key)
    objs = [r.objective for r in results if r.converged]
    if len(objs) > 1 and (max(objs) - min(objs)) > 0.05 * max(min(objs), 1e-12):
        logger.warning("restarts disagree: objectives span %.4g to %.4g", min(objs), max(objs))
    if not best.converged:
        logger.warning("P1 solve did not converge within %d outer iterations", max_outer)

    if init is not None:
        x_init = project(init, problem.P)
        c = p1_constraints(x_init, problem, inputs)
        feasible = min(c["c0"], c["c1"]) >= -tol or not problem.rate_constraints
        if feasible and p1_objective(x_init, problem, inputs) < best.objective:
            best = _result(x_init, problem, inputs, best.iterations, best.converged, best.history)
    return best


def save_sequence(path, problem: OptProblem, result: OptResult) -> None:
    """Write the optimised sequence as a JSON record."""
    record = {
        "ts": problem.ts,
        "N": problem.N,
        "P": problem.P,
        "alpha": problem.alpha,
        "beta": problem.beta,
        "T0": problem.T0,
        "T1": problem.T1,
        "x1": [float(v) for v in result.x1_hat],
        "norm": result.norm,
        "objective": result.objective,
    }
    Path(path).write_text(json.dumps(record, indent=2) + "\n")


def load_sequence(path) -> tuple[OptProblem, np.ndarray]:
    """Read a record written by :func:`save_sequence`."""
    record = json.loads(Path(path).read_text())
    x1 = np.asarray(record["x1"], dtype=float)
    problem = OptProblem(
        N=int(record["N"]), ts=float(record["ts"]), P=float(record["P"]),
        alpha=float(record["alpha"]), beta=float(record["beta"]),
        T0=int(record["T0"]), T1=int(record["T1"]),
    )
    if len(x1) != problem.N:
        raise ValueError(f"{path}: x1 has {len(x1)} entries, expected N = {problem.N}")
    return problem, x1
