"""
Designing the release sequence
==============================

Solve the sequence design problem at two bit rates and check the bound
quantities at the solution.  A solve takes roughly ten seconds.
"""

import numpy as np
import matplotlib.pyplot as plt

from masprt.analysis import prop2_lhs
from masprt.optimizer import OptProblem, solve_p1

for ts in (0.1, 0.025):
    problem = OptProblem(ts=ts)
    res = solve_p1(problem)
    print(f"ts = {ts}: ||x1|| = {res.norm:.2f}, bound = {res.objective:.3f}, "
          f"mu = {res.mu:.3f}, slacks = ({res.slack0:.2e}, {res.slack1:.2e}), converged = {res.converged}")

    # the K-L sums the stopping-time constraints are built from
    inputs = problem.bound_inputs()
    T = np.arange(1, 21)
    plt.plot(T, [prop2_lhs(1, res.x1_hat, t, inputs) for t in T], label=f"ts = {ts}")

    # tails beyond the target stopping time, compared with eps = 0.1
    print(f"   tails: {res.tail0:.3f} (s0), {res.tail1:.3f} (s1)")

plt.xlabel("T")
plt.ylabel("sum_k D_k / k under s1")
plt.legend()
plt.show()
