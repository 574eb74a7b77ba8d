"""
Hitting probabilities and the received signal
=============================================

How a single release spreads over later sampling windows, and what the
receiver sees when a random packet is sent.
"""

import numpy as np
import matplotlib.pyplot as plt

from masprt.channel import ChannelParams, simulate_packet, tap_vector

params = ChannelParams()          # rho^2 = 0.3, ts = 0.1 s, lambda0 = 4 /s
print("noise per sample n0 =", params.n0)

# the first few taps: the peak sits in the second window
taps = tap_vector(60, params)
print("pi_1..pi_5 =", np.round(taps.taps[:5], 5))
print("mass inside 60 windows:", round(taps.mass, 4))

# a clock offset shifts the whole response
for tau in (0.0, 0.1, 0.5):
    shifted = tap_vector(60, ChannelParams(tau=tau))
    plt.plot(np.arange(1, 61), shifted.taps, label=f"tau = {tau} s")
plt.xlabel("sample window i")
plt.ylabel("pi_i(tau)")
plt.legend()

# a short packet with all molecules released in the first slot of each symbol
x1 = np.r_[60.0, np.zeros(19)]
bits = np.array([1, 0, 1, 1, 0, 0, 1, 0])
sm = simulate_packet(bits, x1, params, seed=1)
plt.figure()
plt.step(np.arange(sm.counts.size), sm.counts.ravel(), where="post", label="counts")
plt.plot(sm.means.ravel(), label="mean")
plt.xlabel("sample")
plt.legend()
plt.show()
