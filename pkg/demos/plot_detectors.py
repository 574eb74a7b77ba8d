"""
Three detectors on one packet
=============================

Decode the same noisy packet with the sequential test, the fixed-window
maximum-likelihood detector and the max-sample detector, then look at how
many samples the sequential test actually used.
"""

import numpy as np
import matplotlib.pyplot as plt

from masprt.channel import ChannelParams, simulate_packet
from masprt.detectors import Modulation, ReceiverModel, detect_packet, wald_thresholds
from masprt.harness import ExperimentSpec, calibrate_addf

params = ChannelParams()
mod = Modulation(np.r_[40.0, 20.0, 10.0, np.zeros(17)])
rx = ReceiverModel(mod, params, mem_depth=10)

bits = np.random.default_rng(0).integers(0, 2, 5000)
counts = simulate_packet(bits, mod, params, seed=3).counts

# the max-sample detector needs a threshold; pick it on a separate packet
eta = calibrate_addf(ExperimentSpec(x1=tuple(mod.x1), scheme="addf")).eta

th = wald_thresholds(1e-3, 1e-3)
for scheme in ("masprt", "mlda", "addf"):
    out = detect_packet(counts, rx, scheme, thresholds=th, eta=eta)
    print(f"{scheme:6s} BER {np.mean(out.decisions != bits):.4f}  mean samples {out.stop_times.mean():.2f}")

# where does the sequential test stop?
out = detect_packet(counts, rx, "masprt", thresholds=th)
for b in (0, 1):
    plt.hist(out.stop_times[bits == b], bins=np.arange(1, 22) - 0.5, alpha=0.6, label=f"sent {b}")
plt.xlabel("stopping sample")
plt.legend()
plt.show()
