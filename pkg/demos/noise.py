"""The two noise sources driving the plant.

w1 is a bounded function of time and a Brownian path; w2 is an
Ornstein-Uhlenbeck process.  Shows the OU variance settling at rho1 * rho2
and that the two Brownian substreams are uncorrelated.
"""
import math

import numpy as np

from etadrc.noise import RngStream, Substream, ou_stationary_variance, ou_update, sample_psi_bound
from etadrc.presets import NOISES

rho1 = rho2 = 1.5
h, paths = 1e-2, 20000
stream = RngStream(0, 0, Substream.B2)
w = np.zeros(paths)
for k in range(1, 1001):
    w = ou_update(w, rho1, rho2, h, math.sqrt(h) * stream.standard_normals(paths))
    if k % 200 == 0:
        print(f"t = {k * h:4.1f}  E[w2^2] = {np.mean(w ** 2):.3f}")
print("stationary variance:", ou_stationary_variance(rho1, rho2))

a = RngStream(0, 0, Substream.B1).standard_normals(10 ** 6)
b = RngStream(0, 0, Substream.B2).standard_normals(10 ** 6)
print(f"corr(dB1, dB2) = {np.corrcoef(a, b)[0, 1]:+.5f}")

psi = NOISES["2sin(t+B1)"]()
print("grid sup of |psi| on [0, 20] x [-10, 10]:", sample_psi_bound(psi), "declared bound:", psi.alpha5)
