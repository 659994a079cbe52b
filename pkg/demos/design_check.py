"""Check an ADRC design before simulating it.

Builds the observer and feedback matrices for the reference design, solves
their Lyapunov equations, prints the validation report and then asks how
large the gain r has to be for the stability certificate to go through.
"""
import dataclasses

import numpy as np

from etadrc.gains import (DesignGains, build_H, build_J, certify_r_star, dwell_times, eigenvalues,
                          solve_lyapunov, theta_threshold, validate_design)
from etadrc.presets import linear_n2_system, paper_sec5_system

design = DesignGains(lambdas=(6, 12, 8), cs=(-1, -2), r=50, theta=7)
spec = paper_sec5_system()

print("eig(H):", eigenvalues(build_H(design.lambdas)))
print("eig(J):", eigenvalues(build_J(design.cs)))
q1 = solve_lyapunov(build_J(design.cs))
print("Q1 =\n", q1.Q, "\nlambda_max(Q1) =", q1.lambda_max)
print("theta must exceed", theta_threshold(design, spec))

tau, ups = dwell_times(design.r, design.n)
print(f"dwell times at r={design.r}: tau={tau:.3e}, upsilon={ups:.3e}")
print(f"observer threshold {design.eso_threshold:.3e}, controller threshold {design.ctrl_threshold:.3e}")
print()
print(validate_design(design, spec).format())

# the certificate needs small dwell constants; on the linear plant it succeeds
relaxed = dataclasses.replace(design, theta=2.0, eps2=1e-6)
rep = certify_r_star(relaxed, linear_n2_system(), [0.1] * 5, [0.1, 0.5, 1e-4, 0.1])
print()
print("certified:", rep.success, "r* =", rep.r_star, "first grid point", rep.r_star_grid)
print("gammas:", {k: float(np.round(v, 6)) for k, v in rep.gammas.items()})
