"""Gain structures, Lyapunov solves and design-condition checks.

The observer gain matrix ``H`` and controller matrix ``J`` are companion
matrices; both must be Hurwitz.  Their Lyapunov solutions ``Q2`` and ``Q1``
feed the closed-loop conditions on ``theta`` and on the controller dwell time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionError, DomainError, NoSolutionError, NumericalFailure, PreconditionError

HURWITZ_MARGIN = 1e-9
LYAP_RESIDUAL_TOL = 1e-10
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class DesignGains:
    """Observer, controller and triggering parameters.

    ``lambdas`` has length n+1 and ``cs`` has length n.  The trailing
    controller coefficient c_{n+1} is fixed to 1 and is not stored.
    """

    lambdas: tuple
    cs: tuple
    r: float
    theta: float
    eps1: float = 1.0
    kappa1: float = 1.0
    eps2: float = 1.0
    kappa2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, "cs", tuple(float(v) for v in self.cs))
        if len(self.cs) < 1:
            raise DimensionError("cs must have at least one entry")
        if len(self.lambdas) != len(self.cs) + 1:
            raise DimensionError(
                f"lambdas must have length n+1={len(self.cs) + 1}, got {len(self.lambdas)}")
        if not self.r > 0:
            raise DomainError(f"r must be positive, got {self.r}")
        if not self.theta >= 1:
            raise DomainError(f"theta must be >= 1, got {self.theta}")
        for name in ("eps1", "kappa1", "eps2", "kappa2"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def n(self) -> int:
        return len(self.cs)

    @cached_property
    def cs_extended(self) -> np.ndarray:
        """(c_1, ..., c_n, 1)."""
        return np.array(self.cs + (1.0,))

    @cached_property
    def c_max(self) -> float:
        return float(np.max(np.abs(self.cs_extended)))

    @cached_property
    def injection_gains(self) -> np.ndarray:
        """Observer output-injection gains lambda_i * r**i, i = 1..n+1."""
        return np.array([lam * self.r ** (i + 1) for i, lam in enumerate(self.lambdas)])

    @cached_property
    def feedback_gains(self) -> np.ndarray:
        """Coefficients k with u = k @ xhat: theta**(n+1-i) c_i for i <= n, then -1."""
        n = self.n
        k = [self.theta ** (n - i) * c for i, c in enumerate(self.cs)]
        return np.array(k + [-1.0])

    @property
    def eso_threshold(self) -> float:
        return self.kappa1 * self.r ** -(self.n + 0.5)

    @property
    def ctrl_threshold(self) -> float:
        return self.kappa2 * self.r ** -0.5

    @property
    def dwell(self) -> tuple:
        return dwell_times(self.r, self.n, self.eps1, self.eps2)


@dataclass
class LyapunovSolution:
    Q: np.ndarray
    residual_norm: float
    lambda_min: float
    lambda_max: float


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "value": c.value,
                 "threshold": c.threshold, "detail": c.detail}
                for c in self.checks
            ],
            "notes": list(self.notes),
        }

    def format(self) -> str:
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"[{mark}] {c.name:<16} value={c.value!r:<24} threshold={c.threshold!r}  {c.detail}")
        lines.extend(f"note: {s}" for s in self.notes)
        return "\n".join(lines)


def _as_vector(v, min_len, what):
    a = np.asarray(v, dtype=float)
    if a.ndim != 1 or a.size < min_len:
        raise DimensionError(f"{what} must be a vector with at least {min_len} entries, got shape {a.shape}")
    return a


def build_H(lambdas) -> np.ndarray:
    """Observer companion matrix: first column -lambda_i, ones on the superdiagonal."""
    lam = _as_vector(lambdas, 2, "lambdas")
    m = lam.size
    H = np.eye(m, k=1)
    H[:, 0] = -lam
    return H


def build_J(cs) -> np.ndarray:
    """Controller companion matrix: ones on the superdiagonal, last row c_1..c_n."""
    c = _as_vector(cs, 1, "cs")
    n = c.size
    J = np.eye(n, k=1)
    J[-1, :] = c
    return J


def is_hurwitz(A) -> bool:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    return bool(np.all(eigenvalues(A).real < -HURWITZ_MARGIN))


def eigenvalues(A) -> np.ndarray:
    """Eigenvalues with multiple roots resolved by cluster means.

    A k-fold eigenvalue is perturbed by roughly (eps ||A||)**(1/k) in floating
    point, but the mean of its cluster is well conditioned.  Eigenvalues
    closer than 10 (eps ||A||)**(1/m) are grouped and replaced by their mean.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    m = A.shape[0]
    ev = np.linalg.eigvals(A)
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    tol = 10.0 * (np.finfo(float).eps * scale) ** (1.0 / m) * scale
    labels = list(range(m))

    def find(i):
        while labels[i] != i:
            i = labels[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            if abs(ev[i] - ev[j]) <= tol:
                labels[find(j)] = find(i)
    roots = np.array([find(i) for i in range(m)])
    out = ev.copy()
    for root in set(roots.tolist()):
        members = roots == root
        out[members] = ev[members].mean()
    if np.all(np.abs(out.imag) <= tol):
        out = out.real
    return np.sort_complex(out) if np.iscomplexobj(out) else np.sort(out)


def solve_lyapunov(A) -> LyapunovSolution:
    """Solve Q A + A^T Q = -I via the vectorised (Kronecker) linear system."""
    A = np.asarray(A, dtype=float)
    if not is_hurwitz(A):
        raise NoSolutionError("matrix is not Hurwitz; no positive definite Lyapunov solution")
    m = A.shape[0]
    eye = np.eye(m)
    # row-major vec: vec(Q A) = (I kron A^T) vec(Q), vec(A^T Q) = (A^T kron I) vec(Q)
    K = np.kron(eye, A.T) + np.kron(A.T, eye)
    rhs = -eye.ravel()
    q = np.linalg.solve(K, rhs)
    for _ in range(3):
        res = rhs - K @ q
        if np.linalg.norm(res) <= LYAP_RESIDUAL_TOL * 1e-3:
            break
        q = q + np.linalg.solve(K, res)
    Q = q.reshape(m, m)
    Q = 0.5 * (Q + Q.T)
    residual = float(np.linalg.norm(Q @ A + A.T @ Q + eye, "fro"))
    if residual > LYAP_RESIDUAL_TOL:
        raise NumericalFailure(f"Lyapunov residual {residual:.3e} exceeds {LYAP_RESIDUAL_TOL:.0e}")
    eig = np.linalg.eigvalsh(Q)
    if eig[0] <= 0:
        raise NumericalFailure("Lyapunov solution is not positive definite")
    return LyapunovSolution(Q=Q, residual_norm=residual, lambda_min=float(eig[0]), lambda_max=float(eig[-1]))


def dwell_times(r, n, eps1=1.0, eps2=1.0):
    """Minimum inter-event times (tau, upsilon) for the observer and controller triggers.

    tau = eps1 * r**-(2n + 3/2),  upsilon = eps2 * r**-(2n/3 + 1).
    """
    if not r > 0 or not eps1 > 0 or not eps2 > 0:
        raise DomainError("r, eps1 and eps2 must be positive")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    tau = eps1 * r ** -(2 * n + 1.5)
    upsilon = eps2 * r ** -(2 * n / 3 + 1)
    return tau, upsilon


def theta_threshold(design: DesignGains, spec) -> float:
    """2 * lambda_max(Q1) * sum(L_i); requires J Hurwitz."""
    q1 = solve_lyapunov(build_J(design.cs))
    return 2.0 * q1.lambda_max * float(np.sum(spec.L))


def dwell_product(design: DesignGains, upsilon=None) -> float:
    if upsilon is None:
        upsilon = design.dwell[1]
    return upsilon * design.theta ** design.n * design.c_max


def validate_design(design: DesignGains, spec, upsilon=None) -> ValidationReport:
    """Check the closed-loop design hypotheses; failures are reported, never raised.

    ``upsilon`` overrides the controller dwell time derived from ``design``.
    """
    if spec.n != design.n:
        raise DimensionError(f"design has n={design.n} but system has n={spec.n}")
    report = ValidationReport()
    H = build_H(design.lambdas)
    J = build_J(design.cs)
    eig_H = float(np.max(eigenvalues(H).real))
    eig_J = float(np.max(eigenvalues(J).real))
    report.checks.append(Check("H_hurwitz", bool(eig_H < -HURWITZ_MARGIN), float(eig_H), -HURWITZ_MARGIN,
                               "max real part of eig(H)"))
    report.checks.append(Check("J_hurwitz", bool(eig_J < -HURWITZ_MARGIN), float(eig_J), -HURWITZ_MARGIN,
                               "max real part of eig(J)"))
    if report["J_hurwitz"].passed:
        thr = theta_threshold(design, spec)
        report.checks.append(Check("theta_condition", bool(design.theta > thr), design.theta, thr,
                                   "theta > 2 lambda_max(Q1) sum(L)"))
    else:
        report.checks.append(Check("theta_condition", False, design.theta, math.nan, "J not Hurwitz; Q1 undefined"))
    ups = design.dwell[1] if upsilon is None else upsilon
    prod = dwell_product(design, ups)
    report.checks.append(Check("dwell_product", bool(prod < 1.0), prod, 1.0,
                               f"upsilon * theta^n * max|c_i| with upsilon={ups!r}"))
    return report


@dataclass(frozen=True)
class NoiseMoments:
    """Sup-bounds entering the constant term of the sampling-error estimate."""

    w2_sq_sup: float
    phi1_sq_sup: float


def default_noise_moments(rho1, rho2, w2_0, spec=None, alpha5=None, samples=2001) -> NoiseMoments:
    """OU: E w2(t)^2 = w2(0)^2 e^{-2 rho1 t} + rho1 rho2 (1 - e^{-2 rho1 t}) <= max of the two ends.

    phi1 bound: sampled sup of phi1(w)^2 over |w| <= alpha5 (zero if the system
    declares no phi1).
    """
    w2_sq = max(w2_0 ** 2, rho1 * rho2)
    phi = 0.0
    phi1 = getattr(spec, "phi1", None)
    if phi1 is not None and alpha5 is not None:
        grid = np.linspace(-alpha5, alpha5, samples)
        phi = float(np.max(np.asarray(phi1(grid), dtype=float) ** 2))
    return NoiseMoments(w2_sq_sup=w2_sq, phi1_sq_sup=phi)


@dataclass(frozen=True)
class LambdaCoefficients:
    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float
    lambda5: float
    lambda6: float

    def as_tuple(self):
        return (self.lambda1, self.lambda2, self.lambda3, self.lambda4, self.lambda5, self.lambda6)


def lambda_coefficients(upsilon, tau, r, design: DesignGains, spec, noise_moments: NoiseMoments,
                        ) -> LambdaCoefficients:
    """Coefficients bounding the controller sampling error over a dwell window."""
    n = design.n
    theta = design.theta
    prod = upsilon * theta ** n * design.c_max
    if not prod < 1.0:
        raise PreconditionError(f"dwell product {prod!r} must be < 1")
    denom = (1.0 - prod) ** 2
    c2 = design.c_max ** 2
    L = np.asarray(spec.L, dtype=float)
    a1, a2, a3, _ = spec.alphas
    lam_sq = float(np.sum(np.square(design.lambdas)))
    th2n = theta ** (2 * n)

    l1 = 10 * (n + 1) * th2n * (c2 + 4 * a2 ** 2) * upsilon ** 2 / denom
    l2 = 10 * (n * (1 + float(np.sum(L ** 2))) + 4 * n * a2 ** 2) * upsilon / denom
    l3 = (10 * (n + 1) * (1 + L[0] ** 2) * upsilon ** 2 * (upsilon + tau)
          * r ** (2 * (n + 1)) * lam_sq / denom)
    l4 = 10 * (n + 1) * th2n * c2 * upsilon ** 2 / denom
    scaled_L = sum(L[i] ** 2 / r ** (2 * (n - i)) for i in range(n))
    l5 = 10 * (n * (1 + scaled_L) + (n + 1) * r ** 2 * lam_sq) * upsilon / denom
    bracket = (4 + 8 * n) * (a1 ** 2 + a3 ** 2 * noise_moments.w2_sq_sup + noise_moments.phi1_sq_sup)
    bracket += r * (n + 1) * design.kappa1 ** 2 * lam_sq
    l6 = 10 * th2n * upsilon ** 2 / denom * bracket
    return LambdaCoefficients(float(l1), float(l2), float(l3), float(l4), float(l5), float(l6))


@dataclass
class CertificationReport:
    success: bool
    r_star: float = math.nan
    r_star_grid: float = math.nan
    r1: float = math.nan
    r2: float = math.nan
    gamma_star: float = math.nan
    gammas: dict = field(default_factory=dict)
    flagged: list = field(default_factory=list)
    message: str = ""


def certify_r_star(design: DesignGains, spec, betas, mus, r0=1.0, cap=2.0 ** 60) -> CertificationReport:
    """Search the geometric grid r0 * 2**k for a gain r_* satisfying the closed-loop inequalities.

    ``betas`` = (beta_1..beta_5) bound the drift/diffusion of the total
    disturbance; ``mus`` = (mu_1..mu_4) are the free Young-inequality weights.
    """
    betas = tuple(float(b) for b in betas)
    mus = tuple(float(m) for m in mus)
    if len(betas) != 5 or len(mus) != 4:
        raise DimensionError("expected 5 betas and 4 mus")
    if min(betas) <= 0 or min(mus) <= 0:
        raise DomainError("betas and mus must be strictly positive")
    if not validate_design(design, spec).passed:
        raise PreconditionError("design does not pass validate_design")
    _, b2, b3, b4, _ = betas
    m1, m2, m3, m4 = mus
    n = design.n
    theta = design.theta
    lmax1 = solve_lyapunov(build_J(design.cs)).lambda_max
    lmax2 = solve_lyapunov(build_H(design.lambdas)).lambda_max
    sum_L = float(np.sum(spec.L))
    sum_abs_lam = float(np.sum(np.abs(design.lambdas)))
    report = CertificationReport(success=False)

    gamma2 = 1.0 - m3 * lmax2 ** 2 * sum_abs_lam ** 2
    gamma1_inf = (theta - 2 * lmax1 * sum_L - m1 * lmax1 ** 2 - m2 * lmax1 ** 2 - m4 * lmax2 ** 2 * b2)
    report.gammas.update(gamma2=gamma2, gamma1_limit=gamma1_inf)
    if gamma1_inf <= 0:
        report.flagged.append("gamma1")
    if gamma2 <= 0:
        report.flagged.append("gamma2")
    if report.flagged:
        report.message = "sign condition fails for every r: " + ", ".join(report.flagged)
        return report

    grid = []
    r = float(r0)
    while r <= cap:
        grid.append(r)
        r *= 2.0
    ff = float(np.sum(design.cs_extended * theta ** np.arange(n, -1, -1)))
    moments = NoiseMoments(0.0, 0.0)  # lambda6 is not used by the conditions

    def gamma1_at(rr):
        tau, ups = dwell_times(rr, n, design.eps1, design.eps2)
        return gamma1_inf - 2 * ups - 2 * tau

    def r1_ok(rr):
        _, ups = dwell_times(rr, n, design.eps1, design.eps2)
        slack = (gamma2 * rr / 2 - ff ** 2 / m1 - 2 * lmax2 * sum_L - m4 * lmax2 ** 2 * b3 - 1 / m4 - ups)
        return gamma1_at(rr) > 0 and slack > 0

    r1 = next((rr for rr in grid if r1_ok(rr)), None)
    if r1 is None:
        report.flagged.append("r1")
        report.message = f"no grid point up to {cap!r} satisfies the r1 conditions"
        return report
    gamma1 = gamma1_at(r1)
    gamma_star = theta ** (2 * n) / m2 * design.c_max ** 2 + m4 * lmax2 ** 2 * b4
    report.r1 = r1
    report.gamma_star = gamma_star
    report.gammas["gamma1"] = gamma1

    def later_gammas(rr):
        tau2, ups2 = dwell_times(rr, n, design.eps1, design.eps2)
        try:
            lc = lambda_coefficients(ups2, tau2, rr, design, spec, moments)
        except PreconditionError:
            return None, None
        g = {
            "gamma3": gamma1 - gamma_star * lc.lambda1,
            "gamma4": 1 - gamma_star * lc.lambda2,
            "gamma5": 1 - design.eps1 / (m3 * math.sqrt(rr)),
            "gamma6": 1 - gamma_star * lc.lambda3,
            "gamma7": 1 - gamma_star * lc.lambda5,
        }
        return g, lc

    r2 = None
    last = None
    for rr in grid:
        g, lc = later_gammas(rr)
        if g is None:
            continue
        last = g
        if all(v > 0 for v in g.values()):
            r2, lam2 = rr, lc
            report.gammas.update(g)
            break
    if r2 is None:
        if last:
            report.gammas.update(last)
            report.flagged.extend(k for k, v in last.items() if v <= 0)
        else:
            report.flagged.append("dwell_product")
        report.message = f"no grid point up to {cap!r} satisfies the gamma3..gamma7 conditions"
        return report
    report.r2 = r2
    r_star = max(4 * gamma_star / gamma2 * lam2.lambda4, design.eps1 ** 2 / m3 ** 2, r1, r2)
    report.r_star = r_star
    report.r_star_grid = next((rr for rr in grid if rr >= r_star), math.nan)
    report.success = not math.isnan(report.r_star_grid)
    report.message = "certified" if report.success else f"r_star={r_star!r} exceeds cap"
    return report
