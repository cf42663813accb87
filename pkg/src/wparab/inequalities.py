"""Standalone numerical verification of weighted functional inequalities
on synthetic closed-form test functions.

Three checks, each reporting an empirical constant:

  * unweighted L^{2/(q-gamma)} control by the weighted L^2 norm for an
    A_q weight,
  * the weighted L^2 embedding against a higher unweighted power with
    exponent s = 2n/(n(1+gamma)-2) (higher dimensions) or
    s = 2(1+gamma)/gamma (n <= 2),
  * the space-time interpolation bound
    (1/(b)_B) avg_Q u^2 b <= N (avg u^2)^{1-th} [(avg u^2)^th
                                  + r^{2th} (avg |grad u|^2)^th].

Integrals of polynomial descriptors against power weights use exact
monomial antiderivatives; everything else falls back to composite
16-point Gauss-Legendre on a mesh graded toward the weight's singular
point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GateFailed
from .report import AuditReport, AuditRow
from .weights import (
    BallFamily,
    Weight,
    WeightContext,
    aq_characteristic,
    reverse_holder_gamma,
)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass
class TestFunction:
    """Closed-form scalar function on an interval with its exact gradient."""

    __test__ = False  # not a pytest collection target

    kind: str
    coeffs: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    frequency: float = 1.0
    phase: float = 0.0
    offset: float = 0.0
    breaks: np.ndarray | None = None
    piece_coeffs: list | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("polynomial", "trig", "piecewise"):
            raise ValueError(f"unknown descriptor kind {self.kind!r}")
        self.coeffs = np.asarray(self.coeffs, dtype=float)

    @classmethod
    def polynomial(cls, coeffs) -> "TestFunction":
        return cls(kind="polynomial", coeffs=np.asarray(coeffs, dtype=float))

    @classmethod
    def trig(cls, amplitude: float, frequency: float, phase: float = 0.0,
             offset: float = 0.0) -> "TestFunction":
        return cls(kind="trig", coeffs=np.array([amplitude]),
                   frequency=frequency, phase=phase, offset=offset)

    @classmethod
    def piecewise(cls, breaks, piece_coeffs) -> "TestFunction":
        return cls(kind="piecewise", breaks=np.asarray(breaks, dtype=float),
                   piece_coeffs=[np.asarray(c, dtype=float) for c in piece_coeffs])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(x, self.coeffs)
        if self.kind == "trig":
            return (self.offset + self.coeffs[0]
                    * np.sin(self.frequency * math.pi * x + self.phase))
        idx = np.clip(np.searchsorted(self.breaks, x, side="right") - 1,
                      0, len(self.piece_coeffs) - 1)
        out = np.empty_like(x)
        for i, c in enumerate(self.piece_coeffs):
            m = idx == i
            out[m] = np.polynomial.polynomial.polyval(x[m], c)
        return out

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            d = np.polynomial.polynomial.polyder(self.coeffs)
            return np.polynomial.polynomial.polyval(x, d)
        if self.kind == "trig":
            w = self.frequency * math.pi
            return self.coeffs[0] * w * np.cos(w * x + self.phase)
        idx = np.clip(np.searchsorted(self.breaks, x, side="right") - 1,
                      0, len(self.piece_coeffs) - 1)
        out = np.empty_like(x)
        for i, c in enumerate(self.piece_coeffs):
            m = idx == i
            d = np.polynomial.polynomial.polyder(c)
            out[m] = np.polynomial.polynomial.polyval(x[m], d)
        return out

    def validate_gradient(self, interval, seed: int = 0, n: int = 16,
                          tol: float = 1e-6) -> None:
        """Spot-check the declared gradient by central finite differences."""
        rng = np.random.default_rng(seed)
        lo, hi = interval
        pts = rng.uniform(lo + 1e-3, hi - 1e-3, n)
        if self.kind == "piecewise":
            for b in self.breaks:
                pts = pts[np.abs(pts - b) > 1e-2]
        eps = 1e-6 * (hi - lo)
        fd = (self(pts + eps) - self(pts - eps)) / (2 * eps)
        g = self.grad(pts)
        scale = np.maximum(np.abs(g), 1.0)
        if np.max(np.abs(fd - g) / scale) > tol:
            raise ValueError("descriptor and gradient are inconsistent")


_SLAB = 1e-10  # relative half-width of the analytic innermost slab


def _graded_cells(a: float, b: float, singular: float | None,
                  n_cells: int = 48) -> np.ndarray:
    """Cell edges on [a, b], geometrically graded toward a singular point.

    The slab (singular - eps, singular + eps) is excluded; its contribution
    is added in closed form by :func:`weighted_integral`.
    """
    if singular is None or not a < singular < b:
        return np.linspace(a, b, n_cells + 1)
    half = n_cells // 2
    left = singular - (singular - a) * np.geomspace(1.0, _SLAB, half + 1)
    right = singular + (b - singular) * np.geomspace(_SLAB, 1.0, half + 1)
    return np.unique(np.concatenate([[a], left, right, [b]]))


def weighted_integral(fn, weight: Weight | None, interval, power: float = 1.0,
                      n_cells: int = 48) -> float:
    """int fn(x) * w(x)^power dx over the interval.

    Composite 16-point Gauss-Legendre on a mesh graded toward a power
    weight's singular point; the innermost slab around the singularity is
    integrated in closed form with fn frozen at the center, so slowly
    decaying masses (alpha near -1) are not lost.
    """
    a, b = interval
    singular = None
    if weight is not None and weight.kind == "power":
        c = weight.center[0]
        singular = c if a < c < b else None
    edges = _graded_cells(a, b, singular, n_cells)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if singular is not None and lo < singular < hi:
            continue  # the slab cell is handled in closed form below
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        if half <= 0.0:
            continue
        xq = mid + half * _GL_NODES
        vals = np.asarray(fn(xq), dtype=float)
        if weight is not None:
            vals = vals * weight(xq) ** power
        total += half * float(np.sum(_GL_WEIGHTS * vals))
    if singular is not None:
        q_eff = weight.alpha * power
        if q_eff <= -1.0:
            raise ValueError("non-integrable power inside the interval")
        eps_l = (singular - a) * _SLAB
        eps_r = (b - singular) * _SLAB
        f_c = float(np.asarray(fn(np.array([singular]))).ravel()[0])
        total += (f_c * weight.scale ** power
                  * (eps_l ** (1.0 + q_eff) + eps_r ** (1.0 + q_eff))
                  / (1.0 + q_eff))
    return total


def poly_power_moment(coeffs, alpha: float, center: float, a: float, b: float) -> float:
    """Exact int_a^b p(x) |x - center|^alpha dx for a polynomial p.

    The polynomial is re-expanded in powers of u = x - center; each
    monomial integrates to sign(u)^{k+1} |u|^{k+1+alpha} / (k+1+alpha).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n = len(coeffs)
    shifted = np.zeros(n)
    for k in range(n):
        for j in range(k + 1):
            shifted[j] += coeffs[k] * math.comb(k, j) * center ** (k - j)

    def m_k(y: float, k: int) -> float:
        if y == 0.0:
            return 0.0
        power = k + 1 + alpha
        sign = 1.0 if (y > 0 or (k + 1) % 2 == 0) else -1.0
        return sign * abs(y) ** power / power

    return float(sum(c * (m_k(b - center, k) - m_k(a - center, k))
                     for k, c in enumerate(shifted)))


def weighted_lq_control_audit(g: TestFunction, mu: Weight, q: float,
                              ball: tuple[float, float, float], gamma: float,
                              ctx: WeightContext, fam: BallFamily,
                              budget: float = math.inf,
                              dilations=(1.0, 0.5, 0.25)) -> AuditReport:
    """Unweighted low-exponent average controlled by the weighted L^2 norm.

    lhs = (avg_B |g|^{2/(q-gamma)})^{(q-gamma)/2},
    rhs = ((1/mu(B)) int_B g^2 mu)^{1/2}; the constant must stay finite and
    stable under dilations of the ball. Requires mu in A_q within the
    context budget and gamma below q - 1.
    """
    if not 1.0 < q <= 2.0:
        raise GateFailed("exponent q must lie in (1, 2]")
    if not 0.0 < gamma < q - 1.0:
        raise GateFailed(f"gamma must lie in (0, q-1); got {gamma}")
    char = aq_characteristic(mu, q, fam)
    if char > ctx.M0:
        raise GateFailed(f"A_q characteristic {char} exceeds budget {ctx.M0}")
    rh = reverse_holder_gamma(mu, fam, budget=2.0 * max(char, 1.0))
    gamma_flag = gamma > rh > 0.0
    x0, _, r0 = ball
    rows = []
    consts = []
    exp_low = 2.0 / (q - gamma)
    for d in dilations:
        r = r0 * d
        a, b = x0 - r, x0 + r
        meas = mu.ball_measure([x0], r)
        lhs = (weighted_integral(lambda x: np.abs(g(x)) ** exp_low, None,
                                 (max(a, mu.domain[0][0]), min(b, mu.domain[0][1])))
               / meas) ** ((q - gamma) / 2.0)
        mu_mass = mu.mass(1.0, [x0], r)
        wsq = weighted_integral(lambda x: g(x) ** 2, mu,
                                (max(a, mu.domain[0][0]), min(b, mu.domain[0][1])))
        rhs = math.sqrt(wsq / mu_mass)
        n_emp = lhs / rhs if rhs > 0 else (0.0 if lhs == 0.0 else math.inf)
        consts.append(n_emp)
        rows.append(AuditRow(
            label=f"dilation-{d:g}", lhs=lhs, rhs=rhs, constant=n_emp,
            budget=budget, passed=bool(math.isfinite(n_emp) and n_emp <= budget)))
    spread = (max(consts) / min(consts)) if min(consts) > 0 else 1.0
    rows.append(AuditRow(label="dilation-stability", lhs=spread, rhs=10.0,
                         constant=spread, budget=10.0, passed=bool(spread <= 10.0)))
    return AuditReport.from_rows(
        "weighted-lq-control", rows,
        params={"q": q, "gamma": gamma, "aq_characteristic": char,
                "reverse_holder_gamma": rh, "gamma_exceeds_estimate": gamma_flag})


def weighted_embedding_audit(g: TestFunction, beta: Weight, case: str,
                             gamma: float, ball: tuple[float, float] = (0.0, 1.0),
                             budget: float = math.inf, n_dim: int = 3) -> AuditReport:
    """Weighted L^2 mass controlled by a higher unweighted power.

    case 'high' uses s = 2n/(n(1+gamma)-2) (valid for gamma < 2/n);
    case 'low' uses s = 2(1+gamma)/gamma. lhs = (1/b(B)) int g^2 b,
    rhs = (avg |g|^s)^{2/s}.
    """
    if case == "high":
        if not 0.0 < gamma < 2.0 / n_dim:
            raise GateFailed(f"gamma must lie in (0, 2/n) for the high case")
        s = 2.0 * n_dim / (n_dim * (1.0 + gamma) - 2.0)
    elif case == "low":
        if gamma <= 0.0:
            raise GateFailed("gamma must be positive for the low case")
        s = 2.0 * (1.0 + gamma) / gamma
    else:
        raise ValueError(f"unknown case {case!r}")
    x0, r = ball
    a = max(x0 - r, beta.domain[0][0])
    b = min(x0 + r, beta.domain[0][1])
    mass = beta.mass(1.0, [x0], r)
    lhs = weighted_integral(lambda x: g(x) ** 2, beta, (a, b)) / mass
    rhs = (weighted_integral(lambda x: np.abs(g(x)) ** s, None, (a, b))
           / (b - a)) ** (2.0 / s)
    n_emp = lhs / rhs if rhs > 0 else (0.0 if lhs == 0.0 else math.inf)
    row = AuditRow(label=f"embedding-{case}", lhs=lhs, rhs=rhs, constant=n_emp,
                   budget=budget,
                   passed=bool(math.isfinite(n_emp) and n_emp <= budget))
    return AuditReport.from_rows(
        "weighted-embedding", [row],
        params={"case": case, "gamma": gamma, "s": s})


@dataclass
class SpaceTimeTestFunction:
    """Separable u(x, t) = f(x) * p(t) with exact spatial gradient."""

    space: TestFunction
    time_coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.time_coeffs = np.asarray(self.time_coeffs, dtype=float)

    def __call__(self, x, t):
        return self.space(x) * np.polynomial.polynomial.polyval(t, self.time_coeffs)

    def grad_x(self, x, t):
        return self.space.grad(x) * np.polynomial.polynomial.polyval(
            t, self.time_coeffs)


def interpolation_audit(u: SpaceTimeTestFunction, beta: Weight,
                        x0: float, r: float, t_span: tuple[float, float],
                        thetas: np.ndarray | None = None,
                        budget: float = math.inf, half: bool = False,
                        ctx: WeightContext | None = None) -> AuditReport:
    """Weighted space-time mass against the interpolation right-hand side.

    Reports the smallest admissible constant over a theta grid and the
    minimizing theta; with ``half`` the spatial slice is B_r(x0) ∩ {x > 0}.
    """
    if thetas is None:
        thetas = np.linspace(0.05, 0.95, 19)
    a = max(x0 - r, beta.domain[0][0])
    b = min(x0 + r, beta.domain[0][1])
    if half:
        a = max(a, 0.0)
    s_t, e_t = t_span
    nt = 12
    tq = s_t + (e_t - s_t) * (np.arange(nt) + 0.5) / nt

    def time_avg(fn) -> float:
        return float(np.mean([fn(t) for t in tq]))

    beta_mean = beta.mass(1.0, [x0], r) / beta.ball_measure([x0], r)
    length = b - a
    avg_u2b = time_avg(lambda t: weighted_integral(
        lambda x: u(x, t) ** 2, beta, (a, b)) / length)
    avg_u2 = time_avg(lambda t: weighted_integral(
        lambda x: u(x, t) ** 2, None, (a, b)) / length)
    avg_g2 = time_avg(lambda t: weighted_integral(
        lambda x: u.grad_x(x, t) ** 2, None, (a, b)) / length)
    lhs = avg_u2b / beta_mean
    best = None
    for th in thetas:
        rhs = avg_u2 ** (1.0 - th) * (avg_u2 ** th + r ** (2.0 * th) * avg_g2 ** th)
        n_emp = lhs / rhs if rhs > 0 else (0.0 if lhs == 0.0 else math.inf)
        if best is None or n_emp < best[1]:
            best = (float(th), n_emp)
    theta_star, n_star = best
    row = AuditRow(label="interpolation-bound", lhs=lhs,
                   rhs=lhs / n_star if n_star > 0 else 0.0, constant=n_star,
                   budget=budget,
                   passed=bool(math.isfinite(n_star) and n_star <= budget),
                   extra={"theta_min": theta_star, "avg_u2": avg_u2,
                          "avg_grad2": avg_g2, "half": half})
    return AuditReport.from_rows(
        "weighted-interpolation", [row],
        params={"r": r, "x0": x0, "half": half})
