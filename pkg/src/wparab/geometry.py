"""Weighted parabolic cylinders and the quasi-distance they induce.

For a weight b and center x0 the time-height profile is

    Psi_{b,x0}(r) = ((b^{n0/2})_{B_r(x0)})^{2/n0},    n0 = max{n, 2},

and the cylinder of radius r at z0 = (x0, t0) occupies B_r(x0) times the
backward interval of length h_{x0}(r) = r^2 Psi_{b,x0}(r). In one dimension
h_{x0}(r) = r * b(B_r(x0)) / 2. The map h_{x0} is strictly increasing, and
its inverse converts time gaps into spatial radii:

    rho_b(z, z0) = max{ |x - x0|, h^{-1}(|t - t0|) },

with the inverse-height anchored at the spatial coordinate of whichever
point has the later time. rho_b satisfies a triangle inequality up to

    Lambda = max{ 2^{1/(2 zeta0)} * N2^{1/(n zeta0)}, 2 },

where (zeta0, N2) quantify how the measure b^{n0/2} shrinks on nested sets.

Analytic (power) weights extend beyond their stated domain; sampled weights
are extended by zero, so their height map can plateau and the inversion
reports NoBracket past the reachable range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoBracket
from .report import AuditReport, AuditRow
from .weights import BallFamily, Weight, WeightContext

TOL_BISECT = 1e-10
MAX_BISECT = 80


@dataclass(frozen=True)
class SpaceTimePoint:
    x: tuple[float, ...]
    t: float

    def __init__(self, x, t: float):
        x = tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())
        if not all(math.isfinite(v) for v in x) or not math.isfinite(t):
            raise ValueError("space-time point must have finite coordinates")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(t))

    @property
    def n(self) -> int:
        return len(self.x)


def psi(beta: Weight, x0, r: float, ctx: WeightContext) -> float:
    """Time-height profile ((beta^{n0/2})_{B_r(x0)})^{2/n0}."""
    if r <= 0.0:
        raise ValueError("radius must be positive")
    n0 = ctx.n0
    return beta.mean_global(n0 / 2.0, x0, r) ** (2.0 / n0)


def height(beta: Weight, x0, r: float, ctx: WeightContext) -> float:
    """Cylinder height h_{x0}(r) = r^2 Psi_{beta,x0}(r); h(0) = 0."""
    if r == 0.0:
        return 0.0
    return r * r * psi(beta, x0, r, ctx)


def _height_vec(beta: Weight, x0: np.ndarray, r: np.ndarray,
                ctx: WeightContext) -> np.ndarray:
    """Vectorized heights for 1D weights (per-sample centers allowed)."""
    x0 = np.asarray(x0, dtype=float)
    r = np.asarray(r, dtype=float)
    clip = beta.kind == "sampled"
    mass = beta.mass_1d_vec(ctx.n0 / 2.0, x0 - r, x0 + r, clip=clip)
    out = np.zeros_like(r)
    pos = r > 0.0
    out[pos] = r[pos] ** 2 * (mass[pos] / (2.0 * r[pos])) ** (2.0 / ctx.n0)
    return out


def height_inverse(beta: Weight, x0, s: float, ctx: WeightContext,
                   tol: float = TOL_BISECT) -> float:
    """Invert the height map: the r with h_{x0}(r) = s, by bisection."""
    if s < 0.0:
        raise ValueError("height values are non-negative")
    if s == 0.0:
        return 0.0
    if beta.n == 1:
        return float(height_inverse_vec(beta, np.atleast_1d(np.asarray(x0, float))[:1],
                                        np.array([s]), ctx, tol)[0])
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if height(beta, x0, hi, ctx) >= s:
            break
        hi *= 2.0
        if hi > 2.0 ** 60:
            raise NoBracket(f"height never reaches {s}")
    else:
        raise NoBracket(f"height never reaches {s}")
    prev = math.inf
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        if height(beta, x0, mid, ctx) < s:
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) <= tol * max(hi, 1e-300) and abs(hi - prev) == 0.0:
            break
        prev = hi
    return 0.5 * (lo + hi)


def height_inverse_vec(beta: Weight, x0: np.ndarray, s: np.ndarray,
                       ctx: WeightContext, tol: float = TOL_BISECT) -> np.ndarray:
    """Vectorized inverse heights for 1D weights."""
    x0 = np.asarray(x0, dtype=float)
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    active = s > 0.0
    if not np.any(active):
        return out
    xa, sa = x0[active], s[active]
    hi = np.ones_like(sa)
    for _ in range(200):
        vals = _height_vec(beta, xa, hi, ctx)
        need = vals < sa
        if not np.any(need):
            break
        if np.any(hi >= 2.0 ** 60):
            raise NoBracket("height never reaches a requested value")
        hi = np.where(need, 2.0 * hi, hi)
    else:
        raise NoBracket("height never reaches a requested value")
    lo = np.zeros_like(sa)
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        below = _height_vec(beta, xa, mid, ctx) < sa
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= tol * np.maximum(hi, 1e-300)):
            break
    out[active] = 0.5 * (lo + hi)
    return out


def quasi_distance(beta: Weight, z: SpaceTimePoint, z0: SpaceTimePoint,
                   ctx: WeightContext) -> float:
    """The quasi-distance rho_beta(z, z0); symmetric, zero iff z == z0."""
    dx = float(np.linalg.norm(np.asarray(z.x) - np.asarray(z0.x)))
    if z.t == z0.t:
        return dx
    base = z0.x if z.t <= z0.t else z.x
    return max(dx, height_inverse(beta, base, abs(z.t - z0.t), ctx))


def quasi_distance_batch(beta: Weight, X: np.ndarray, T: np.ndarray,
                         X0: np.ndarray, T0: np.ndarray,
                         ctx: WeightContext) -> np.ndarray:
    """Vectorized quasi-distances for 1D weights."""
    X, T = np.asarray(X, float), np.asarray(T, float)
    X0, T0 = np.asarray(X0, float), np.asarray(T0, float)
    base = np.where(T <= T0, X0, X)
    gap = np.abs(T - T0)
    return np.maximum(np.abs(X - X0), height_inverse_vec(beta, base, gap, ctx))


@dataclass
class WeightedCylinder:
    """A weighted parabolic cylinder: backward Q, centered C, or half Q+.

    The backward variant occupies B_r(x0) x (t0 - h, t0], the centered one
    B_r(x0) x (t0 - h/2, t0 + h/2), with h = r^2 Psi_{beta,x0}(r). The half
    variant intersects the space slice with {x_n > 0}.
    """

    z0: SpaceTimePoint
    r: float
    beta: Weight
    ctx: WeightContext
    variant: str = "Q"

    def __post_init__(self) -> None:
        if self.r <= 0.0:
            raise ValueError("cylinder radius must be positive")
        if self.variant not in ("Q", "C", "Q+"):
            raise ValueError(f"unknown cylinder variant {self.variant!r}")
        self.h = height(self.beta, self.z0.x, self.r, self.ctx)

    @property
    def t_interval(self) -> tuple[float, float]:
        t0 = self.z0.t
        if self.variant == "C":
            return (t0 - 0.5 * self.h, t0 + 0.5 * self.h)
        return (t0 - self.h, t0)

    def x_interval(self, axis: int = 0) -> tuple[float, float]:
        c = self.z0.x[axis]
        lo, hi = c - self.r, c + self.r
        if self.variant == "Q+" and axis == len(self.z0.x) - 1:
            lo = max(lo, 0.0)
        return (lo, hi)

    def measure(self) -> float:
        vol = 1.0
        for axis in range(len(self.z0.x)):
            lo, hi = self.x_interval(axis)
            vol *= max(0.0, hi - lo)
        if len(self.z0.x) == 2 and self.variant != "Q+":
            vol = math.pi * self.r ** 2
        return vol * self.h

    def contains(self, z: SpaceTimePoint, tol: float = 0.0) -> bool:
        """Membership with closed comparisons on the boundary."""
        for axis in range(len(self.z0.x)):
            lo, hi = self.x_interval(axis)
            if not lo - tol <= z.x[axis] <= hi + tol:
                return False
        if len(self.z0.x) == 2:
            dx = np.linalg.norm(np.asarray(z.x) - np.asarray(self.z0.x))
            if dx > self.r + tol:
                return False
        t_lo, t_hi = self.t_interval
        return t_lo - tol <= z.t <= t_hi + tol


@dataclass(frozen=True)
class QuasiMetricParams:
    """Constants behind the quasi-triangle inequality."""

    n: int
    zeta0: float
    N2: float

    def __post_init__(self) -> None:
        if not 0.0 < self.zeta0 < 1.0:
            raise ValueError("zeta0 must lie in (0, 1)")
        if self.N2 <= 1.0:
            raise ValueError("N2 must exceed 1")

    @property
    def Lambda(self) -> float:
        return max(2.0 ** (1.0 / (2.0 * self.zeta0))
                   * self.N2 ** (1.0 / (self.n * self.zeta0)), 2.0)


def estimate_quasi_params(beta: Weight, ctx: WeightContext,
                          fam: BallFamily | None = None) -> QuasiMetricParams:
    """Fit (zeta0, N2) from measured nested-ball mass ratios.

    For nested balls S1 in S2 collects m = w(S1)/w(S2) against
    s = |S1|/|S2| with w = beta^{n0/2}, then picks the zeta0 on a grid
    whose implied N2 = max(m / s^zeta0) minimizes the resulting Lambda.
    """
    if fam is None:
        fam = BallFamily.default(beta.domain, n_centers=5, n_radii=8)
    p = ctx.n0 / 2.0
    clip = beta.kind == "sampled"
    pairs: list[tuple[float, float]] = []
    fractions = (0.15, 0.3, 0.5, 0.75)
    for c, r in fam.balls():
        m2 = beta.mass(p, c, r, clip=clip)
        if m2 <= 0.0:
            continue
        for f in fractions:
            r1 = f * r
            shifts = [np.zeros(ctx.n)]
            e0 = np.zeros(ctx.n)
            e0[0] = r - r1
            shifts.append(e0)
            shifts.append(-e0)
            for sh in shifts:
                m1 = beta.mass(p, np.atleast_1d(c) + sh, r1, clip=clip)
                if m1 > 0.0:
                    pairs.append((f ** ctx.n, m1 / m2))
    if not pairs:
        raise ValueError("no usable nested-ball pairs in the family")
    s_arr = np.array([p_[0] for p_ in pairs])
    m_arr = np.array([p_[1] for p_ in pairs])
    best: QuasiMetricParams | None = None
    for zeta0 in np.linspace(0.05, 0.95, 19):
        n2 = float(np.max(m_arr / s_arr ** zeta0))
        n2 = max(n2, 1.0 + 1e-9)
        cand = QuasiMetricParams(n=ctx.n, zeta0=float(zeta0), N2=n2)
        if best is None or cand.Lambda < best.Lambda:
            best = cand
    return best


def _adversarial_triples(beta: Weight, ctx: WeightContext, lo: float, hi: float,
                         t_span: float) -> tuple[np.ndarray, np.ndarray]:
    """Structured triples probing the bottom-of-cylinder regime.

    The direct leg runs straight down in time from z0 while the
    intermediate point sits just below the top at a different spatial
    location, so the two legs are measured with mixed height bases. These
    configurations drive the quasi-triangle constant; uniform sampling
    almost never lands on them.
    """
    x_grid = np.linspace(lo, hi, 13)
    t_grid = np.geomspace(1e-4 * t_span, t_span, 10)
    X0, X1, T = np.meshgrid(x_grid, x_grid, t_grid, indexing="ij")
    x0 = X0.ravel()
    x1 = X1.ravel()
    tg = T.ravel()
    eps = 1e-6 * tg
    xs = np.column_stack([x0, x1, x0])
    ts = np.column_stack([np.zeros_like(tg), -eps, -tg])
    return xs, ts


def quasi_triangle_audit(beta: Weight, params: QuasiMetricParams, samples: int,
                         ctx: WeightContext, seed: int,
                         t_span: float | None = None) -> AuditReport:
    """Empirical quasi-triangle check on seeded triples.

    Draws random triples (z0, z1, zbar) plus a deterministic adversarial
    batch, computes the worst ratio
    rho(z0, zbar) / (rho(z0, z1) + rho(z1, zbar)), and passes iff it does
    not exceed params.Lambda. Degenerate triples contribute ratio 0.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    (lo, hi), = beta.domain[:1]
    if t_span is None:
        t_span = height(beta, np.array([0.5 * (lo + hi)]), 0.5 * (hi - lo), ctx)
    xs = rng.uniform(lo, hi, size=(samples, 3))
    ts = rng.uniform(-t_span, 0.0, size=(samples, 3))
    xs_adv, ts_adv = _adversarial_triples(beta, ctx, lo, hi, t_span)
    xs = np.vstack([xs, xs_adv])
    ts = np.vstack([ts, ts_adv])
    d_main = quasi_distance_batch(beta, xs[:, 2], ts[:, 2], xs[:, 0], ts[:, 0], ctx)
    d_leg1 = quasi_distance_batch(beta, xs[:, 1], ts[:, 1], xs[:, 0], ts[:, 0], ctx)
    d_leg2 = quasi_distance_batch(beta, xs[:, 2], ts[:, 2], xs[:, 1], ts[:, 1], ctx)
    denom = d_leg1 + d_leg2
    ratios = np.where(denom > 0.0, d_main / np.where(denom > 0.0, denom, 1.0), 0.0)
    worst = int(np.argmax(ratios))
    max_ratio = float(ratios[worst])
    row = AuditRow(
        label="quasi-triangle-ratio", lhs=max_ratio, rhs=params.Lambda,
        constant=max_ratio, budget=params.Lambda,
        passed=bool(max_ratio <= params.Lambda),
        extra={
            "worst_triple": {
                "z0": [float(xs[worst, 0]), float(ts[worst, 0])],
                "z1": [float(xs[worst, 1]), float(ts[worst, 1])],
                "zbar": [float(xs[worst, 2]), float(ts[worst, 2])],
            },
            "zeta0": params.zeta0,
            "N2": params.N2,
        },
    )
    return AuditReport.from_rows(
        "quasi-triangle-inequality", [row],
        params={"samples": samples, "Lambda": params.Lambda, "t_span": t_span},
        seed=seed)


def cylinder_relations_audit(beta: Weight, z0: SpaceTimePoint, r: float,
                             ctx: WeightContext,
                             lattice: tuple[int, int] = (25, 25),
                             tol: float = 1e-9) -> AuditReport:
    """Containment relations between cylinders and quasi-distance balls.

    Checks on a deterministic lattice: Q_r(z0) sits inside {rho <= r},
    {rho <= r} sits inside the closure of C_{2r}(z0), and every point of
    C_r(z0) is within quasi-distance 2r of z0.
    """
    nx, nt = lattice
    q = WeightedCylinder(z0, r, beta, ctx, variant="Q")
    c2 = WeightedCylinder(z0, 2.0 * r, beta, ctx, variant="C")
    c1 = WeightedCylinder(z0, r, beta, ctx, variant="C")
    x0 = z0.x[0]

    def lattice_points(cyl: WeightedCylinder) -> tuple[np.ndarray, np.ndarray]:
        xlo, xhi = cyl.x_interval(0)
        tlo, thi = cyl.t_interval
        gx = np.linspace(xlo, xhi, nx)
        gt = np.linspace(tlo, thi, nt)
        mx, mt = np.meshgrid(gx, gt)
        return mx.ravel(), mt.ravel()

    failures: list[dict] = []

    # Q_r(z0) subset {rho <= r}
    px, pt = lattice_points(q)
    d = quasi_distance_batch(beta, px, pt, np.full_like(px, x0),
                             np.full_like(pt, z0.t), ctx)
    bad = d > r * (1.0 + tol)
    n_bad_1 = int(np.sum(bad))
    if n_bad_1:
        i = int(np.argmax(d))
        failures.append({"relation": "cylinder-in-ball", "x": float(px[i]),
                         "t": float(pt[i]), "rho": float(d[i])})

    # {rho <= r} subset closure(C_{2r}(z0)): lattice the candidate region
    sx = np.linspace(x0 - r, x0 + r, nx)
    st_lo = z0.t - height(beta, z0.x, r, ctx)
    st_hi = z0.t + 0.5 * height(beta, z0.x, 2.0 * r, ctx)
    stt = np.linspace(st_lo, st_hi, nt)
    mx, mt = np.meshgrid(sx, stt)
    px, pt = mx.ravel(), mt.ravel()
    d = quasi_distance_batch(beta, px, pt, np.full_like(px, x0),
                             np.full_like(pt, z0.t), ctx)
    inside_ball = d <= r * (1.0 + tol)
    n_bad_2 = 0
    for xx, tt in zip(px[inside_ball], pt[inside_ball]):
        if not c2.contains(SpaceTimePoint([xx], tt), tol=tol * max(1.0, abs(tt))):
            n_bad_2 += 1
            failures.append({"relation": "ball-in-centered", "x": float(xx),
                             "t": float(tt)})
    # C_r(z0): all points within quasi-distance 2r
    px, pt = lattice_points(c1)
    d = quasi_distance_batch(beta, px, pt, np.full_like(px, x0),
                             np.full_like(pt, z0.t), ctx)
    bad = d > 2.0 * r * (1.0 + tol)
    n_bad_3 = int(np.sum(bad))
    if n_bad_3:
        i = int(np.argmax(d))
        failures.append({"relation": "centered-within-2r", "x": float(px[i]),
                         "t": float(pt[i]), "rho": float(d[i])})

    rows = [
        AuditRow(label="cylinder-in-ball", lhs=float(n_bad_1), rhs=0.0,
                 constant=float(n_bad_1), budget=0.0, passed=n_bad_1 == 0),
        AuditRow(label="ball-in-centered-cylinder", lhs=float(n_bad_2), rhs=0.0,
                 constant=float(n_bad_2), budget=0.0, passed=n_bad_2 == 0),
        AuditRow(label="centered-cylinder-within-2r", lhs=float(n_bad_3), rhs=0.0,
                 constant=float(n_bad_3), budget=0.0, passed=n_bad_3 == 0),
    ]
    return AuditReport.from_rows(
        "cylinder-ball-relations", rows,
        params={"r": r, "z0": [list(z0.x), z0.t], "lattice": list(lattice),
                "failures": failures[:5]})


def dilated_weight(beta: Weight, r: float, ctx: WeightContext) -> Weight:
    """The rescaled weight Psi_beta(r)^{-1} * beta(r * .), origin-anchored.

    Under x -> r x, t -> r^2 Psi_beta(r) t this weight drives the dilated
    problem on the unit cylinder and satisfies Psi(1) = 1.
    """
    scale_factor = 1.0 / psi(beta, np.zeros(beta.n), r, ctx)
    if beta.kind == "power":
        new_center = tuple(c / r for c in beta.center)
        new_domain = tuple((lo / r, hi / r) for lo, hi in beta.domain)
        return Weight(kind="power", domain=new_domain, alpha=beta.alpha,
                      center=new_center,
                      scale=beta.scale * r ** beta.alpha * scale_factor)
    new_domain = tuple((lo / r, hi / r) for lo, hi in beta.domain)
    return Weight.sampled(beta.samples * scale_factor, new_domain, beta.quadrature)
