"""Muckenhoupt weight machinery.

A weight w >= 0 is either an analytic power profile w(x) = s*|x - c|^alpha
or a grid of samples with a declared quadrature rule. The central quantity
is the A_q characteristic

    [w]_{A_q} = sup_B (w)_B ((w^{-1/(q-1)})_B)^{q-1},     q > 1,
    [w]_{A_1} = sup_B (w)_B esssup_B(w^{-1}),

where (f)_B is the average over a ball B. The supremum over all balls is
discretized by a finite :class:`BallFamily`, so every characteristic this
module returns is a lower estimate of the true one.

Power-weight moments are computed from the closed-form antiderivative of
|x - c|^q on each interval, so the singular point never poisons quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import EmptyBall, NonIntegrable
from .report import AuditReport, AuditRow

# Sample floors below this are rejected: their reciprocal powers overflow.
SAMPLE_FLOOR = 1e-300
# Default relative tolerance for comparisons between quadrature values.
TOL_QUAD = 1e-6


@dataclass(frozen=True)
class WeightContext:
    """Dimension and A_q budget shared by the weight-condition audits."""

    n: int
    M0: float = 10.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"spatial dimension must be >= 1, got {self.n}")
        if self.M0 < 1.0:
            raise ValueError(f"A_q budget M0 must be >= 1, got {self.M0}")

    @property
    def n0(self) -> int:
        return max(self.n, 2)


def _power_antideriv(t: np.ndarray | float, q: float) -> np.ndarray | float:
    """Antiderivative of |t|^q at t, i.e. sign(t)|t|^{q+1}/(q+1); needs q > -1."""
    return np.sign(t) * np.abs(t) ** (q + 1.0) / (q + 1.0)


def power_interval_integral(a, b, c: float, q: float):
    """Integral of |x - c|^q over (a, b), closed form; vectorized in a, b."""
    return _power_antideriv(np.asarray(b) - c, q) - _power_antideriv(np.asarray(a) - c, q)


def _interval_overlap(a: float, b: float, lo: float, hi: float) -> tuple[float, float]:
    return max(a, lo), min(b, hi)


_GL16_NODES, _GL16_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass
class Weight:
    """A non-negative spatial weight on an interval or box domain.

    kind='power'   : w(x) = scale * |x - center|^alpha, analytic quadrature;
                     the profile extends beyond the stated domain.
    kind='sampled' : cell values (midpoint rule) or node values (trapezoid
                     rule) on a uniform grid over the domain; zero outside.
    """

    kind: str
    domain: tuple[tuple[float, float], ...]
    alpha: float = 0.0
    center: tuple[float, ...] = ()
    scale: float = 1.0
    samples: np.ndarray | None = None
    quadrature: str = "analytic"
    _cum_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("power", "sampled"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        for lo, hi in self.domain:
            if not lo < hi:
                raise ValueError(f"degenerate domain axis ({lo}, {hi})")
        if self.kind == "power":
            # local integrability of the profile itself; reciprocal powers
            # are gated per operation via check_power_integrable
            if self.alpha <= -self.n:
                raise NonIntegrable(
                    f"alpha = {self.alpha} must exceed -n = {-self.n} "
                    "for local integrability")
            if self.scale <= 0.0:
                raise ValueError("power weight scale must be positive")
            if len(self.center) != self.n:
                raise ValueError("center dimension does not match domain")
        else:
            if self.samples is None:
                raise ValueError("sampled weight requires samples")
            if self.quadrature not in ("midpoint", "trapezoid"):
                raise ValueError(f"unknown quadrature {self.quadrature!r}")
            if np.any(self.samples < SAMPLE_FLOOR):
                raise ValueError(
                    f"sample values below {SAMPLE_FLOOR} are rejected: "
                    "reciprocal powers would overflow")
            if self.n == 1:
                want = self.samples.ndim == 1
            else:
                want = self.samples.ndim == self.n and self.quadrature == "midpoint"
            if not want:
                raise ValueError("sample array shape incompatible with domain/rule")

    # -- constructors ------------------------------------------------------

    @classmethod
    def power(cls, alpha: float, center, domain, scale: float = 1.0) -> "Weight":
        domain = _as_domain(domain)
        center = tuple(np.atleast_1d(np.asarray(center, dtype=float)))
        return cls(kind="power", domain=domain, alpha=alpha, center=center, scale=scale)

    @classmethod
    def constant(cls, value: float, domain) -> "Weight":
        domain = _as_domain(domain)
        center = tuple(0.5 * (lo + hi) for lo, hi in domain)
        return cls(kind="power", domain=domain, alpha=0.0, center=center, scale=value)

    @classmethod
    def sampled(cls, values, domain, quadrature: str = "midpoint") -> "Weight":
        return cls(kind="sampled", domain=_as_domain(domain),
                   samples=np.asarray(values, dtype=float), quadrature=quadrature)

    @classmethod
    def from_function_2d(cls, fn, domain, shape: tuple[int, int],
                         singular=None, depth: int = 6) -> "Weight":
        """Sample a 2D function as cell means; refine cells near a singularity."""
        domain = _as_domain(domain)
        (x0, x1), (y0, y1) = domain
        ny, nx = shape
        xe = np.linspace(x0, x1, nx + 1)
        ye = np.linspace(y0, y1, ny + 1)
        vals = np.empty((ny, nx))
        for j in range(ny):
            for i in range(nx):
                near = singular is not None and (
                    abs(singular[0] - 0.5 * (xe[i] + xe[i + 1])) < 2 * (xe[1] - xe[0])
                    and abs(singular[1] - 0.5 * (ye[j] + ye[j + 1])) < 2 * (ye[1] - ye[0]))
                d = depth if near else 1
                vals[j, i] = _cell_mean_2d(fn, xe[i], xe[i + 1], ye[j], ye[j + 1], d)
        return cls.sampled(vals, domain)

    # -- basic queries -----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.domain)

    def rescaled(self, factor: float) -> "Weight":
        """The weight factor * w (pointwise multiple)."""
        if self.kind == "power":
            return Weight(kind="power", domain=self.domain, alpha=self.alpha,
                          center=self.center, scale=self.scale * factor)
        return Weight.sampled(self.samples * factor, self.domain, self.quadrature)

    def __call__(self, x) -> np.ndarray:
        """Pointwise values (sampled weights are zero outside the domain)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            if self.n == 1:
                return self.scale * np.abs(x - self.center[0]) ** self.alpha
            d = np.linalg.norm(x - np.asarray(self.center), axis=-1)
            return self.scale * d ** self.alpha
        if self.n == 1:
            (lo, hi), = self.domain
            xx = np.atleast_1d(x)
            out = np.zeros_like(xx)
            inside = (xx >= lo) & (xx <= hi)
            if self.quadrature == "midpoint":
                nc = self.samples.size
                idx = np.clip(((xx - lo) / (hi - lo) * nc).astype(int), 0, nc - 1)
                out[inside] = self.samples[idx[inside]]
            else:
                nodes = np.linspace(lo, hi, self.samples.size)
                out[inside] = np.interp(xx[inside], nodes, self.samples)
            return out.reshape(np.shape(x))
        (x0, x1), (y0, y1) = self.domain
        pts = np.atleast_2d(x)
        ny, nx = self.samples.shape
        i = np.clip(((pts[:, 0] - x0) / (x1 - x0) * nx).astype(int), 0, nx - 1)
        j = np.clip(((pts[:, 1] - y0) / (y1 - y0) * ny).astype(int), 0, ny - 1)
        out = self.samples[j, i]
        inside = ((pts[:, 0] >= x0) & (pts[:, 0] <= x1)
                  & (pts[:, 1] >= y0) & (pts[:, 1] <= y1))
        return np.where(inside, out, 0.0)

    def check_power_integrable(self, p: float) -> None:
        if self.kind == "power" and p * self.alpha <= -self.n:
            raise NonIntegrable(
                f"exponent p*alpha = {p * self.alpha} <= -n = {-self.n}")

    # -- 1D mass machinery ---------------------------------------------------

    def _mass_1d(self, p: float, a: float, b: float, clip: bool = True) -> float:
        if self.kind == "power":
            if clip:
                (lo, hi), = self.domain
                a, b = _interval_overlap(a, b, lo, hi)
                if a >= b:
                    return 0.0
            return float(self.scale ** p
                         * power_interval_integral(a, b, self.center[0], p * self.alpha))
        (lo, hi), = self.domain
        a, b = _interval_overlap(a, b, lo, hi)
        if a >= b:
            return 0.0
        if self.quadrature == "midpoint":
            edges, cum = self._cum_1d(p)
            return float(np.interp(b, edges, cum) - np.interp(a, edges, cum))
        return self._mass_1d_trapezoid(p, a, b)

    def _cum_1d(self, p: float) -> tuple[np.ndarray, np.ndarray]:
        key = ("cum", p)
        if key not in self._cum_cache:
            (lo, hi), = self.domain
            nc = self.samples.size
            edges = np.linspace(lo, hi, nc + 1)
            dx = (hi - lo) / nc
            cum = np.concatenate([[0.0], np.cumsum(self.samples ** p * dx)])
            self._cum_cache[key] = (edges, cum)
        return self._cum_cache[key]

    def _mass_1d_trapezoid(self, p: float, a: float, b: float) -> float:
        (lo, hi), = self.domain
        nodes = np.linspace(lo, hi, self.samples.size)
        total = 0.0
        for i in range(self.samples.size - 1):
            aa, bb = _interval_overlap(a, b, nodes[i], nodes[i + 1])
            if aa >= bb:
                continue
            mid, half = 0.5 * (aa + bb), 0.5 * (bb - aa)
            xq = mid + half * _GL16_NODES
            lin = np.interp(xq, nodes, self.samples)
            total += half * float(np.sum(_GL16_WEIGHTS * lin ** p))
        return total

    def mass_1d_vec(self, p: float, a: np.ndarray, b: np.ndarray,
                    clip: bool = True) -> np.ndarray:
        """Vectorized interval masses of w^p; used by the geometry fast path."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.kind == "power":
            if clip:
                (lo, hi), = self.domain
                a, b = np.maximum(a, lo), np.minimum(b, hi)
                b = np.maximum(a, b)
            return (self.scale ** p
                    * power_interval_integral(a, b, self.center[0], p * self.alpha))
        (lo, hi), = self.domain
        a, b = np.maximum(a, lo), np.minimum(b, hi)
        b = np.maximum(a, b)
        if self.quadrature == "midpoint":
            edges, cum = self._cum_1d(p)
            return np.interp(b, edges, cum) - np.interp(a, edges, cum)
        return np.array([self._mass_1d_trapezoid(p, aa, bb) for aa, bb in zip(a, b)])

    # -- nD interface --------------------------------------------------------

    def mass(self, p: float, center, r: float, clip: bool = True) -> float:
        """Integral of w^p over the ball B_r(center) (clipped to the domain)."""
        self.check_power_integrable(p)
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if self.n == 1:
            return self._mass_1d(p, c[0] - r, c[0] + r, clip=clip)
        if self.kind == "power":
            return self._power_mass_2d(p, c, r, clip=clip)
        return self._sampled_mass_2d(p, c, r)

    def ball_measure(self, center, r: float, clip: bool = True) -> float:
        """Measure of B_r(center) intersected with the domain (if clipping)."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if self.n == 1:
            if not clip:
                return 2.0 * r
            (lo, hi), = self.domain
            a, b = _interval_overlap(c[0] - r, c[0] + r, lo, hi)
            return max(0.0, b - a)
        if not clip:
            return math.pi * r * r
        return _disc_box_area(c, r, self.domain)

    def mean(self, p: float, center, r: float) -> float:
        """Mean of w^p over B_r(center) ∩ domain.

        In two dimensions the measure is computed with the same coverage
        discretization as the mass, so the ratio of two means over one
        ball is free of coverage jitter.
        """
        self.check_power_integrable(p)
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if self.n == 1:
            meas = self.ball_measure(c, r)
            if meas <= 0.0:
                raise EmptyBall(f"ball B_{r}({center}) misses the domain")
            return self.mass(p, c, r) / meas
        if self.kind == "sampled":
            (x0, x1), (y0, y1) = self.domain
            ny, nx = self.samples.shape
            frac = _cell_coverage(c, r, x0, x1, y0, y1, nx, ny)
            meas = float(frac.sum())
            if meas <= 0.0:
                raise EmptyBall(f"ball B_{r}({center}) misses the domain")
            return float(np.sum(self.samples ** p * frac)) / meas
        meas = self._power_mass_2d(0.0, c, r)
        if meas <= 0.0:
            raise EmptyBall(f"ball B_{r}({center}) misses the domain")
        return self._power_mass_2d(p, c, r) / meas

    def mean_global(self, p: float, center, r: float) -> float:
        """Mean of w^p over the full ball B_r(center).

        Analytic weights extend beyond the domain; sampled weights are
        extended by zero. This is the convention for cylinder heights.
        """
        self.check_power_integrable(p)
        c = np.atleast_1d(np.asarray(center, dtype=float))
        clip = self.kind == "sampled"
        return self.mass(p, c, r, clip=clip) / self.ball_measure(c, r, clip=False)

    def _power_dist_range(self, center, r: float) -> tuple[float, float]:
        """Min and max distance from the profile center over B ∩ domain."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if self.n == 1:
            (lo, hi), = self.domain
            a, b = _interval_overlap(c[0] - r, c[0] + r, lo, hi)
            if a >= b:
                raise EmptyBall("ball misses the domain")
            cx = self.center[0]
            dmin = 0.0 if a <= cx <= b else min(abs(a - cx), abs(b - cx))
            dmax = max(abs(a - cx), abs(b - cx))
            return dmin, dmax
        pts = _disc_probe_points(c, r, self.domain)
        if pts.size == 0:
            raise EmptyBall("ball misses the domain")
        d = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return float(d.min()), float(d.max())

    def ess_inf(self, center, r: float) -> float:
        """Essential infimum of w over B_r(center) ∩ domain (grid-based)."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if self.kind == "power":
            dmin, dmax = self._power_dist_range(center, r)
            dist = dmin if self.alpha >= 0 else dmax
            if dist == 0.0 and self.alpha < 0:
                return math.inf
            return self.scale * dist ** self.alpha if dist > 0 else (
                0.0 if self.alpha > 0 else self.scale)
        if self.n == 1:
            (lo, hi), = self.domain
            a, b = _interval_overlap(c[0] - r, c[0] + r, lo, hi)
            if a >= b:
                raise EmptyBall("ball misses the domain")
            if self.quadrature == "midpoint":
                edges, _ = self._cum_1d(1.0)
                i0 = int(np.searchsorted(edges, a, side="right")) - 1
                i1 = int(np.searchsorted(edges, b, side="left"))
                return float(np.min(self.samples[max(i0, 0):i1]))
            nodes = np.linspace(lo, hi, self.samples.size)
            sel = (nodes >= a) & (nodes <= b)
            vals = [np.interp(a, nodes, self.samples), np.interp(b, nodes, self.samples)]
            if np.any(sel):
                vals.append(float(np.min(self.samples[sel])))
            return float(min(vals))
        pts = _disc_probe_points(c, r, self.domain)
        if pts.size == 0:
            raise EmptyBall("ball misses the domain")
        return float(np.min(self(pts)))

    def ess_sup(self, center, r: float) -> float:
        """Essential supremum of w over B_r(center) ∩ domain (grid-based)."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if self.kind == "power":
            dmin, dmax = self._power_dist_range(center, r)
            dist = dmax if self.alpha >= 0 else dmin
            if dist == 0.0 and self.alpha < 0:
                return math.inf
            return self.scale * dist ** self.alpha if dist > 0 else (
                0.0 if self.alpha > 0 else self.scale)
        if self.n == 1:
            (lo, hi), = self.domain
            a, b = _interval_overlap(c[0] - r, c[0] + r, lo, hi)
            if a >= b:
                raise EmptyBall("ball misses the domain")
            if self.quadrature == "midpoint":
                edges, _ = self._cum_1d(1.0)
                i0 = int(np.searchsorted(edges, a, side="right")) - 1
                i1 = int(np.searchsorted(edges, b, side="left"))
                return float(np.max(self.samples[max(i0, 0):i1]))
            nodes = np.linspace(lo, hi, self.samples.size)
            sel = (nodes >= a) & (nodes <= b)
            vals = [np.interp(a, nodes, self.samples), np.interp(b, nodes, self.samples)]
            if np.any(sel):
                vals.append(float(np.max(self.samples[sel])))
            return float(max(vals))
        pts = _disc_probe_points(c, r, self.domain)
        if pts.size == 0:
            raise EmptyBall("ball misses the domain")
        return float(np.max(self(pts)))

    # -- 2D helpers ----------------------------------------------------------

    def _sampled_mass_2d(self, p: float, c: np.ndarray, r: float) -> float:
        (x0, x1), (y0, y1) = self.domain
        ny, nx = self.samples.shape
        frac = _cell_coverage(c, r, x0, x1, y0, y1, nx, ny)
        cell_area = (x1 - x0) / nx * (y1 - y0) / ny
        return float(np.sum(self.samples ** p * frac) * cell_area)

    def _power_mass_2d(self, p: float, c: np.ndarray, r: float,
                       clip: bool = True) -> float:
        q = p * self.alpha
        sing = np.asarray(self.center)

        def f(pts: np.ndarray) -> np.ndarray:
            return np.linalg.norm(pts - sing, axis=1) ** q

        if clip:
            (x0, x1), (y0, y1) = self.domain
            rx0, rx1 = max(c[0] - r, x0), min(c[0] + r, x1)
            ry0, ry1 = max(c[1] - r, y0), min(c[1] + r, y1)
        else:
            rx0, rx1 = c[0] - r, c[0] + r
            ry0, ry1 = c[1] - r, c[1] + r
        if rx0 >= rx1 or ry0 >= ry1:
            return 0.0
        total = 0.0
        base = 8
        xs = np.linspace(rx0, rx1, base + 1)
        ys = np.linspace(ry0, ry1, base + 1)
        for j in range(base):
            for i in range(base):
                total += _quadtree_disc_integral(
                    f, xs[i], xs[i + 1], ys[j], ys[j + 1], c, r, sing, depth=5)
        return self.scale ** p * total


def _as_domain(domain) -> tuple[tuple[float, float], ...]:
    arr = np.asarray(domain, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return tuple((float(lo), float(hi)) for lo, hi in arr)


def _cell_mean_2d(fn, x0, x1, y0, y1, depth: int) -> float:
    if depth <= 1:
        xs = x0 + (x1 - x0) * (np.arange(4) + 0.5) / 4
        ys = y0 + (y1 - y0) * (np.arange(4) + 0.5) / 4
        gx, gy = np.meshgrid(xs, ys)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        return float(np.mean(fn(pts)))
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return 0.25 * (_cell_mean_2d(fn, x0, xm, y0, ym, depth - 1)
                   + _cell_mean_2d(fn, xm, x1, y0, ym, depth - 1)
                   + _cell_mean_2d(fn, x0, xm, ym, y1, depth - 1)
                   + _cell_mean_2d(fn, xm, x1, ym, y1, depth - 1))


def _cell_coverage(c: np.ndarray, r: float, x0, x1, y0, y1, nx, ny,
                   sub: int = 4) -> np.ndarray:
    """Fraction of each grid cell covered by the disc B_r(c), via subcells."""
    dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
    off = (np.arange(sub) + 0.5) / sub
    sub_x = x0 + (np.arange(nx)[:, None] + off[None, :]) * dx  # (nx, sub)
    sub_y = y0 + (np.arange(ny)[:, None] + off[None, :]) * dy
    DX = (sub_x.reshape(1, 1, nx, sub) - c[0]) ** 2
    DY = (sub_y.reshape(ny, sub, 1, 1) - c[1]) ** 2
    inside = (DX + DY) <= r * r  # (ny, sub, nx, sub)
    return inside.mean(axis=(1, 3))


def _disc_box_area(c: np.ndarray, r: float, domain, sub: int = 64) -> float:
    (x0, x1), (y0, y1) = domain
    rx0, rx1 = max(c[0] - r, x0), min(c[0] + r, x1)
    ry0, ry1 = max(c[1] - r, y0), min(c[1] + r, y1)
    if rx0 >= rx1 or ry0 >= ry1:
        return 0.0
    frac = _cell_coverage(c, r, rx0, rx1, ry0, ry1, sub, sub, sub=4)
    return float(frac.sum() * (rx1 - rx0) / sub * (ry1 - ry0) / sub)


def _disc_probe_points(c: np.ndarray, r: float, domain, k: int = 24) -> np.ndarray:
    (x0, x1), (y0, y1) = domain
    xs = np.linspace(max(c[0] - r, x0), min(c[0] + r, x1), k)
    ys = np.linspace(max(c[1] - r, y0), min(c[1] + r, y1), k)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    keep = np.linalg.norm(pts - c, axis=1) <= r
    return pts[keep]


def _quadtree_disc_integral(f, x0, x1, y0, y1, c, r, sing, depth: int) -> float:
    corners = np.array([[x0, y0], [x1, y0], [x0, y1], [x1, y1]])
    d = np.linalg.norm(corners - c, axis=1)
    dmin_x = 0.0 if x0 <= c[0] <= x1 else min(abs(x0 - c[0]), abs(x1 - c[0]))
    dmin_y = 0.0 if y0 <= c[1] <= y1 else min(abs(y0 - c[1]), abs(y1 - c[1]))
    dmin = math.hypot(dmin_x, dmin_y)
    if dmin >= r:
        return 0.0
    diag = math.hypot(x1 - x0, y1 - y0)
    fully_inside = d.max() <= r
    near_sing = (x0 - diag <= sing[0] <= x1 + diag) and (y0 - diag <= sing[1] <= y1 + diag)
    if depth <= 0 or (fully_inside and not near_sing):
        xs = x0 + (x1 - x0) * (np.arange(4) + 0.5) / 4
        ys = y0 + (y1 - y0) * (np.arange(4) + 0.5) / 4
        gx, gy = np.meshgrid(xs, ys)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        keep = np.linalg.norm(pts - c, axis=1) <= r
        if not np.any(keep):
            return 0.0
        area = (x1 - x0) * (y1 - y0) / 16.0
        vals = f(pts[keep])
        return float(np.sum(vals[np.isfinite(vals)]) * area)
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return (_quadtree_disc_integral(f, x0, xm, y0, ym, c, r, sing, depth - 1)
            + _quadtree_disc_integral(f, xm, x1, y0, ym, c, r, sing, depth - 1)
            + _quadtree_disc_integral(f, x0, xm, ym, y1, c, r, sing, depth - 1)
            + _quadtree_disc_integral(f, xm, x1, ym, y1, c, r, sing, depth - 1))


@dataclass
class BallFamily:
    """Finite family of balls discretizing the supremum over all balls."""

    centers: np.ndarray  # (m, n)
    radii: np.ndarray    # (k,), strictly increasing

    def __post_init__(self) -> None:
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.radii = np.asarray(self.radii, dtype=float)
        if np.any(np.diff(self.radii) <= 0.0) or np.any(self.radii <= 0.0):
            raise ValueError("radii must be positive and strictly increasing")

    @classmethod
    def default(cls, domain, n_centers: int = 9, n_radii: int = 32,
                r_min: float | None = None, r_max: float | None = None) -> "BallFamily":
        domain = _as_domain(domain)
        widths = [hi - lo for lo, hi in domain]
        w = min(widths)
        r_min = r_min if r_min is not None else w / 64.0
        r_max = r_max if r_max is not None else w / 2.0
        radii = np.geomspace(r_min, r_max, n_radii)
        axes = [np.linspace(lo, hi, n_centers) for lo, hi in domain]
        grids = np.meshgrid(*axes, indexing="ij")
        centers = np.column_stack([g.ravel() for g in grids])
        return cls(centers=centers, radii=radii)

    @classmethod
    def centered(cls, center, radii) -> "BallFamily":
        return cls(centers=np.atleast_2d(np.asarray(center, dtype=float)),
                   radii=np.asarray(radii, dtype=float))

    def balls(self) -> Iterator[tuple[np.ndarray, float]]:
        for c in self.centers:
            for r in self.radii:
                yield c, float(r)

    def validate_against(self, w: Weight) -> None:
        for c, r in self.balls():
            if w.ball_measure(c, r) <= 0.0:
                raise EmptyBall(f"ball B_{r}({c}) misses the weight's domain")


# -- operations -------------------------------------------------------------


def ball_average(w: Weight, x0, r: float, p: float) -> float:
    """Mean of w^p over B_r(x0) ∩ domain (closed form for power weights)."""
    if r <= 0.0:
        raise ValueError("radius must be positive")
    w.check_power_integrable(p)
    return w.mean(p, x0, r)


def _aq_ball(w: Weight, s: float, q: float, center, r: float) -> float:
    """A_q quantity of the weight w^s on one ball."""
    m = w.mean(s, center, r)
    if q > 1.0:
        return m * w.mean(-s / (q - 1.0), center, r) ** (q - 1.0)
    if s == 0.0:
        return m
    # A_1 branch: esssup of w^{-s} over the ball.
    base = w.ess_inf(center, r) if s > 0 else w.ess_sup(center, r)
    if base == 0.0 or not math.isfinite(base):
        return math.inf
    return m * base ** (-s)


def aq_characteristic(w: Weight, q: float, fam: BallFamily, power: float = 1.0) -> float:
    """Lower estimate of the A_q characteristic of w^power over the family.

    For q = 1 the essential-sup branch of the definition is evaluated on the
    grid. The result is >= 1 up to quadrature error.
    """
    if q < 1.0:
        raise ValueError("A_q requires q >= 1")
    w.check_power_integrable(power)
    if q > 1.0:
        w.check_power_integrable(-power / (q - 1.0))
    best = 0.0
    for c, r in fam.balls():
        val = _aq_ball(w, power, q, c, r)
        if val > best:
            best = val
    return best


def check_beta_condition(beta: Weight, ctx: WeightContext, fam: BallFamily,
                         tol_quad: float = TOL_QUAD) -> AuditReport:
    """Audit the A-class condition on a volumetric heat capacity weight.

    Rows: the characteristic of beta^{-1} in A_{1+2/n0} against the budget
    M0; the duality identity tying it to the characteristic of beta^{n0/2}
    in A_{1+n0/2}; and the A_2 bound for beta itself.
    """
    n0 = ctx.n0
    q_inv = 1.0 + 2.0 / n0
    q_dual = 1.0 + n0 / 2.0
    est_inv = aq_characteristic(beta, q_inv, fam, power=-1.0)
    est_dual = aq_characteristic(beta, q_dual, fam, power=n0 / 2.0)
    est_a2 = aq_characteristic(beta, 2.0, fam, power=1.0)

    dual_target = est_inv ** (n0 / 2.0)
    dual_gap = abs(est_dual - dual_target) / max(1.0, abs(dual_target))
    rows = [
        AuditRow(label="inverse-weight-class", lhs=est_inv, rhs=ctx.M0,
                 constant=est_inv, budget=ctx.M0, passed=bool(est_inv <= ctx.M0)),
        AuditRow(label="duality-identity", lhs=est_dual, rhs=dual_target,
                 constant=dual_gap, budget=tol_quad, passed=bool(dual_gap <= tol_quad)),
        AuditRow(label="a2-bound", lhs=est_a2, rhs=est_inv,
                 constant=est_a2 / est_inv if est_inv > 0 else math.inf,
                 budget=1.0 + tol_quad,
                 passed=bool(est_a2 <= est_inv * (1.0 + tol_quad))),
    ]
    return AuditReport.from_rows(
        "heat-capacity-weight-condition", rows,
        params={"n": ctx.n, "n0": n0, "M0": ctx.M0, "q_inv": q_inv, "q_dual": q_dual})


def default_gamma_candidates(w: Weight, gamma_max: float = 2.0, k: int = 12) -> np.ndarray:
    """Geometric candidate grid for the reverse Hölder exponent."""
    if w.kind == "power" and w.alpha < 0.0:
        bound = w.n / (-w.alpha) - 1.0
        gamma_max = min(gamma_max, 0.9 * bound)
    return gamma_max * 0.5 ** np.arange(k)[::-1]  # increasing


def reverse_holder_gamma(w: Weight, fam: BallFamily, budget: float,
                         candidates: np.ndarray | None = None) -> float:
    """Largest candidate gamma with ((w^{1+g})_B)^{1/(1+g)} <= budget*(w)_B on fam.

    Returns 0.0 when no candidate passes (the degenerate answer).
    """
    if budget < 1.0:
        raise ValueError("reverse Hölder budget must be >= 1")
    if candidates is None:
        candidates = default_gamma_candidates(w)
    best = 0.0
    for g in sorted(float(g) for g in candidates):
        if w.kind == "power" and (1.0 + g) * w.alpha <= -w.n:
            continue
        ok = True
        for c, r in fam.balls():
            lhs = w.mean(1.0 + g, c, r) ** (1.0 / (1.0 + g))
            if lhs > budget * w.mean(1.0, c, r) * (1.0 + 1e-12):
                ok = False
                break
        if ok:
            best = g
    return best


def doubling_eta(theta: float, ctx: WeightContext) -> float:
    """Measure-shrinking factor eta = 1 - (1-theta)^{1+n0/2} M0^{-n0/2}."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must be in (0, 1)")
    n0 = ctx.n0
    return 1.0 - (1.0 - theta) ** (1.0 + n0 / 2.0) * ctx.M0 ** (-n0 / 2.0)


def doubling_report(w: Weight, p: float, fam: BallFamily, theta: float,
                    ctx: WeightContext, n1_budget: float = math.inf) -> AuditReport:
    """Estimate the doubling constant of w^p and check the shrink factor.

    Row 1: N1 estimate, the max of w^p(B_{2r})/w^p(B_r) over the family.
    Row 2: for nested test pairs S1 ⊂ S2 with |S1| <= theta*|S2|, checks
    w^p(S1) <= eta * w^p(S2) with eta from :func:`doubling_eta`.
    """
    w.check_power_integrable(p)
    n1 = 0.0
    worst = None
    for c, r in fam.balls():
        m1 = w.mass(p, c, r)
        if m1 <= 0.0:
            continue
        ratio = w.mass(p, c, 2.0 * r) / m1
        if ratio > n1:
            n1, worst = ratio, (tuple(np.atleast_1d(c).tolist()), r)
    eta = doubling_eta(theta, ctx)
    max_pair_ratio = 0.0
    if w.n == 1:
        (dlo, dhi), = w.domain
        for c, r in fam.balls():
            x0 = float(np.atleast_1d(c)[0])
            a2, b2 = _interval_overlap(x0 - r, x0 + r, dlo, dhi)
            L2 = b2 - a2
            if L2 <= 0.0:
                continue
            L1 = theta * L2
            m2 = w._mass_1d(p, a2, b2)
            if m2 <= 0.0:
                continue
            starts = [a2, 0.5 * (a2 + b2) - 0.5 * L1, b2 - L1]
            if w.kind == "power" and a2 <= w.center[0] <= b2:
                starts.append(min(max(w.center[0] - 0.5 * L1, a2), b2 - L1))
            for s in starts:
                m1 = w._mass_1d(p, s, s + L1)
                max_pair_ratio = max(max_pair_ratio, m1 / m2)
    else:
        for c, r in fam.balls():
            m2 = w.mass(p, c, r)
            if m2 <= 0.0:
                continue
            r1 = r * math.sqrt(theta)  # |B_{r1}| = theta |B_r| in 2D
            for shift in (np.zeros(2), np.array([r - r1, 0.0]), np.array([0.0, r - r1])):
                m1 = w.mass(p, np.atleast_1d(c) + shift, r1)
                max_pair_ratio = max(max_pair_ratio, m1 / m2)
    rows = [
        AuditRow(label="doubling-constant", lhs=n1, rhs=n1_budget, constant=n1,
                 budget=n1_budget, passed=bool(math.isfinite(n1) and n1 <= n1_budget),
                 extra={"worst_ball": worst}),
        AuditRow(label="measure-shrink-factor", lhs=max_pair_ratio, rhs=eta,
                 constant=max_pair_ratio, budget=eta,
                 passed=bool(max_pair_ratio <= eta)),
    ]
    return AuditReport.from_rows(
        "weighted-measure-doubling", rows,
        params={"p": p, "theta": theta, "eta": eta, "M0": ctx.M0, "n0": ctx.n0})
