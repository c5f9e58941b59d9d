"""Heat kernel at unit time, its derivatives, and complex-shifted variants.

Base integral:

    p1(r, z) = (1/4 pi^2) int_0^inf cos(lam z) G(lam, r) dlam,
    G(lam, r) = (lam/sinh lam) exp(-(r^2/4) lam coth lam),

with every other time reached through p(t, r, z) = t^{-2} p1(r/sqrt(t), z/t).

Accuracy note: the integrand envelope is of size exp(-r^2/4) while the
true value is of size exp(-d^2/4), so float64 quadrature carries a
relative noise floor of roughly 1e-13 * exp((d^2 - r^2)/4).  Every grid
in this package stays where that floor is harmless; the interpolation
tables switch to the Gaussian-estimate asymptote once the cancellation
exponent (d^2 - r^2)/4 exceeds CANCEL_BUDGET, a region whose heat-measure
weight is below exp(-16).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .geometry import cc_distance_many
from .group import ScalarField
from .numerics import QuadratureSpec, integrate_decaying

__all__ = [
    "KernelConfig",
    "ComplexKernelValue",
    "KernelRangeError",
    "p1",
    "p",
    "p1_many",
    "log_grad_many",
    "p1_partials",
    "p1_second_partials",
    "RadialLogDerivatives",
    "log_derivatives",
    "log_h_field",
    "xhat_log_h_field",
    "p1_complex_shift",
    "p1_star_shifted",
    "radial_row",
    "get_spline_tables",
]

FOUR_PI_SQ = 4.0 * math.pi**2
Z_RANGE_LIMIT = 50.0
SERIES_CUT = 1e-4

# quadrature relative noise ~1e-12 exp((d^2-r^2)/4); beyond this exponent
# the tables fall back to the cut-locus asymptote (noise at the boundary is
# ~4e-3 relative, and every consumer weights that region below e^{-13})
CANCEL_BUDGET = 22.0


class KernelRangeError(ValueError):
    """|z| outside the supported oscillation range."""


@dataclass(frozen=True)
class KernelConfig:
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    t_base: float = 1.0

    def __post_init__(self):
        if not (self.t_base > 0.0):
            raise ValueError("t_base must be > 0")


@dataclass(frozen=True)
class ComplexKernelValue:
    re: float
    im: float
    method: str  # "shifted-integral" or "regularized-plus-pole"

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError("complex kernel value must be finite")
        if self.method not in ("shifted-integral", "regularized-plus-pole"):
            raise ValueError(f"unknown method {self.method!r}")

    def as_complex(self) -> complex:
        return complex(self.re, self.im)


def _sinh_ratio(lam):
    """lam/sinh(lam); series below the cut keeps the removable point smooth."""
    lam = np.asarray(lam, dtype=float)
    small = np.abs(lam) < SERIES_CUT
    safe = np.where(small, 1.0, lam)
    l2 = lam * lam
    series = 1.0 - l2 / 6.0 + 7.0 * l2 * l2 / 360.0
    return np.where(small, series, safe / np.sinh(safe))


def _lam_coth(lam):
    """lam coth(lam) with the same series guard."""
    lam = np.asarray(lam, dtype=float)
    small = np.abs(lam) < SERIES_CUT
    safe = np.where(small, 1.0, lam)
    l2 = lam * lam
    series = 1.0 + l2 / 3.0 - l2 * l2 / 45.0
    return np.where(small, series, safe / np.tanh(safe))


def _g_factor(lam, r):
    return _sinh_ratio(lam) * np.exp(-0.25 * r * r * _lam_coth(lam))


def _check_range(r, z):
    if not (math.isfinite(r) and math.isfinite(z)):
        raise ValueError("coordinates must be finite")
    if r < 0.0:
        raise ValueError("radial coordinate must be >= 0")
    if abs(z) > Z_RANGE_LIMIT:
        raise KernelRangeError(
            f"|z| = {abs(z):.3g} exceeds the supported range {Z_RANGE_LIMIT}; "
            "the oscillatory quadrature would need finer panels than the "
            "accuracy model supports"
        )


def _osc_spec(cfg: KernelConfig | None, z: float) -> QuadratureSpec:
    quad = (cfg or KernelConfig()).quad
    return replace(quad, oscillation_wavenumber=abs(z))


def p1(r: float, z: float, cfg: KernelConfig | None = None) -> float:
    """Heat kernel at time 1 as a function of (r, z); even in z."""
    _check_range(r, z)
    spec = _osc_spec(cfg, z)
    decay = 1.0 + 0.25 * r * r

    def f(lam):
        return np.cos(lam * z) * _g_factor(lam, r)

    return integrate_decaying(f, decay, spec) / FOUR_PI_SQ


def p(t: float, r: float, z: float, cfg: KernelConfig | None = None) -> float:
    """Heat kernel at time t via the dilation scaling t^{-2} p1(r/sqrt t, z/t)."""
    if not (t > 0.0):
        raise ValueError("time must be > 0")
    rt = math.sqrt(t)
    return p1(r / rt, z / t, cfg) / (t * t)


def p1_partials(r: float, z: float, cfg: KernelConfig | None = None):
    """(d/dr p1, d/dz p1) by differentiation under the integral."""
    _check_range(r, z)
    spec = _osc_spec(cfg, z)
    decay = 1.0 + 0.25 * r * r

    def f_r(lam):
        return np.cos(lam * z) * (-0.5 * r) * _lam_coth(lam) * _g_factor(lam, r)

    def f_z(lam):
        return -np.sin(lam * z) * lam * _g_factor(lam, r)

    dr = integrate_decaying(f_r, decay, spec) / FOUR_PI_SQ
    dz = integrate_decaying(f_z, decay, spec) / FOUR_PI_SQ
    return dr, dz


def p1_second_partials(r: float, z: float, cfg: KernelConfig | None = None):
    """(d2/dr2, d2/drdz / r, d2/dz2) of p1.

    The mixed derivative is returned with its factor r stripped so the
    z-axis limit stays available; multiply by r to recover d2/drdz.
    """
    _check_range(r, z)
    spec = _osc_spec(cfg, z)
    decay = 1.0 + 0.25 * r * r

    def f_rr(lam):
        lc = _lam_coth(lam)
        return np.cos(lam * z) * (0.25 * r * r * lc * lc - 0.5 * lc) * _g_factor(lam, r)

    def f_rz_over_r(lam):
        return np.sin(lam * z) * 0.5 * lam * _lam_coth(lam) * _g_factor(lam, r)

    def f_zz(lam):
        return -np.cos(lam * z) * lam * lam * _g_factor(lam, r)

    drr = integrate_decaying(f_rr, decay, spec) / FOUR_PI_SQ
    drz_over_r = integrate_decaying(f_rz_over_r, decay, spec) / FOUR_PI_SQ
    dzz = integrate_decaying(f_zz, decay, spec) / FOUR_PI_SQ
    return drr, drz_over_r, dzz


# ---------------------------------------------------------------------------
# batched fixed-panel evaluation


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _panel_rule(lam_max: float, width: float):
    n = max(1, int(math.ceil(lam_max / width)))
    edges = np.linspace(0.0, lam_max, n + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def _lambda_cutoff(r_min: float, target: float = 42.0) -> float:
    """Tail cutoff: solve lam + (r_min^2/4)(lam coth lam - 1) = target.

    The integrand envelope relative to its lam = 0 value is
    exp(-lam - q (lc(lam) - 1)) with q = r^2/4; near zero that decays
    like a Gaussian exp(-q lam^2/3), not like exp(-(1+q) lam), so a
    cutoff of 42/(1+q) would truncate far too early for large r.
    """
    q = 0.25 * r_min * r_min
    lo, hi = 0.0, target
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        g = mid + q * (float(_lam_coth(mid)) - 1.0)
        if g < target:
            lo = mid
        else:
            hi = mid
    return hi


def radial_row(rs, z: float):
    """All kernel integrals for one z and many r values, sharing one rule.

    Returns (p, p_r, p_z, p_rr, p_rz/r, p_zz) as arrays over ``rs``.  The
    rule resolves both the cos(lam z) oscillation and the steepest
    exponential decay in the batch, then reuses the (r, lam) exponential
    matrix for all six weighted sums.
    """
    rs = np.asarray(rs, dtype=float)
    if rs.size == 0:
        empty = np.empty(0)
        return (empty,) * 6
    if np.any(rs < 0.0) or abs(z) > Z_RANGE_LIMIT:
        raise KernelRangeError("radial_row arguments out of range")
    decay_max = 1.0 + 0.25 * float(np.max(rs)) ** 2
    lam_max = _lambda_cutoff(float(np.min(rs)))
    width = min(0.35, 3.0 / decay_max)
    if z != 0.0:
        width = min(width, 0.5 * math.pi / abs(z))
    lam, w = _panel_rule(lam_max, width)

    su = _sinh_ratio(lam)
    lc = _lam_coth(lam)
    G = np.exp(-0.25 * np.outer(rs * rs, lc)) * su[None, :]
    cz = np.cos(lam * z)
    sz = np.sin(lam * z)

    m0 = G @ (w * cz)
    m1 = G @ (w * cz * lc)
    m2 = G @ (w * cz * lc * lc)
    m3 = G @ (w * sz * lam)
    m4 = G @ (w * sz * lam * lc)
    m5 = G @ (w * cz * lam * lam)

    pv = m0 / FOUR_PI_SQ
    pr = -0.5 * rs * m1 / FOUR_PI_SQ
    pz = -m3 / FOUR_PI_SQ
    prr = (0.25 * rs * rs * m2 - 0.5 * m1) / FOUR_PI_SQ
    prz_over_r = 0.5 * m4 / FOUR_PI_SQ
    pzz = -m5 / FOUR_PI_SQ
    return pv, pr, pz, prr, prz_over_r, pzz


def p1_many(r, z, chunk: int = 2048) -> np.ndarray:
    """Vectorized p1 over paired arrays (fixed-panel route).

    Agrees with the adaptive scalar :func:`p1` to the quadrature
    tolerance; the adaptive route stays the oracle in tests.
    """
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    shape = np.broadcast(r, z).shape
    r = np.broadcast_to(r, shape).ravel()
    z = np.broadcast_to(z, shape).ravel()
    if r.size and (np.min(r) < 0.0 or np.max(np.abs(z)) > Z_RANGE_LIMIT):
        raise KernelRangeError("p1_many arguments out of range")
    out = np.empty(r.size)
    for lo in range(0, r.size, chunk):
        hi = min(lo + chunk, r.size)
        rc, zc = r[lo:hi], z[lo:hi]
        decay_max = 1.0 + 0.25 * float(np.max(rc)) ** 2
        zmax = float(np.max(np.abs(zc)))
        width = min(0.35, 3.0 / decay_max)
        if zmax > 0.0:
            width = min(width, 0.5 * math.pi / zmax)
        lam, w = _panel_rule(_lambda_cutoff(float(np.min(rc))), width)
        G = np.exp(-0.25 * np.outer(rc * rc, _lam_coth(lam))) * _sinh_ratio(lam)[None, :]
        out[lo:hi] = (G * np.cos(np.outer(zc, lam))) @ w / FOUR_PI_SQ
    return out.reshape(shape)


def log_grad_many(r, z, chunk: int = 2048):
    """Vectorized (alpha, b) = ((d_r log p1)/r, d_z log p1) over paired arrays.

    The normalization cancels in the ratios, and alpha is computed from
    the r-stripped integrand so the axis needs no special case.  This is
    what integration-by-parts gradient routes want at quadrature nodes.
    """
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    shape = np.broadcast(r, z).shape
    r = np.broadcast_to(r, shape).ravel()
    z = np.broadcast_to(z, shape).ravel()
    if r.size and (np.min(r) < 0.0 or np.max(np.abs(z)) > Z_RANGE_LIMIT):
        raise KernelRangeError("log_grad_many arguments out of range")
    alpha = np.empty(r.size)
    b = np.empty(r.size)
    for lo in range(0, r.size, chunk):
        hi = min(lo + chunk, r.size)
        rc, zc = r[lo:hi], z[lo:hi]
        decay_max = 1.0 + 0.25 * float(np.max(rc)) ** 2
        zmax = float(np.max(np.abs(zc)))
        width = min(0.35, 3.0 / decay_max)
        if zmax > 0.0:
            width = min(width, 0.5 * math.pi / zmax)
        lam, w = _panel_rule(_lambda_cutoff(float(np.min(rc))), width)
        lc = _lam_coth(lam)
        G = np.exp(-0.25 * np.outer(rc * rc, lc)) * _sinh_ratio(lam)[None, :]
        Gc = G * np.cos(np.outer(zc, lam))
        m0 = Gc @ w
        m1 = Gc @ (w * lc)
        m3 = (G * np.sin(np.outer(zc, lam))) @ (w * lam)
        alpha[lo:hi] = -0.5 * m1 / m0
        b[lo:hi] = -m3 / m0
    return alpha.reshape(shape), b.reshape(shape)


# ---------------------------------------------------------------------------
# log-derivatives of h = p1


@dataclass(frozen=True)
class RadialLogDerivatives:
    """First and second partials of log p1 in radial form.

    a = d_r log p1 and b = d_z log p1; alpha = a/r extends evenly across
    the axis.  alpha_r, alpha_z, b_r, b_z are the partials needed for
    gradients of fields built from x alpha + (y/2) b.
    """

    a: float
    b: float
    alpha: float
    alpha_r: float
    alpha_z: float
    b_r: float
    b_z: float


_AXIS_EPS = 1e-8


def log_derivatives(r: float, z: float) -> RadialLogDerivatives:
    """Exact log-derivative bundle at one point.

    Uses the fixed-panel row rule, whose accuracy is relative to the
    integrand envelope (so it does not degrade at large r the way an
    absolute-tolerance adaptive pass does).
    """
    if not (r >= 0.0) or abs(z) > Z_RANGE_LIMIT:
        raise KernelRangeError("log_derivatives arguments out of range")
    pv_a, dr_a, dz_a, drr_a, drz_over_r_a, dzz_a = radial_row(np.array([r]), float(z))
    pv = float(pv_a[0])
    dr = float(dr_a[0])
    dz = float(dz_a[0])
    drr = float(drr_a[0])
    drz_over_r = float(drz_over_r_a[0])
    dzz = float(dzz_a[0])
    a = dr / pv
    b = dz / pv
    l_rr = drr / pv - a * a
    l_zz = dzz / pv - b * b
    # a = r alpha, so L_rz/r = (p_rz/r)/p - alpha b at every r including 0
    if r > _AXIS_EPS:
        alpha = a / r
        alpha_z = drz_over_r / pv - alpha * b
        alpha_r = (l_rr - alpha) / r
        b_r = r * alpha_z
    else:
        # even/odd structure in r pins the axis limits
        alpha = l_rr
        alpha_z = drz_over_r / pv - alpha * b
        alpha_r = 0.0
        b_r = 0.0
    return RadialLogDerivatives(a, b, alpha, alpha_r, alpha_z, b_r, l_zz)


def _scalar_loop(fn, *arrays):
    arrays = [np.asarray(a, dtype=float) for a in arrays]
    shape = np.broadcast(*arrays).shape
    flat = [np.broadcast_to(a, shape).ravel() for a in arrays]
    out = np.empty(flat[0].size)
    for i in range(flat[0].size):
        out[i] = fn(*(a[i] for a in flat))
    return out.reshape(shape) if shape else float(out[0])


def log_h_field(cfg: KernelConfig | None = None) -> ScalarField:
    """log h as a ScalarField with the exact frame gradient.

    X log h = x alpha - (y/2) b, Y log h = y alpha + (x/2) b,
    Z log h = b, through the chain rule in (r, z).
    """

    def ev(x, y, z):
        def one(xx, yy, zz):
            return math.log(p1(math.hypot(xx, yy), zz, cfg))

        return _scalar_loop(one, x, y, z)

    def grad(x, y, z):
        def one(xx, yy, zz):
            d = log_derivatives(math.hypot(xx, yy), zz)
            return (
                xx * d.alpha - 0.5 * yy * d.b,
                yy * d.alpha + 0.5 * xx * d.b,
                d.b,
            )

        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return one(float(x), float(y), float(z))
        gx = _scalar_loop(lambda a, b_, c: one(a, b_, c)[0], x, y, z)
        gy = _scalar_loop(lambda a, b_, c: one(a, b_, c)[1], x, y, z)
        gz = _scalar_loop(lambda a, b_, c: one(a, b_, c)[2], x, y, z)
        return gx, gy, gz

    return ScalarField(eval=ev, analytic_gradient=grad, name="log_h")


# ---------------------------------------------------------------------------
# interpolation tables with asymptotic fill


_TABLE_R_MAX = 16.0
_TABLE_Z_MAX = 26.0
_TABLE_DR = 0.1
_TABLE_DZ = 0.2
_PAD = 15
_PAD_TOP = 6  # mirrored rows/columns so the splines see the even/odd symmetry


def _log_h_asymptote(r, z):
    """Cut-locus stand-in for log p1 beyond the cancellation budget.

    Near the axis the distance has a cone d ~ 2 sqrt(pi z) - r, but the
    kernel smooths it by averaging over the cut circle; a Bessel factor
    reproduces that rounding:

        log p1 ~ -pi z + log I0(d0 r / 2) - (1/2) log(1 + norm d0),
        d0 = 2 sqrt(pi z).

    On the axis this matches the closed form 1/(16 cosh^2(pi z/2)) up to
    the algebraic factor.  Differentiating the raw -d^2/4 instead would
    inject a spurious 1/r^2 into alpha_r at the cone.
    """
    from scipy.special import i0e

    r = np.asarray(r, dtype=float)
    z = np.abs(np.asarray(z, dtype=float))
    d0 = 2.0 * np.sqrt(np.pi * z)
    w = 0.5 * d0 * r
    norm = ((r * r) ** 2 + z * z) ** 0.25
    # log I0(w) = log i0e(w) + w, stable for large w
    return -np.pi * z + np.log(i0e(w)) + w - 0.5 * np.log1p(norm * d0)


def _asym_bundle(r, z):
    """(alpha, b, alpha_r, alpha_z, b_r, b_z) of the asymptote by FD.

    The asymptote is smooth in r (no cone), so plain central differences
    are safe, including near the axis.
    """
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    hr, hz = 1e-3, 1e-3
    rr = np.maximum(r, 0.05)  # alpha = a/r needs r bounded away from 0

    def a_of(rv, zv):
        return (_log_h_asymptote(rv + hr, zv) - _log_h_asymptote(rv - hr, zv)) / (2 * hr)

    def b_of(rv, zv):
        return (_log_h_asymptote(rv, zv + hz) - _log_h_asymptote(rv, zv - hz)) / (2 * hz)

    a = a_of(rr, z)
    b = b_of(rr, z)
    alpha = a / rr
    alpha_r = (a_of(rr + hr, z) / (rr + hr) - a_of(rr - hr, z) / (rr - hr)) / (2 * hr)
    alpha_z = (a_of(rr, z + hz) / rr - a_of(rr, z - hz) / rr) / (2 * hz)
    b_r = (b_of(rr + hr, z) - b_of(rr - hr, z)) / (2 * hr)
    b_z = (b_of(rr, z + hz) - b_of(rr, z - hz)) / (2 * hz)
    on_axis = r < 1e-9  # odd components vanish there
    return (
        alpha,
        b,
        np.where(on_axis, 0.0, alpha_r),
        alpha_z,
        np.where(on_axis, 0.0, b_r),
        b_z,
    )


def _bspline_basis(q, t, delta):
    """Interval offsets and the four uniform cubic B-spline weights at q.

    Valid while every query sits at least three uniform cells inside the
    knot vector, which the table padding guarantees after clamping.
    """
    # t[4 + m] = t[4] + m delta on the uniform run; a one-cell float
    # wobble at boundaries is harmless because adjacent cubic pieces
    # join with C^2 continuity
    k = np.floor((q - t[4]) * (1.0 / delta)).astype(np.intp) + 4
    np.clip(k, 4, t.size - 5, out=k)
    u = (q - t[k]) / delta
    v = 1.0 - u
    u2 = u * u
    w0 = v * v * v / 6.0
    w1 = (3.0 * u2 * (u - 2.0) + 4.0) / 6.0
    w3 = u2 * u / 6.0
    w2 = 1.0 - w0 - w1 - w3
    return k - 3, np.stack([w0, w1, w2, w3])


def _tensor_eval(coef_rows, base, offsets, w16, chunk: int = 16384):
    """Bicubic tensor sums over the 16-neighbor stencil, chunked.

    coef_rows is (ncoef, ntables) row-major so one fancy gather pulls a
    point's whole stencil as contiguous short rows; that is what makes
    bulk table evaluation cheap.
    """
    n = base.size
    out = np.empty((n, coef_rows.shape[1]))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        stencil = coef_rows[base[lo:hi, None] + offsets[None, :]]
        out[lo:hi] = (w16[:, lo:hi].T[:, None, :] @ stencil)[:, 0, :]
    return out


class LogHSplineTables:
    """Bivariate splines of the log-derivative bundle over (r, z >= 0).

    Values inside the cancellation budget come from the panel quadrature;
    outside they come from the asymptote, keeping the spline smooth where
    nested translations occasionally land with negligible weight.  Parity
    in z (and evenness in r) is applied at evaluation time; mirrored
    padding below the axes and an asymptote strip above the clamp box
    keep every query inside the uniform-knot region, so evaluation runs
    through a vectorized B-spline basis instead of per-point fitpack
    calls (bulk nested quadratures hit these tables hard).
    """

    _KEYS = ("alpha", "b", "alpha_r", "alpha_z", "b_r", "b_z")

    def __init__(self):
        from scipy.interpolate import RectBivariateSpline

        nr = int(round(_TABLE_R_MAX / _TABLE_DR)) + 1 + _PAD_TOP
        nz = int(round(_TABLE_Z_MAX / _TABLE_DZ)) + 1 + _PAD_TOP
        rs = np.arange(nr) * _TABLE_DR
        zs = np.arange(nz) * _TABLE_DZ

        d = cc_distance_many(rs[:, None], np.zeros((nr, 1)), zs[None, :])
        cancel = 0.25 * (d * d - rs[:, None] ** 2)
        safe = cancel <= CANCEL_BUDGET

        tables = {key: np.empty((nr, nz)) for key in self._KEYS}

        for j, z in enumerate(zs):
            mask = safe[:, j]
            if np.any(mask):
                rj = rs[mask]
                pv, pr, pz, prr, przr, pzz = radial_row(rj, float(z))
                a = pr / pv
                b = pz / pv
                l_rr = prr / pv - a * a
                on_axis = rj <= _AXIS_EPS
                r_safe = np.where(on_axis, 1.0, rj)
                alpha = np.where(on_axis, l_rr, a / r_safe)
                l_rz_over_r = przr / pv - alpha * b
                alpha_r = np.where(on_axis, 0.0, (l_rr - alpha) / r_safe)
                tables["alpha"][mask, j] = alpha
                tables["b"][mask, j] = b
                tables["alpha_r"][mask, j] = alpha_r
                tables["alpha_z"][mask, j] = l_rz_over_r
                tables["b_r"][mask, j] = np.where(on_axis, 0.0, rj * l_rz_over_r)
                tables["b_z"][mask, j] = pzz / pv - b * b
            if np.any(~mask):
                rj = rs[~mask]
                vals = _asym_bundle(rj, np.full(rj.shape, z))
                for key, v in zip(self._KEYS, vals):
                    tables[key][~mask, j] = v

        # parity of each table under r -> -r and z -> -z
        parity = {
            "alpha": (1, 1),
            "b": (1, -1),
            "alpha_r": (-1, 1),
            "alpha_z": (1, -1),
            "b_r": (-1, -1),
            "b_z": (1, 1),
        }
        r_ext = np.concatenate([-rs[1 : _PAD + 1][::-1], rs])
        z_ext = np.concatenate([-zs[1 : _PAD + 1][::-1], zs])
        coef = []
        tx = ty = None
        for key in self._KEYS:
            grid = tables[key]
            pr_, pz_ = parity[key]
            top = np.concatenate([pz_ * grid[:, 1 : _PAD + 1][:, ::-1], grid], axis=1)
            full = np.concatenate([pr_ * top[1 : _PAD + 1][::-1], top], axis=0)
            sp = RectBivariateSpline(r_ext, z_ext, full, kx=3, ky=3)
            tx, ty = sp.get_knots()
            coef.append(sp.get_coeffs().reshape(tx.size - 4, ty.size - 4))
        # fitpack drops the 2nd and 2nd-to-last data sites, so only the
        # run t[4:-4] is uniform; clamped queries never leave it
        for t in (tx, ty):
            inner = np.diff(t[4:-4])
            if np.ptp(inner) > 1e-9 * inner[0]:
                raise RuntimeError("table knots are not uniform; fast basis invalid")
        self._tx = tx
        self._ty = ty
        nyc = ty.size - 4
        self._coef_rows = np.ascontiguousarray(np.stack(coef).reshape(6, -1).T)
        self._offsets = (np.arange(4)[:, None] * nyc + np.arange(4)[None, :]).ravel()
        self._nyc = nyc
        self._parity = parity

    def _stencil(self, r, z):
        kx, wx = _bspline_basis(np.minimum(r, _TABLE_R_MAX), self._tx, _TABLE_DR)
        kz, wz = _bspline_basis(np.minimum(np.abs(z), _TABLE_Z_MAX), self._ty, _TABLE_DZ)
        w16 = (wx[:, None, :] * wz[None, :, :]).reshape(16, -1)
        return kx * self._nyc + kz, w16

    def _eval_block(self, r, z):
        """(n, 6) raw table values at (r, |z|), before parity signs."""
        base, w16 = self._stencil(r, z)
        return _tensor_eval(self._coef_rows, base, self._offsets, w16)

    def eval(self, key: str, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        shape = np.broadcast(r, z).shape
        r = np.broadcast_to(r, shape).ravel()
        z = np.broadcast_to(z, shape).ravel()
        out = self._eval_block(r, z)[:, self._KEYS.index(key)]
        if self._parity[key][1] == -1:
            out = out * np.where(z < 0.0, -1.0, 1.0)
        return out.reshape(shape) if shape else float(out[0])

    def bundle(self, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        shape = np.broadcast(r, z).shape
        r = np.broadcast_to(r, shape).ravel()
        z = np.broadcast_to(z, shape).ravel()
        vals = self._eval_block(r, z)
        sign = np.where(z < 0.0, -1.0, 1.0)
        out = []
        for i, key in enumerate(self._KEYS):
            v = vals[:, i] * sign if self._parity[key][1] == -1 else vals[:, i]
            out.append(v.reshape(shape) if shape else float(v[0]))
        return tuple(out)


@lru_cache(maxsize=1)
def get_spline_tables() -> LogHSplineTables:
    return LogHSplineTables()


def _fstar_pieces(x, y, z, bundle):
    alpha, b, alpha_r, alpha_z, b_r, b_z = bundle
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    inv_r = np.where(r > _AXIS_EPS, 1.0 / np.where(r > _AXIS_EPS, r, 1.0), 0.0)
    cx = x * inv_r
    cy = y * inv_r
    val = x * alpha + 0.5 * y * b
    dx = alpha + x * cx * alpha_r + 0.5 * y * cx * b_r
    dy = x * cy * alpha_r + 0.5 * b + 0.5 * y * cy * b_r
    dz = x * alpha_z + 0.5 * y * b_z
    gx = dx - 0.5 * y * dz
    gy = dy + 0.5 * x * dz
    return val, gx, gy, dz


def xhat_log_h_field(method: str = "exact") -> ScalarField:
    """f* = Xhat(log h) = x alpha(r,z) + (y/2) b(r,z) with frame gradient.

    method "exact" runs full quadrature per point; "spline" uses the
    cached tables and vectorizes (for bulk nested evaluation).
    """
    if method == "spline":
        tabs = get_spline_tables()

        def ev(x, y, z):
            r = np.hypot(np.asarray(x, float), np.asarray(y, float))
            val, _, _, _ = _fstar_pieces(x, y, z, tabs.bundle(r, z))
            return val

        def grad(x, y, z):
            r = np.hypot(np.asarray(x, float), np.asarray(y, float))
            _, gx, gy, gz = _fstar_pieces(x, y, z, tabs.bundle(r, z))
            return gx, gy, gz

        return ScalarField(eval=ev, analytic_gradient=grad, name="xhat_log_h[spline]")

    if method != "exact":
        raise ValueError("method must be 'exact' or 'spline'")

    def ev_exact(x, y, z):
        def one(xx, yy, zz):
            d = log_derivatives(math.hypot(xx, yy), zz)
            return xx * d.alpha + 0.5 * yy * d.b

        return _scalar_loop(one, x, y, z)

    def grad_exact(x, y, z):
        def one(xx, yy, zz):
            d = log_derivatives(math.hypot(xx, yy), zz)
            bundle = (d.alpha, d.b, d.alpha_r, d.alpha_z, d.b_r, d.b_z)
            _, gx, gy, gz = _fstar_pieces(xx, yy, zz, bundle)
            return float(gx), float(gy), float(gz)

        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return one(float(x), float(y), float(z))
        gx = _scalar_loop(lambda a, b_, c: one(a, b_, c)[0], x, y, z)
        gy = _scalar_loop(lambda a, b_, c: one(a, b_, c)[1], x, y, z)
        gz = _scalar_loop(lambda a, b_, c: one(a, b_, c)[2], x, y, z)
        return gx, gy, gz

    return ScalarField(eval=ev_exact, analytic_gradient=grad_exact, name="xhat_log_h")


# ---------------------------------------------------------------------------
# complex-shifted kernels


def p1_complex_shift(r: float, z: float, cfg: KernelConfig | None = None) -> ComplexKernelValue:
    """p1(r, z + 2i) by direct quadrature of the shifted integrand.

    Folding the full-line integral to [0, inf) gives cosh/sinh factors;
    the net decay 1 + r^2/4 - 2 forces r > 2.
    """
    _check_range(r, z)
    if r <= 2.0:
        raise ValueError(
            "shifted integral diverges for r <= 2; use p1_star_shifted"
        )
    spec = _osc_spec(cfg, z)
    decay = 0.25 * r * r - 1.0

    def f_re(lam):
        return np.cosh(2.0 * lam) * np.cos(lam * z) * _g_factor(lam, r)

    def f_im(lam):
        return -np.sinh(2.0 * lam) * np.sin(lam * z) * _g_factor(lam, r)

    re = integrate_decaying(f_re, decay, spec) / FOUR_PI_SQ
    im = integrate_decaying(f_im, decay, spec) / FOUR_PI_SQ
    return ComplexKernelValue(re, im, "shifted-integral")


def _pole_bracket(lam, r):
    """G(lam, r) - 2 lam e^{-lam(1+r^2/4)} without subtractive cancellation.

    With u = e^{-2 lam} and g = -(r^2/2) lam u/(1-u):
    bracket = 2 lam e^{-lam(1+r^2/4)} (expm1(g) + u)/(1-u).
    """
    lam = np.asarray(lam, dtype=float)
    u = np.exp(-2.0 * lam)
    one_minus_u = -np.expm1(-2.0 * lam)
    safe = np.where(one_minus_u > 0.0, one_minus_u, 1.0)
    g = -0.5 * r * r * lam * u / safe
    frac = (np.expm1(g) + u) / safe
    out = 2.0 * lam * np.exp(-lam * (1.0 + 0.25 * r * r)) * frac
    # removable point: bracket -> e^{-r^2/4} as lam -> 0
    return np.where(one_minus_u > 0.0, out, math.exp(-0.25 * r * r))


def p1_star_shifted(r: float, z: float, cfg: KernelConfig | None = None) -> ComplexKernelValue:
    """p1*(r, z + 2i): pole-subtracted kernel plus the surviving pole.

    q has the leading exponential of the integrand removed, so its
    shifted integral converges for every r > 0; the removed piece
    integrates in closed form to two pole terms, of which only
    1/(4 pi^2 (3 + r^2/4 - i z)^2) belongs to p1*.
    """
    _check_range(r, z)
    if not (r > 0.0):
        raise ValueError("regularized route needs r > 0")
    spec = _osc_spec(cfg, z)
    decay = 1.0 + 0.25 * r * r  # residual e^{-(3+r^2/4)lam} against cosh(2 lam)

    def f_re(lam):
        return np.cosh(2.0 * lam) * np.cos(lam * z) * _pole_bracket(lam, r)

    def f_im(lam):
        return -np.sinh(2.0 * lam) * np.sin(lam * z) * _pole_bracket(lam, r)

    re = integrate_decaying(f_re, decay, spec) / FOUR_PI_SQ
    im = integrate_decaying(f_im, decay, spec) / FOUR_PI_SQ
    pole = 1.0 / (FOUR_PI_SQ * complex(3.0 + 0.25 * r * r, -z) ** 2)
    return ComplexKernelValue(re + pole.real, im + pole.imag, "regularized-plus-pole")


def removed_pole_shifted(r: float, z: float) -> complex:
    """The pole term separating the two routes: 1/(4 pi^2 (r^2/4 - 1 + iz)^2)."""
    return 1.0 / (FOUR_PI_SQ * complex(0.25 * r * r - 1.0, z) ** 2)
