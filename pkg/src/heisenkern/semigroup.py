"""Heat semigroup P_t = e^{tL} applied by quadrature against the kernel.

P_t f(x) = int f(x.y) p_t(y) dy, truncated to the CC ball
d(y) <= domain_radius in the geodesic polar chart; the Gaussian decay
of the kernel keeps the discarded mass small, and every config
certifies 1 - int_{d<=R} p_t <= MASS_DEFICIT_TOL once, at measure
build time.  Points x != 0 reduce to the origin by left-translating f,
so there is a single kernel center.

Everything is pure given a config.  Nested quadratures hand f whole
node arrays (and are free to do so concurrently), so a field's eval
must be reentrant and broadcast over arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np

from .geometry import chart_ball_nodes
from .group import FD_STEP_FIRST, GroupElement, ScalarField, derived_field, _mul_arrays
from .kernel import log_grad_many, p1_many
from .numerics import QuadratureSpec

__all__ = [
    "MASS_DEFICIT_TOL",
    "GRAD_ROUTES",
    "HeatOpConfig",
    "MassDeficitError",
    "HeatMeasure",
    "heat_measure",
    "apply_Pt",
    "apply_Pt_many",
    "variance",
    "grad_Pt_origin",
    "entropy_phi",
    "interpolation_variance",
]

MASS_DEFICIT_TOL = 1e-6
GRAD_ROUTES = ("fd", "hat-transfer", "ibp")

# node tier switches: specs at or above these abs_tols get reduced rules
# meant for the legs of nested double quadratures
_COARSE_ABS_TOL = 1e-6
_NESTED_ABS_TOL = 1e-4

_ORIGIN = GroupElement(0.0, 0.0, 0.0)


class MassDeficitError(ValueError):
    """Truncated-domain kernel mass check failed for a config."""


@dataclass(frozen=True)
class HeatOpConfig:
    """Time, truncation radius and quadrature tier for one P_t.

    ``domain_radius`` defaults to 10 sqrt(t).  The dimensionless radius
    R = domain_radius/sqrt(t) has a working window: below about 8.5 the
    discarded kernel mass exceeds MASS_DEFICIT_TOL (config error), and
    above 25 the chart's z extent R^2/(4 pi) leaves the kernel
    evaluator's range.  ``quad.abs_tol`` >= 1e-6 selects the reduced
    node tier meant for the inner legs of nested quadratures.
    """

    t: float
    domain_radius: Optional[float] = None
    quad: QuadratureSpec = dataclass_field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if not (self.t > 0.0):
            raise ValueError("t must be > 0")
        if self.domain_radius is None:
            object.__setattr__(self, "domain_radius", 10.0 * math.sqrt(self.t))
        if not (self.domain_radius > 0.0):
            raise ValueError("domain_radius must be > 0")


def _node_counts(cfg: HeatOpConfig):
    r1 = cfg.domain_radius / math.sqrt(cfg.t)
    if cfg.quad.abs_tol >= _NESTED_ABS_TOL:
        return max(12, math.ceil(1.6 * r1)), 12, 8
    if cfg.quad.abs_tol >= _COARSE_ABS_TOL:
        return max(16, math.ceil(2.2 * r1)), 16, 10
    return max(24, math.ceil(3.2 * r1)), 24, 16


@dataclass
class HeatMeasure:
    """Chart nodes carrying Lebesgue weights and kernel values.

    ``mu`` = leb_w * kernel is the discrete heat measure; sums against
    it approximate integrals over d <= domain_radius.  The hat-field
    log-gradient arrays used by the integration-by-parts route are
    built lazily on first request and kept.
    """

    cfg: HeatOpConfig
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    leb_w: np.ndarray
    kernel: np.ndarray
    mu: np.ndarray
    deficit: float
    _hat_grad: Optional[tuple] = None

    def hat_log_grad(self):
        """(Xhat log p_t, Yhat log p_t) at the nodes."""
        if self._hat_grad is None:
            st = math.sqrt(self.cfg.t)
            r = np.hypot(self.x, self.y)
            alpha, b = log_grad_many(r / st, self.z / self.cfg.t)
            gx = (self.x * alpha + 0.5 * self.y * b) / self.cfg.t
            gy = (self.y * alpha - 0.5 * self.x * b) / self.cfg.t
            self._hat_grad = (gx, gy)
        return self._hat_grad


_measure_cache: dict = {}


def heat_measure(cfg: HeatOpConfig) -> HeatMeasure:
    """Build (or fetch) the cached measure for ``cfg``, checking its mass.

    Raises :class:`MassDeficitError` when |1 - sum mu| exceeds
    MASS_DEFICIT_TOL; that covers both truncation loss and rule error.
    """
    n_s, n_phi, n_alpha = _node_counts(cfg)
    key = (cfg.t, cfg.domain_radius, n_s, n_phi, n_alpha)
    got = _measure_cache.get(key)
    if got is not None:
        return got
    x, y, z, w = chart_ball_nodes(cfg.domain_radius, n_s=n_s, n_phi=n_phi, n_alpha=n_alpha)
    st = math.sqrt(cfg.t)
    kern = p1_many(np.hypot(x, y) / st, z / cfg.t) / (cfg.t * cfg.t)
    mu = w * kern
    deficit = abs(1.0 - float(np.sum(mu)))
    if deficit > MASS_DEFICIT_TOL:
        raise MassDeficitError(
            f"kernel mass deficit {deficit:.3e} over d <= {cfg.domain_radius:g} "
            f"at t = {cfg.t:g} exceeds {MASS_DEFICIT_TOL:g}"
        )
    measure = HeatMeasure(cfg, x, y, z, w, kern, mu, deficit)
    _measure_cache[key] = measure
    return measure


def _values_at(f: ScalarField, measure: HeatMeasure, x: GroupElement) -> np.ndarray:
    qx, qy, qz = _mul_arrays(x.x, x.y, x.z, measure.x, measure.y, measure.z)
    vals = np.asarray(f.eval(qx, qy, qz), dtype=float)
    return np.broadcast_to(vals, measure.mu.shape)


def apply_Pt(f: ScalarField, cfg: HeatOpConfig, x: GroupElement = _ORIGIN) -> float:
    """P_t f(x) = sum mu_k f(x . y_k)."""
    measure = heat_measure(cfg)
    return float(np.dot(measure.mu, _values_at(f, measure, x)))


def apply_Pt_many(f: ScalarField, cfg: HeatOpConfig, xs, chunk: int = 256) -> np.ndarray:
    """P_t f at many points (rows of ``xs``) against one cached measure."""
    measure = heat_measure(cfg)
    xs = np.asarray(xs, dtype=float).reshape(-1, 3)
    out = np.empty(xs.shape[0])
    for lo in range(0, xs.shape[0], chunk):
        hi = min(lo + chunk, xs.shape[0])
        qx, qy, qz = _mul_arrays(
            xs[lo:hi, 0][:, None], xs[lo:hi, 1][:, None], xs[lo:hi, 2][:, None],
            measure.x[None, :], measure.y[None, :], measure.z[None, :],
        )
        vals = np.broadcast_to(np.asarray(f.eval(qx, qy, qz), dtype=float), qx.shape)
        out[lo:hi] = vals @ measure.mu
    return out


def variance(f: ScalarField, cfg: HeatOpConfig, x: GroupElement = _ORIGIN) -> float:
    """P_t(f^2)(x) - (P_t f(x))^2, as a true probability-measure variance.

    The weights are renormalized to unit mass (they sum to 1 - deficit,
    deficit <= 1e-6), which keeps the result nonnegative by construction
    instead of up-to-the-deficit.
    """
    measure = heat_measure(cfg)
    vals = _values_at(f, measure, x)
    w = measure.mu / np.sum(measure.mu)
    mean = float(np.dot(w, vals))
    return float(np.dot(w, (vals - mean) ** 2))


def _phi_values(phi, arr: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(phi(arr), dtype=float)
        if out.shape == arr.shape:
            return out
    except TypeError:
        pass
    return np.asarray([phi(float(v)) for v in arr], dtype=float)


def entropy_phi(f: ScalarField, cfg: HeatOpConfig, x: GroupElement, phi) -> float:
    """phi-entropy P_t(phi(f))(x) - phi(P_t f(x)), nonnegative by Jensen.

    ``phi`` must be convex on the range of f; leaving its domain
    (non-finite phi values on the ball) raises ValueError.  Weights are
    renormalized as in :func:`variance` so Jensen applies exactly.
    """
    measure = heat_measure(cfg)
    vals = _values_at(f, measure, x)
    w = measure.mu / np.sum(measure.mu)
    mean = float(np.dot(w, vals))
    with np.errstate(all="ignore"):
        try:
            phiv = _phi_values(phi, vals)
            phim = float(phi(mean))
        except ValueError as exc:
            raise ValueError("f leaves the domain of phi on the integration ball") from exc
    if not (np.all(np.isfinite(phiv)) and math.isfinite(phim)):
        raise ValueError("f leaves the domain of phi on the integration ball")
    return float(np.dot(w, phiv)) - phim


def _hat_parts(f: ScalarField):
    """Evaluator for (Xhat f, Yhat f, Zf) on coordinate arrays."""
    if f.analytic_gradient is not None:

        def parts(qx, qy, qz):
            gx, gy, gz = f.analytic_gradient(qx, qy, qz)
            return gx + qy * gz, gy - qx * gz, gz

        return parts

    fxh = derived_field("Xhat", f)
    fyh = derived_field("Yhat", f)
    fzz = derived_field("Z", f)

    def parts(qx, qy, qz):
        return fxh.eval(qx, qy, qz), fyh.eval(qx, qy, qz), fzz.eval(qx, qy, qz)

    return parts


def grad_Pt_origin(f: ScalarField, cfg: HeatOpConfig, route: str = "hat-transfer"):
    """(X P_t f, Y P_t f) at the origin by one of three routes.

    fd            centered differences of apply_Pt along the X and Y
                  integral curves through 0;
    hat-transfer  apply_Pt of the right-invariant derivatives Xhat f,
                  Yhat f (they commute with the convolution);
    ibp           moves the derivative onto the kernel:
                  -sum mu_k f(y_k) (Xhat log p_t)(y_k), likewise Yhat.
    """
    if route == "fd":
        h = FD_STEP_FIRST
        pts = np.array([[h, 0.0, 0.0], [-h, 0.0, 0.0], [0.0, h, 0.0], [0.0, -h, 0.0]])
        v = apply_Pt_many(f, cfg, pts)
        return (v[0] - v[1]) / (2.0 * h), (v[2] - v[3]) / (2.0 * h)
    if route == "hat-transfer":
        return (
            apply_Pt(derived_field("Xhat", f), cfg),
            apply_Pt(derived_field("Yhat", f), cfg),
        )
    if route == "ibp":
        measure = heat_measure(cfg)
        gx, gy = measure.hat_log_grad()
        vals = _values_at(f, measure, _ORIGIN)
        return (
            -float(np.dot(measure.mu, vals * gx)),
            -float(np.dot(measure.mu, vals * gy)),
        )
    raise ValueError(f"unknown route {route!r}; expected one of {GRAD_ROUTES}")


def _grad_inner_at(f: ScalarField, cfg_in: HeatOpConfig, outer: HeatMeasure, chunk: int = 512):
    """X and Y frame components of grad P_{cfg_in.t} f at the outer nodes.

    Differentiating P f(w) = sum mu_k f(w . y_k) in w along the
    left-invariant frame lands on hat-fields of f at the product point:

        X P f(w) = sum mu_k (Xhat f - w_2 Zf)(w . y_k)
        Y P f(w) = sum mu_k (Yhat f + w_1 Zf)(w . y_k)
    """
    inner = heat_measure(cfg_in)
    parts = _hat_parts(f)
    n = outer.x.size
    outx = np.empty(n)
    outy = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        wx = outer.x[lo:hi][:, None]
        wy = outer.y[lo:hi][:, None]
        wz = outer.z[lo:hi][:, None]
        qx, qy, qz = _mul_arrays(wx, wy, wz, inner.x[None, :], inner.y[None, :], inner.z[None, :])
        hx, hy, hz = parts(qx, qy, qz)
        outx[lo:hi] = (hx - wy * hz) @ inner.mu
        outy[lo:hi] = (hy + wx * hz) @ inner.mu
    return outx, outy


_S_NODES, _S_WEIGHTS = np.polynomial.legendre.leggauss(16)


def interpolation_variance(f: ScalarField, cfg: HeatOpConfig) -> float:
    """Variance of f under P_t rebuilt from 2 int_0^t P_s Gamma(P_{t-s}f) ds.

    The s integral uses a fixed 16-point Gauss rule on (0, t); its open
    nodes keep the inner operator away from the degenerate s = t
    endpoint, where P_{t-s} collapses to the identity.  Both legs of
    the nested quadrature run at the reduced node tier (the integrand
    is heat-regularized in s); agreement with :func:`variance` is the
    accuracy check.
    """
    t = cfg.t
    r1 = cfg.domain_radius / math.sqrt(t)
    coarse = QuadratureSpec(abs_tol=max(cfg.quad.abs_tol, _COARSE_ABS_TOL))
    total = 0.0
    for sn, sw in zip(_S_NODES, _S_WEIGHTS):
        s = 0.5 * t * (sn + 1.0)
        tau = t - s
        outer = heat_measure(HeatOpConfig(t=s, domain_radius=r1 * math.sqrt(s), quad=coarse))
        gx, gy = _grad_inner_at(f, HeatOpConfig(t=tau, domain_radius=r1 * math.sqrt(tau), quad=coarse), outer)
        total += 0.5 * t * sw * float(np.dot(outer.mu, gx * gx + gy * gy))
    return 2.0 * total
