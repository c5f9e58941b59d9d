"""Inequality verification and constant estimation for the heat semigroup.

Checks run over seeded test-function families (see :mod:`.family`) and
come back as :class:`InequalityReport` rows with a uniform pass rule:
lhs <= rhs * (1 + slack) + a tiny absolute floor, slack = 1e-6 plus the
check's quadrature budget.  Gradient-bound constants are adaptive lower
bounds, never assumptions: a violation is treated as information about
the constant, and :func:`run_inequality_suite` re-verifies after one
update pass.

Survey-style checks (the ray inequality, the (1,1) Poincare on a ball)
have no a-priori constant; they report the empirical sup ratio and a
grid-stability verdict instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy import linalg, optimize
from scipy.special import ndtri

from .family import TestFunctionFamily, build_family
from .geometry import cc_distance_many, chart_ball_nodes, jacobian_A
from .group import GroupElement, ScalarField, gamma as gamma_at, gamma2 as gamma2_at, poly_field
from .kernel import CANCEL_BUDGET, log_grad_many, p1_many, p1_star_shifted
from .mc import sample_kolmogorov
from .numerics import QuadratureSpec
from .semigroup import HeatOpConfig, grad_Pt_origin, heat_measure

__all__ = [
    "SLACK_BASE",
    "QUAD_BUDGET",
    "FAMILY_QUAD_BUDGET",
    "ABS_FLOOR",
    "InequalityReport",
    "ConstantEstimate",
    "CLowerWitness",
    "RaySurvey",
    "estimate_A",
    "check_kernel_identities",
    "check_driver_melcher",
    "estimate_C_lower",
    "c_lower_detail",
    "c_ratio",
    "check_reverse_poincare",
    "check_phi_suite",
    "check_cheeger_bobkov",
    "check_ray_inequality",
    "check_local_11_poincare",
    "check_commutation",
    "commutation_default_bumps",
    "demonstrate_gamma2_unbounded",
    "check_kolmogorov_counterexample",
    "run_inequality_suite",
    "constants_estimate",
]

SLACK_BASE = 1e-6
# relative budget charged to chart-measure quadratures (global members,
# kernel identities); checks never fail on noise below their budget
QUAD_BUDGET = 1e-5
# budget for per-member panel quadratures over compactly supported
# members: the kinked integrands (|f - m|, sqrt(Gamma)) converge
# algebraically and the worst observed cross-tier movement is 2.8e-3
FAMILY_QUAD_BUDGET = 4e-3
ABS_FLOOR = 1e-12
SQRT2 = math.sqrt(2.0)

_ORIGIN = GroupElement(0.0, 0.0, 0.0)
_IDENTITY_TOL = 5e-3


@dataclass(frozen=True)
class InequalityReport:
    """One checked inequality; ``passed`` serializes under the key "pass"."""

    check: str
    function: str
    lhs: float
    rhs: float
    ratio: float
    constant: float
    passed: bool
    error_budget: float
    note: str = ""

    def as_dict(self) -> dict:
        d = {
            "check": self.check,
            "function": self.function,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "constant": self.constant,
            "pass": self.passed,
            "error_budget": self.error_budget,
        }
        if self.note:
            d["note"] = self.note
        return d


def _report(check, function, lhs, rhs, constant, budget=QUAD_BUDGET, note="") -> InequalityReport:
    lhs = float(lhs)
    rhs = float(rhs)
    if rhs != 0.0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0.0 else math.inf
    slack = SLACK_BASE + budget
    passed = lhs <= rhs * (1.0 + slack) + ABS_FLOOR
    return InequalityReport(check, function, lhs, rhs, ratio, float(constant),
                            bool(passed), budget, note)


@dataclass(frozen=True)
class ConstantEstimate:
    """Best lower bounds found plus the working gradient-bound constant."""

    A: float
    C1_lower: float
    C2_lower: float
    C1_working: float = dataclass_field(default=0.0)

    def __post_init__(self):
        if not (self.A >= 0.0):
            raise ValueError("A must be >= 0")
        if self.C1_working == 0.0:
            object.__setattr__(self, "C1_working", max(self.C1_lower, SQRT2))


def _harness_cfg(t: float, abs_tol: float) -> HeatOpConfig:
    return HeatOpConfig(t=float(t), quad=QuadratureSpec(abs_tol=float(abs_tol)))


# ---------------------------------------------------------------------------
# constant A and the section-3 kernel identities


def _gamma_log_h_nodes(measure):
    r = np.hypot(measure.x, measure.y)
    alpha, b = log_grad_many(r, measure.z)
    return r * r * (alpha * alpha + 0.25 * b * b)


def estimate_A(abs_tol: float = 1e-6, domain_radius: float = 10.0) -> float:
    """A = int r Gamma(log h, log h) h dx over d <= domain_radius at t = 1.

    r is the Euclidean norm of the horizontal projection.  For radial g,
    Gamma(g) = g_r^2 + (r^2/4) g_z^2, assembled from the vectorized
    log-derivative bundle.  Halving ``abs_tol`` crosses into the denser
    node tier, which is the reproducibility control.
    """
    cfg = HeatOpConfig(t=1.0, domain_radius=float(domain_radius),
                       quad=QuadratureSpec(abs_tol=float(abs_tol)))
    m = heat_measure(cfg)
    r = np.hypot(m.x, m.y)
    return float(np.sum(m.mu * r * _gamma_log_h_nodes(m)))


def check_kernel_identities(abs_tol: float = 1e-6) -> list:
    """<Gamma(log h) h> = 2, <(Xhat log h)^2 h> = 1, <Xhat Yhat cross> = 0.

    Encoded as |measured - target| <= 5e-3 so the uniform pass rule
    applies; the measured value rides along in the note.
    """
    m = heat_measure(_harness_cfg(1.0, abs_tol))
    gam = float(np.sum(m.mu * _gamma_log_h_nodes(m)))
    gx, gy = m.hat_log_grad()
    sq = float(np.sum(m.mu * gx * gx))
    cross = float(np.sum(m.mu * gx * gy))
    rows = []
    for check, value, target in (
        ("identity-gamma-logh", gam, 2.0),
        ("identity-xhat-sq", sq, 1.0),
        ("identity-xhat-yhat", cross, 0.0),
    ):
        rows.append(_report(check, "log h", abs(value - target), _IDENTITY_TOL,
                            target, budget=0.0, note=f"measured {value:.8f}"))
    return rows


# ---------------------------------------------------------------------------
# fast kernel evaluation on a fixed window
#
# The family quadratures need p_t at millions of scattered points; the
# panel-by-panel integrals would be dominated by kernel cost with the
# direct oscillatory route.  log p1 is smooth on the window r <= 8,
# |z| <= 9 (all panel and shifted-panel points at t = 1 land inside),
# so a one-time bicubic table serves values at 2e-7 relative accuracy
# where the kernel is above 1e-6, degrading only where the weight
# contribution is negligible.  Out-of-window points fall back to the
# direct evaluator.

_P1TAB_R = 8.0
_P1TAB_Z = 9.0
_P1TAB_STEP = 0.025
_P1TAB = None


def _p1_table():
    global _P1TAB
    if _P1TAB is None:
        from scipy.interpolate import RectBivariateSpline

        rg = np.arange(0.0, _P1TAB_R + _P1TAB_STEP, _P1TAB_STEP)
        zg = np.arange(0.0, _P1TAB_Z + _P1TAB_STEP, _P1TAB_STEP)
        # z-major order keeps low-|z| chunks on wide integration panels
        Z, R = np.meshgrid(zg, rg, indexing="ij")
        vals = p1_many(R.ravel(), Z.ravel()).reshape(len(zg), len(rg))
        _P1TAB = RectBivariateSpline(rg, zg, np.log(vals).T, kx=3, ky=3, s=0)
    return _P1TAB


def _p1_window(r, z):
    r = np.asarray(r, dtype=float).ravel()
    z = np.abs(np.asarray(z, dtype=float)).ravel()
    inside = (r <= _P1TAB_R) & (z <= _P1TAB_Z)
    out = np.empty(r.shape)
    if np.any(inside):
        out[inside] = np.exp(_p1_table().ev(r[inside], z[inside]))
    if not np.all(inside):
        out[~inside] = p1_many(r[~inside], z[~inside])
    return out


def _pt_density(x, y, z, t: float):
    """Heat kernel density p_t at lab points via the parabolic dilation."""
    st = math.sqrt(t)
    return _p1_window(np.hypot(x, y) / st, np.asarray(z, float) / t) / (t * t)


# ---------------------------------------------------------------------------
# per-member quadrature contexts
#
# Compact members integrate over their own mollifier atoms in
# ellipsoidal coordinates (q = sigma^2, latitude, longitude), which
# confines the mollifier's edge non-analyticity to the 1-d sigma
# direction.  The leftover kernel mass becomes an explicit outside
# atom where the member vanishes identically, so every expectation is
# against an exactly unit-mass measure and Jensen-type steps in the
# checks hold without rounding caveats.  Members of polynomial growth
# use the global chart measure.

# (n_sigma, n_latitude, n_longitude) per atom kind and tier; trig
# modulation needs the extra angular resolution
_PANEL_COUNTS = {
    ("bump", "coarse"): (22, 12, 24),
    ("trig", "coarse"): (28, 16, 32),
    ("bump", "fine"): (28, 16, 32),
    ("trig", "fine"): (36, 20, 44),
}

_ATOM_CACHE: dict = {}


def _panel_tier(abs_tol: float) -> str:
    return "coarse" if abs_tol >= 1e-6 else "fine"


def _gl(lo: float, hi: float, n: int):
    nodes, wts = np.polynomial.legendre.leggauss(int(n))
    return 0.5 * (hi - lo) * (nodes + 1.0) + lo, 0.5 * (hi - lo) * wts


def _atom_panel(atom: tuple, kind: str, t: float, tier: str):
    """(x, y, z, leb, mu) for one mollifier atom; cached, shared by combos."""
    key = (atom, kind, float(t), tier)
    got = _ATOM_CACHE.get(key)
    if got is not None:
        return got
    (cx, cy, cz), w, v = atom
    ns, nf, nt = _PANEL_COUNTS[(kind, tier)]
    S, WS = _gl(0.0, 1.0, ns)
    F, WF = _gl(-0.5 * math.pi, 0.5 * math.pi, nf)
    TH = np.arange(nt) * (2.0 * math.pi / nt)
    Sg, Fg, Tg = np.meshgrid(S, F, TH, indexing="ij")
    rho = w * Sg * np.cos(Fg)
    g1 = rho * np.cos(Tg)
    g2 = rho * np.sin(Tg)
    g3 = v * Sg * np.sin(Fg)
    # volume element w^2 v sigma^2 cos(lat); longitude is trapezoid
    leb = ((w * w * v) * (Sg * Sg * np.cos(Fg))
           * (WS[:, None, None] * WF[None, :, None] * (2.0 * math.pi / nt)))
    x = cx + g1.ravel()
    y = cy + g2.ravel()
    z = cz + g3.ravel() - 0.5 * (cy * g1.ravel() - cx * g2.ravel())
    leb = leb.ravel()
    mu = leb * _pt_density(x, y, z, t)
    got = (x, y, z, leb, mu)
    _ATOM_CACHE[key] = got
    return got


def _atom_kinds(family: TestFunctionFamily, name: str) -> list:
    parts = family.combo_index.get(name)
    if parts is None:
        return [family.kinds[name]]
    return [family.kinds[p] for p in parts[0]]


@dataclass
class _MemberCtx:
    name: str
    f: ScalarField
    compact: bool
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    leb: np.ndarray     # geometric quadrature weights (panel route)
    mu: np.ndarray      # kernel-weighted; mu total plus m_out is exactly 1
    m_out: float
    vals: np.ndarray
    gx: np.ndarray      # frame components (Xf, Yf, Zf)
    gy: np.ndarray
    gz: np.ndarray
    gam: np.ndarray
    a: float            # X P_t f (0)
    b: float            # Y P_t f (0)

    def expect(self, arr, outside: float = 0.0) -> float:
        return float(self.mu @ arr) + self.m_out * float(outside)


def _member_ctx(family: TestFunctionFamily, f: ScalarField, cfg: HeatOpConfig) -> _MemberCtx:
    if f.analytic_gradient is None:
        raise ValueError(f"family member {f.name!r} lacks an analytic gradient")
    atoms = family.atoms.get(f.name)
    if atoms is None:
        m = heat_measure(cfg)
        x, y, z = m.x, m.y, m.z
        mu = m.mu / float(np.sum(m.mu))
        leb = np.zeros(0)
        m_out = 0.0
        compact = False
    else:
        tier = _panel_tier(cfg.quad.abs_tol)
        kinds = _atom_kinds(family, f.name)
        panels = [_atom_panel(a, k, cfg.t, tier) for a, k in zip(atoms, kinds)]
        x = np.concatenate([p[0] for p in panels])
        y = np.concatenate([p[1] for p in panels])
        z = np.concatenate([p[2] for p in panels])
        leb = np.concatenate([p[3] for p in panels])
        mu = np.concatenate([p[4] for p in panels])
        m_out = 1.0 - float(np.sum(mu))
        if m_out < -1e-9:
            raise ArithmeticError(f"panel mass for {f.name!r} exceeds 1")
        m_out = max(m_out, 0.0)
        compact = True
    shape = mu.shape
    vals = np.broadcast_to(np.asarray(f.eval(x, y, z), dtype=float), shape)
    gx, gy, gz = (np.broadcast_to(np.asarray(g, dtype=float), shape)
                  for g in f.analytic_gradient(x, y, z))
    gam = gx * gx + gy * gy
    a = float(mu @ (gx + y * gz))
    b = float(mu @ (gy - x * gz))
    return _MemberCtx(f.name, f, compact, x, y, z, leb, mu, m_out,
                      vals, gx, gy, gz, gam, a, b)


def _contexts(family: TestFunctionFamily, cfg: HeatOpConfig):
    for f in family.members:
        yield _member_ctx(family, f, cfg)


def _check_budget(ctx: _MemberCtx) -> float:
    return FAMILY_QUAD_BUDGET if ctx.compact else QUAD_BUDGET


# ---------------------------------------------------------------------------
# Driver-Melcher and reverse Poincare


def check_driver_melcher(family: TestFunctionFamily, t: float = 1.0,
                         A: float | None = None, abs_tol: float = 1e-6) -> list:
    """Gamma(P_t f)(0) <= 2(A+4) P_t(Gamma(f))(0) member by member."""
    if A is None:
        A = estimate_A(abs_tol=abs_tol)
    cfg = _harness_cfg(t, abs_tol)
    const = 2.0 * (A + 4.0)
    rows = []
    for ctx in _contexts(family, cfg):
        lhs = ctx.a * ctx.a + ctx.b * ctx.b
        rhs = const * ctx.expect(ctx.gam)
        rows.append(_report("driver-melcher", ctx.name, lhs, rhs, const,
                            budget=_check_budget(ctx)))
    return rows


def check_reverse_poincare(family: TestFunctionFamily, t: float = 1.0,
                           abs_tol: float = 1e-6) -> list:
    """t Gamma(P_t f)(0) <= P_t(f^2)(0) - (P_t f(0))^2 member by member."""
    cfg = _harness_cfg(t, abs_tol)
    rows = []
    for ctx in _contexts(family, cfg):
        lhs = t * (ctx.a * ctx.a + ctx.b * ctx.b)
        mean = ctx.expect(ctx.vals)
        rhs = ctx.expect(ctx.vals * ctx.vals) - mean * mean
        rows.append(_report("reverse-poincare", ctx.name, lhs, rhs, t,
                            budget=_check_budget(ctx)))
    return rows


# ---------------------------------------------------------------------------
# lower bounds for C_1 and C_2


@dataclass(frozen=True)
class CLowerWitness:
    p: int
    value: float
    names: tuple
    coeffs: tuple
    budget: int


def _kept_span(G: np.ndarray):
    lam, U = np.linalg.eigh(G)
    keep = lam > max(lam[-1], 0.0) * 1e-10
    return lam[keep], U[:, keep]


def _chart_p2(B: np.ndarray, G: np.ndarray):
    """Top of the p = 2 Rayleigh quotient over the chart block span."""
    lam, U = _kept_span(G)
    s2 = (U / lam) @ (U.T @ B)          # G^+ B
    S = B.T @ s2                        # 2 x 2
    evals, evecs = np.linalg.eigh(0.5 * (S + S.T))
    c2 = s2 @ evecs[:, -1]
    best = float(evals[-1])
    diag = np.diag(G)
    single2 = np.divide(B[:, 0] ** 2 + B[:, 1] ** 2, diag,
                        out=np.zeros(B.shape[0]), where=diag > 0.0)
    if float(np.max(single2)) > best:
        best = float(np.max(single2))
        c2 = np.eye(B.shape[0])[int(np.argmax(single2))]
    return best, c2


def _chart_span(family: TestFunctionFamily, cfg: HeatOpConfig):
    """Gradient rows on the chart measure for polynomial-growth members."""
    members = [f for f in family.members if family.atoms.get(f.name) is None]
    m = heat_measure(cfg)
    shape = m.mu.shape
    n = len(members)
    gx = np.empty((n, shape[0]))
    gy = np.empty_like(gx)
    gz = np.empty_like(gx)
    for i, f in enumerate(members):
        if f.analytic_gradient is None:
            raise ValueError(f"family member {f.name!r} lacks an analytic gradient")
        ax, ay, az = f.analytic_gradient(m.x, m.y, m.z)
        gx[i] = np.broadcast_to(np.asarray(ax, dtype=float), shape)
        gy[i] = np.broadcast_to(np.asarray(ay, dtype=float), shape)
        gz[i] = np.broadcast_to(np.asarray(az, dtype=float), shape)
    B = np.column_stack([(gx + m.y[None, :] * gz) @ m.mu,
                         (gy - m.x[None, :] * gz) @ m.mu])
    G = (gx * m.mu) @ gx.T + (gy * m.mu) @ gy.T
    return [f.name for f in members], gx, gy, gz, B, G, m.mu


def c_lower_detail(p: int, family: TestFunctionFamily | None = None,
                   optimizer_budget: int = 16, t: float = 1.0,
                   abs_tol: float = 1e-6, seed: int = 7) -> CLowerWitness:
    """Best ratio |grad P_t f|^p(0) / P_t(|grad f|^p)(0) with its witness.

    The family splits into a polynomial-growth block sharing the chart
    measure and the compactly supported members, each with its own
    panel quadrature; combining across the split would mix quadrature
    error scales, so candidates are searched block by block and the
    best wins.

    p = 2 over the chart block is a generalized Rayleigh quotient: with
    B the n x 2 matrix of member gradients at 0 and G the Gram matrix
    of P_t(Gamma(f_i, f_j))(0), the sup over combinations is the top
    eigenvalue of B' G^+ B, no search needed.  Compact members enter as
    singles and as two-member pencils over the ``optimizer_budget``
    pairs with the largest single ratios.  p = 1 runs seeded
    Nelder-Mead restarts over a small chart pool (the p = 2 witness
    plus the best singles) with ``optimizer_budget`` restarts, then
    takes the max against the compact singles.  Doubling the budget
    extends the pair prefix / restart sequence, so the best found is
    non-decreasing in the budget.
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if family is None:
        family = build_family()
    cfg = _harness_cfg(t, abs_tol)
    names_c, gx_c, gy_c, gz_c, B, G, mu = _chart_span(family, cfg)
    ctxs = [_member_ctx(family, f, cfg)
            for f in family.members if family.atoms.get(f.name) is not None]

    best = 0.0
    best_names: tuple = ()
    best_coeffs: tuple = ()

    if p == 2:
        if names_c:
            best, c2 = _chart_p2(B, G)
            idx = np.argsort(-np.abs(c2))[:6]
            best_names = tuple(names_c[i] for i in idx)
            best_coeffs = tuple(float(c2[i]) for i in idx)

        singles = []
        for ctx in ctxs:
            den = ctx.expect(ctx.gam)
            r = (ctx.a ** 2 + ctx.b ** 2) / den if den > 0.0 else 0.0
            singles.append(r)
            if r > best:
                best, best_names, best_coeffs = r, (ctx.name,), (1.0,)

        # two-member pencils over the most promising compact pairs; the
        # cross Gram entry is averaged over both panels since either
        # support contains the overlap
        order = sorted(range(len(ctxs)), key=lambda i: -singles[i])
        pairs = [(order[i], order[j])
                 for i in range(len(order)) for j in range(i + 1, len(order))]
        pairs.sort(key=lambda ij: -(singles[ij[0]] + singles[ij[1]]))
        for i, j in pairs[:int(optimizer_budget)]:
            ci, cj = ctxs[i], ctxs[j]
            gxj, gyj, _ = cj.f.analytic_gradient(ci.x, ci.y, ci.z)
            gxi, gyi, _ = ci.f.analytic_gradient(cj.x, cj.y, cj.z)
            cross = 0.5 * (float(ci.mu @ (ci.gx * gxj + ci.gy * gyj))
                           + float(cj.mu @ (cj.gx * gxi + cj.gy * gyi)))
            G2 = np.array([[ci.expect(ci.gam), cross],
                           [cross, cj.expect(cj.gam)]])
            if np.linalg.det(G2) < 1e-6 * G2[0, 0] * G2[1, 1]:
                continue
            B2 = np.array([[ci.a, ci.b], [cj.a, cj.b]])
            evals2, evecs2 = linalg.eigh(B2 @ B2.T, G2)
            if float(evals2[-1]) > best:
                best = float(evals2[-1])
                best_names = (ci.name, cj.name)
                best_coeffs = tuple(float(v) for v in evecs2[:, -1])
        return CLowerWitness(2, best, best_names, best_coeffs, int(optimizer_budget))

    for ctx in ctxs:
        den = ctx.expect(np.sqrt(ctx.gam))
        r = math.hypot(ctx.a, ctx.b) / den if den > 0.0 else 0.0
        if r > best:
            best, best_names, best_coeffs = r, (ctx.name,), (1.0,)

    if not names_c:
        return CLowerWitness(1, best, best_names, best_coeffs, int(optimizer_budget))

    # chart pool: virtual member 0 is the p = 2 chart witness combination
    _, c2 = _chart_p2(B, G)
    den1 = np.sqrt(gx_c * gx_c + gy_c * gy_c) @ mu
    num1 = np.hypot(B[:, 0], B[:, 1])
    r1 = np.where(den1 > 0.0, num1 / np.where(den1 > 0.0, den1, 1.0), 0.0)
    top = list(np.argsort(-r1)[:7])
    pool_gx = np.vstack([c2 @ gx_c, gx_c[top]])
    pool_gy = np.vstack([c2 @ gy_c, gy_c[top]])
    pool_B = np.vstack([c2 @ B, B[top]])
    pool_names = ["p2-witness"] + [names_c[i] for i in top]
    dim = pool_B.shape[0]

    def neg_ratio(c):
        g = c @ pool_B
        den = float(np.sqrt((c @ pool_gx) ** 2 + (c @ pool_gy) ** 2) @ mu)
        if not (den > 1e-13):
            return 0.0
        return -math.hypot(g[0], g[1]) / den

    rng = np.random.default_rng(int(seed))
    starts = [np.eye(dim)[0], np.eye(dim)[1]]
    best_pool = -min(neg_ratio(s) for s in starts)
    best_c = starts[0] if neg_ratio(starts[0]) <= neg_ratio(starts[1]) else starts[1]
    for _ in range(int(optimizer_budget)):
        s = rng.standard_normal(dim)
        res = optimize.minimize(neg_ratio, s, method="Nelder-Mead",
                                options={"maxfev": 400, "xatol": 1e-6, "fatol": 1e-10})
        if -res.fun > best_pool:
            best_pool = -float(res.fun)
            best_c = np.asarray(res.x)
    res = optimize.minimize(neg_ratio, best_c, method="Nelder-Mead",
                            options={"maxfev": 800, "xatol": 1e-8, "fatol": 1e-12})
    if -res.fun > best_pool:
        best_pool = -float(res.fun)
        best_c = np.asarray(res.x)
    if best_pool > best:
        best = float(best_pool)
        best_names = tuple(pool_names)
        best_coeffs = tuple(float(v) for v in best_c)
    return CLowerWitness(1, best, best_names, best_coeffs, int(optimizer_budget))


def estimate_C_lower(p: int, family: TestFunctionFamily | None = None,
                     optimizer_budget: int = 16, t: float = 1.0,
                     abs_tol: float = 1e-6, seed: int = 7) -> float:
    """Best certified ratio found for C_p at time ``t`` (lower bound)."""
    return c_lower_detail(p, family, optimizer_budget, t, abs_tol, seed).value


def c_ratio(f: ScalarField, p: int, t: float = 1.0, abs_tol: float = 1e-6) -> float:
    """Single-member ratio |grad P_t f|^p(0) / P_t(|grad f|^p)(0)."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    m = heat_measure(_harness_cfg(t, abs_tol))
    gx, gy, gz = (np.broadcast_to(np.asarray(a, float), m.mu.shape)
                  for a in f.analytic_gradient(m.x, m.y, m.z))
    xv = float(np.sum(m.mu * (gx + m.y * gz)))
    yv = float(np.sum(m.mu * (gy - m.x * gz)))
    if p == 2:
        num = xv * xv + yv * yv
        den = float(np.sum(m.mu * (gx * gx + gy * gy)))
    else:
        num = math.hypot(xv, yv)
        den = float(np.sum(m.mu * np.hypot(gx, gy)))
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def constants_estimate(family: TestFunctionFamily | None = None,
                       optimizer_budget: int = 16, abs_tol: float = 1e-6,
                       seed: int = 7) -> ConstantEstimate:
    """Bundle A with the C_1, C_2 lower bounds from one family pass."""
    if family is None:
        family = build_family()
    A = estimate_A(abs_tol=abs_tol)
    c1 = estimate_C_lower(1, family, optimizer_budget, abs_tol=abs_tol, seed=seed)
    c2 = estimate_C_lower(2, family, optimizer_budget, abs_tol=abs_tol, seed=seed)
    return ConstantEstimate(A=A, C1_lower=max(c1, 1.0), C2_lower=max(c2, 1.0))


# ---------------------------------------------------------------------------
# phi-entropy suite


def _pos_shift(ctx: _MemberCtx) -> float:
    """Shift making the member >= 0.1 everywhere the measure lives."""
    lo = float(np.min(ctx.vals))
    if ctx.compact:
        lo = min(lo, 0.0)    # the outside atom sees f = 0
    return lo


def check_phi_suite(family: TestFunctionFamily, t: float = 1.0,
                    C1_working: float = SQRT2, abs_tol: float = 1e-6) -> list:
    """Log-Sobolev, Beckner (p in {1.25, 1.5, 1.75}) and Poincare rows.

    Members are shifted to min + 0.1 > 0 where the entropy needs a
    positive range; the shift leaves gradients untouched.  Expectations
    run against an exactly unit-mass measure (panel plus outside atom
    for compact members) so Jensen holds and entropies cannot go
    negative on rounding.  One extra row compares Beckner at
    p = 2 - 1e-4 against Poincare on the first member (continuity in p).
    """
    cfg = _harness_cfg(t, abs_tol)
    C2t = C1_working * C1_working * t
    rows = []
    consistency = None
    for ctx in _contexts(family, cfg):
        budget = _check_budget(ctx)
        lo = _pos_shift(ctx)
        pos = ctx.vals - lo + 0.1
        p_out = 0.1 - lo
        mean_pos = ctx.expect(pos, p_out)

        lhs = ctx.expect(pos * np.log(pos), p_out * math.log(p_out))
        lhs -= mean_pos * math.log(mean_pos)
        rhs = C2t * ctx.expect(ctx.gam / pos)
        rows.append(_report("lsi", ctx.name, lhs, rhs, C1_working, budget=budget))

        for pexp in (1.25, 1.5, 1.75):
            lhs = (ctx.expect(pos**pexp, p_out**pexp) - mean_pos**pexp) / (pexp - 1.0)
            rhs = pexp * C2t * ctx.expect(pos ** (pexp - 2.0) * ctx.gam)
            rows.append(_report(f"beckner-{pexp}", ctx.name, lhs, rhs, C1_working,
                                budget=budget))

        mean = ctx.expect(ctx.vals)
        var = ctx.expect(ctx.vals * ctx.vals) - mean * mean
        rhs_pi = 2.0 * C2t * ctx.expect(ctx.gam)
        rows.append(_report("poincare", ctx.name, var, rhs_pi, C1_working,
                            budget=budget))

        if consistency is None:
            pexp = 2.0 - 1e-4
            lhs_b = (ctx.expect(pos**pexp, p_out**pexp) - mean_pos**pexp) / (pexp - 1.0)
            rhs_b = pexp * C2t * ctx.expect(pos ** (pexp - 2.0) * ctx.gam)
            var_pos = ctx.expect(pos * pos, p_out * p_out) - mean_pos * mean_pos
            dev = abs(lhs_b / var_pos - 1.0) if var_pos > 0 else 0.0
            dev = max(dev, abs(rhs_b / rhs_pi - 1.0) if rhs_pi > 0 else 0.0)
            consistency = _report("beckner-p2-consistency", ctx.name, dev, 1e-3,
                                  pexp, budget=0.0,
                                  note="Beckner at p = 2 - 1e-4 against Poincare, both sides")
    rows.append(consistency)
    return rows


# ---------------------------------------------------------------------------
# Cheeger, correlation, Bobkov, uniform gradient bound


def _gauss_isop(u):
    """I(u) = phi(Phi^{-1}(u)), the Gaussian isoperimetric profile."""
    q = ndtri(np.asarray(u, dtype=float))
    return np.exp(-0.5 * q * q) / math.sqrt(2.0 * math.pi)


def _squash(vals, gam):
    """f -> 0.1 + 0.8 sigma(f) with the matching Gamma factor."""
    s = 1.0 / (1.0 + np.exp(-vals))
    der = 0.8 * s * (1.0 - s)
    return 0.1 + 0.8 * s, der * der * gam


_GRAD_GRID_CACHE: dict = {}


def _grad_grid(d_max: float = 4.0):
    got = _GRAD_GRID_CACHE.get(d_max)
    if got is not None:
        return got
    pts = [(0.0, 0.0, 0.0)]
    for a in (-2.0, -1.0, 1.0, 2.0):
        pts.append((a, 0.0, 0.0))
        pts.append((0.0, a, 0.0))
    for sx in (-1.4, 1.4):
        for sy in (-1.4, 1.4):
            for sz in (-0.8, 0.0, 0.8):
                pts.append((sx, sy, sz))
    for sz in (-1.2, -0.5, 0.5, 1.2):
        pts.append((0.0, 0.0, sz))
    arr = np.array([p for p in pts
                    if float(cc_distance_many(p[0], p[1], p[2])) <= d_max])
    _GRAD_GRID_CACHE[d_max] = arr
    return arr


def _grad_Pt_at(f: ScalarField, measure, wpt) -> tuple:
    """(X P_t f, Y P_t f)(w) and max |f| over the shifted nodes.

    Moves the derivative through the left translation: the conjugated
    right-invariant fields pick up -w2 Zf and +w1 Zf corrections.
    """
    w1, w2, w3 = wpt
    qx = w1 + measure.x
    qy = w2 + measure.y
    qz = w3 + measure.z + 0.5 * (w1 * measure.y - w2 * measure.x)
    vals = np.asarray(f.eval(qx, qy, qz), dtype=float)
    gx, gy, gz = (np.asarray(a, dtype=float) for a in f.analytic_gradient(qx, qy, qz))
    xv = float(np.sum(measure.mu * (gx + qy * gz - w2 * gz)))
    yv = float(np.sum(measure.mu * (gy - qx * gz + w1 * gz)))
    sup = float(np.max(np.abs(vals))) if vals.shape else abs(float(vals))
    return xv, yv, sup


def _grad_Pt_panel(ctx: _MemberCtx, wpt, t: float) -> tuple:
    """(X P_t f, Y P_t f)(w) for a compact member over its own panel.

    Writes P_t f(w) = int f(u) p_t(w^{-1} u) du and differentiates the
    kernel argument; the panel already covers the whole support, so no
    node shift is needed and the kernel re-weighting is the only new
    cost per point.
    """
    w1, w2, w3 = (float(v) for v in wpt)
    zs = ctx.z - w3 - 0.5 * (w1 * ctx.y - w2 * ctx.x)
    wt = ctx.leb * _pt_density(ctx.x - w1, ctx.y - w2, zs, t)
    xv = float(wt @ (ctx.gx + (ctx.y - w2) * ctx.gz))
    yv = float(wt @ (ctx.gy - (ctx.x - w1) * ctx.gz))
    return xv, yv


def check_cheeger_bobkov(family: TestFunctionFamily, t: float = 1.0,
                         C1_working: float = SQRT2, abs_tol: float = 1e-6) -> list:
    """The L1 Cheeger bound, correlation pairs, both Bobkov forms, and
    the uniform gradient bound over a point grid with d <= 4.

    The tensorized Bobkov constant is written unsubscripted in the
    source inequality; C1_working stands in and the row carries a note.
    The gradient-bound sup norm of f is taken over every point the lhs
    quadratures actually visit, which for the compactly supported
    members covers their support.
    """
    cfg = _harness_cfg(t, abs_tol)
    ctxs = [_member_ctx(family, f, cfg) for f in family.members]
    st = math.sqrt(t)
    i_half = float(_gauss_isop(0.5))    # squash(0), the outside-atom level
    rows = []

    for ctx in ctxs:
        budget = _check_budget(ctx)
        mean = ctx.expect(ctx.vals)
        lhs = ctx.expect(np.abs(ctx.vals - mean), abs(mean))
        rhs = 4.0 * C1_working * st * ctx.expect(np.sqrt(ctx.gam))
        rows.append(_report("cheeger-l1", ctx.name, lhs, rhs, C1_working,
                            budget=budget))

        squashed, gam_s = _squash(ctx.vals, ctx.gam)
        mean_s = ctx.expect(squashed, 0.5)
        isf = _gauss_isop(squashed)
        lhs_b = float(_gauss_isop(mean_s)) - ctx.expect(isf, i_half)
        rhs_b = C1_working**2 * math.sqrt(2.0 * t) * ctx.expect(np.sqrt(gam_s))
        rows.append(_report("bobkov-semigroup", ctx.name, lhs_b, rhs_b, C1_working,
                            budget=budget))

        lhs_t = float(_gauss_isop(mean_s))
        rhs_t = ctx.expect(np.sqrt(isf * isf + 2.0 * C1_working**4 * t * gam_s), i_half)
        rows.append(_report("bobkov-tensorized", ctx.name, lhs_t, rhs_t, C1_working,
                            budget=budget,
                            note="source writes the constant unsubscripted; using C1_working"))

    for k in range(0, len(ctxs) - 1, 2):
        ci, cj = ctxs[k], ctxs[k + 1]
        # the product lives on the host support (or the shared chart nodes)
        if ci.compact:
            prod = ci.expect(ci.vals * np.asarray(cj.f.eval(ci.x, ci.y, ci.z), float))
        elif cj.compact:
            prod = cj.expect(cj.vals * np.asarray(ci.f.eval(cj.x, cj.y, cj.z), float))
        else:
            prod = ci.expect(ci.vals * cj.vals)
        cov = prod - ci.expect(ci.vals) * cj.expect(cj.vals)
        rhs = (2.0 * C1_working**2 * t
               * math.sqrt(max(ci.expect(ci.gam), 0.0))
               * math.sqrt(max(cj.expect(cj.gam), 0.0)))
        budget = FAMILY_QUAD_BUDGET if (ci.compact or cj.compact) else QUAD_BUDGET
        rows.append(_report("correlation", f"{ci.name}|{cj.name}", abs(cov), rhs,
                            C1_working, budget=budget))

    grid = _grad_grid()
    chart = heat_measure(cfg)
    for ctx in ctxs:
        worst = 0.0
        sup_f = float(np.max(np.abs(ctx.vals)))
        for wpt in grid:
            if ctx.compact:
                xv, yv = _grad_Pt_panel(ctx, wpt, t)
            else:
                xv, yv, sup = _grad_Pt_at(ctx.f, chart, wpt)
                sup_f = max(sup_f, sup)
            worst = max(worst, math.hypot(xv, yv))
        rows.append(_report("grad-bound", ctx.name, worst, sup_f / st, 1.0 / st,
                            budget=_check_budget(ctx),
                            note="sup norm taken over all visited points; a lower "
                                 "bound of the true sup, so passing is conservative"))
    return rows


# ---------------------------------------------------------------------------
# ray inequality in the geodesic chart


@dataclass(frozen=True)
class RaySurvey:
    constant: float
    inner_sup: float
    outer_sup: float
    argmax: tuple
    n_rays: int


def _ray_point(u_abs: float, s):
    # chart: r = 2|u| sin(phi), z = (|u|^2/2)(2 phi - sin 2 phi), phi = s/(2|u|)
    phi = np.asarray(s, dtype=float) / (2.0 * u_abs)
    r = 2.0 * u_abs * np.sin(phi)
    z = 0.5 * u_abs * u_abs * (2.0 * phi - np.sin(2.0 * phi))
    return r, z


def _ray_s_cap(u_abs: float) -> float:
    """Largest s with quadrature cancellation (s^2 - r^2)/4 within budget."""
    margin = CANCEL_BUDGET - 2.0
    lo, hi = 0.0, math.pi
    if 4.0 * u_abs * u_abs * (math.pi**2) <= 4.0 * margin:
        return 2.0 * math.pi * u_abs
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if 4.0 * u_abs * u_abs * (mid * mid - math.sin(mid) ** 2) <= 4.0 * margin:
            lo = mid
        else:
            hi = mid
    return 2.0 * u_abs * lo


def _ray_ratio(u_abs: float, t: float, n_nodes: int = 96) -> float:
    """int_t^{2 pi |u|} A h ds over A(u,t) h(u,t), tail-truncated.

    The tail past the cancellation cap carries less than e^-20 of the
    endpoint mass (the integrand there is below e^{-(r^2+4*20)/4} while
    the endpoint is of order e^{-t^2/4}), so dropping it cannot move
    the ratio at the reported precision.
    """
    s_hi = min(2.0 * math.pi * u_abs * (1.0 - 1e-9), _ray_s_cap(u_abs))
    if not (t < s_hi):
        return 0.0
    nodes, wts = np.polynomial.legendre.leggauss(n_nodes)
    s = 0.5 * (s_hi - t) * (nodes + 1.0) + t
    ws = 0.5 * (s_hi - t) * wts
    r, z = _ray_point(u_abs, s)
    h = p1_many(r, z)
    a = np.array([jacobian_A(u_abs, float(sv)) for sv in s])
    num = float(np.sum(ws * a * h))
    r0, z0 = _ray_point(u_abs, np.array([t]))
    den = jacobian_A(u_abs, t) * float(p1_many(r0, z0)[0])
    return num / den


def check_ray_inequality(u_max_inner: float = 2.0, u_max_outer: float = 3.9,
                         n_u_inner: int = 10, n_t_inner: int = 8) -> tuple:
    """Empirical sup of the ray ratio with a grid-stability verdict.

    Returns (survey, report).  The outer grid doubles the node counts
    and extends |u| to the kernel evaluator's cancellation-safe limit;
    stability asks the outer sup to stay within 1.5x the inner sup.
    """
    u_lo = 1.0 / (2.0 * math.pi) + 0.01

    def survey(u_max, n_u, n_t):
        sup = 0.0
        arg = (u_lo, 1.0)
        count = 0
        for u_abs in np.geomspace(u_lo, u_max, n_u):
            t_hi = min(2.0 * math.pi * u_abs * (1.0 - 1e-6), _ray_s_cap(u_abs)) - 1e-6
            if t_hi <= 1.0:
                continue
            for t in np.linspace(1.0, t_hi, n_t):
                ratio = _ray_ratio(float(u_abs), float(t))
                count += 1
                if ratio > sup:
                    sup = ratio
                    arg = (float(u_abs), float(t))
        return sup, arg, count

    inner_sup, _, n1 = survey(u_max_inner, n_u_inner, n_t_inner)
    outer_sup, arg, n2 = survey(u_max_outer, 2 * n_u_inner, 2 * n_t_inner)
    const = max(inner_sup, outer_sup)
    sv = RaySurvey(const, inner_sup, outer_sup, arg, n1 + n2)
    rep = _report("ray-inequality", f"grid({n1}+{n2} rays)", outer_sup,
                  1.5 * inner_sup, const,
                  note=f"empirical constant {const:.6f} at |u|,t = {arg[0]:.4f},{arg[1]:.4f}")
    ok = rep.passed and math.isfinite(const) and const > 0.0
    rep = InequalityReport(rep.check, rep.function, rep.lhs, rep.rhs, rep.ratio,
                           rep.constant, ok, rep.error_budget, rep.note)
    return sv, rep


# ---------------------------------------------------------------------------
# (1,1) Poincare on a CC ball


def check_local_11_poincare(family: TestFunctionFamily, radius: float = 1.0,
                            n_s: int = 32, n_phi: int = 24, n_alpha: int = 16) -> tuple:
    """int_B |f - m| dx against int_B |grad f| dx over the CC ball.

    Lebesgue weights on both sides; m is the ball mean.  Returns
    (empirical sup ratio, reports) where each report's rhs carries the
    final empirical constant, so passing is by construction and the
    content is the constant's finiteness and size.
    """
    x, y, z, wq = chart_ball_nodes(radius, n_s=n_s, n_phi=n_phi, n_alpha=n_alpha)
    vol = float(np.sum(wq))
    pairs = []
    for f in family.members:
        vals = np.broadcast_to(np.asarray(f.eval(x, y, z), dtype=float), wq.shape)
        gx, gy, _ = f.analytic_gradient(x, y, z)
        gnorm = np.hypot(np.broadcast_to(np.asarray(gx, float), wq.shape),
                         np.broadcast_to(np.asarray(gy, float), wq.shape))
        m = float(np.sum(wq * vals)) / vol
        lhs = float(np.sum(wq * np.abs(vals - m)))
        rhs = float(np.sum(wq * gnorm))
        scale = max(1.0, float(np.max(np.abs(vals))))
        if rhs <= 1e-13 * scale:
            if lhs <= 1e-12 * scale:
                pairs.append((f.name, None, None))   # constant on B, skipped
                continue
            raise ArithmeticError(f"member {f.name}: zero gradient mass with nonzero "
                                  "oscillation on the ball")
        pairs.append((f.name, lhs, rhs))
    ratios = [l / r for _, l, r in pairs if l is not None]
    sup = max(ratios) if ratios else 0.0
    rows = []
    for name, lhs, rhs in pairs:
        if lhs is None:
            rows.append(_report("local-11-poincare", name, 0.0, 0.0, sup,
                                note="constant on the ball, skipped"))
        else:
            rows.append(_report("local-11-poincare", name, lhs, sup * rhs, sup))
    return sup, rows


# ---------------------------------------------------------------------------
# complex commutation


def _annulus_bump(r_lo: float, r_hi: float, z_half: float, kz: float = 0.0,
                  name: str = "annulus") -> ScalarField:
    """Radial-in-(x,y) bump supported exactly on r in [r_lo, r_hi], |z| <= z_half.

    q = ((r^2 - c)/s)^2 + (z/z_half)^2 with c, s matched to the r^2
    window; optionally modulated by cos(kz z), which keeps the
    x,y-radial symmetry (and evenness in z when kz = 0).
    """
    from .family import _mollifier, _mollifier_dq

    c = 0.5 * (r_lo**2 + r_hi**2)
    s = 0.5 * (r_hi**2 - r_lo**2)

    def pieces(x, y, z):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        z = np.asarray(z, float)
        r2 = x * x + y * y
        a = (r2 - c) / s
        return x, y, z, a, (z / z_half)

    def ev(x, y, z):
        x, y, z, a, b = pieces(x, y, z)
        return _mollifier(a * a + b * b) * np.cos(kz * z)

    def grad(x, y, z):
        x, y, z, a, b = pieces(x, y, z)
        q = a * a + b * b
        core = _mollifier(q)
        dq = _mollifier_dq(q)
        cz = np.cos(kz * z)
        sz = np.sin(kz * z)
        # coordinate partials of q
        px = dq * (2.0 * a) * (2.0 * x / s)
        py = dq * (2.0 * a) * (2.0 * y / s)
        pz = dq * (2.0 * b) / z_half
        fx = px * cz
        fy = py * cz
        fz = pz * cz - core * kz * sz
        return fx - 0.5 * y * fz, fy + 0.5 * x * fz, fz

    return ScalarField(eval=ev, analytic_gradient=grad, name=name)


def commutation_default_bumps() -> list:
    """Three compactly supported fields in 2 < d < 5 for the commutation check.

    The first is radial in (x, y) and even in z, so both sides vanish
    by symmetry; the others are generic (translated mollifier bumps
    whose support annulus stays inside the window, center distance
    plus the support radius bound on one side, minus it on the other).
    """
    from .family import bump_field

    sym = _annulus_bump(2.2, 3.8, 0.5, kz=0.0, name="annulus-even")
    b1 = bump_field((3.3, 0.6, 0.2), 0.55, name="bump-offaxis")
    b2 = bump_field((-2.3, 2.2, -0.3), 0.5, name="bump-offaxis-2")
    return [sym, b1, b2]


def _support_box(f: ScalarField, r_probe=np.linspace(0.0, 8.0, 161),
                 z_probe=np.linspace(-4.0, 4.0, 161), n_theta: int = 64):
    """Tight (r, z) bounding box of a field's support by dense probing."""
    th = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    R, TH, Z = np.meshgrid(r_probe, th, z_probe, indexing="ij")
    vals = np.abs(np.asarray(f.eval(R * np.cos(TH), R * np.sin(TH), Z), dtype=float))
    hit = vals > 1e-300
    if not np.any(hit):
        raise ValueError(f"field {f.name!r} vanishes on the probe grid")
    rmask = np.any(hit, axis=(1, 2))
    zmask = np.any(hit, axis=(0, 1))
    dr = r_probe[1] - r_probe[0]
    dz = z_probe[1] - z_probe[0]
    r_lo = max(0.0, float(r_probe[rmask][0]) - dr)
    r_hi = float(r_probe[rmask][-1]) + dr
    z_lo = float(z_probe[zmask][0]) - dz
    z_hi = float(z_probe[zmask][-1]) + dz
    return r_lo, r_hi, z_lo, z_hi


def check_commutation(f: ScalarField | None = None, abs_tol: float = 1e-6,
                      n_r: int = 40, n_theta: int = 96, n_z: int = 40,
                      tol: float = 1e-4) -> InequalityReport:
    """(X + iY)P_1 f(0) against the shifted-kernel integral of (X + iY)f.

    The left side differentiates the semigroup by centered differences;
    the right side integrates p1*(r, z + 2i) (X + iY)f r dr dtheta dz
    over the support box.  The two routes share no code path, so their
    agreement is the check.
    """
    if f is None:
        f = commutation_default_bumps()[1]
    cfg = _harness_cfg(1.0, abs_tol)
    xv, yv = grad_Pt_origin(f, cfg, route="fd")
    lhs = complex(xv, yv)

    r_lo, r_hi, z_lo, z_hi = _support_box(f)
    r_lo = max(r_lo, 1e-6)
    rn, rw = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (r_hi - r_lo) * (rn + 1.0) + r_lo
    rw = 0.5 * (r_hi - r_lo) * rw
    zn, zw = np.polynomial.legendre.leggauss(n_z)
    zz = 0.5 * (z_hi - z_lo) * (zn + 1.0) + z_lo
    zw = 0.5 * (z_hi - z_lo) * zw
    th = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    wth = 2.0 * math.pi / n_theta

    R, TH, Z = np.meshgrid(r, th, zz, indexing="ij")
    gx, gy, _ = f.analytic_gradient(R * np.cos(TH), R * np.sin(TH), Z)
    g = (np.asarray(gx, float) + 1j * np.asarray(gy, float)).sum(axis=1) * wth

    rhs = 0.0 + 0.0j
    for i, rv in enumerate(r):
        for j, zv in enumerate(zz):
            if g[i, j] == 0.0:
                continue
            ck = p1_star_shifted(float(rv), float(zv))
            rhs += rw[i] * zw[j] * rv * complex(ck.re, ck.im) * g[i, j]

    err = abs(lhs - rhs)
    return _report("commutation", f.name, err, tol, 1.0, budget=0.0,
                   note=f"lhs {lhs.real:+.8f}{lhs.imag:+.8f}i "
                        f"rhs {rhs.real:+.8f}{rhs.imag:+.8f}i")


# ---------------------------------------------------------------------------
# Gamma_2 unboundedness


_CUBICS = [(i, j, k) for i in range(4) for j in range(4) for k in range(4)
           if 1 <= i + j + k <= 3]


def _poly_scale(p: dict, c: float) -> dict:
    return {m: c * v for m, v in p.items()}


def _poly_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for m, v in b.items():
        out[m] = out.get(m, 0.0) + v
    return out


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for (i1, j1, k1), v1 in a.items():
        for (i2, j2, k2), v2 in b.items():
            m = (i1 + i2, j1 + j2, k1 + k2)
            out[m] = out.get(m, 0.0) + v1 * v2
    return out


def _poly_X(p: dict) -> dict:
    """X = d_x - (y/2) d_z on monomial dictionaries."""
    out: dict = {}
    for (i, j, k), v in p.items():
        if i:
            m = (i - 1, j, k)
            out[m] = out.get(m, 0.0) + i * v
        if k:
            m = (i, j + 1, k - 1)
            out[m] = out.get(m, 0.0) - 0.5 * k * v
    return out


def _poly_Y(p: dict) -> dict:
    """Y = d_y + (x/2) d_z on monomial dictionaries."""
    out: dict = {}
    for (i, j, k), v in p.items():
        if j:
            m = (i, j - 1, k)
            out[m] = out.get(m, 0.0) + j * v
        if k:
            m = (i + 1, j, k - 1)
            out[m] = out.get(m, 0.0) + 0.5 * k * v
    return out


def _poly_eval(p: dict, x: float, y: float, z: float) -> float:
    return sum(v * x**i * y**j * z**k for (i, j, k), v in p.items())


def _gamma2_forms(point) -> tuple:
    """Quadratic forms (Q_gamma, Q_gamma2) over cubic coefficients at a point.

    Gamma and Gamma_2 are both quadratic in the polynomial, so their
    polarized forms on the monomial basis reduce the search over f to
    linear algebra; the derivatives are exact monomial calculus.
    """
    x, y, z = point
    n = len(_CUBICS)
    basis = [{m: 1.0} for m in _CUBICS]
    Xb = [_poly_X(b) for b in basis]
    Yb = [_poly_Y(b) for b in basis]
    Lb = [_poly_add(_poly_X(Xb[i]), _poly_Y(Yb[i])) for i in range(n)]
    Qg = np.empty((n, n))
    Q2 = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            gij = _poly_add(_poly_mul(Xb[i], Xb[j]), _poly_mul(Yb[i], Yb[j]))
            Qg[i, j] = Qg[j, i] = _poly_eval(gij, x, y, z)
            lg = _poly_add(_poly_X(_poly_X(gij)), _poly_Y(_poly_Y(gij)))
            gi_lj = _poly_add(_poly_mul(Xb[i], _poly_X(Lb[j])),
                              _poly_mul(Yb[i], _poly_Y(Lb[j])))
            gj_li = _poly_add(_poly_mul(Xb[j], _poly_X(Lb[i])),
                              _poly_mul(Yb[j], _poly_Y(Lb[i])))
            v = 0.5 * (_poly_eval(lg, x, y, z) - _poly_eval(gi_lj, x, y, z)
                       - _poly_eval(gj_li, x, y, z))
            Q2[i, j] = Q2[j, i] = v
    return Qg, Q2


def demonstrate_gamma2_unbounded(target: float = -1e3, seed: int = 5,
                                 n_points: int = 12) -> InequalityReport:
    """Exhibit a cubic f and a point with Gamma_2/Gamma below ``target``.

    At a fixed point both forms are quadratic in the coefficients, so
    the search takes the best Gamma-positive direction and pushes along
    a Gamma-null direction whose cross term with it lowers Gamma_2
    without feeding Gamma; the amount of push needed for the target is
    solved directly.  The witness is re-evaluated through the generic
    finite-difference Gamma_2 as an independent cross-check.
    """
    rng = np.random.default_rng(int(seed))
    pts = [(1.0, 0.0, 0.0), (0.5, -0.5, 0.2)]
    while len(pts) < n_points:
        cand = rng.uniform(-1.5, 1.5, size=3)
        if float(cc_distance_many(*cand)) <= 2.0:
            pts.append(tuple(float(v) for v in cand))

    best = (0.0, None, None, None, None)
    for pt in pts:
        Qg, Q2 = _gamma2_forms(pt)
        lam, U = np.linalg.eigh(Qg)
        keep = lam >= 1e-9 * max(lam[-1], 1.0)
        null = U[:, ~keep]
        if not np.any(keep) or null.shape[1] == 0:
            continue
        W = U[:, keep] / np.sqrt(lam[keep])
        M = W.T @ Q2 @ W
        ev, evec = np.linalg.eigh(0.5 * (M + M.T))
        c_r = W @ evec[:, 0]                     # Gamma(c_r) = 1 at pt
        cross = null.T @ (Q2 @ c_r)
        k = int(np.argmax(np.abs(cross)))
        if abs(cross[k]) < 1e-9:
            cand = (float(ev[0]), c_r, pt, Qg, Q2)
        else:
            nvec = null[:, k] * (-np.sign(cross[k]))
            d = float(nvec @ Q2 @ nvec)
            a = float(c_r @ Q2 @ c_r)
            b = float(nvec @ Q2 @ c_r)           # b < 0 by construction
            # ratio(s) = a + 2 b s + d s^2 over Gamma = 1; push only as
            # deep as the target needs so Gamma stays off the filter floor
            depth = (1.2 * abs(target) + abs(a)) / (2.0 * abs(b))
            s = depth if d <= 0.0 else min(-b / d, depth)
            ratio = a + 2.0 * b * s + d * s * s
            cand = (float(ratio), c_r + s * nvec, pt, Qg, Q2)
        if cand[0] < best[0]:
            best = cand

    ratio, c, pt, Qg, Q2 = best
    if c is None:
        return _report("gamma2-unbounded", "search", 0.0, target, target,
                       budget=0.0, note="no witness found")
    c = c / math.sqrt(float(c @ Qg @ c))         # Gamma(witness)(pt) = 1
    coeffs = {m: float(v) for m, v in zip(_CUBICS, c) if abs(v) > 1e-14}
    f = poly_field(coeffs, name="gamma2-witness")
    p = GroupElement(*pt)
    g = gamma_at(f, f, p)
    g2 = gamma2_at(f, p)
    fd_ratio = g2 / g if g > 1e-6 else math.inf
    pencil_ratio = float(c @ Q2 @ c) / float(c @ Qg @ c)
    agree = abs(fd_ratio - pencil_ratio) <= 1e-3 * abs(pencil_ratio) + 1e-6
    top = sorted(coeffs.items(), key=lambda kv: -abs(kv[1]))[:4]
    note = (f"point {pt}, Gamma {g:.3e}, fd ratio {fd_ratio:.6g}, "
            f"pencil ratio {pencil_ratio:.6g}, top coeffs {top}")
    rep = _report("gamma2-unbounded", f.name, pencil_ratio, target, target,
                  budget=0.0, note=note)
    ok = rep.passed and agree and g > 1e-6
    return InequalityReport(rep.check, rep.function, rep.lhs, rep.rhs, rep.ratio,
                            rep.constant, ok, rep.error_budget, rep.note)


# ---------------------------------------------------------------------------
# Kolmogorov counterexample


def check_kolmogorov_counterexample(t: float = 1.0, seed: int = 90210,
                                    n: int = 400_000) -> list:
    """The R^2 hypoelliptic process where the forward Poincare dies.

    Var of the integrated coordinate matches t^3/3; the test function
    f = y has Gamma(f) = (d_x f)^2 = 0 exactly, so the Poincare rhs is
    zero against a positive variance: that row is an expected violation
    and carries ``passed = False`` deliberately.  The reverse-inequality
    ratio for f = x stays finite (near 1) and is reported.
    """
    u, v = sample_kolmogorov(t, seed, n)
    target = t**3 / 3.0
    v2 = v * v
    se_v2 = float(np.std(v2)) / math.sqrt(n)
    var_v = float(np.mean(v2)) - float(np.mean(v)) ** 2
    rows = [
        _report("kolmogorov-variance", "second coordinate", abs(var_v - target),
                3.0 * se_v2, target, budget=0.0,
                note=f"measured {var_v:.6f} against t^3/3 = {target:.6f}"),
        _report("kolmogorov-forward-poincare", "f = y", var_v, 0.0, math.nan,
                budget=0.0,
                note="expected violation: Gamma(y-field) = 0 exactly while Var > 0; "
                     "no constant C(t) can hold"),
    ]
    # E[second coordinate] from start (1, 0) is y + t x = t
    mean_lin = t + float(np.mean(v))
    se_v = float(np.std(v)) / math.sqrt(n)
    rows.append(_report("kolmogorov-semigroup-linear", "f = y at (1,0)",
                        abs(mean_lin - t), 3.0 * se_v, t, budget=0.0,
                        note=f"measured {mean_lin:.6f} against t = {t:.6f}"))
    # reverse ratio for f = x: Var(u)/ (t Gamma(P_t f)) with Gamma(P_t f) = 1
    var_u = float(np.var(u))
    se_u2 = float(np.std(u * u)) / math.sqrt(n)
    rows.append(_report("kolmogorov-reverse-ratio", "f = x", abs(var_u - t),
                        3.0 * se_u2, var_u / t, budget=0.0,
                        note=f"finite reverse ratio Var/(t Gamma) = {var_u / t:.6f}"))
    return rows


# ---------------------------------------------------------------------------
# adaptive orchestration


_C_POWER = {
    "lsi": 2.0, "beckner-1.25": 2.0, "beckner-1.5": 2.0, "beckner-1.75": 2.0,
    "poincare": 2.0, "correlation": 2.0, "bobkov-semigroup": 2.0,
    "cheeger-l1": 1.0, "bobkov-tensorized": 2.0,
}


def _implied_c1(rep: InequalityReport, used: float) -> float:
    k = _C_POWER.get(rep.check)
    if k is None or rep.rhs <= 0.0 or rep.lhs <= rep.rhs:
        return used
    return used * (rep.lhs / rep.rhs) ** (1.0 / k)


@dataclass(frozen=True)
class SuiteResult:
    reports: tuple
    constants: ConstantEstimate
    first_pass_violations: int
    update_passes: int

    @property
    def violations(self):
        return tuple(r for r in self.reports if not r.passed)


def run_inequality_suite(family: TestFunctionFamily | None = None, t: float = 1.0,
                         constants: ConstantEstimate | None = None,
                         optimizer_budget: int = 16, abs_tol: float = 1e-6,
                         max_updates: int = 6) -> SuiteResult:
    """Phi suite plus Cheeger/Bobkov with the adaptive-constant policy.

    A violation under the working constant is read as a better lower
    bound: C1_working moves to the largest implied constant plus 1e-3
    and both check groups rerun.  The returned reports are the final
    pass; the count of first-pass violations records whether the
    update triggered.
    """
    if family is None:
        family = build_family()
    if constants is None:
        constants = constants_estimate(family, optimizer_budget, abs_tol)
    c1w = constants.C1_working
    first_viol = None
    passes = 0
    while True:
        rows = check_phi_suite(family, t, c1w, abs_tol)
        rows += check_cheeger_bobkov(family, t, c1w, abs_tol)
        bad = [r for r in rows if not r.passed and r.check in _C_POWER]
        if first_viol is None:
            first_viol = len(bad)
        if not bad or passes >= max_updates:
            break
        c1w = max(_implied_c1(r, c1w) for r in bad) + 1e-3
        passes += 1
    final = ConstantEstimate(A=constants.A, C1_lower=constants.C1_lower,
                             C2_lower=constants.C2_lower, C1_working=c1w)
    rows.append(_report("c2-vs-c1sq", "constants", final.C2_lower,
                        c1w * c1w, c1w,
                        note=f"C2_lower {final.C2_lower:.6f} against C1_working^2"))
    rows.sort(key=lambda r: (r.check, r.function))
    return SuiteResult(tuple(rows), final, int(first_viol), passes)
