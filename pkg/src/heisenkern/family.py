"""Seeded families of smooth test functions with analytic gradients.

The default family mixes compactly supported mollifier bumps (group
offsets from centers inside d <= 3, support inside d <= 6), polynomials
of degree <= 3, trig-modulated bumps with wavenumbers <= 4, pairwise
linear combinations, and the distinguished equality-case field
Xhat(log h) as the last member.  Every member carries an exact frame
gradient, which the verification harness relies on for Gamma terms.

Compact members also carry a coordinate bounding box of their support;
the harness integrates them on their own box (plus an exact outside
term, the integrand being identically zero there) instead of forcing a
global grid to resolve every bump.  Combinations pair members of the
same kind class, compact with compact and polynomial with polynomial,
so each combination again has either a box or polynomial growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import cc_distance_many
from .group import ScalarField, poly_field
from .kernel import xhat_log_h_field

__all__ = [
    "DEFAULT_FAMILY_SEED",
    "TestFunctionFamily",
    "bump_field",
    "combine_fields",
    "build_family",
    "support_radius_bound",
    "boxes_disjoint",
]

DEFAULT_FAMILY_SEED = 20260814

_SUPPORT_D_MAX = 6.0
# center distance + width + 2 sqrt(pi vert) stays below 6 for the
# extreme draws: 1.9 + 1.4 + 2 sqrt(0.55 pi) = 5.93
_CENTER_D_MAX = 1.9
_WIDTH_LO, _WIDTH_HI = 0.9, 1.4
_VERT_LO, _VERT_HI = 0.3, 0.55
_WAVENUMBER_MAX = 4.0


def _mollifier(q):
    """exp(1 - 1/(1-q)) on q < 1, 0 beyond; C^infty across the edge."""
    q = np.asarray(q, dtype=float)
    inside = q < 1.0 - 1e-12
    t = np.where(inside, 1.0 - q, 1.0)
    with np.errstate(over="ignore", under="ignore"):
        val = np.where(inside, np.exp(1.0 - 1.0 / t), 0.0)
    return val


def _mollifier_dq(q):
    """d/dq of the mollifier: -phi(q)/(1-q)^2, again 0 beyond the edge."""
    q = np.asarray(q, dtype=float)
    inside = q < 1.0 - 1e-12
    t = np.where(inside, 1.0 - q, 1.0)
    with np.errstate(over="ignore", under="ignore"):
        val = np.where(inside, -np.exp(1.0 - 1.0 / t) / (t * t), 0.0)
    return val


def bump_field(center, width: float, vert: Optional[float] = None,
               name: str = "bump") -> ScalarField:
    """Mollifier bump in group offsets g = center^{-1} . p.

    q(g) = (g1^2 + g2^2)/w^2 + g3^2/v^2 with an independent vertical
    half-width v (default w/3).  Since the frame fields are
    left-invariant, the frame gradient at p equals the frame gradient
    of the profile at g, available in closed form; no numerical
    differentiation anywhere.
    """
    cx, cy, cz = (float(c) for c in center)
    w2 = float(width) ** 2
    v = float(vert) if vert is not None else float(width) / 3.0
    v2 = v * v

    def offsets(x, y, z):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        g1 = x - cx
        g2 = y - cy
        g3 = z - cz + 0.5 * (cy * g1 - cx * g2)
        return g1, g2, g3

    def ev(x, y, z):
        g1, g2, g3 = offsets(x, y, z)
        return _mollifier((g1 * g1 + g2 * g2) / w2 + g3 * g3 / v2)

    def grad(x, y, z):
        g1, g2, g3 = offsets(x, y, z)
        q = (g1 * g1 + g2 * g2) / w2 + g3 * g3 / v2
        dphi = _mollifier_dq(q)
        qx = 2.0 * g1 / w2
        qy = 2.0 * g2 / w2
        qz = 2.0 * g3 / v2
        return (
            dphi * (qx - 0.5 * g2 * qz),
            dphi * (qy + 0.5 * g1 * qz),
            dphi * qz,
        )

    return ScalarField(eval=ev, analytic_gradient=grad, name=name)


def support_box(center, width: float, vert: float) -> tuple:
    """Coordinate bounding box (x_lo, x_hi, y_lo, y_hi, z_lo, z_hi).

    Offsets satisfy |g1|, |g2| <= w and |g3| <= v; the z coordinate
    picks up the twist 0.5 (cy g1 - cx g2) on top of g3.
    """
    cx, cy, cz = (float(c) for c in center)
    zh = float(vert) + 0.5 * float(width) * (abs(cx) + abs(cy))
    return (cx - width, cx + width, cy - width, cy + width, cz - zh, cz + zh)


def support_radius_bound(center, width: float, vert: float) -> float:
    """Upper bound for the CC distance of the bump's support from 0.

    A horizontal segment reaches (g1, g2, 0) at cost |g_h| <= w and a
    vertical displacement costs 2 sqrt(pi |g3|) with |g3| <= v, so
    d(support) <= d(center) + w + 2 sqrt(pi v).
    """
    cx, cy, cz = center
    dc = float(cc_distance_many(cx, cy, cz))
    return dc + float(width) + 2.0 * math.sqrt(math.pi * float(vert))


def _modulated_bump(center, width: float, vert: float, k, phase: float,
                    name: str) -> ScalarField:
    """bump * cos(k1 x + k2 y + k3 z + phase) with exact product gradient."""
    base = bump_field(center, width, vert, name=name + "[carrier]")
    k1, k2, k3 = (float(c) for c in k)
    ph = float(phase)

    def ev(x, y, z):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        return base.eval(x, y, z) * np.cos(k1 * x + k2 * y + k3 * z + ph)

    def grad(x, y, z):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        b = base.eval(x, y, z)
        bx, by, bz = base.analytic_gradient(x, y, z)
        arg = k1 * x + k2 * y + k3 * z + ph
        c = np.cos(arg)
        ms = -np.sin(arg)
        # frame components of the phase: X arg = k1 - (y/2) k3, etc.
        cx = ms * (k1 - 0.5 * y * k3)
        cy = ms * (k2 + 0.5 * x * k3)
        cz = ms * k3
        return bx * c + b * cx, by * c + b * cy, bz * c + b * cz

    return ScalarField(eval=ev, analytic_gradient=grad, name=name)


def combine_fields(parts: Sequence[ScalarField], coeffs, name: str) -> ScalarField:
    """Linear combination sum c_i f_i; gradients add (all parts carry them)."""
    parts = list(parts)
    coeffs = [float(c) for c in coeffs]
    if len(parts) != len(coeffs) or not parts:
        raise ValueError("parts and coeffs must be matching nonempty sequences")
    for f in parts:
        if f.analytic_gradient is None:
            raise ValueError(f"part {f.name!r} lacks an analytic gradient")

    def ev(x, y, z):
        acc = coeffs[0] * np.asarray(parts[0].eval(x, y, z), dtype=float)
        for c, f in zip(coeffs[1:], parts[1:]):
            acc = acc + c * np.asarray(f.eval(x, y, z), dtype=float)
        return acc

    def grad(x, y, z):
        gx, gy, gz = parts[0].analytic_gradient(x, y, z)
        gx = coeffs[0] * np.asarray(gx, dtype=float)
        gy = coeffs[0] * np.asarray(gy, dtype=float)
        gz = coeffs[0] * np.asarray(gz, dtype=float)
        for c, f in zip(coeffs[1:], parts[1:]):
            hx, hy, hz = f.analytic_gradient(x, y, z)
            gx = gx + c * np.asarray(hx, dtype=float)
            gy = gy + c * np.asarray(hy, dtype=float)
            gz = gz + c * np.asarray(hz, dtype=float)
        return gx, gy, gz

    return ScalarField(eval=ev, analytic_gradient=grad, name=name)


def _union_box(a: tuple, b: tuple) -> tuple:
    return (min(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]),
            max(a[3], b[3]), min(a[4], b[4]), max(a[5], b[5]))


def boxes_disjoint(a: tuple, b: tuple) -> bool:
    return any(a[2 * k + 1] <= b[2 * k] or b[2 * k + 1] <= a[2 * k]
               for k in range(3))


@dataclass(frozen=True)
class TestFunctionFamily:
    """Members plus the construction parameters that produced them.

    ``boxes`` maps each member name to its support bounding box in lab
    coordinates, or None for members of polynomial growth (no compact
    support).  ``atoms`` lists the (center, width, vert) mollifier
    frames making up a compact member; integrating in those offset
    frames keeps the support a well-proportioned box instead of the
    thin sheared slab it is in lab coordinates.
    """

    members: tuple
    seed: int
    bump_params: tuple      # (center, width, vert) per bump or trig carrier
    poly_degrees: tuple
    wavenumbers: tuple      # (k1, k2, k3) per modulated bump
    combo_index: dict       # member name -> (part names, coeffs)
    kinds: dict             # member name -> bump | poly | trig | combo | fstar
    boxes: dict             # member name -> box tuple or None
    atoms: dict             # member name -> ((center, width, vert), ...) or None

    def __len__(self):
        return len(self.members)

    def by_name(self, name: str) -> ScalarField:
        for m in self.members:
            if m.name == name:
                return m
        raise KeyError(name)

    @property
    def fstar(self) -> ScalarField:
        return self.members[-1]

    def subset(self, names: Sequence[str]) -> "TestFunctionFamily":
        """Family view restricted to ``names``, metadata carried along."""
        wanted = [self.by_name(n) for n in names]
        return TestFunctionFamily(
            members=tuple(wanted), seed=self.seed, bump_params=self.bump_params,
            poly_degrees=self.poly_degrees, wavenumbers=self.wavenumbers,
            combo_index=self.combo_index, kinds=self.kinds, boxes=self.boxes,
            atoms=self.atoms)


def _draw_center(rng) -> tuple:
    # rejection against the CC ball; the z window covers the whole
    # reachable range |z| <= d^2/(4 pi) at this radius
    while True:
        x, y = rng.uniform(-_CENTER_D_MAX, _CENTER_D_MAX, size=2)
        z = rng.uniform(-0.3, 0.3)
        if float(cc_distance_many(x, y, z)) <= _CENTER_D_MAX:
            return (float(x), float(y), float(z))


def _draw_poly(rng, idx: int) -> ScalarField:
    monomials = [
        (i, j, k)
        for i in range(4)
        for j in range(4)
        for k in range(2)
        if 1 <= i + j + 2 * k <= 3
    ]
    n_terms = int(rng.integers(1, 4))
    picks = rng.choice(len(monomials), size=n_terms, replace=False)
    coeffs = {}
    for p in picks:
        coeffs[monomials[int(p)]] = float(rng.uniform(-1.5, 1.5))
    return poly_field(coeffs, name=f"poly-{idx:03d}")


def _clamped_coeff(rng) -> float:
    c = float(rng.uniform(-1.2, 1.2))
    if abs(c) < 0.2:
        c = math.copysign(0.2, c if c != 0.0 else 1.0)
    return c


def build_family(size: int = 200, seed: int = DEFAULT_FAMILY_SEED) -> TestFunctionFamily:
    """Deterministic family of ``size`` members ending with Xhat(log h).

    Composition at the default size: 40 bumps, 30 polynomials, 20
    trig-modulated bumps, pairwise same-class combinations to fill,
    f* last.  Smaller sizes shrink each block proportionally (at least
    one bump is always present, and f* is always the final member).
    """
    if size < 2:
        raise ValueError("family needs at least a bump and f*")
    rng = np.random.default_rng(int(seed))

    n_free = size - 1
    n_bump = max(1, round(n_free * 40 / 199))
    n_poly = round(n_free * 30 / 199)
    n_trig = round(n_free * 20 / 199)
    n_combo = n_free - n_bump - n_poly - n_trig
    if n_combo < 0:
        n_bump += n_combo
        n_combo = 0

    members = []
    kinds = {}
    boxes = {}
    atoms = {}
    bump_params = []
    for i in range(n_bump):
        center = _draw_center(rng)
        width = float(rng.uniform(_WIDTH_LO, _WIDTH_HI))
        vert = float(rng.uniform(_VERT_LO, _VERT_HI))
        if support_radius_bound(center, width, vert) > _SUPPORT_D_MAX:
            raise AssertionError("draw windows violate the support bound")
        name = f"bump-{i:03d}"
        bump_params.append((center, width, vert))
        members.append(bump_field(center, width, vert, name=name))
        kinds[name] = "bump"
        boxes[name] = support_box(center, width, vert)
        atoms[name] = ((center, width, vert),)

    poly_degrees = []
    for i in range(n_poly):
        f = _draw_poly(rng, i)
        poly_degrees.append(3)
        members.append(f)
        kinds[f.name] = "poly"
        boxes[f.name] = None
        atoms[f.name] = None

    wavenumbers = []
    for i in range(n_trig):
        center = _draw_center(rng)
        width = float(rng.uniform(_WIDTH_LO, _WIDTH_HI))
        vert = float(rng.uniform(_VERT_LO, _VERT_HI))
        k = rng.uniform(-_WAVENUMBER_MAX, _WAVENUMBER_MAX, size=3)
        while float(np.max(np.abs(k))) < 0.3:
            k = rng.uniform(-_WAVENUMBER_MAX, _WAVENUMBER_MAX, size=3)
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        name = f"trig-{i:03d}"
        wavenumbers.append(tuple(float(c) for c in k))
        bump_params.append((center, width, vert))
        members.append(_modulated_bump(center, width, vert, k, phase, name=name))
        kinds[name] = "trig"
        boxes[name] = support_box(center, width, vert)
        atoms[name] = ((center, width, vert),)

    # same-class pairings keep every combination either compactly
    # supported or of polynomial growth; compact pairs are restricted
    # to disjoint support boxes so a combination integrates as two
    # independent mollifier frames (no sheared overlap region to grid)
    compact = [m for m in members if boxes[m.name] is not None]
    polys = [m for m in members if boxes[m.name] is None]
    disjoint_pairs = [(i, j) for i in range(len(compact))
                      for j in range(i + 1, len(compact))
                      if boxes_disjoint(boxes[compact[i].name], boxes[compact[j].name])]
    combo_index = {}
    n_poly_combo = min(round(n_combo / 4), 0 if len(polys) < 2 else n_combo)
    n_compact_combo = n_combo - n_poly_combo if disjoint_pairs else 0
    n_poly_combo = n_combo - n_compact_combo
    for i in range(n_combo):
        if i < n_compact_combo:
            ia, ib = disjoint_pairs[int(rng.integers(len(disjoint_pairs)))]
            pa, pb = compact[ia], compact[ib]
        else:
            ia, ib = (int(v) for v in rng.choice(len(polys), size=2, replace=False))
            pa, pb = polys[ia], polys[ib]
        ca, cb = _clamped_coeff(rng), _clamped_coeff(rng)
        name = f"combo-{i:03d}"
        combo_index[name] = ((pa.name, pb.name), (ca, cb))
        members.append(combine_fields([pa, pb], [ca, cb], name))
        kinds[name] = "combo"
        if i < n_compact_combo:
            boxes[name] = _union_box(boxes[pa.name], boxes[pb.name])
            atoms[name] = atoms[pa.name] + atoms[pb.name]
        else:
            boxes[name] = None
            atoms[name] = None

    fstar = xhat_log_h_field(method="spline")
    members.append(fstar)
    kinds[fstar.name] = "fstar"
    boxes[fstar.name] = None
    atoms[fstar.name] = None

    return TestFunctionFamily(
        members=tuple(members),
        seed=int(seed),
        bump_params=tuple(bump_params),
        poly_degrees=tuple(poly_degrees),
        wavenumbers=tuple(wavenumbers),
        combo_index=combo_index,
        kinds=kinds,
        boxes=boxes,
        atoms=atoms,
    )
