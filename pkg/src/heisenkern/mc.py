"""Monte Carlo sampling of the horizontal diffusion and of a degenerate
Gaussian companion process, with batch statistics sized against the
kernel quadrature.

The diffusion generated by X^2 + Y^2 has planar coordinates that are
Brownian motions of variance 2t each (L(x^2) = 2, so quadratic
variation runs at rate 2, not the conventional 1), and the vertical
coordinate is the signed area swept by the planar path.  Paths use
exact Gaussian increments and accumulate the area by the midpoint rule

    z += (x_mid dy - y_mid dx) / 2

whose weak bias on E[z^2] is exactly -t^2/n_steps (derivation in the
tests); the planar moments carry no discretization bias at all.

Randomness is counter-based: stream i of a batch draws from
Philox(SeedSequence((seed, i))), so per-stream output is independent
of how streams are scheduled and aggregation is a plain sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import chi2 as _chi2_dist

from .group import GroupElement
from .kernel import p1_many

__all__ = [
    "PathConfig",
    "BatchStats",
    "Chi2Result",
    "sample_heisenberg",
    "sample_paths",
    "sample_batch",
    "sample_kolmogorov",
    "kernel_cell_masses",
    "chi2_against_kernel",
]

# paths per stream and normal draws per chunk; both only shape the
# internal loops, results depend on (seed, stream) alone
_STREAM_PATHS = 8192
_DRAWS_PER_CHUNK = 1 << 19


@dataclass(frozen=True)
class PathConfig:
    """Time horizon, step count, and master seed for one simulation."""

    t: float
    n_steps: int
    seed: int

    def __post_init__(self):
        if not (self.t > 0.0):
            raise ValueError("t must be > 0")
        if int(self.n_steps) != self.n_steps or self.n_steps < 10:
            raise ValueError("n_steps must be an integer >= 10")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must fit in 64 unsigned bits")


def _stream_generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), int(stream)))))


def _advance(rng, sigma, x, y, z, m):
    """Push (x, y, z) through m steps; mutates z in place."""
    dw = rng.standard_normal((x.size, m, 2))
    dw *= sigma
    dx = dw[:, :, 0]
    dy = dw[:, :, 1]
    xc = x[:, None] + np.cumsum(dx, axis=1)
    yc = y[:, None] + np.cumsum(dy, axis=1)
    # midpoint of the linear interpolant: x_k + dx/2 = xc_k - dx/2
    z += 0.5 * np.sum((xc - 0.5 * dx) * dy - (yc - 0.5 * dy) * dx, axis=1)
    return xc[:, -1], yc[:, -1]


def _simulate_stream(rng, n_paths: int, cfg: PathConfig, record_step: Optional[int] = None):
    """Endpoints (x, y, z) of n_paths paths; optionally also the state
    after ``record_step`` steps (for increment laws)."""
    dt = cfg.t / cfg.n_steps
    sigma = math.sqrt(2.0 * dt)
    x = np.zeros(n_paths)
    y = np.zeros(n_paths)
    z = np.zeros(n_paths)
    chunk = max(1, _DRAWS_PER_CHUNK // (2 * n_paths))
    recorded = None
    step = 0
    while step < cfg.n_steps:
        m = min(chunk, cfg.n_steps - step)
        if record_step is not None and step < record_step < step + m:
            m = record_step - step
        x, y = _advance(rng, sigma, x, y, z, m)
        step += m
        if record_step == step:
            recorded = (x.copy(), y.copy(), z.copy())
    if record_step is None:
        return x, y, z
    return (x, y, z), recorded


def sample_heisenberg(cfg: PathConfig) -> GroupElement:
    """One endpoint draw of the diffusion at time cfg.t (stream 0)."""
    x, y, z = _simulate_stream(_stream_generator(cfg.seed, 0), 1, cfg)
    return GroupElement(float(x[0]), float(y[0]), float(z[0]))


def _stream_plan(n: int):
    size = min(_STREAM_PATHS, max(1, n // 10))
    sizes = [size] * (n // size)
    if n % size:
        sizes.append(n % size)
    return sizes


def sample_paths(n: int, cfg: PathConfig) -> np.ndarray:
    """Endpoints of n independent paths, rows (x, y, z)."""
    if n < 1:
        raise ValueError("n must be positive")
    out = np.empty((n, 3))
    lo = 0
    for i, size in enumerate(_stream_plan(n)):
        x, y, z = _simulate_stream(_stream_generator(cfg.seed, i), size, cfg)
        out[lo : lo + size, 0] = x
        out[lo : lo + size, 1] = y
        out[lo : lo + size, 2] = z
        lo += size
    return out


@dataclass(frozen=True)
class BatchStats:
    """Aggregate moments and an (r, z) histogram for a sample batch.

    Standard errors come from batch means over the streams, which for
    independent paths estimates the plain sigma/sqrt(n).
    """

    n: int
    t: float
    n_streams: int
    mean_x: float
    mean_z: float
    mean_r2: float
    mean_z2: float
    se_x: float
    se_z: float
    se_r2: float
    se_z2: float
    hist: np.ndarray
    r_edges: np.ndarray
    z_edges: np.ndarray


def _batch_se(stream_means, stream_sizes, overall, n):
    b = len(stream_means)
    if b < 2:
        return float("nan")
    s = sum(size * (m - overall) ** 2 for m, size in zip(stream_means, stream_sizes))
    return math.sqrt(s / (b - 1) / n)


def sample_batch(n: int, cfg: PathConfig, r_edges=None, z_edges=None) -> BatchStats:
    """Moment estimates with batch-means errors plus cell counts.

    Default bins: 20 radial cells over r <= 5 sqrt(t) by 10 vertical
    cells over |z| <= 2t, the 200-cell grid the kernel cross-check uses.
    """
    if n < 1000:
        raise ValueError("n must be >= 1000")
    st = math.sqrt(cfg.t)
    if r_edges is None:
        r_edges = np.linspace(0.0, 5.0, 21) * st
    if z_edges is None:
        z_edges = np.linspace(-2.0, 2.0, 11) * cfg.t
    r_edges = np.asarray(r_edges, float)
    z_edges = np.asarray(z_edges, float)

    sizes = _stream_plan(n)
    hist = np.zeros((r_edges.size - 1, z_edges.size - 1))
    means = {key: [] for key in ("x", "z", "r2", "z2")}
    for i, size in enumerate(sizes):
        x, y, z = _simulate_stream(_stream_generator(cfg.seed, i), size, cfg)
        r2 = x * x + y * y
        means["x"].append(float(np.mean(x)))
        means["z"].append(float(np.mean(z)))
        means["r2"].append(float(np.mean(r2)))
        means["z2"].append(float(np.mean(z * z)))
        hist += np.histogram2d(np.sqrt(r2), z, bins=(r_edges, z_edges))[0]

    overall = {
        key: sum(m * s for m, s in zip(vals, sizes)) / n for key, vals in means.items()
    }
    se = {key: _batch_se(vals, sizes, overall[key], n) for key, vals in means.items()}
    return BatchStats(
        n=n,
        t=cfg.t,
        n_streams=len(sizes),
        mean_x=overall["x"],
        mean_z=overall["z"],
        mean_r2=overall["r2"],
        mean_z2=overall["z2"],
        se_x=se["x"],
        se_z=se["z"],
        se_r2=se["r2"],
        se_z2=se["z2"],
        hist=hist,
        r_edges=r_edges,
        z_edges=z_edges,
    )


def sample_kolmogorov(t: float, seed: int, n: Optional[int] = None):
    """Exact draw(s) of (B_t, int_0^t B_s ds) for a standard Brownian B.

    The pair is centered Gaussian with covariance
    [[t, t^2/2], [t^2/2, t^3/3]], realized from two standard normals by
    the lower Cholesky factor [[sqrt(t), 0],
    [t^{3/2}/2, t^{3/2}/(2 sqrt(3))]].  With ``n`` given, returns two
    arrays of length n from a single counter-based stream.
    """
    if not (t > 0.0):
        raise ValueError("t must be > 0")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed),))))
    # pair-major draws, so the n-draw arrays extend the single draw
    g = rng.standard_normal((1 if n is None else int(n), 2)).T
    u = math.sqrt(t) * g[0]
    v = 0.5 * t ** 1.5 * (g[0] + g[1] / math.sqrt(3.0))
    if n is None:
        return float(u[0]), float(v[0])
    return u, v


def kernel_cell_masses(r_edges, z_edges, t: float = 1.0, n_nodes: int = 8) -> np.ndarray:
    """Heat-kernel mass of each solid cell {r in dr, z in dz} at time t.

    Gauss rule per cell on the density 2 pi r p_t(r, z); this is the
    quadrature side of the histogram cross-check.
    """
    r_edges = np.asarray(r_edges, float)
    z_edges = np.asarray(z_edges, float)
    xg, wg = np.polynomial.legendre.leggauss(n_nodes)

    def per_cell(edges):
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes = mid[:, None] + half[:, None] * xg[None, :]
        weights = half[:, None] * wg[None, :]
        return nodes.ravel(), weights.ravel()

    rn, rw = per_cell(r_edges)
    zn, zw = per_cell(z_edges)
    st = math.sqrt(t)
    dens = p1_many(rn[:, None] / st, zn[None, :] / t) / (t * t)
    integrand = 2.0 * math.pi * rn[:, None] * dens
    cellwise = (rw[:, None] * zw[None, :]) * integrand
    nr = r_edges.size - 1
    nz = z_edges.size - 1
    return cellwise.reshape(nr, n_nodes, nz, n_nodes).sum(axis=(1, 3))


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    dof: int
    p_value: float
    n_categories: int


def chi2_against_kernel(stats: BatchStats, min_expected: float = 5.0) -> Chi2Result:
    """Pearson chi-squared of the batch histogram against kernel masses.

    Cells whose expected count falls below ``min_expected`` are merged
    with the out-of-grid remainder into one category, keeping the
    asymptotic chi-squared distribution honest.
    """
    masses = kernel_cell_masses(stats.r_edges, stats.z_edges, stats.t)
    expected = stats.n * masses
    observed = stats.hist
    keep = expected >= min_expected
    rest_exp = stats.n * max(0.0, 1.0 - float(masses.sum())) + float(expected[~keep].sum())
    rest_obs = stats.n - float(observed.sum()) + float(observed[~keep].sum())
    stat = float(np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep]))
    ncat = int(keep.sum())
    if rest_exp > 0.0:
        stat += (rest_obs - rest_exp) ** 2 / rest_exp
        ncat += 1
    dof = ncat - 1
    return Chi2Result(stat, dof, float(_chi2_dist.sf(stat, dof)), ncat)
