"""Maxima of the CIR process dS = 2(1 - S) dt + 2 sqrt(2 S) dW on a time grid.

The process is observed at the transformed split quantiles of a feature;
the law of its maximum scales the root optimism into a stump optimism.
Laws are cached by grid content and seeded from it, so the same grid
always yields the same fitted law no matter which node, tree or worker
asks for it.
"""
import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateFitError, DomainError, EmptyGridError

EULER_GAMMA = 0.5772156649015329
# CIR parameters: speed, long-run mean, volatility
CIR_SPEED = 2.0
CIR_MEAN = 1.0
CIR_VOL = 2.0 * np.sqrt(2.0)
TAIL_PROB = 1e-6


@dataclass(frozen=True)
class CirConfig:
    epsilon: float = 1e-7
    n_paths: int = 1000
    seed: int = 1
    integral_grid_points: int = 1000

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.5:
            raise DomainError("epsilon must lie in (0, 0.5)")
        if self.n_paths < 2:
            raise DomainError("n_paths must be at least 2")
        if self.integral_grid_points < 10:
            raise DomainError("integral_grid_points must be at least 10")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")


@dataclass(frozen=True)
class TauGrid:
    taus: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.taus, dtype=float).ravel()
        if t.size and (t[0] < 0 or np.any(np.diff(t) <= 0)):
            raise DomainError("tau grid must be non-negative and strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "taus", t)

    def __len__(self):
        return self.taus.size

    def key(self):
        return hashlib.blake2b(self.taus.tobytes(), digest_size=8).digest()


def tau_transform(u, epsilon=1e-7):
    """Map a split quantile ``u`` in [0, 1] to CIR time, clamping to [eps, 1-eps]."""
    u = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise DomainError("u must lie in [0, 1]")
    uc = np.clip(u, epsilon, 1.0 - epsilon)
    tau = 0.5 * np.log(uc * (1.0 - epsilon) / (epsilon * (1.0 - uc)))
    tau = np.maximum(tau, 0.0)
    return float(tau) if tau.ndim == 0 else tau


def tau_grid_from_quantiles(u, epsilon=1e-7) -> TauGrid:
    taus = np.unique(np.atleast_1d(tau_transform(u, epsilon)))
    if taus.size == 0:
        raise EmptyGridError("no split points")
    return TauGrid(taus)


def tau_grid_from_sorted_values(values, epsilon=1e-7) -> TauGrid:
    """Grid for a node whose feature values are given in ascending order."""
    values = np.asarray(values, dtype=float)
    cut = np.flatnonzero(np.diff(values) > 0)
    if cut.size == 0:
        raise EmptyGridError("feature has no split point in this node")
    return tau_grid_from_quantiles((cut + 1) / values.size, epsilon)


def node_tau_grid(d, index, node_rows, j, cfg: CirConfig) -> TauGrid:
    node_rows = np.asarray(node_rows, dtype=np.intp)
    mask = np.zeros(d.n, dtype=bool)
    mask[node_rows] = True
    order = index.order[j]
    return tau_grid_from_sorted_values(d.features[order[mask[order]], j], cfg.epsilon)


def split_tau_grid(a, epsilon=1e-7) -> TauGrid:
    """Grid of ``a`` split points between equally frequent feature levels."""
    if a < 1:
        raise EmptyGridError("need at least one split point")
    return tau_grid_from_quantiles(np.arange(1, a + 1) / (a + 1), epsilon)


def dense_tau_grid(epsilon=1e-7, step=0.01) -> TauGrid:
    """Evenly spaced grid over the whole clamped range [0, tau(1 - eps)]."""
    top = tau_transform(1.0 - epsilon, epsilon)
    return TauGrid(np.append(np.arange(0.0, top, step), top))


def simulate_cir_path(taus, rng, s0=None):
    """Exact CIR path on ``taus``; starts from the stationary Gamma(1/2, 2) law.

    With d = 4ab/sigma^2 = 1 the noncentral chi-square transition
    c * (Z + sqrt(lam))^2, c = 1 - exp(-2 dt), lam = S exp(-2 dt) / c,
    is rewritten as (sqrt(c) Z + exp(-dt) sqrt(S))^2, which stays exact and
    finite as dt -> 0.
    """
    taus = np.asarray(taus, dtype=float)
    s = rng.chisquare(1.0) if s0 is None else float(s0)
    path = np.empty(taus.size)
    path[0] = s
    for k, dt in enumerate(np.diff(taus), start=1):
        z = rng.standard_normal()
        s = (np.sqrt(-np.expm1(-2.0 * dt)) * z + np.exp(-dt) * np.sqrt(s)) ** 2
        path[k] = s
    return path


def simulate_cir_max_samples(grid: TauGrid, n_paths, rng):
    """``n_paths`` independent draws of max_k S(tau_k), vectorised over paths."""
    if len(grid) == 0:
        raise EmptyGridError("empty tau grid")
    s = rng.chisquare(1.0, n_paths)
    smax = s.copy()
    dts = np.diff(grid.taus)
    decay = np.exp(-dts)
    noise_sd = np.sqrt(-np.expm1(-2.0 * dts))
    z = np.empty(n_paths)
    for k in range(dts.size):
        rng.standard_normal(out=z)
        np.sqrt(s, out=s)
        s *= decay[k]
        s += noise_sd[k] * z
        np.square(s, out=s)
        np.maximum(smax, s, out=smax)
    return smax


def simulate_cir_path_max(grid: TauGrid, rng) -> float:
    return float(simulate_cir_max_samples(grid, 1, rng)[0])


def fit_gumbel(samples):
    """Method-of-moments Gumbel fit, returns ``(location, scale)``."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise DegenerateFitError("need at least two samples")
    sd = float(np.std(x, ddof=1))
    if not sd > 0:
        raise DegenerateFitError("samples are constant")
    scale = sd * np.sqrt(6.0) / np.pi
    return float(np.mean(x) - EULER_GAMMA * scale), float(scale)


@dataclass(frozen=True)
class CirMaxDistribution:
    form: str  # "exact_gamma_single_point" or "gumbel"
    location: float = 0.0
    scale: float = 2.0

    def __post_init__(self):
        if self.form not in ("exact_gamma_single_point", "gumbel"):
            raise DomainError(f"unknown form {self.form!r}")
        if self.form == "gumbel" and not self.scale > 0:
            raise DomainError("gumbel scale must be positive")

    @property
    def is_exact(self):
        return self.form == "exact_gamma_single_point"

    def mean(self):
        if self.is_exact:
            return 1.0
        return self.location + EULER_GAMMA * self.scale

    def log_cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_exact:
            with np.errstate(divide="ignore"):
                return np.where(x > 0, np.log(special.gammainc(0.5, np.maximum(x, 0) / 2.0)), -np.inf)
        return -np.exp(-(x - self.location) / self.scale)

    def cdf(self, x):
        return np.exp(self.log_cdf(x))

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if self.is_exact:
            return 2.0 * special.gammaincinv(0.5, p)
        return self.location - self.scale * np.log(-np.log(p))

    def sample(self, size, rng):
        if self.is_exact:
            return rng.chisquare(1.0, size)
        return rng.gumbel(self.location, self.scale, size)


EXACT_SINGLE_POINT = CirMaxDistribution("exact_gamma_single_point")

_cache_lock = threading.Lock()
_law_cache: "OrderedDict[tuple, CirMaxDistribution]" = OrderedDict()
_CACHE_SIZE = 8192


def grid_rng(grid: TauGrid, seed):
    """Counter-based stream keyed by the seed and the grid's content."""
    key = int.from_bytes(grid.key(), "little")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, key])))


def max_cir_distribution(grid: TauGrid, cfg: CirConfig) -> CirMaxDistribution:
    if len(grid) == 0:
        raise EmptyGridError("empty tau grid")
    if len(grid) == 1:
        return EXACT_SINGLE_POINT
    key = (grid.key(), len(grid), cfg.n_paths, cfg.seed)
    with _cache_lock:
        law = _law_cache.get(key)
        if law is not None:
            _law_cache.move_to_end(key)
            return law
    samples = simulate_cir_max_samples(grid, cfg.n_paths, grid_rng(grid, cfg.seed))
    law = CirMaxDistribution("gumbel", *fit_gumbel(samples))
    with _cache_lock:
        _law_cache[key] = law
        if len(_law_cache) > _CACHE_SIZE:
            _law_cache.popitem(last=False)
    return law


def clear_law_cache():
    with _cache_lock:
        _law_cache.clear()


def multi_feature_stump_optimism(c_root, per_feature_laws, cfg: CirConfig, counts=None):
    """Expected maximum of independent B_j = c_root * (1 + max S_j).

    Computes the integral over z >= 0 of 1 - prod_j P(B_j <= z) with the
    trapezoidal rule on ``cfg.integral_grid_points`` nodes. ``counts``
    gives multiplicities when several features share one law.
    """
    laws = list(per_feature_laws)
    if not laws:
        raise DomainError("need at least one law")
    if c_root < 0:
        raise DomainError("c_root must be non-negative")
    if c_root == 0:
        return 0.0
    counts = np.ones(len(laws)) if counts is None else np.asarray(counts, dtype=float)
    top = max(float(law.quantile(1.0 - TAIL_PROB)) for law in laws)
    # z = c_root * (1 + x); integrate over x in [-1, top] and rescale
    x = np.linspace(-1.0, top, cfg.integral_grid_points)
    log_prod = np.zeros_like(x)
    for law, k in zip(laws, counts):
        log_prod += k * law.log_cdf(x)
    integrand = -np.expm1(log_prod)
    return float(c_root * np.trapezoid(integrand, x))


def simulate_bridge_ratio_max(u_grid, n_paths, seed, chunk=2000):
    """Draws of max_u B(u)^2 / (u (1 - u)) for a standard Brownian bridge B.

    The Wiener path is sampled exactly at the grid points and at u = 1,
    then pinned via B(u) = W(u) - u W(1).
    """
    u = np.unique(np.asarray(u_grid, dtype=float))
    if u.size == 0 or u[0] <= 0.0 or u[-1] >= 1.0:
        raise DomainError("u grid must lie strictly inside (0, 1)")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    knots = np.append(u, 1.0)
    sd = np.sqrt(np.diff(knots, prepend=0.0))
    denom = u * (1.0 - u)
    out = np.empty(n_paths)
    for start in range(0, n_paths, chunk):
        stop = min(start + chunk, n_paths)
        w = np.cumsum(rng.standard_normal((stop - start, knots.size)) * sd, axis=1)
        b = w[:, :-1] - u * w[:, -1:]
        out[start:stop] = np.max(b * b / denom, axis=1)
    return out
