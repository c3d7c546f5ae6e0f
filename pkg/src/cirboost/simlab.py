"""Simulation studies for the split criterion and the boosting driver.

Every study draws its replicas from independent children of one
``SeedSequence``, so results depend only on the seed and the replica count.
Expected loss reductions are reported unscaled (not multiplied by 100).
"""
import csv
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .boost import BoostConfig, train
from .cir import CirConfig
from .data import Dataset, build_sorted_index
from .errors import DomainError
from .loss import LossSpec
from .tree import TreeBuilder

DGP_KINDS = ("noise", "step", "linear", "linear_u04")


@dataclass(frozen=True)
class DgpSpec:
    """Response model plus feature design.

    ``a_plus_1`` is the number of distinct feature levels, or ``None`` for a
    continuous U(0, 1) feature (U(0, 4) for ``linear_u04``).
    """

    kind: str = "noise"
    sigma: float = 1.0
    n: int = 100
    a_plus_1: Optional[int] = None
    m_noise: int = 0
    dependence: str = "independent"

    def __post_init__(self):
        if self.kind not in DGP_KINDS:
            raise DomainError(f"unknown DGP kind {self.kind!r}")
        if self.n < 2:
            raise DomainError("n must be at least 2")
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if self.a_plus_1 is not None and self.a_plus_1 < 2:
            raise DomainError("a_plus_1 must be at least 2")
        if self.a_plus_1 is not None and self.a_plus_1 > self.n:
            raise DomainError(f"cannot place {self.a_plus_1} levels in {self.n} observations")
        if self.dependence not in ("independent", "autoregressive"):
            raise DomainError(f"unknown dependence {self.dependence!r}")

    @property
    def m(self):
        return 1 + self.m_noise

    def mean_response(self, x1):
        if self.kind == "noise":
            return np.zeros_like(x1)
        if self.kind == "step":
            return np.round(x1)  # half-to-even; only x = 0.5 is affected
        return x1

    def _feature(self, rng, size, train):
        if self.kind == "linear_u04":
            return rng.uniform(0.0, 4.0, size)
        if self.a_plus_1 is None:
            return rng.uniform(0.0, 1.0, size)
        levels = self.a_plus_1
        if train:
            # every level at least once, the rest uniformly
            lv = np.concatenate([np.arange(levels), rng.integers(0, levels, size - levels)])
            rng.shuffle(lv)
        else:
            lv = rng.integers(0, levels, size)
        return (lv + 0.5) / levels

    def features(self, rng, size, train=True):
        X = np.empty((size, self.m), order="F")
        X[:, 0] = self._feature(rng, size, train)
        if self.dependence == "autoregressive":
            m = self.m
            for k in range(1, m):
                # columns numbered 1..m: x_k = (m-k)/m x_{k-1} + N(0, (k/m)^2)
                kk = k + 1
                X[:, k] = (m - kk) / m * X[:, k - 1] + rng.normal(0.0, kk / m, size)
        else:
            for k in range(1, self.m):
                X[:, k] = self._feature(rng, size, train)
        return X

    def draw(self, rng, size, train=True):
        X = self.features(rng, size, train)
        y = rng.normal(self.mean_response(X[:, 0]), self.sigma)
        return X, y


def generate_dgp(spec: DgpSpec, seed) -> Dataset:
    rng = np.random.default_rng(seed)
    X, y = spec.draw(rng, spec.n)
    return Dataset(X, y)


@dataclass
class EstimatorSummary:
    mean: float
    P: float
    stderr: float
    p_stderr: float
    sd: float
    replicas: int


def summarise(values):
    v = np.asarray(values, dtype=float)
    k = v.size
    sd = float(np.std(v, ddof=1)) if k > 1 else float("nan")
    P = float(np.mean(v > 0))
    return EstimatorSummary(
        float(np.mean(v)), P,
        sd / np.sqrt(k) if k > 1 else float("nan"),
        float(np.sqrt(P * (1 - P) / k)) if k > 1 else float("nan"),
        sd, k)


@dataclass
class StudyResult:
    """Per-estimator summaries plus the raw per-replica draws."""

    spec: DgpSpec
    raw: dict = field(default_factory=dict)

    @property
    def replicas(self):
        return len(next(iter(self.raw.values())))

    def summary(self, name) -> EstimatorSummary:
        return summarise(self.raw[name])

    def rows(self, names=("R", "R0", "R0_tilde")):
        return [(name, self.summary(name)) for name in names]


def _fit_root_and_stump(d: Dataset, cfg: CirConfig):
    """Root and optimal-stump fits plus the criterion report at the root."""
    loss = LossSpec("squared_error")
    eta = loss.initial_prediction(d.response)
    derivs = loss.derivatives(d.response, np.full(d.n, eta))
    builder = TreeBuilder(d, build_sorted_index(d), derivs, cfg)
    rep = builder.evaluate(np.ascontiguousarray(builder.index.order))
    if rep.best_feature < 0:
        return rep, eta, None
    j, thr = rep.best_feature, rep.best_threshold
    left = d.features[:, j] <= thr
    stump = (j, thr, float(np.mean(d.response[left])), float(np.mean(d.response[~left])))
    return rep, eta, stump


def _stump_predict(stump, X, fallback):
    if stump is None:
        return np.full(X.shape[0], fallback)
    j, thr, wl, wr = stump
    return np.where(X[:, j] <= thr, wl, wr)


def root_stump_study(spec: DgpSpec, replicas, test_mc=1000, cfg: CirConfig = CirConfig(),
                     seed=1) -> StudyResult:
    """Root-versus-stump decision on ``replicas`` simulated datasets.

    Records, per replica, the training reduction R, the adjusted gain, the
    Monte-Carlo test-loss reduction R0 of the fitted stump over the fitted
    root (``test_mc`` fresh draws), and the optimism terms.
    """
    if replicas < 1:
        raise DomainError("replicas must be at least 1")
    out = {k: np.empty(replicas) for k in
           ("R", "R0", "R0_tilde", "c_root", "c_stump", "train_opt", "test_opt")}
    for r, ss in enumerate(np.random.SeedSequence(seed).spawn(replicas)):
        rng = np.random.default_rng(ss)
        X, y = spec.draw(rng, spec.n)
        d = Dataset(X, y)
        rep, eta, stump = _fit_root_and_stump(d, cfg)
        Xt, yt = spec.draw(rng, test_mc, train=False)
        test_root = np.mean((yt - eta) ** 2)
        test_stump = np.mean((yt - _stump_predict(stump, Xt, eta)) ** 2)
        train_stump = np.mean((y - _stump_predict(stump, X, eta)) ** 2)
        out["R"][r] = rep.R
        out["R0_tilde"][r] = rep.adjusted_gain
        out["R0"][r] = test_root - test_stump
        out["c_root"][r] = rep.c_root
        out["c_stump"][r] = rep.c_stump
        out["test_opt"][r] = test_stump - train_stump
        out["train_opt"][r] = train_stump
    return StudyResult(spec, out)


def multi_feature_bias_curve(m_list, a=None, n=100, replicas=100, cfg: CirConfig = CirConfig(),
                             seed=1, test_mc=None):
    """Mean R, adjusted gain and R0 versus the number of uninformative features.

    ``a`` is the number of split points per feature (``None``: continuous).
    Returns a list of dicts with means and standard deviations.
    """
    curve = []
    for m in m_list:
        if m < 1:
            raise DomainError("m must be at least 1")
        spec = DgpSpec("noise", 1.0, n, None if a is None else a + 1, m_noise=m - 1)
        res = root_stump_study(spec, replicas, test_mc or n, cfg, seed)
        row = {"m": m}
        for name in ("R", "R0_tilde", "R0"):
            s = res.summary(name)
            row[name] = s.mean
            row[name + "_sd"] = s.sd
        curve.append(row)
    return curve


def bound_tightness_study(n=100, a_list=(1, 4, 9, 49, 99), replicas=1000,
                          cfg: CirConfig = CirConfig(), test_mc=1000, seed=1):
    """Monte-Carlo stump optimism against its max-CIR approximation, y independent of x."""
    rows = []
    for a in a_list:
        spec = DgpSpec("noise", 1.0, n, a + 1)
        res = root_stump_study(spec, replicas, test_mc, cfg, seed)
        mc = summarise(res.raw["test_opt"])
        approx = summarise(res.raw["c_stump"])
        ratio = res.raw["c_stump"] / res.raw["c_root"]
        rows.append({
            "a": a,
            "C_stump_mc": mc.mean, "C_stump_mc_se": mc.stderr,
            "C_stump_tilde": approx.mean, "C_stump_tilde_se": approx.stderr,
            "C_root": float(np.mean(res.raw["c_root"])),
            "factor": float(np.mean(ratio)),
        })
    return rows


@dataclass
class CaseResult:
    case: int
    test_loss: float
    n_trained: int
    runtime: float
    constant_test_loss: float
    ensemble: object = field(default=None, repr=False)


def case_spec(case, n=1000, m=10000):
    if case == 1:
        return DgpSpec("linear_u04", 1.0, n)
    if case == 2:
        return DgpSpec("linear_u04", 1.0, n, m_noise=m - 1)
    if case == 3:
        return DgpSpec("linear_u04", 1.0, n, m_noise=m - 1, dependence="autoregressive")
    raise DomainError(f"case must be 1, 2 or 3, got {case}")


def linear_case_experiment(case, seed=1, cfg: BoostConfig = BoostConfig(), n=1000, m=10000):
    """Train on ``n`` draws of y ~ N(x1, 1), x1 ~ U(0, 4) and score on ``n`` fresh draws."""
    spec = case_spec(case, n, m)
    rng = np.random.default_rng(seed)
    X, y = spec.draw(rng, n)
    Xt, yt = spec.draw(rng, n)
    t0 = time.process_time()
    ens = train(Dataset(X, y), cfg)
    runtime = time.process_time() - t0
    test_loss = float(np.mean((yt - ens.predict(Xt)) ** 2))
    return CaseResult(case, test_loss, ens.n_trained, runtime,
                      float(np.mean((yt - ens.initial_prediction) ** 2)), ens)


def write_study_csv(result: StudyResult, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        with_se = result.replicas > 1
        w.writerow(["estimator", "E", "P"] + (["stderr", "p_stderr"] if with_se else []) + ["replicas"])
        for name, s in result.rows():
            w.writerow([name, repr(s.mean), repr(s.P)]
                       + ([repr(s.stderr), repr(s.p_stderr)] if with_se else []) + [s.replicas])


def write_long_csv(rows, key, path):
    """Plot-ready long format: one line per (key value, series)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([key, "series", "value"])
        for row in rows:
            for name, value in row.items():
                if name != key:
                    w.writerow([row[key], name, repr(float(value))])
