"""Greedy binary trees whose splits are charged an optimism penalty.

A node is split only if the training-loss reduction R of its best split
exceeds the stump optimism minus the root optimism. All three terms are
reported per node on the per-training-set scale: R uses the global size
n (1/(2n) factor), and the node's sandwich root optimism is multiplied by
its share of the data, n_t / n.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .cir import (CirConfig, max_cir_distribution, multi_feature_stump_optimism,
                  tau_grid_from_quantiles)
from .errors import DomainError, HessianDegenerateError

# features scanned per vectorised block; bounds peak memory for wide data
FEATURE_BLOCK = 256


class ChildStats(NamedTuple):
    """Sufficient statistics of a node's derivatives."""
    n: int
    G: float
    H: float
    GG: float
    GH: float
    HH: float

    @classmethod
    def of(cls, g, h):
        return cls(len(g), float(np.sum(g)), float(np.sum(h)), float(np.dot(g, g)),
                   float(np.dot(g, h)), float(np.dot(h, h)))


@dataclass
class OptimismReport:
    R: float
    c_root: float
    c_stump: float
    adjusted_gain: float
    best_feature: int = -1
    best_threshold: float = math.nan
    node_share: float = 1.0
    c_stump_conditional: float = math.nan
    n_splittable: int = 0

    @classmethod
    def make(cls, R, c_root, c_stump, **kw):
        return cls(R, c_root, c_stump, R + c_root - c_stump, **kw)

    @property
    def splits(self):
        return self.adjusted_gain > 0


@dataclass
class Node:
    n_obs: int
    weight: float
    report: Optional[OptimismReport] = None
    feature: int = -1
    threshold: float = math.nan
    left: Optional["Node"] = None
    right: Optional["Node"] = None
    node_id: int = 0

    @property
    def is_leaf(self):
        return self.left is None


def leaf_weight(G, H):
    if not H > 0:
        raise HessianDegenerateError(f"hessian sum {H} is not positive")
    return -G / H


def root_optimism(g, h, w=None):
    """Sandwich estimate sum((g + h w)^2) / (n_t * sum(h)) for one node."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.size == 0:
        raise DomainError("empty node")
    H = float(np.sum(h))
    if not H > 0:
        raise HessianDegenerateError(f"hessian sum {H} is not positive")
    if w is None:
        w = -float(np.sum(g)) / H
    r = g + h * w
    return float(np.dot(r, r)) / (g.size * H)


def root_optimism_from_stats(s: ChildStats):
    if s.n == 0:
        raise DomainError("empty node")
    if not s.H > 0:
        raise HessianDegenerateError(f"hessian sum {s.H} is not positive")
    w = -s.G / s.H
    ss = s.GG + 2.0 * w * s.GH + w * w * s.HH
    return max(ss, 0.0) / (s.n * s.H)


def conditional_stump_optimism(left: ChildStats, right: ChildStats):
    """Optimism of a stump whose split point is fixed in advance."""
    if left.n == 0 or right.n == 0:
        raise DomainError("both children must be non-empty")
    n = left.n + right.n
    return (root_optimism_from_stats(left) * left.n / n
            + root_optimism_from_stats(right) * right.n / n)


def best_split_for_feature(d, index, node_rows, j, derivatives, n_total=None):
    """Exact greedy scan of feature ``j``.

    Returns ``(threshold, R, left_stats, right_stats)`` or ``None`` when the
    feature takes a single value in the node.
    """
    node_rows = np.asarray(node_rows, dtype=np.intp)
    n_total = d.n if n_total is None else n_total
    mask = np.zeros(d.n, dtype=bool)
    mask[node_rows] = True
    order = index.order[j][mask[index.order[j]]]
    if order.size < 2:
        return None
    x = d.features[order, j]
    g = derivatives.g[order]
    h = derivatives.h[order]
    valid = np.diff(x) > 0
    if not valid.any():
        return None
    GL = np.cumsum(g)[:-1]
    HL = np.cumsum(h)[:-1]
    G, H = float(np.sum(g)), float(np.sum(h))
    GR, HR = G - GL, H - HL
    gain = np.where(valid, (GL * GL / HL + GR * GR / HR - G * G / H) / (2.0 * n_total), -np.inf)
    p = int(np.argmax(gain))
    left = ChildStats.of(g[:p + 1], h[:p + 1])
    right = ChildStats.of(g[p + 1:], h[p + 1:])
    return float(x[p]), float(gain[p]), left, right


class _Scan(NamedTuple):
    gain: np.ndarray       # best R per feature, -inf if unsplittable
    position: np.ndarray   # sorted position of the best threshold
    n_splits: np.ndarray   # a_j
    cuts: list             # per splittable feature: boundary positions


class TreeBuilder:
    """Grows one tree on fixed derivatives.

    ``threads`` > 1 computes the per-feature CIR laws on a thread pool;
    laws depend only on grid content, so the tree is identical for any
    worker count.
    """

    def __init__(self, d, index, derivatives, cfg: CirConfig = CirConfig(), threads=1):
        self.X = d.features
        self.n, self.m = d.features.shape
        self.index = index
        self.g = np.asarray(derivatives.g, dtype=float)
        self.h = np.asarray(derivatives.h, dtype=float)
        if self.g.shape != (self.n,) or self.h.shape != (self.n,):
            raise DomainError("derivative buffers do not match the dataset")
        if np.any(self.h <= 0):
            raise HessianDegenerateError("hessians must be positive")
        self.cfg = cfg
        self.threads = max(1, int(threads))

    # -- scanning ---------------------------------------------------------
    def _scan(self, orders):
        m, n_t = orders.shape
        gain = np.full(m, -np.inf)
        position = np.zeros(m, dtype=np.intp)
        n_splits = np.zeros(m, dtype=np.intp)
        cuts = [None] * m
        g_node = self.g[orders[0]]
        h_node = self.h[orders[0]]
        G, H = float(np.sum(g_node)), float(np.sum(h_node))
        parent = G * G / H
        for lo in range(0, m, FEATURE_BLOCK):
            hi = min(lo + FEATURE_BLOCK, m)
            o = orders[lo:hi]
            xs = self.X.T[np.arange(lo, hi)[:, None], o]
            valid = xs[:, 1:] > xs[:, :-1]
            GL = np.cumsum(self.g[o], axis=1)[:, :-1]
            HL = np.cumsum(self.h[o], axis=1)[:, :-1]
            GR = G - GL
            HR = H - HL
            with np.errstate(divide="ignore", invalid="ignore"):
                r = (GL * GL / HL + GR * GR / HR - parent) / (2.0 * self.n)
            r = np.where(valid, r, -np.inf)
            pos = np.argmax(r, axis=1)
            gain[lo:hi] = r[np.arange(hi - lo), pos]
            position[lo:hi] = pos
            counts = valid.sum(axis=1)
            n_splits[lo:hi] = counts
            for k in np.flatnonzero(counts):
                cuts[lo + k] = np.flatnonzero(valid[k])
        return _Scan(gain, position, n_splits, cuts)

    def _laws(self, cuts, n_t):
        """Distinct CIR-max laws over the splittable features, with counts."""
        groups = {}
        for c in cuts:
            if c is None:
                continue
            key = c.tobytes()
            if key in groups:
                groups[key][1] += 1
            else:
                groups[key] = [c, 1]
        grids = [tau_grid_from_quantiles((c + 1) / n_t, self.cfg.epsilon) for c, _ in groups.values()]
        if self.threads > 1 and len(grids) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                laws = list(pool.map(lambda gr: max_cir_distribution(gr, self.cfg), grids))
        else:
            laws = [max_cir_distribution(gr, self.cfg) for gr in grids]
        return laws, [k for _, k in groups.values()]

    # -- node evaluation --------------------------------------------------
    def evaluate(self, orders):
        """Report for the node whose rows appear (sorted per feature) in ``orders``."""
        n_t = orders.shape[1]
        rows = orders[0]
        stats = ChildStats.of(self.g[rows], self.h[rows])
        share = n_t / self.n
        c_root = share * root_optimism_from_stats(stats)
        if n_t < 2:
            return OptimismReport(-math.inf, c_root, math.inf, -math.inf, node_share=share)
        scan = self._scan(orders)
        splittable = scan.n_splits > 0
        if not splittable.any():
            return OptimismReport(-math.inf, c_root, math.inf, -math.inf, node_share=share)
        j = int(np.argmax(scan.gain))
        p = int(scan.position[j])
        R = float(scan.gain[j])
        laws, counts = self._laws(scan.cuts, n_t)
        c_stump = multi_feature_stump_optimism(c_root, laws, self.cfg, counts)
        order_j = orders[j]
        left = ChildStats.of(self.g[order_j[:p + 1]], self.h[order_j[:p + 1]])
        right = ChildStats.of(self.g[order_j[p + 1:]], self.h[order_j[p + 1:]])
        return OptimismReport.make(
            R, c_root, c_stump,
            best_feature=j,
            best_threshold=float(self.X[order_j[p], j]),
            node_share=share,
            c_stump_conditional=share * conditional_stump_optimism(left, right),
            n_splittable=int(splittable.sum()),
        )

    def _split_orders(self, orders, j, threshold):
        goes_left = self.X[:, j] <= threshold
        lm = goes_left[orders]
        n_left = int(lm[0].sum())
        m = orders.shape[0]
        return (orders[lm].reshape(m, n_left),
                orders[~lm].reshape(m, orders.shape[1] - n_left))

    def grow(self, rows=None, force_root_split=False):
        """Grow a tree on ``rows`` (all rows by default).

        Returns ``(root, leaves)`` where ``leaves`` pairs each leaf with the
        training rows routed to it.
        """
        order = self.index.order
        if rows is None:
            orders = np.ascontiguousarray(order)
        else:
            mask = np.zeros(self.n, dtype=bool)
            mask[np.asarray(rows, dtype=np.intp)] = True
            if not mask.any():
                raise DomainError("no rows to grow a tree on")
            orders = order[mask[order]].reshape(self.m, -1)
        leaves = []
        next_id = 0
        root = None
        stack = [(orders, None, None)]
        while stack:
            o, parent, side = stack.pop()
            rows_t = o[0]
            G = float(np.sum(self.g[rows_t]))
            H = float(np.sum(self.h[rows_t]))
            node = Node(n_obs=o.shape[1], weight=leaf_weight(G, H), node_id=next_id)
            next_id += 1
            if parent is None:
                root = node
            else:
                setattr(parent, side, node)
            rep = self.evaluate(o)
            node.report = rep
            split = rep.splits or (force_root_split and parent is None and rep.best_feature >= 0)
            if split:
                node.feature = rep.best_feature
                node.threshold = rep.best_threshold
                lo, ro = self._split_orders(o, node.feature, node.threshold)
                # right pushed first so the left subtree gets the next ids (preorder)
                stack.append((ro, node, "right"))
                stack.append((lo, node, "left"))
            else:
                leaves.append((node, np.sort(rows_t)))
        return root, leaves


def build_tree(d, index, derivatives, cfg: CirConfig = CirConfig(), rows=None, threads=1):
    root, _ = TreeBuilder(d, index, derivatives, cfg, threads).grow(rows)
    return root


def evaluate_node(d, index, derivatives, node_rows, cfg: CirConfig = CirConfig()):
    b = TreeBuilder(d, index, derivatives, cfg)
    mask = np.zeros(d.n, dtype=bool)
    mask[np.asarray(node_rows, dtype=np.intp)] = True
    return b.evaluate(index.order[mask[index.order]].reshape(d.m, -1))


@dataclass
class Tree:
    """Flattened tree for fast routing; leaf weights are unscaled."""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    root: Optional[Node] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_node(cls, root: Node):
        nodes = []
        stack = [root]
        while stack:
            nd = stack.pop()
            nodes.append(nd)
            if not nd.is_leaf:
                stack.append(nd.right)
                stack.append(nd.left)
        pos = {id(nd): k for k, nd in enumerate(nodes)}
        size = len(nodes)
        feature = np.full(size, -1, dtype=np.intp)
        threshold = np.full(size, np.nan)
        left = np.full(size, -1, dtype=np.intp)
        right = np.full(size, -1, dtype=np.intp)
        weight = np.zeros(size)
        for k, nd in enumerate(nodes):
            weight[k] = nd.weight
            if not nd.is_leaf:
                feature[k] = nd.feature
                threshold[k] = nd.threshold
                left[k] = pos[id(nd.left)]
                right[k] = pos[id(nd.right)]
        return cls(feature, threshold, left, right, weight, root)

    @property
    def n_leaves(self):
        return int(np.count_nonzero(self.left < 0))

    @property
    def n_nodes(self):
        return int(self.left.size)

    def apply(self, X):
        """Leaf index of every row of ``X``."""
        X = np.asarray(X, dtype=float)
        idx = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(self.left[idx] >= 0)
        while active.size:
            k = idx[active]
            go_left = X[active, self.feature[k]] <= self.threshold[k]
            idx[active] = np.where(go_left, self.left[k], self.right[k])
            active = active[self.left[idx[active]] >= 0]
        return idx

    def predict(self, X):
        return self.weight[self.apply(X)]

    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.intp)
        for k in range(self.n_nodes):
            if self.left[k] >= 0:
                depth[self.left[k]] = depth[k] + 1
                depth[self.right[k]] = depth[k] + 1
        return int(depth.max())
