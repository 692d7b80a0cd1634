"""Histogram-based regression trees driven by per-row gradients and hessians.

With ``g = p - y`` and ``h = p (1 - p)`` the builder grows a second-order
boosting tree; with ``g = -w y`` and ``h = w`` (``w`` bootstrap weights) the
split gain equals the weighted squared-error reduction, which for 0/1
targets is the Gini reduction, and leaf values are class-1 frequencies.
"""

import heapq
from dataclasses import dataclass

import numpy as np


def split_candidates(X, max_bins=64):
    """Per-feature split thresholds.

    Midpoints between consecutive distinct values when there are few of
    them, otherwise distinct interior quantiles.
    """
    out = []
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        if vals.size <= max_bins:
            thr = (vals[:-1] + vals[1:]) / 2.0
        else:
            q = np.quantile(vals, np.linspace(0, 1, max_bins + 1)[1:-1])
            thr = np.unique(q)
        out.append(thr)
    return out


def bin_codes(X, thresholds):
    """Code ``t`` means ``thresholds[t-1] < x <= thresholds[t]``."""
    codes = np.empty(X.shape, dtype=np.int64)
    for j, thr in enumerate(thresholds):
        codes[:, j] = np.searchsorted(thr, X[:, j], side="left")
    return codes


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = X[rows, self.feature[n]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])
            active[rows] = self.feature[node[rows]] >= 0
        return self.value[node]

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["feature"], dtype=np.int64), np.asarray(d["threshold"], dtype=float),
                   np.asarray(d["left"], dtype=np.int64), np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], dtype=float))


class _Builder:
    def __init__(self, codes, thresholds, g, h, reg_lambda, min_child_weight, gamma,
                 feature_sampler=None):
        self.codes = codes
        self.thresholds = thresholds
        self.g = g
        self.h = h
        self.lam = reg_lambda
        self.mcw = min_child_weight
        self.gamma = gamma
        self.sampler = feature_sampler
        self.n_feat = codes.shape[1]
        self.width = max((t.size for t in thresholds), default=0) + 1
        self.offsets = np.arange(self.n_feat, dtype=np.int64) * self.width
        valid = np.zeros((self.n_feat, self.width), dtype=bool)
        for j, t in enumerate(thresholds):
            valid[j, : t.size] = True
        self.valid = valid
        self.nodes = []  # [feature, threshold, left, right, value]

    def leaf_value(self, G, H):
        return -G / (H + self.lam)

    def _score(self, G, H):
        # an empty child (zero weight, no regularisation) contributes nothing
        den = H + self.lam
        return np.divide(G * G, den, out=np.zeros_like(den, dtype=float), where=den > 0)

    def best_split(self, idx):
        """(gain, feature, bin) of the best admissible split of ``idx``."""
        if idx.size < 2 or self.width < 2:
            return None
        flat = (self.codes[idx] + self.offsets).ravel()
        size = self.n_feat * self.width
        gh = np.bincount(flat, weights=np.repeat(self.g[idx], self.n_feat), minlength=size)
        hh = np.bincount(flat, weights=np.repeat(self.h[idx], self.n_feat), minlength=size)
        GL = np.cumsum(gh.reshape(self.n_feat, self.width), axis=1)
        HL = np.cumsum(hh.reshape(self.n_feat, self.width), axis=1)
        G, H = GL[0, -1], HL[0, -1]
        GR, HR = G - GL, H - HL
        gain = self._score(GL, HL) + self._score(GR, HR) - self._score(G, H)
        ok = self.valid & (HL >= self.mcw) & (HR >= self.mcw)
        if self.sampler is not None:
            allowed = np.zeros(self.n_feat, dtype=bool)
            allowed[self.sampler()] = True
            ok &= allowed[:, None]
        if not ok.any():
            return None
        gain = np.where(ok, gain, -np.inf)
        flat_best = int(np.argmax(gain))
        best = gain.flat[flat_best]
        if not best > self.gamma:
            return None
        return float(best), flat_best // self.width, flat_best % self.width

    def new_node(self, idx):
        G, H = float(self.g[idx].sum()), float(self.h[idx].sum())
        self.nodes.append([-1, 0.0, -1, -1, self.leaf_value(G, H)])
        return len(self.nodes) - 1

    def split(self, node_id, idx, feature, bin_):
        goes_left = self.codes[idx, feature] <= bin_
        li, ri = idx[goes_left], idx[~goes_left]
        left, right = self.new_node(li), self.new_node(ri)
        rec = self.nodes[node_id]
        rec[0], rec[1], rec[2], rec[3] = feature, float(self.thresholds[feature][bin_]), left, right
        return (left, li), (right, ri)

    def tree(self):
        arr = list(zip(*self.nodes))
        return Tree(np.array(arr[0], dtype=np.int64), np.array(arr[1], dtype=float),
                    np.array(arr[2], dtype=np.int64), np.array(arr[3], dtype=np.int64),
                    np.array(arr[4], dtype=float))


def grow_tree(codes, thresholds, g, h, rows=None, growth="level", max_depth=3, max_leaves=None,
              reg_lambda=1.0, min_child_weight=1.0, gamma=0.0, feature_sampler=None):
    """Grow one tree on binned features.

    Parameters
    ----------
    codes : (n, p) int array from ``bin_codes``
    thresholds : list of per-feature threshold arrays
    g, h : (n,) gradients and hessians
    rows : index array of participating rows (default all)
    growth : {"level", "leaf"}
        Level-wise growth expands every node down to ``max_depth``;
        leaf-wise growth repeatedly splits the leaf with the largest gain
        until ``max_leaves`` leaves exist (``max_depth`` <= 0 means no limit).
    feature_sampler : callable, optional
        Returns the feature indices a node may split on.
    """
    b = _Builder(codes, thresholds, g, h, reg_lambda, min_child_weight, gamma, feature_sampler)
    idx = np.arange(codes.shape[0]) if rows is None else np.asarray(rows)
    root = b.new_node(idx)
    depth_ok = (lambda d: d < max_depth) if max_depth and max_depth > 0 else (lambda d: True)
    if growth == "level":
        frontier = [(root, idx)]
        depth = 0
        while frontier and depth_ok(depth):
            nxt = []
            for node_id, node_idx in frontier:
                best = b.best_split(node_idx)
                if best is not None:
                    nxt.extend(b.split(node_id, node_idx, best[1], best[2]))
            frontier = nxt
            depth += 1
    elif growth == "leaf":
        limit = max_leaves or 31
        heap = []
        counter = 0

        def push(node_id, node_idx, depth):
            nonlocal counter
            if not depth_ok(depth):
                return
            best = b.best_split(node_idx)
            if best is not None:
                heapq.heappush(heap, (-best[0], counter, node_id, node_idx, depth, best))
                counter += 1

        push(root, idx, 0)
        leaves = 1
        while heap and leaves < limit:
            _, _, node_id, node_idx, depth, best = heapq.heappop(heap)
            (l_id, l_idx), (r_id, r_idx) = b.split(node_id, node_idx, best[1], best[2])
            leaves += 1
            push(l_id, l_idx, depth + 1)
            push(r_id, r_idx, depth + 1)
    else:
        raise ValueError(f"unknown growth policy {growth!r}")
    return b.tree()
