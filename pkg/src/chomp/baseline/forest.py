"""CART trees with Gini impurity, cost-complexity pruning and a bagged forest."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

LEAF = -1


@dataclass(frozen=True)
class RfConfig:
    n_estimators: int = 100
    bootstrap: bool = True
    max_samples: float = 0.8
    max_depth: int = 10
    min_samples_split: int = 20
    min_samples_leaf: int = 10
    max_features: str | int | None = "sqrt"
    min_impurity_decrease: float = 0.0
    ccp_alpha: float = 0.01
    class_weight: str | None = "balanced"
    seed: int = 42


def _gini(counts: np.ndarray) -> np.ndarray:
    total = counts.sum(axis=-1)
    safe = np.where(total > 0, total, 1.0)
    p = counts / safe[..., None]
    return 1.0 - np.sum(p * p, axis=-1)


def _n_features(rule, n: int) -> int:
    if rule is None:
        return n
    if rule == "sqrt":
        return max(1, int(np.sqrt(n)))
    if rule == "log2":
        return max(1, int(np.log2(n)))
    if isinstance(rule, float):
        return max(1, int(rule * n))
    return min(n, int(rule))


class DecisionTree:
    """Binary CART classifier on weighted samples.

    Node arrays: ``feature`` (LEAF for leaves), ``threshold``, ``left``,
    ``right`` and ``value`` (weighted class totals reaching the node).
    """

    def __init__(self, n_classes: int, max_depth=None, min_samples_split=2, min_samples_leaf=1,
                 max_features=None, min_impurity_decrease=0.0, ccp_alpha=0.0):
        self.n_classes = n_classes
        self.max_depth = max_depth if max_depth is not None else np.iinfo(np.int32).max
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.min_impurity_decrease = min_impurity_decrease
        self.ccp_alpha = ccp_alpha

    # -- growing -----------------------------------------------------------

    def fit(self, X, y, sample_weight=None, rng=None) -> "DecisionTree":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_features_ = X.shape[1]
        self._mtry = _n_features(self.max_features, self.n_features_)
        self._onehot = np.eye(self.n_classes)[y] * w[:, None]
        self._X, self._rng = X, rng
        self._feature, self._threshold, self._left, self._right, self._value = [], [], [], [], []
        self._total_weight = w.sum()
        self._grow(np.arange(len(y)), 0)
        self.feature = np.asarray(self._feature, dtype=np.int64)
        self.threshold = np.asarray(self._threshold)
        self.left = np.asarray(self._left, dtype=np.int64)
        self.right = np.asarray(self._right, dtype=np.int64)
        self.value = np.asarray(self._value)
        del self._X, self._onehot, self._rng
        if self.ccp_alpha > 0:
            self._prune(self.ccp_alpha)
        return self

    def _new_node(self, value) -> int:
        self._feature.append(LEAF)
        self._threshold.append(0.0)
        self._left.append(LEAF)
        self._right.append(LEAF)
        self._value.append(value)
        return len(self._feature) - 1

    def _grow(self, idx: np.ndarray, depth: int) -> int:
        counts = self._onehot[idx].sum(axis=0)
        node = self._new_node(counts)
        n = len(idx)
        if depth >= self.max_depth or n < self.min_samples_split or n < 2 * self.min_samples_leaf:
            return node
        impurity = _gini(counts)
        if impurity <= 0.0:
            return node
        split = self._best_split(idx, counts, impurity)
        if split is None:
            return node
        feat, thr, mask = split
        self._feature[node] = feat
        self._threshold[node] = thr
        self._left[node] = self._grow(idx[mask], depth + 1)
        self._right[node] = self._grow(idx[~mask], depth + 1)
        return node

    def _best_split(self, idx, counts, impurity):
        X, leaf = self._X, self.min_samples_leaf
        n = len(idx)
        w_node = counts.sum()
        onehot = self._onehot[idx]
        best = None
        best_gain = 0.0
        visited = 0
        for f in self._rng.permutation(self.n_features_):
            if visited >= self._mtry:
                break
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            xs = col[order]
            if xs[0] == xs[-1]:
                continue  # constant features do not count towards max_features
            visited += 1
            cum = np.cumsum(onehot[order], axis=0)[:-1]
            pos = np.arange(1, n)
            ok = (xs[1:] > xs[:-1]) & (pos >= leaf) & (n - pos >= leaf)
            if not ok.any():
                continue
            left_c, right_c = cum[ok], counts - cum[ok]
            wl, wr = left_c.sum(axis=1), right_c.sum(axis=1)
            child = (wl * _gini(left_c) + wr * _gini(right_c)) / w_node
            gain = (w_node / self._total_weight) * (impurity - child)
            j = int(np.argmax(gain))
            if gain[j] > best_gain + 1e-12 and gain[j] >= self.min_impurity_decrease:
                p = pos[ok][j]
                best_gain = gain[j]
                best = (int(f), 0.5 * (xs[p - 1] + xs[p]), col <= 0.5 * (xs[p - 1] + xs[p]))
        return best

    # -- pruning -----------------------------------------------------------

    def _subtree_stats(self, keep_leaf):
        """Return (R of subtree leaves, leaf count) per node under the current pruning."""
        n_nodes = len(self.feature)
        risk = np.zeros(n_nodes)
        leaves = np.zeros(n_nodes, dtype=np.int64)
        total = self.value[0].sum()
        node_risk = self.value.sum(axis=1) / total * _gini(self.value)
        for node in range(n_nodes - 1, -1, -1):  # children always have larger ids
            if keep_leaf[node] or self.feature[node] == LEAF:
                risk[node], leaves[node] = node_risk[node], 1
            else:
                l, r = self.left[node], self.right[node]
                risk[node], leaves[node] = risk[l] + risk[r], leaves[l] + leaves[r]
        return node_risk, risk, leaves

    def _prune(self, alpha: float) -> None:
        """Minimal cost-complexity (weakest link) pruning."""
        collapsed = np.zeros(len(self.feature), dtype=bool)
        while True:
            node_risk, risk, leaves = self._subtree_stats(collapsed)
            internal = self._reachable_internal(collapsed)
            if not internal.size:
                break
            g = (node_risk[internal] - risk[internal]) / (leaves[internal] - 1)
            j = int(np.argmin(g))
            if g[j] > alpha:
                break
            collapsed[internal[j]] = True
        self._collapse(collapsed)

    def _reachable_internal(self, collapsed) -> np.ndarray:
        out, stack = [], [0]
        while stack:
            node = stack.pop()
            if self.feature[node] == LEAF or collapsed[node]:
                continue
            out.append(node)
            stack.extend((self.left[node], self.right[node]))
        return np.asarray(sorted(out), dtype=np.int64)

    def _collapse(self, collapsed) -> None:
        mapping, order, stack = {}, [], [0]
        while stack:
            node = stack.pop()
            mapping[node] = len(order)
            order.append(node)
            if self.feature[node] != LEAF and not collapsed[node]:
                stack.extend((self.right[node], self.left[node]))
        feat, thr, left, right, value = [], [], [], [], []
        for node in order:
            value.append(self.value[node])
            if self.feature[node] == LEAF or collapsed[node]:
                feat.append(LEAF)
                thr.append(0.0)
                left.append(LEAF)
                right.append(LEAF)
            else:
                feat.append(self.feature[node])
                thr.append(self.threshold[node])
                left.append(mapping[self.left[node]])
                right.append(mapping[self.right[node]])
        self.feature = np.asarray(feat, dtype=np.int64)
        self.threshold = np.asarray(thr)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value)

    # -- inference -----------------------------------------------------------

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] != LEAF
        return node

    def predict_proba(self, X) -> np.ndarray:
        v = self.value[self.apply(X)]
        return v / np.maximum(v.sum(axis=1, keepdims=True), 1e-300)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.value[self.apply(X)], axis=1)


class RandomForest:
    def __init__(self, cfg: RfConfig | None = None):
        self.cfg = cfg or RfConfig()

    def fit(self, X, y, keys=None) -> "RandomForest":
        """Train on rows of ``X``.

        With ``keys``, rows are first put in stable key order so that the seeded
        bootstraps, and hence the trees, do not depend on the input row order.
        """
        cfg = self.cfg
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or len(X) != len(y):
            raise ConfigError("X must be (n, d) with one label per row")
        if keys is not None:
            order = np.argsort(np.asarray(keys), kind="stable")
            X, y = X[order], y[order]
        classes = np.unique(y)
        if classes.size < 2:
            raise ConfigError("random forest needs at least two classes")
        self.n_classes_ = int(max(3, y.max() + 1))
        self.n_features_ = X.shape[1]
        n = len(y)
        counts = np.bincount(y, minlength=self.n_classes_)
        if cfg.class_weight == "balanced":
            cw = np.where(counts > 0, n / (classes.size * np.maximum(counts, 1)), 0.0)
        else:
            cw = np.ones(self.n_classes_)
        n_draw = max(1, int(round(cfg.max_samples * n))) if cfg.bootstrap else n
        self.trees_ = []
        for t in range(cfg.n_estimators):
            rng = np.random.default_rng(cfg.seed + t)
            idx = rng.integers(0, n, n_draw) if cfg.bootstrap else np.arange(n)
            tree = DecisionTree(
                self.n_classes_,
                max_depth=cfg.max_depth,
                min_samples_split=cfg.min_samples_split,
                min_samples_leaf=cfg.min_samples_leaf,
                max_features=cfg.max_features,
                min_impurity_decrease=cfg.min_impurity_decrease,
                ccp_alpha=cfg.ccp_alpha,
            )
            tree.fit(X[idx], y[idx], cw[y[idx]], rng)
            self.trees_.append(tree)
        return self

    def vote_fractions(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise ConfigError(f"expected {self.n_features_} features, got {X.shape[-1] if X.ndim else 0}")
        votes = np.zeros((len(X), self.n_classes_))
        for tree in self.trees_:
            votes[np.arange(len(X)), tree.predict(X)] += 1
        return votes / len(self.trees_)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if len(X) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.argmax(self.vote_fractions(X), axis=1)  # argmax breaks ties to the lowest index


def train_rf(X, y, cfg: RfConfig | None = None, keys=None) -> RandomForest:
    return RandomForest(cfg).fit(X, y, keys=keys)


def predict_rf(model: RandomForest, X):
    """(labels, per-class vote fractions)."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros((0, model.n_classes_))
    fr = model.vote_fractions(X)
    return np.argmax(fr, axis=1), fr
