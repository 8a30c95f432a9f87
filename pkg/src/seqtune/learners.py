"""Learners with tunable hyperparameters: elastic net and a CART-style tree.

Both expose the same ``fit(kind, cfg, train)`` / ``predict(model, rows)`` pair
used by the resampling code.

Untuned settings are fixed module constants (``EN_TOL``, ``EN_MAX_SWEEPS``,
``MIN_SPLIT``, ``MIN_BUCKET``, ...), so absolute loss values are specific to
this package.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numba import njit

from .data import Dataset
from .param_space import CART_SPACE, ELASTIC_NET_SPACE, Config, ParamSpace, validate_config

EN_TOL = 1e-7
EN_MAX_SWEEPS = 10_000
PROB_CLIP = 1e-12

# rpart-style growth limits: no split attempt below MIN_SPLIT rows, no child below MIN_BUCKET.
MIN_SPLIT = 20
MIN_BUCKET = 7


class LearnerError(ValueError):
    pass


class LearnerKind(enum.Enum):
    ELASTIC_NET = "elastic_net"
    CART_TREE = "cart_tree"

    @property
    def hyperparameters(self) -> tuple[str, ...]:
        return ("alpha", "lambda") if self is LearnerKind.ELASTIC_NET else ("cp", "maxdepth")

    @property
    def default_space(self) -> ParamSpace:
        return ELASTIC_NET_SPACE if self is LearnerKind.ELASTIC_NET else CART_SPACE

    @classmethod
    def parse(cls, value) -> "LearnerKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise LearnerError(f"unknown learner {value!r}; expected one of {[k.value for k in cls]}") from None


# ---------------------------------------------------------------------------
# elastic net


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _cd_gaussian(G, c, yy, lam, alpha, tol, max_sweeps, beta):
    """Covariance-update coordinate descent on standardized, centred data.

    Minimizes 0.5*yy - c'b + 0.5*b'Gb + lam*(alpha*|b|_1 + (1-alpha)/2*|b|_2^2).
    Returns (sweeps, objective history).
    """
    p = G.shape[0]
    q = G @ beta
    l1 = lam * alpha
    l2 = lam * (1.0 - alpha)
    hist = np.empty(max_sweeps + 1)
    hist[0] = 0.5 * yy - c @ beta + 0.5 * beta @ q + l1 * np.sum(np.abs(beta)) + 0.5 * l2 * beta @ beta
    sweeps = 0
    for it in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = beta[j]
            z = c[j] - q[j] + gjj * old
            new = _soft(z, l1) / (gjj + l2)
            d = new - old
            if d != 0.0:
                beta[j] = new
                for k in range(p):
                    q[k] += d * G[k, j]
                if abs(d) > max_delta:
                    max_delta = abs(d)
        sweeps = it + 1
        hist[sweeps] = (0.5 * yy - c @ beta + 0.5 * beta @ q
                        + l1 * np.sum(np.abs(beta)) + 0.5 * l2 * beta @ beta)
        if max_delta <= tol * np.max(np.abs(beta)) or max_delta == 0.0:
            break
    return sweeps, hist[: sweeps + 1]


@njit(cache=True)
def _logistic_objective(X, y, b0, beta, l1, l2, clip):
    n = X.shape[0]
    eta = b0 + X @ beta
    nll = 0.0
    for i in range(n):
        pr = 1.0 / (1.0 + np.exp(-eta[i]))
        pr = min(max(pr, clip), 1.0 - clip)
        nll -= y[i] * np.log(pr) + (1.0 - y[i]) * np.log(1.0 - pr)
    return nll / n + l1 * np.sum(np.abs(beta)) + 0.5 * l2 * beta @ beta


@njit(cache=True)
def _cd_logistic(X, y, lam, alpha, tol, max_sweeps, clip, beta, track):
    """Coordinate descent for penalized logistic regression.

    Each sweep builds one IRLS quadratic approximation at the current
    estimate and runs a single pass over intercept and coefficients.
    """
    n, p = X.shape
    l1 = lam * alpha
    l2 = lam * (1.0 - alpha)
    ybar = np.mean(y)
    ybar = min(max(ybar, clip), 1.0 - clip)
    b0 = np.log(ybar / (1.0 - ybar))
    hist = np.empty(max_sweeps + 1 if track else 1)
    if track:
        hist[0] = _logistic_objective(X, y, b0, beta, l1, l2, clip)
    w = np.empty(n)
    r = np.empty(n)
    sweeps = 0
    for it in range(max_sweeps):
        eta = b0 + X @ beta
        for i in range(n):
            pr = 1.0 / (1.0 + np.exp(-eta[i]))
            pr = min(max(pr, clip), 1.0 - clip)
            w[i] = pr * (1.0 - pr)
            r[i] = (y[i] - pr) / w[i]
        sw = np.sum(w)
        d0 = (w @ r) / sw
        b0 += d0
        r -= d0
        max_delta = abs(d0)
        scale = abs(b0)
        for j in range(p):
            v = 0.0
            g = 0.0
            for i in range(n):
                wx = w[i] * X[i, j]
                v += wx * X[i, j]
                g += wx * r[i]
            v /= n
            if v <= 0.0:
                continue
            old = beta[j]
            new = _soft(g / n + v * old, l1) / (v + l2)
            d = new - old
            if d != 0.0:
                beta[j] = new
                for i in range(n):
                    r[i] -= d * X[i, j]
                if abs(d) > max_delta:
                    max_delta = abs(d)
            if abs(new) > scale:
                scale = abs(new)
        sweeps = it + 1
        if track:
            hist[sweeps] = _logistic_objective(X, y, b0, beta, l1, l2, clip)
        if max_delta <= tol * scale or max_delta == 0.0:
            break
    return b0, sweeps, hist[: sweeps + 1] if track else hist[:0]


@dataclass(frozen=True)
class ElasticNetModel:
    intercept: float
    coef: np.ndarray  # on the original (unstandardized) design-matrix scale
    task_kind: str
    schema: tuple
    sweeps: int = 0
    objective_history: np.ndarray | None = field(default=None, repr=False)

    def decision_function(self, rows: Dataset) -> np.ndarray:
        return self.intercept + rows.design_matrix() @ self.coef


def _standardize(X: np.ndarray):
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    ok = sd > 1e-12 * np.maximum(1.0, np.abs(mean))
    safe = np.where(ok, sd, 1.0)
    Xs = np.where(ok[None, :], (X - mean) / safe, 0.0)
    return np.ascontiguousarray(Xs), mean, safe, ok


def fit_elastic_net(train: Dataset, lam: float, alpha: float, track: bool = False) -> ElasticNetModel:
    """Elastic net on standardized features with unpenalized intercept.

    Regression minimizes ``(1/2n)*RSS + lam*(alpha*|b|_1 + (1-alpha)/2*|b|_2^2)``,
    classification the mean logistic negative log-likelihood plus the same
    penalty. Coefficients are mapped back to the original feature scale.
    """
    if not lam > 0:
        raise LearnerError(f"lambda must be > 0, got {lam}")
    if not 0.0 <= alpha <= 1.0:
        raise LearnerError(f"alpha must lie in [0, 1], got {alpha}")
    X = train.design_matrix()
    n = X.shape[0]
    Xs, mean, sd, ok = _standardize(X)
    beta = np.zeros(X.shape[1])
    if train.task_kind == "regression":
        y = train.target.astype(np.float64)
        ybar = y.mean()
        yc = y - ybar
        G = Xs.T @ Xs / n
        c = Xs.T @ yc / n
        yy = float(yc @ yc) / n
        sweeps, hist = _cd_gaussian(G, c, yy, float(lam), float(alpha), EN_TOL, EN_MAX_SWEEPS, beta)
        coef = np.where(ok, beta / sd, 0.0)
        b0 = ybar - coef @ mean
    else:
        y = train.target.astype(np.float64)
        b0s, sweeps, hist = _cd_logistic(Xs, y, float(lam), float(alpha), EN_TOL, EN_MAX_SWEEPS,
                                         PROB_CLIP, beta, track)
        coef = np.where(ok, beta / sd, 0.0)
        b0 = b0s - coef @ mean
    return ElasticNetModel(float(b0), coef, train.task_kind, train.schema(), int(sweeps),
                           hist.copy() if track else None)


# ---------------------------------------------------------------------------
# tree


@dataclass
class _Node:
    depth: int
    n: int
    value: float
    risk: float
    feature: int = -1
    threshold: float = np.nan
    left_cats: frozenset = frozenset()
    seen_cats: frozenset = frozenset()
    left: int = -1
    right: int = -1
    majority_left: bool = True

    @property
    def is_leaf(self) -> bool:
        return self.left < 0


@dataclass(frozen=True)
class TreeModel:
    nodes: tuple[_Node, ...]
    kinds: tuple[str, ...]
    task_kind: str
    schema: tuple

    @property
    def n_leaves(self) -> int:
        return sum(1 for nd in self.nodes if nd.is_leaf)

    @property
    def depth(self) -> int:
        return max(nd.depth for nd in self.nodes)


def _node_stats(y: np.ndarray, classification: bool) -> tuple[float, float]:
    """(prediction, risk) of a node; risk is n*Gini or the SSE."""
    m = y.shape[0]
    if classification:
        n1 = float(y.sum())
        n0 = m - n1
        return (1.0 if n1 > n0 else 0.0), m - (n0 * n0 + n1 * n1) / m
    mu = float(y.mean())
    return mu, float(((y - mu) ** 2).sum())


def _best_split_sorted(xs: np.ndarray, ys: np.ndarray, classification: bool, min_bucket: int):
    """Split gains for columns already sorted by feature value.

    ``xs``/``ys`` are m x k; returns an (m-1) x k gain matrix with -inf at
    inadmissible positions. Position i puts rows 0..i on the left.
    """
    m = xs.shape[0]
    left_n = np.arange(1, m, dtype=np.float64)[:, None]
    right_n = m - left_n
    if classification:
        c1 = np.cumsum(ys, axis=0)[:-1]
        tot1 = ys.sum(axis=0)[None, :]
        l1, l0 = c1, left_n - c1
        r1 = tot1 - c1
        r0 = right_n - r1
        parent = m - (tot1 * tot1 + (m - tot1) ** 2) / m
        gain = parent - (left_n - (l0 * l0 + l1 * l1) / left_n) - (right_n - (r0 * r0 + r1 * r1) / right_n)
    else:
        s = np.cumsum(ys, axis=0)[:-1]
        tot = ys.sum(axis=0)[None, :]
        gain = s * s / left_n + (tot - s) ** 2 / right_n - tot * tot / m
    valid = xs[:-1] < xs[1:]
    valid &= (left_n >= min_bucket) & (right_n >= min_bucket)
    return np.where(valid, gain, -np.inf)


def _find_split(X: np.ndarray, y: np.ndarray, kinds: tuple[str, ...], classification: bool,
                min_bucket: int, risk: float):
    """Best split of a node; ties go to the lowest feature index, then lowest threshold."""
    m, p = X.shape
    yc = y.astype(np.float64)
    if not classification:
        yc = yc - yc.mean()
    tol = 1e-10 * max(risk, 1e-300)
    feat_max = np.full(p, -np.inf)
    per_feature = {}
    num = np.array([j for j in range(p) if kinds[j] == "numeric"], dtype=np.intp)
    if num.size:
        Xn = X[:, num]
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        gains = _best_split_sorted(xs, yc[order], classification, min_bucket)
        feat_max[num] = gains.max(axis=0)
        for col, j in enumerate(num):
            per_feature[int(j)] = (gains, col, xs, None)
    for j in range(p):
        if kinds[j] != "categorical":
            continue
        codes = X[:, j].astype(np.int64)
        counts = np.bincount(codes)
        present = np.flatnonzero(counts)
        if present.size < 2:
            continue
        means = np.bincount(codes, weights=yc)[present] / counts[present]
        ranked = present[np.lexsort((present, means))]
        rank_of = np.empty(counts.size)
        rank_of[ranked] = np.arange(ranked.size)
        ranks = rank_of[codes]
        order = np.argsort(ranks, kind="stable")
        xs = ranks[order][:, None]
        gains = _best_split_sorted(xs, yc[order][:, None], classification, min_bucket)
        feat_max[j] = gains[:, 0].max()
        per_feature[j] = (gains, 0, xs, ranked)
    top = feat_max.max() if p else -np.inf
    if not np.isfinite(top) or top <= tol:
        return None
    j = int(np.flatnonzero(feat_max >= top - tol)[0])
    gains, col, xs, ranked = per_feature[j]
    i = int(np.flatnonzero(gains[:, col] >= top - tol)[0])
    lo, hi = xs[i, col], xs[i + 1, col]
    if ranked is None:
        thr = 0.5 * (lo + hi)
        if not thr < hi:
            thr = lo
        return j, float(thr), frozenset(), frozenset()
    cut = int(lo)
    return j, np.nan, frozenset(int(c) for c in ranked[: cut + 1]), frozenset(int(c) for c in ranked)


def _goes_left(node: _Node, x: np.ndarray, categorical: bool) -> np.ndarray:
    if not categorical:
        return x <= node.threshold
    return np.isin(x.astype(np.int64), list(node.left_cats))


def fit_tree(train: Dataset, cp: float, maxdepth: int, min_split: int = MIN_SPLIT,
             min_bucket: int = MIN_BUCKET, prune: bool = True) -> TreeModel:
    """Grow a binary tree greedily to ``maxdepth`` and prune it with ``cp``.

    Growth minimizes Gini impurity (classification) or SSE (regression).
    Pruning is cost-complexity pruning at ``cp * risk(root)``: a subtree is
    collapsed when its improvement per extra leaf falls below that amount.
    """
    if not 0.0 <= cp:
        raise LearnerError(f"cp must be >= 0, got {cp}")
    if maxdepth < 1:
        raise LearnerError(f"maxdepth must be >= 1, got {maxdepth}")
    X = train.numeric_matrix()
    y = train.target
    kinds = tuple(c.kind for c in train.columns)
    classification = train.task_kind == "classification"
    value, risk = _node_stats(y, classification)
    nodes = [_Node(0, y.shape[0], value, risk)]
    stack = [(0, np.arange(y.shape[0]))]
    while stack:
        idx, rows = stack.pop()
        nd = nodes[idx]
        if nd.depth >= maxdepth or nd.n < min_split or nd.risk <= 0.0:
            continue
        split = _find_split(X[rows], y[rows], kinds, classification, min_bucket, nd.risk)
        if split is None:
            continue
        j, thr, cats, seen = split
        nd.feature, nd.threshold, nd.left_cats, nd.seen_cats = j, thr, cats, seen
        go = _goes_left(nd, X[rows, j], kinds[j] == "categorical")
        lrows, rrows = rows[go], rows[~go]
        nd.majority_left = lrows.size >= rrows.size
        for child_rows, attr in ((lrows, "left"), (rrows, "right")):
            v, r = _node_stats(y[child_rows], classification)
            setattr(nd, attr, len(nodes))
            nodes.append(_Node(nd.depth + 1, child_rows.size, v, r))
        # right pushed first so the left subtree is expanded first
        stack.append((nd.right, rrows))
        stack.append((nd.left, lrows))
    if prune:
        _prune(nodes, cp * nodes[0].risk)
    return TreeModel(_compact(nodes), kinds, train.task_kind, train.schema())


def _prune(nodes: list[_Node], penalty: float) -> None:
    def walk(i: int) -> tuple[float, int]:
        nd = nodes[i]
        if nd.is_leaf:
            return nd.risk, 1
        rl, ll = walk(nd.left)
        rr, lr = walk(nd.right)
        sub_risk, leaves = rl + rr, ll + lr
        if (nd.risk - sub_risk) / (leaves - 1) < penalty:
            nd.left = nd.right = -1
            nd.feature = -1
            return nd.risk, 1
        return sub_risk, leaves

    walk(0)


def _compact(nodes: list[_Node]) -> tuple[_Node, ...]:
    out: list[_Node] = []

    def copy(i: int) -> int:
        nd = nodes[i]
        k = len(out)
        out.append(_Node(nd.depth, nd.n, nd.value, nd.risk, nd.feature, nd.threshold,
                         nd.left_cats, nd.seen_cats, -1, -1, nd.majority_left))
        if not nd.is_leaf:
            out[k].left = copy(nd.left)
            out[k].right = copy(nd.right)
        return k

    copy(0)
    return tuple(out)


def _predict_tree(model: TreeModel, rows: Dataset) -> np.ndarray:
    X = rows.numeric_matrix()
    out = np.empty(X.shape[0])
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        i, idx = stack.pop()
        nd = model.nodes[i]
        if nd.is_leaf or idx.size == 0:
            out[idx] = nd.value
            continue
        cat = model.kinds[nd.feature] == "categorical"
        go = _goes_left(nd, X[idx, nd.feature], cat)
        if cat:
            # categories unseen at this node follow the larger child
            unseen = ~np.isin(X[idx, nd.feature].astype(np.int64), list(nd.seen_cats))
            if nd.majority_left:
                go = go | unseen
        stack.append((nd.left, idx[go]))
        stack.append((nd.right, idx[~go]))
    return out


# ---------------------------------------------------------------------------
# generic API

Model = Any


def fit(kind, cfg: Config, train: Dataset, **options) -> Model:
    """Fit ``kind`` with hyperparameters from ``cfg`` on ``train``."""
    kind = LearnerKind.parse(kind)
    if train.n == 0:
        raise LearnerError("cannot fit on zero rows")
    missing = [h for h in kind.hyperparameters if h not in cfg.values]
    if missing:
        raise LearnerError(f"config {cfg.id} lacks hyperparameters {missing} for {kind.value}")
    if kind is LearnerKind.ELASTIC_NET:
        return fit_elastic_net(train, float(cfg["lambda"]), float(cfg["alpha"]), **options)
    return fit_tree(train, float(cfg["cp"]), int(cfg["maxdepth"]), **options)


def predict(model: Model, rows: Dataset) -> np.ndarray:
    """Hard labels (0/1) for classification, reals for regression."""
    if rows.schema() != model.schema:
        raise LearnerError("feature schema of rows does not match the training data")
    if isinstance(model, ElasticNetModel):
        eta = model.decision_function(rows)
        if model.task_kind == "classification":
            return (eta > 0.0).astype(np.int64)
        return eta
    pred = _predict_tree(model, rows)
    if model.task_kind == "classification":
        return pred.astype(np.int64)
    return pred


def check_config(kind, cfg: Config, space: ParamSpace | None = None) -> bool:
    kind = LearnerKind.parse(kind)
    return validate_config(space or kind.default_space, cfg)
