"""
surrogate.py

Binary classifiers approximating the map parameter vector -> label:
CART decision tree, second-order gradient boosted trees and a linear SVM
trained with Pegasos. All models predict True for Positive.

Notes
-----
SurrogateModel plays the role of an abstract base: it implements the common
plumbing (arity checks, labels, serialization) and leaves predict_many to
subclasses.
"""
import enum
import json
import logging
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, logit

from abmcalib.errors import ArityMismatch, ConfigInvalid, SchemaError, SingleClass
from abmcalib.ks import Label

logger = logging.getLogger(__name__)


class SurrogateKind(enum.Enum):
    NONE = "None"
    DECISION_TREE = "DecisionTree"
    GRADIENT_BOOSTED = "GradientBoosted"
    LINEAR_SVM = "LinearSvm"


@dataclass
class DecisionTreeHyper:
    max_depth: Optional[int] = 10
    min_samples_split: int = 2


@dataclass
class GradientBoostedHyper:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    lambda_l2: float = 1.0


@dataclass
class LinearSvmHyper:
    lambda_reg: float = 1e-3
    epochs: int = 50
    seed: int = 0


HYPER_CLASSES = {
    SurrogateKind.DECISION_TREE: DecisionTreeHyper,
    SurrogateKind.GRADIENT_BOOSTED: GradientBoostedHyper,
    SurrogateKind.LINEAR_SVM: LinearSvmHyper,
}


def make_hyper(kind: SurrogateKind, overrides: Optional[Dict] = None):
    """
        Default hyperparameters of a surrogate kind with overrides applied
    """
    if kind not in HYPER_CLASSES:
        raise ValueError("no surrogate for kind %s" % kind.value)
    cls = HYPER_CLASSES[kind]
    overrides = dict(overrides or {})
    unknown = set(overrides) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigInvalid(
            "unknown %s hyperparameters: %s" % (kind.value, sorted(unknown))
        )
    return cls(**overrides)


@dataclass
class TrainingSet:
    features: np.ndarray
    positive: np.ndarray

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.positive = np.asarray(self.positive, dtype=bool)
        if len(self.features) != len(self.positive):
            raise ValueError("features and labels differ in length")

    @classmethod
    def from_rows(cls, rows: Sequence[Tuple[Sequence[float], Label]]) -> "TrainingSet":
        if not rows:
            return cls(np.empty((0, 0)), np.empty(0, dtype=bool))
        vectors = [r[0] for r in rows]
        arity = {len(v) for v in vectors}
        if len(arity) != 1:
            raise ArityMismatch("rows have differing feature counts %s" % sorted(arity))
        return cls(np.asarray(vectors), [r[1] is Label.POSITIVE for r in rows])

    @property
    def rows(self) -> List[Tuple[List[float], Label]]:
        return [
            (list(x), Label.POSITIVE if p else Label.NEGATIVE)
            for x, p in zip(self.features, self.positive)
        ]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx: np.ndarray) -> "TrainingSet":
        return TrainingSet(self.features[idx], self.positive[idx])

    def has_both_classes(self) -> bool:
        return 0 < int(self.positive.sum()) < len(self)

    def sample_weights(self, balanced: bool = False) -> np.ndarray:
        """
            Unit weights, or inverse class frequency n / (2 n_class)
        """
        w = np.ones(len(self))
        if balanced and self.has_both_classes():
            n_pos = self.positive.sum()
            w[self.positive] = len(self) / (2.0 * n_pos)
            w[~self.positive] = len(self) / (2.0 * (len(self) - n_pos))
        return w

    def __len__(self):
        return len(self.positive)


class TreeNode:
    def __init__(
        self,
        value: float = 0.0,
        feature: Optional[int] = None,
        threshold: Optional[float] = None,
        left: "TreeNode" = None,
        right: "TreeNode" = None,
    ) -> None:
        """
            Internal nodes send x[feature] <= threshold left.
            Leaves carry a value (class probability or boosting weight)
        """
        self.value = value
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves() + self.right.n_leaves()

    def predict_values(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))

        def fill(node, idx):
            if node.is_leaf:
                out[idx] = node.value
                return
            go_left = X[idx, node.feature] <= node.threshold
            fill(node.left, idx[go_left])
            fill(node.right, idx[~go_left])

        fill(self, np.arange(len(X)))
        return out

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": float(self.value)}
        return {
            "feature": int(self.feature),
            "threshold": float(self.threshold),
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeNode":
        if "feature" not in data:
            return cls(value=data["value"])
        return cls(
            feature=data["feature"],
            threshold=data["threshold"],
            left=cls.from_dict(data["left"]),
            right=cls.from_dict(data["right"]),
        )

    def __repr__(self):
        if self.is_leaf:
            return "Leaf: %g" % self.value
        return "Split: x[%d] <= %g" % (self.feature, self.threshold)


def split_candidates(column: np.ndarray, order: np.ndarray):
    """
        Positions after which the sorted column changes value, and the
        midpoint thresholds between consecutive distinct values
    """
    xs = column[order]
    change = np.flatnonzero(xs[:-1] < xs[1:])
    thresholds = (xs[change] + xs[change + 1]) / 2.0
    # adjacent floats: the midpoint may round onto the upper value
    thresholds = np.where(thresholds >= xs[change + 1], xs[change], thresholds)
    return change, thresholds


class SurrogateModel:
    kind = SurrogateKind.NONE

    def __init__(self, n_features: int) -> None:
        self.n_features = n_features

    def check_arity(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ArityMismatch(
                "model expects %d features, got %d" % (self.n_features, X.shape[1])
            )
        return X

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        """
            Returns True for every row predicted Positive
            it must be overridden by a subclass
        """
        raise NotImplementedError

    def predict(self, x: Sequence[float]) -> Label:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ArityMismatch("predict takes a single vector")
        positive = self.predict_many(x[np.newaxis, :])[0]
        return Label.POSITIVE if positive else Label.NEGATIVE

    def structure(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_features": self.n_features,
            "hyper": asdict(self.hyper),
            "structure": self.structure(),
        }


class DecisionTreeModel(SurrogateModel):
    kind = SurrogateKind.DECISION_TREE

    def __init__(self, root: TreeNode, hyper: DecisionTreeHyper, n_features: int) -> None:
        super().__init__(n_features)
        self.root = root
        self.hyper = hyper

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.root.predict_values(self.check_arity(X))

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X) > 0.5

    def structure(self) -> dict:
        return {"root": self.root.to_dict()}

    def __repr__(self):
        return "DecisionTreeModel(depth=%d, leaves=%d)" % (
            self.root.depth(),
            self.root.n_leaves(),
        )


class GradientBoostedModel(SurrogateModel):
    kind = SurrogateKind.GRADIENT_BOOSTED

    def __init__(
        self,
        trees: List[TreeNode],
        base_score: float,
        hyper: GradientBoostedHyper,
        n_features: int,
        loss_trace: Optional[List[float]] = None,
    ) -> None:
        super().__init__(n_features)
        self.trees = trees
        self.base_score = base_score
        self.hyper = hyper
        self.loss_trace = loss_trace or []

    def margin(self, X: np.ndarray) -> np.ndarray:
        X = self.check_arity(X)
        m = np.full(len(X), self.base_score)
        for tree in self.trees:
            m += self.hyper.learning_rate * tree.predict_values(X)
        return m

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.margin(X))

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        # probability exactly 0.5 is Negative
        return self.predict_proba(X) > 0.5

    def structure(self) -> dict:
        return {
            "base_score": float(self.base_score),
            "trees": [t.to_dict() for t in self.trees],
        }

    def __repr__(self):
        return "GradientBoostedModel(%d trees)" % len(self.trees)


class LinearSvmModel(SurrogateModel):
    kind = SurrogateKind.LINEAR_SVM

    def __init__(
        self,
        weights: np.ndarray,
        bias: float,
        scale_low: np.ndarray,
        scale_high: np.ndarray,
        hyper: LinearSvmHyper,
    ) -> None:
        super().__init__(len(weights))
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)
        self.scale_low = np.asarray(scale_low, dtype=np.float64)
        self.scale_high = np.asarray(scale_high, dtype=np.float64)
        self.hyper = hyper

    def normalize(self, X: np.ndarray) -> np.ndarray:
        """Maps each feature range onto [-1, 1]."""
        return 2.0 * (X - self.scale_low) / (self.scale_high - self.scale_low) - 1.0

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self.normalize(self.check_arity(X)) @ self.weights + self.bias

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return self.decision_function(X) > 0.0

    def structure(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "bias": self.bias,
            "scale_low": [float(v) for v in self.scale_low],
            "scale_high": [float(v) for v in self.scale_high],
        }

    def __repr__(self):
        return "LinearSvmModel(bias=%g)" % self.bias


def _gini_split(X: np.ndarray, positive: np.ndarray, w: np.ndarray):
    """
        Best split by weighted Gini impurity of the children;
        ties go to the lowest feature index, then the lowest threshold
    :return: (feature, threshold) or None when every feature is constant
    """
    total_w = w.sum()
    total_pos = (w * positive).sum()
    best, best_impurity = None, np.inf

    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="mergesort")
        change, thresholds = split_candidates(X[:, f], order)
        if len(change) == 0:
            continue

        cum_w = np.cumsum(w[order])[change]
        cum_pos = np.cumsum((w * positive)[order])[change]
        right_w = total_w - cum_w
        right_pos = total_pos - cum_pos

        p_left = cum_pos / cum_w
        p_right = right_pos / right_w
        impurity = (
            cum_w * 2.0 * p_left * (1.0 - p_left)
            + right_w * 2.0 * p_right * (1.0 - p_right)
        ) / total_w

        i = int(np.argmin(impurity))
        if impurity[i] < best_impurity:
            best_impurity = impurity[i]
            best = (f, float(thresholds[i]))

    return best


def _grow_classification_tree(X, positive, w, hyper: DecisionTreeHyper, depth: int):
    probability = float((w * positive).sum() / w.sum())
    pure = positive.all() or not positive.any()
    at_depth = hyper.max_depth is not None and depth >= hyper.max_depth
    if pure or at_depth or len(positive) < hyper.min_samples_split:
        return TreeNode(value=probability)

    split = _gini_split(X, positive, w)
    if split is None:
        return TreeNode(value=probability)

    feature, threshold = split
    go_left = X[:, feature] <= threshold
    return TreeNode(
        feature=feature,
        threshold=threshold,
        left=_grow_classification_tree(
            X[go_left], positive[go_left], w[go_left], hyper, depth + 1
        ),
        right=_grow_classification_tree(
            X[~go_left], positive[~go_left], w[~go_left], hyper, depth + 1
        ),
    )


def train_decision_tree(
    train: TrainingSet, hyper: Optional[DecisionTreeHyper] = None, class_weighting=False
) -> DecisionTreeModel:
    """
        CART classifier grown greedily on weighted Gini impurity. Splits stop
        at max_depth, below min_samples_split, on pure nodes, or when every
        feature is constant; zero-gain splits of impure nodes are allowed.
    """
    hyper = hyper or DecisionTreeHyper()
    if len(train) == 0:
        raise ValueError("cannot train on an empty set")
    w = train.sample_weights(class_weighting)
    root = _grow_classification_tree(train.features, train.positive, w, hyper, 0)
    return DecisionTreeModel(root, hyper, train.n_features)


def _leaf_weight(g_sum: float, h_sum: float, lambda_l2: float) -> float:
    return -g_sum / (h_sum + lambda_l2)


def _grow_regression_tree(X, g, h, hyper: GradientBoostedHyper, depth: int):
    G, H = g.sum(), h.sum()
    leaf = TreeNode(value=_leaf_weight(G, H, hyper.lambda_l2))
    if depth >= hyper.max_depth or len(g) < 2:
        return leaf

    lam = hyper.lambda_l2
    parent_score = G * G / (H + lam)
    best, best_gain = None, 0.0
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="mergesort")
        change, thresholds = split_candidates(X[:, f], order)
        if len(change) == 0:
            continue
        GL = np.cumsum(g[order])[change]
        HL = np.cumsum(h[order])[change]
        GR, HR = G - GL, H - HL
        gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent_score)
        i = int(np.argmax(gain))
        if gain[i] > best_gain + 1e-12:
            best_gain = gain[i]
            best = (f, float(thresholds[i]))

    if best is None:
        return leaf

    feature, threshold = best
    go_left = X[:, feature] <= threshold
    return TreeNode(
        feature=feature,
        threshold=threshold,
        left=_grow_regression_tree(X[go_left], g[go_left], h[go_left], hyper, depth + 1),
        right=_grow_regression_tree(
            X[~go_left], g[~go_left], h[~go_left], hyper, depth + 1
        ),
    )


def log_loss(y: np.ndarray, margin: np.ndarray, w: Optional[np.ndarray] = None) -> float:
    """Weighted mean logistic loss of margins (log-odds)."""
    losses = np.logaddexp(0.0, margin) - y * margin
    if w is None:
        return float(losses.mean())
    return float((w * losses).sum() / w.sum())


def train_gbt(
    train: TrainingSet,
    hyper: Optional[GradientBoostedHyper] = None,
    class_weighting=False,
) -> GradientBoostedModel:
    """
        Logistic-loss boosting with second-order regression trees:
        g = p - y, h = p (1 - p), leaf weight -G / (H + lambda),
        split gain 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)].
    """
    hyper = hyper or GradientBoostedHyper()
    if not train.has_both_classes():
        raise SingleClass("boosting needs both classes in the training set")

    X = train.features
    y = train.positive.astype(np.float64)
    w = train.sample_weights(class_weighting)
    base_score = float(logit((w * y).sum() / w.sum()))

    margin = np.full(len(y), base_score)
    trace = [log_loss(y, margin, w)]
    trees = []
    for _ in range(hyper.n_rounds):
        p = expit(margin)
        g = w * (p - y)
        h = w * p * (1.0 - p)
        tree = _grow_regression_tree(X, g, h, hyper, 0)
        trees.append(tree)
        margin = margin + hyper.learning_rate * tree.predict_values(X)
        trace.append(log_loss(y, margin, w))

    return GradientBoostedModel(trees, base_score, hyper, train.n_features, trace)


def train_svm(
    train: TrainingSet,
    hyper: Optional[LinearSvmHyper] = None,
    bounds: Optional[Sequence[Tuple[float, float]]] = None,
    class_weighting=False,
) -> LinearSvmModel:
    """
        Primal hinge-loss SVM by Pegasos stochastic subgradient descent,
        step 1 / (lambda t). The bias is an extra constant feature and is
        regularized with the weights. The returned iterate is the average
        over the second half of training.

    :param train: TrainingSet
    :param hyper: LinearSvmHyper
    :param bounds: (low, high) per feature used to scale onto [-1, 1];
                   the training minimum and maximum when omitted
    :param class_weighting: inverse class frequency weights
    """
    hyper = hyper or LinearSvmHyper()
    if not train.has_both_classes():
        raise SingleClass("SVM needs both classes in the training set")

    X = train.features
    if bounds is None:
        low, high = X.min(axis=0), X.max(axis=0)
        high = np.where(high > low, high, low + 1.0)
    else:
        b = np.asarray(bounds, dtype=np.float64)
        low, high = b[:, 0], b[:, 1]

    n, d = X.shape
    Z = np.hstack((2.0 * (X - low) / (high - low) - 1.0, np.ones((n, 1))))
    y = np.where(train.positive, 1.0, -1.0)
    sw = train.sample_weights(class_weighting)
    lam = hyper.lambda_reg

    rng = np.random.default_rng(hyper.seed)
    w = np.zeros(d + 1)
    average = np.zeros(d + 1)
    total = hyper.epochs * n
    burn_in = total // 2
    t = 0
    for _ in range(hyper.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            violated = y[i] * (Z[i] @ w) < 1.0
            w *= 1.0 - eta * lam
            if violated:
                w += eta * sw[i] * y[i] * Z[i]
            if t > burn_in:
                average += w

    average /= max(1, total - burn_in)
    return LinearSvmModel(average[:d], average[d], low, high, hyper)


def train_surrogate(
    kind: SurrogateKind,
    train: TrainingSet,
    overrides: Optional[Dict] = None,
    bounds: Optional[Sequence[Tuple[float, float]]] = None,
    class_weighting: bool = False,
) -> SurrogateModel:
    hyper = make_hyper(kind, overrides)
    if kind is SurrogateKind.DECISION_TREE:
        return train_decision_tree(train, hyper, class_weighting)
    if kind is SurrogateKind.GRADIENT_BOOSTED:
        return train_gbt(train, hyper, class_weighting)
    if kind is SurrogateKind.LINEAR_SVM:
        return train_svm(train, hyper, bounds, class_weighting)
    raise ValueError("no surrogate for kind %s" % kind.value)


def predict(model: SurrogateModel, x: Sequence[float]) -> Label:
    return model.predict(x)


def model_from_dict(data: dict) -> SurrogateModel:
    try:
        kind = SurrogateKind(data["kind"])
        n_features = int(data["n_features"])
        s = data["structure"]
        if kind is SurrogateKind.DECISION_TREE:
            return DecisionTreeModel(
                TreeNode.from_dict(s["root"]), DecisionTreeHyper(**data["hyper"]), n_features
            )
        if kind is SurrogateKind.GRADIENT_BOOSTED:
            return GradientBoostedModel(
                [TreeNode.from_dict(t) for t in s["trees"]],
                s["base_score"],
                GradientBoostedHyper(**data["hyper"]),
                n_features,
            )
        if kind is SurrogateKind.LINEAR_SVM:
            return LinearSvmModel(
                s["weights"],
                s["bias"],
                s["scale_low"],
                s["scale_high"],
                LinearSvmHyper(**data["hyper"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(1, "malformed model document: %s" % exc)
    raise SchemaError(1, "model kind %s has no structure" % kind.value)


def save_model(model: SurrogateModel, path) -> None:
    with open(path, "w") as f:
        json.dump(model.to_dict(), f)


def load_model(path) -> SurrogateModel:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(exc.lineno, exc.msg)
    return model_from_dict(data)
