"""Retained posterior ensembles and the response transformation record."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .tree import RegressionTree, decode_preorder, encode_preorder, right_offsets


@dataclass(frozen=True)
class TransformRecord:
    """Min-max map ``y -> (y - y_min) / (y_max - y_min) - 0.5`` or the identity."""

    y_min: float
    y_max: float
    is_identity: bool = False

    def __post_init__(self):
        if not self.is_identity and not self.y_max > self.y_min:
            raise ValueError("y_max must exceed y_min")

    @classmethod
    def identity(cls) -> TransformRecord:
        return cls(-0.5, 0.5, is_identity=True)

    @classmethod
    def fit(cls, y) -> TransformRecord:
        y = np.asarray(y, dtype=float)
        lo, hi = float(y.min()), float(y.max())
        if not hi > lo:
            raise ValueError("cannot rescale a constant response")
        return cls(lo, hi)

    def forward(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_identity:
            return y.copy()
        return (y - self.y_min) / (self.y_max - self.y_min) - 0.5

    def inverse(self, v):
        v = np.asarray(v, dtype=float)
        if self.is_identity:
            return v.copy()
        return (v + 0.5) * (self.y_max - self.y_min) + self.y_min


@dataclass
class PosteriorDraws:
    """Retained ensemble snapshots in flat pre-order form.

    Node arrays are shared by all snapshots; ``tree_ptr[s * n_trees + t]`` is
    the first node of tree ``t`` in snapshot ``s``.  Leaf values are on the
    model (transformed) scale.
    """

    var: np.ndarray
    val: np.ndarray
    right: np.ndarray
    tree_ptr: np.ndarray
    phi: np.ndarray
    n_trees: int
    n_features: int
    transform: TransformRecord
    config: dict = field(default_factory=dict)
    kind: str = "regression"
    columns: list[str] = field(default_factory=list)
    target: str = "y"
    acceptance: dict = field(default_factory=dict)

    @property
    def n_snapshots(self) -> int:
        return int(self.phi.size)

    def ensemble_fit(self, X) -> np.ndarray:
        """Sum-of-trees value for every snapshot and row, shape ``(n_snapshots, n_rows)``."""
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} predictor columns, got {X.shape[-1] if X.ndim else 0}"
            )
        return K.predict_flat(self.var, self.val, self.right, self.tree_ptr,
                              self.n_snapshots, self.n_trees, X)

    def _tree_slice(self, s: int, t: int) -> slice:
        k = s * self.n_trees + t
        start = int(self.tree_ptr[k])
        if k + 1 < self.tree_ptr.size:
            stop = int(self.tree_ptr[k + 1])
        else:
            stop = self.var.size
        return slice(start, stop)

    def tree_encodings(self, s: int) -> list[str]:
        out = []
        for t in range(self.n_trees):
            sl = self._tree_slice(s, t)
            out.append(encode_preorder(self.var[sl], self.val[sl]))
        return out

    def trees(self, s: int) -> list[RegressionTree]:
        return [RegressionTree.from_preorder(e) for e in self.tree_encodings(s)]

    @classmethod
    def from_encodings(cls, snapshots: list[list[str]], phi, **meta) -> PosteriorDraws:
        var, val, ptr = [], [], []
        pos = 0
        for trees in snapshots:
            for text in trees:
                v, x = decode_preorder(text)
                ptr.append(pos)
                var.append(v)
                val.append(x)
                pos += v.size
        var_a = np.concatenate(var) if var else np.empty(0, dtype=np.int64)
        right = np.concatenate([right_offsets(v) for v in var]) if var else np.empty(0, np.int64)
        return cls(var=var_a, val=np.concatenate(val) if val else np.empty(0), right=right,
                   tree_ptr=np.array(ptr, dtype=np.int64), phi=np.asarray(phi, dtype=float),
                   **meta)

    @classmethod
    def pool(cls, parts: list[PosteriorDraws]) -> PosteriorDraws:
        """Concatenate snapshots of several chains, in the given order."""
        first = parts[0]
        offsets = np.cumsum([0] + [p.var.size for p in parts[:-1]])
        acc: dict[str, float] = {}
        for name in first.acceptance:
            vals = [p.acceptance.get(name, float("nan")) for p in parts]
            acc[name] = float(np.nanmean(vals)) if not all(np.isnan(vals)) else float("nan")
        return cls(
            var=np.concatenate([p.var for p in parts]),
            val=np.concatenate([p.val for p in parts]),
            right=np.concatenate([p.right for p in parts]),
            tree_ptr=np.concatenate([p.tree_ptr + off for p, off in zip(parts, offsets)]),
            phi=np.concatenate([p.phi for p in parts]),
            n_trees=first.n_trees, n_features=first.n_features, transform=first.transform,
            config=first.config, kind=first.kind, columns=first.columns, target=first.target,
            acceptance=acc,
        )
