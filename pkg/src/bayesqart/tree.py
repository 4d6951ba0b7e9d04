"""Binary regression trees stored in a flat node arena.

Routing sends ``x[var] <= cut`` to the left child.  Structural moves return a
new tree and leave the original untouched; when a predictor matrix is passed
they refuse (with :class:`InvalidProposal`) any result with an empty leaf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K


class InvalidProposal(ValueError):
    """A structural move would leave some leaf without training rows."""


@dataclass(frozen=True)
class SplitRule:
    var_index: int
    cut_value: float


@dataclass(frozen=True)
class TreePrior:
    """Depth-dependent split probability ``psi1 / (1 + depth) ** psi2``."""

    psi1: float = 0.95
    psi2: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.psi1 < 1.0:
            raise ValueError(f"psi1 must lie in (0, 1), got {self.psi1}")
        if self.psi2 < 0.0:
            raise ValueError(f"psi2 must be >= 0, got {self.psi2}")


def p_split(depth: int, prior: TreePrior) -> float:
    """Probability that a node at ``depth`` splits; the root always splits."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    return float(K.p_split(int(depth), prior.psi1, prior.psi2))


class RegressionTree:
    """A single tree: internal nodes carry split rules, leaves carry ``mu``.

    Node ids are arena slot indices; the root is slot 0.
    """

    def __init__(self, ints: np.ndarray, floats: np.ndarray):
        self.ints = ints
        self.floats = floats

    @classmethod
    def leaf(cls, mu: float = 0.0, cap: int = 8) -> RegressionTree:
        ints, floats = K.empty_arena(cap)
        ints[0] = (K.LEAF, -1, -1, -1, 0)
        floats[0, K.MU] = mu
        return cls(ints, floats)

    @classmethod
    def stump(cls, rule: SplitRule, mu_left: float = 0.0, mu_right: float = 0.0) -> RegressionTree:
        tree = cls.leaf()
        left, right = K.grow_at(tree.ints, tree.floats, 0, rule.var_index, rule.cut_value)
        tree.floats[left, K.MU] = mu_left
        tree.floats[right, K.MU] = mu_right
        return tree

    def copy(self, min_free: int = 0) -> RegressionTree:
        ints, floats = self.ints.copy(), self.floats.copy()
        free = K.count_free(ints)
        if free < min_free:
            extra = max(min_free - free, ints.shape[0])
            more_i, more_f = K.empty_arena(extra)
            ints = np.concatenate([ints, more_i])
            floats = np.concatenate([floats, more_f])
        return RegressionTree(ints, floats)

    # -- inspection

    def _collect(self, kind: int) -> list[int]:
        out = np.empty(self.ints.shape[0], dtype=np.int64)
        return out[: K.collect(self.ints, kind, out)].tolist()

    def leaves(self) -> list[int]:
        return self._collect(0)

    def internal_nodes(self) -> list[int]:
        return self._collect(1)

    def prunable_nodes(self) -> list[int]:
        return self._collect(2)

    def swappable_pairs(self) -> list[tuple[int, int]]:
        return [(int(self.ints[c, K.PARENT]), c) for c in self._collect(3)]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    @property
    def n_nodes(self) -> int:
        return int((self.ints[:, K.VAR] != K.FREE).sum())

    def depth(self, node: int | None = None) -> int:
        """Depth of ``node``, or the maximum leaf depth when omitted."""
        if node is not None:
            return int(self.ints[node, K.DEPTH])
        return max(int(self.ints[k, K.DEPTH]) for k in self.leaves())

    def is_leaf(self, node: int) -> bool:
        return self.ints[node, K.VAR] == K.LEAF

    def rule(self, node: int) -> SplitRule:
        if self.ints[node, K.VAR] < 0:
            raise ValueError(f"node {node} is not internal")
        return SplitRule(int(self.ints[node, K.VAR]), float(self.floats[node, K.CUT]))

    def children(self, node: int) -> tuple[int, int]:
        return int(self.ints[node, K.LEFT]), int(self.ints[node, K.RIGHT])

    def mu(self, node: int) -> float:
        return float(self.floats[node, K.MU])

    def set_mu(self, node: int, value: float) -> None:
        if not self.is_leaf(node):
            raise ValueError(f"node {node} is not a leaf")
        self.floats[node, K.MU] = value

    # -- evaluation

    def assign(self, x) -> int:
        """Leaf reached by a single predictor row."""
        return int(K.route(self.ints, self.floats, np.asarray(x, dtype=float)))

    def assign_rows(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        out = np.empty(X.shape[0], dtype=np.int64)
        K.route_rows(self.ints, self.floats, X, out)
        return out

    def fitted_value(self, x) -> float:
        return float(self.floats[self.assign(x), K.MU])

    def predict(self, X) -> np.ndarray:
        return self.floats[self.assign_rows(X), K.MU]

    def leaf_counts(self, X) -> dict[int, int]:
        leaf_of = self.assign_rows(X)
        return {k: int((leaf_of == k).sum()) for k in self.leaves()}

    def _check_nonempty(self, X) -> None:
        if X is not None and min(self.leaf_counts(X).values()) == 0:
            raise InvalidProposal("move leaves a leaf with no training rows")

    # -- structural moves

    def grow(self, leaf: int, rule: SplitRule, X=None) -> RegressionTree:
        if not self.is_leaf(leaf):
            raise ValueError(f"node {leaf} is not a leaf")
        new = self.copy(min_free=2)
        K.grow_at(new.ints, new.floats, leaf, rule.var_index, rule.cut_value)
        new._check_nonempty(X)
        return new

    def prune(self, node: int) -> RegressionTree:
        if not K.is_prunable(self.ints, node):
            raise ValueError(f"node {node} does not have two leaf children")
        new = self.copy()
        K.prune_at(new.ints, new.floats, node)
        return new

    def change(self, node: int, rule: SplitRule, X=None) -> RegressionTree:
        if self.ints[node, K.VAR] < 0:
            raise ValueError(f"node {node} is not internal")
        new = self.copy()
        new.ints[node, K.VAR] = rule.var_index
        new.floats[node, K.CUT] = rule.cut_value
        new._check_nonempty(X)
        return new

    def swap(self, parent: int, child: int, X=None) -> RegressionTree:
        if self.ints[parent, K.VAR] < 0 or self.ints[child, K.VAR] < 0:
            raise ValueError("swap needs two internal nodes")
        if self.ints[child, K.PARENT] != parent:
            raise ValueError(f"node {child} is not a child of {parent}")
        new = self.copy()
        new.ints[[parent, child], K.VAR] = self.ints[[child, parent], K.VAR]
        new.floats[[parent, child], K.CUT] = self.floats[[child, parent], K.CUT]
        new._check_nonempty(X)
        return new

    # -- serialisation

    def to_preorder(self) -> str:
        var = np.empty(self.n_nodes, dtype=np.int64)
        val = np.empty(self.n_nodes)
        right = np.empty(self.n_nodes, dtype=np.int64)
        K._preorder(self.ints, self.floats, 0, var, val, right, 0)
        return encode_preorder(var, val)

    @classmethod
    def from_preorder(cls, text: str) -> RegressionTree:
        var, val = decode_preorder(text)
        ints, floats = K.empty_arena(max(8, len(var)))
        # pre-order positions are valid arena slots with the root at 0
        stack: list[int] = []
        for pos, (v, x) in enumerate(zip(var, val)):
            parent = stack.pop() if stack else -1
            ints[pos, K.PARENT] = parent
            ints[pos, K.DEPTH] = 0 if parent < 0 else ints[parent, K.DEPTH] + 1
            if parent >= 0:
                side = K.LEFT if ints[parent, K.LEFT] == -1 else K.RIGHT
                ints[parent, side] = pos
            ints[pos, K.VAR] = v
            if v >= 0:
                floats[pos, K.CUT] = x
                stack.extend((pos, pos))
            else:
                floats[pos, K.MU] = x
        if stack:
            raise ValueError("truncated pre-order encoding")
        return cls(ints, floats)

    def __eq__(self, other):
        if not isinstance(other, RegressionTree):
            return NotImplemented
        return self.to_preorder() == other.to_preorder()

    def __repr__(self):
        return f"RegressionTree({self.to_preorder()!r})"


def encode_preorder(var, val) -> str:
    """Whitespace-delimited ``I var cut`` / ``L mu`` tokens; floats round-trip exactly."""
    parts = []
    for v, x in zip(np.asarray(var).tolist(), np.asarray(val).tolist()):
        parts.append(f"I {v} {x!r}" if v >= 0 else f"L {x!r}")
    return " ".join(parts)


def decode_preorder(text: str) -> tuple[np.ndarray, np.ndarray]:
    tokens = text.split()
    var, val = [], []
    t = 0
    while t < len(tokens):
        tag = tokens[t]
        if tag == "I":
            var.append(int(tokens[t + 1]))
            val.append(float(tokens[t + 2]))
            t += 3
        elif tag == "L":
            var.append(K.LEAF)
            val.append(float(tokens[t + 1]))
            t += 2
        else:
            raise ValueError(f"bad node tag {tag!r} in tree encoding")
    return np.array(var, dtype=np.int64), np.array(val, dtype=float)


def right_offsets(var: np.ndarray) -> np.ndarray:
    """Relative offset from each internal node to its right child in pre-order."""
    right = np.zeros(len(var), dtype=np.int64)
    stack: list[list[int]] = []  # [position, children started]
    for pos, v in enumerate(np.asarray(var).tolist()):
        if stack:
            top = stack[-1]
            top[1] += 1
            if top[1] == 2:
                right[top[0]] = pos - top[0]
        if v >= 0:
            stack.append([pos, 0])
        else:
            while stack and stack[-1][1] == 2:
                stack.pop()
    return right


def log_tree_prior(tree: RegressionTree, prior: TreePrior, X) -> float:
    """Log prior mass of ``tree`` given the training predictors.

    Rule probabilities are uniform over predictors that vary in the node and
    over the node's distinct values minus the largest.  Returns ``-inf`` for
    trees outside the prior's support, notably a splittable root-only tree.
    """
    X = np.ascontiguousarray(X, dtype=float)
    leaf_of = tree.assign_rows(X)
    return float(K.log_tree_prior(tree.ints, tree.floats, leaf_of, X, prior.psi1, prior.psi2))


def sample_prior_tree(X, prior: TreePrior, rng: np.random.Generator) -> RegressionTree:
    """Draw a tree from the generating process on the rows of ``X``.

    Nodes split with probability ``p_split(depth)`` when some predictor still
    varies, choosing the predictor and then the cut uniformly.  Leaf values
    are left at zero.
    """
    X = np.asarray(X, dtype=float)
    tree = RegressionTree.leaf(cap=max(8, 2 * X.shape[0]))
    todo = [(0, np.arange(X.shape[0]))]
    while todo:
        node, rows = todo.pop()
        sub = X[rows]
        menus = [np.unique(sub[:, v])[:-1] for v in range(X.shape[1])]
        avail = [v for v, m in enumerate(menus) if m.size]
        if not avail or rng.random() >= p_split(tree.depth(node), prior):
            continue
        v = avail[int(rng.integers(len(avail)))]
        cut = float(menus[v][int(rng.integers(menus[v].size))])
        left, right = K.grow_at(tree.ints, tree.floats, node, v, cut)
        go_left = sub[:, v] <= cut
        todo.append((left, rows[go_left]))
        todo.append((right, rows[~go_left]))
    return tree
