"""Gibbs / Metropolis-Hastings sampler for the sum of quantile trees.

One iteration draws the mixture latents, backfits every tree (structural MH
step with the leaf parameters integrated out, then a Gaussian leaf draw), and
finally draws the scale ``phi``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np

from . import _kernels as K
from .dists import GigParams, QuantileSpec, sample_gig_half, sample_inverse_gamma
from .draws import PosteriorDraws, TransformRecord
from .tree import RegressionTree, TreePrior

PhiMode = Literal["paper", "consistent"]
LeafScale = Literal["auto", "sd", "variance"]


@dataclass(frozen=True)
class LeafPrior:
    """N(0, sigma0_sq) leaf prior on the rescaled response.

    With ``scale="sd"`` the quantity ``1 / (2 kappa sqrt(n_trees))`` is the
    prior standard deviation, so the sum of ``n_trees`` leaves has standard
    deviation ``0.5 / kappa`` and sits inside (-0.5, 0.5) with high
    probability.  ``scale="variance"`` uses the same quantity as the variance,
    a far looser prior that lets the ensemble interpolate the training data.
    """

    kappa: float = 2.0
    n_trees: int = 200
    mu0: float = 0.0
    scale: Literal["sd", "variance"] = "sd"

    def __post_init__(self):
        if self.kappa <= 0 or self.n_trees < 1:
            raise ValueError("kappa must be positive and n_trees >= 1")
        if self.mu0 != 0.0:
            raise ValueError("the leaf prior mean is fixed at 0")
        if self.scale not in ("sd", "variance"):
            raise ValueError(f"scale must be 'sd' or 'variance', got {self.scale!r}")

    @property
    def sigma0_sq(self) -> float:
        s = 1.0 / (2.0 * self.kappa * math.sqrt(self.n_trees))
        return s * s if self.scale == "sd" else s


@dataclass(frozen=True)
class ScalePrior:
    """Inverse-Gamma(alpha / 2, beta / 2) prior on ``phi``."""

    alpha: float = 3.0
    beta: float = 3.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")


@dataclass(frozen=True)
class MoveKernel:
    grow: float = 0.25
    prune: float = 0.25
    swap: float = 0.40
    change: float = 0.10

    def __post_init__(self):
        probs = (self.grow, self.prune, self.swap, self.change)
        if min(probs) < 0 or not math.isclose(sum(probs), 1.0, abs_tol=1e-12):
            raise ValueError(f"move probabilities must be >= 0 and sum to 1, got {probs}")

    def cumulative(self) -> np.ndarray:
        cum = np.cumsum([self.grow, self.prune, self.swap, self.change])
        cum[-1] = 1.0
        return cum


@dataclass
class NodeSuffStats:
    """Sufficient statistics of the rows in one node.

    ``A = sum(w / nu)``, ``B = sum(1 / nu)``; ``sum_log_nu`` is only needed for
    the full node marginal, not for likelihood ratios.
    """

    A: float
    B: float
    n: int
    sum_log_nu: float = 0.0

    @classmethod
    def from_rows(cls, w, nu) -> NodeSuffStats:
        w = np.asarray(w, dtype=float)
        nu = np.asarray(nu, dtype=float)
        return cls(float(np.sum(w / nu)), float(np.sum(1.0 / nu)), int(w.size),
                   float(np.sum(np.log(nu))))

    def __add__(self, other: NodeSuffStats) -> NodeSuffStats:
        return NodeSuffStats(self.A + other.A, self.B + other.B, self.n + other.n,
                             self.sum_log_nu + other.sum_log_nu)


@dataclass(frozen=True)
class SamplerConfig:
    """Every tuning knob of a fit, kept flat so it maps onto CLI flags and config files."""

    tau: float = 0.5
    n_trees: int = 200
    kappa: float = 2.0
    psi1: float = 0.95
    psi2: float = 2.0
    alpha: float = 3.0
    beta: float = 3.0
    p_grow: float = 0.25
    p_prune: float = 0.25
    p_swap: float = 0.40
    p_change: float = 0.10
    burn_in: int = 1000
    keep: int = 1000
    thin: int = 1
    leaf_scale: LeafScale = "auto"
    phi_mode: PhiMode = "consistent"
    fixed_phi: float | None = None
    chains: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.keep < 1 or self.thin < 1 or self.burn_in < 0:
            raise ValueError("n_trees, keep and thin must be >= 1 and burn_in >= 0")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.leaf_scale not in ("auto", "sd", "variance"):
            raise ValueError(f"leaf_scale must be 'auto', 'sd' or 'variance', got {self.leaf_scale!r}")
        if self.phi_mode not in ("paper", "consistent"):
            raise ValueError(f"phi_mode must be 'paper' or 'consistent', got {self.phi_mode!r}")
        if self.fixed_phi is not None and self.fixed_phi <= 0:
            raise ValueError("fixed_phi must be positive")
        # construct the sub-objects once to validate them
        self.q, self.tree_prior, self.leaf_prior, self.scale_prior, self.kernel  # noqa: B018

    @property
    def q(self) -> QuantileSpec:
        return QuantileSpec(self.tau)

    @property
    def tree_prior(self) -> TreePrior:
        return TreePrior(self.psi1, self.psi2)

    @property
    def leaf_prior(self) -> LeafPrior:
        # "auto" means the rescaled-response reading; the classifier resolves it itself
        scale = "sd" if self.leaf_scale == "auto" else self.leaf_scale
        return LeafPrior(self.kappa, self.n_trees, scale=scale)

    @property
    def scale_prior(self) -> ScalePrior:
        return ScalePrior(self.alpha, self.beta)

    @property
    def kernel(self) -> MoveKernel:
        return MoveKernel(self.p_grow, self.p_prune, self.p_swap, self.p_change)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ChainState:
    """Mutable MCMC state over one ensemble.

    ``ints`` / ``floats`` are the stacked tree arenas (leading tree axis),
    ``leaf_of[j, i]`` the leaf of tree ``j`` holding training row ``i``, and
    ``fitted_sum`` the cached ensemble fit at the training rows.
    """

    ints: np.ndarray
    floats: np.ndarray
    leaf_of: np.ndarray
    nu: np.ndarray
    phi: float
    fitted_sum: np.ndarray
    iteration: int = 0
    move_counts: np.ndarray = field(default_factory=lambda: np.zeros((4, 2), dtype=np.int64))

    @property
    def n_trees(self) -> int:
        return self.ints.shape[0]

    def tree(self, j: int) -> RegressionTree:
        return RegressionTree(self.ints[j].copy(), self.floats[j].copy())

    def set_tree(self, j: int, tree: RegressionTree, X) -> None:
        n = tree.ints.shape[0]
        if n > self.ints.shape[1]:
            self._widen(n - self.ints.shape[1])
        self.ints[j], self.floats[j] = K.empty_arena(self.ints.shape[1])
        self.ints[j, :n] = tree.ints
        self.floats[j, :n] = tree.floats
        self.leaf_of[j] = tree.assign_rows(X)
        self.refresh_fit()

    def brute_force_fit(self) -> np.ndarray:
        out = np.zeros(self.leaf_of.shape[1])
        for j in range(self.n_trees):
            out += self.floats[j, self.leaf_of[j], K.MU]
        return out

    def refresh_fit(self) -> None:
        K.ensemble_fit(self.floats, self.leaf_of, self.fitted_sum)

    def ensure_capacity(self, min_free: int = 2) -> None:
        """Grow every arena so each tree has at least ``min_free`` unused slots."""
        free = (self.ints[:, :, K.VAR] == K.FREE).sum(axis=1).min()
        if free >= min_free:
            return
        self._widen(max(min_free - free, self.ints.shape[1]))

    def _widen(self, extra: int) -> None:
        more_i, more_f = K.empty_arena(extra, self.n_trees)
        self.ints = np.concatenate([self.ints, more_i], axis=1)
        self.floats = np.concatenate([self.floats, more_f], axis=1)

    def acceptance_rates(self) -> dict[str, float]:
        return {
            name: (float(self.move_counts[m, 1] / self.move_counts[m, 0])
                   if self.move_counts[m, 0] else float("nan"))
            for m, name in enumerate(K.MOVE_NAMES)
        }


def init_state(X, n_trees: int, rng: np.random.Generator, cap: int = 8) -> ChainState:
    """Every tree starts as one random valid root split with zero leaves.

    A root-only tree has zero prior mass, so the chain starts from depth one.
    """
    X = np.ascontiguousarray(X, dtype=float)
    n = X.shape[0]
    rows = np.arange(n, dtype=np.int64)
    n_av = K.n_avail_vars(X, rows, n)
    if n_av == 0:
        raise ValueError("no predictor varies across the training rows")
    ints, floats = K.empty_arena(cap, n_trees)
    ints[:, 0] = (K.LEAF, -1, -1, -1, 0)
    buf = np.empty(n)
    leaf_of = np.empty((n_trees, n), dtype=np.int64)
    u = rng.random((n_trees, 2))
    for j in range(n_trees):
        var = K.nth_avail_var(X, rows, n, K.pick(u[j, 0], n_av))
        m = K.cut_menu(X, rows, n, var, buf)
        K.grow_at(ints[j], floats[j], 0, var, buf[K.pick(u[j, 1], m)])
        K.route_rows(ints[j], floats[j], X, leaf_of[j])
    return ChainState(ints, floats, leaf_of, np.ones(n), 1.0, np.zeros(n))


# ---------------------------------------------------------------- conditionals


def draw_latents(state: ChainState, y, q: QuantileSpec, rng: np.random.Generator) -> np.ndarray:
    """Replace every ``nu[i]`` by its order-1/2 GIG full conditional draw."""
    resid = np.asarray(y) - state.fitted_sum
    c = q.theta2_sq * state.phi
    delta1 = resid**2 / c
    delta2 = (2.0 * q.theta2_sq + q.theta1**2) / c
    nu = sample_gig_half(GigParams(delta1, delta2), rng, size=resid.shape)
    # an exact zero needs chi-square and residual both exactly zero; keep nu positive
    state.nu = np.maximum(nu, np.finfo(float).tiny)
    return state.nu


def residuals_for_tree(state: ChainState, y, j: int, q: QuantileSpec) -> np.ndarray:
    """Partial residual ``y - sum_{l != j} g_l - theta1 * nu`` for tree ``j``."""
    own = state.floats[j, state.leaf_of[j], K.MU]
    return np.asarray(y) - state.fitted_sum + own - q.theta1 * state.nu


def node_log_marginal(s: NodeSuffStats, sum_w2_over_nu: float, phi: float,
                      q: QuantileSpec, lp: LeafPrior) -> float:
    """Log likelihood of one node's residuals with its leaf parameter integrated out."""
    if s.n < 1:
        raise ValueError("node must hold at least one row")
    return float(K.node_log_marginal(s.A, s.B, s.n, s.sum_log_nu, sum_w2_over_nu,
                                     q.theta2_sq * phi, lp.sigma0_sq))


def grow_log_ratio(parent: NodeSuffStats, left: NodeSuffStats, right: NodeSuffStats,
                   phi: float, q: QuantileSpec, lp: LeafPrior) -> float:
    """Log marginal-likelihood ratio of splitting ``parent`` into ``left`` and ``right``."""
    pooled = left + right
    if (pooled.n != parent.n or not math.isclose(pooled.A, parent.A, rel_tol=1e-9, abs_tol=1e-12)
            or not math.isclose(pooled.B, parent.B, rel_tol=1e-9, abs_tol=1e-12)):
        raise ValueError("children statistics do not pool to the parent")
    return float(K.grow_log_ratio(parent.A, parent.B, left.A, left.B, right.A, right.B,
                                  q.theta2_sq * phi, lp.sigma0_sq))


def mh_step_tree(state: ChainState, j: int, X, y, q: QuantileSpec, lp: LeafPrior,
                 tp: TreePrior, kernel: MoveKernel, rng: np.random.Generator,
                 use_likelihood: bool = True) -> tuple[bool, str]:
    """One structural proposal for tree ``j``; returns ``(accepted, move name)``.

    Inapplicable moves count as rejections.  ``use_likelihood=False`` targets
    the tree prior alone.
    """
    X = np.ascontiguousarray(X, dtype=float)
    state.ensure_capacity(2)
    w = residuals_for_tree(state, y, j, q)
    u = rng.random(5)
    move, ok = K.mh_tree(state.ints[j], state.floats[j], state.leaf_of[j], X, w, 1.0 / state.nu,
                         q.theta2_sq * state.phi, lp.sigma0_sq, tp.psi1, tp.psi2,
                         kernel.cumulative(), use_likelihood, u)
    state.move_counts[move, 0] += 1
    state.move_counts[move, 1] += ok
    state.refresh_fit()
    return bool(ok), K.MOVE_NAMES[move]


def draw_leaf_params(state: ChainState, j: int, y, q: QuantileSpec, lp: LeafPrior,
                     rng: np.random.Generator) -> None:
    """Gaussian full-conditional draw of every leaf parameter of tree ``j``."""
    w = residuals_for_tree(state, y, j, q)
    z = rng.standard_normal(int((state.ints[j, :, K.VAR] == K.LEAF).sum()))
    K.draw_leaves(state.ints[j], state.floats[j], state.leaf_of[j], w, 1.0 / state.nu,
                  q.theta2_sq * state.phi, lp.sigma0_sq, z)
    state.refresh_fit()


def phi_conditional(state: ChainState, y, q: QuantileSpec, sp: ScalePrior,
                    mode: PhiMode = "paper") -> tuple[float, float]:
    """Shape and rate of the Inverse-Gamma conditional of ``phi``.

    ``paper`` is the conditional as usually displayed for this model;
    ``consistent`` also includes the ``nu_i | phi ~ Exp(mean phi)`` terms.
    """
    n = state.nu.size
    r = np.asarray(y) - state.fitted_sum - q.theta1 * state.nu
    rate = sp.beta / 2.0 + float(np.sum(r * r / (2.0 * q.theta2_sq * state.nu)))
    shape = (n + sp.alpha) / 2.0
    if mode == "consistent":
        shape = (3 * n + sp.alpha) / 2.0
        rate += float(np.sum(state.nu))
    elif mode != "paper":
        raise ValueError(f"unknown phi mode {mode!r}")
    return shape, rate


def draw_phi(state: ChainState, y, q: QuantileSpec, sp: ScalePrior, mode: PhiMode,
             rng: np.random.Generator) -> float:
    shape, rate = phi_conditional(state, y, q, sp, mode)
    state.phi = sample_inverse_gamma(shape, rate, rng)
    return state.phi


def gibbs_iteration(state: ChainState, X, y, config: SamplerConfig, rng: np.random.Generator,
                    use_likelihood: bool = True, update_structure: bool = True) -> ChainState:
    """Latents, then (structure, leaves) for each tree in turn, then ``phi``."""
    q = config.q
    y = np.asarray(y, dtype=float)
    draw_latents(state, y, q, rng)
    state.ensure_capacity(2)
    n_trees = state.n_trees
    max_leaves = int((state.ints[:, :, K.VAR] == K.LEAF).sum(axis=1).max())
    U = rng.random((n_trees, 5))
    Z = rng.standard_normal((n_trees, max_leaves + 1))
    K.sweep(state.ints, state.floats, state.leaf_of, X, y, state.nu, state.fitted_sum,
            q.theta1, q.theta2_sq * state.phi, config.leaf_prior.sigma0_sq,
            config.psi1, config.psi2, config.kernel.cumulative(), use_likelihood,
            update_structure, U, Z, state.move_counts)
    if config.fixed_phi is None:
        draw_phi(state, y, q, config.scale_prior, config.phi_mode, rng)
    state.iteration += 1
    return state


ResponseUpdate = Callable[[ChainState, np.random.Generator], np.ndarray]


class _Recorder:
    """Collects flattened ensemble snapshots during a run."""

    def __init__(self, n_trees: int):
        self.n_trees = n_trees
        self.var: list[np.ndarray] = []
        self.val: list[np.ndarray] = []
        self.right: list[np.ndarray] = []
        self.ptr: list[np.ndarray] = []
        self.phi: list[float] = []
        self.offset = 0

    def record(self, state: ChainState) -> None:
        size = int((state.ints[:, :, K.VAR] != K.FREE).sum())
        var = np.empty(size, dtype=np.int64)
        val = np.empty(size)
        right = np.empty(size, dtype=np.int64)
        ptr = np.empty(self.n_trees, dtype=np.int64)
        K.flatten_ensemble(state.ints, state.floats, var, val, right, ptr, 0)
        self.var.append(var)
        self.val.append(val)
        self.right.append(right)
        self.ptr.append(ptr + self.offset)
        self.offset += size
        self.phi.append(state.phi)

    def arrays(self):
        return (np.concatenate(self.var), np.concatenate(self.val),
                np.concatenate(self.right), np.concatenate(self.ptr), np.array(self.phi))


def run_chain(X, y, config: SamplerConfig, rng: np.random.Generator, *,
              transform: TransformRecord | None = None,
              response_update: ResponseUpdate | None = None,
              state: ChainState | None = None,
              update_structure: bool = True,
              kind: str = "regression") -> tuple[PosteriorDraws, ChainState]:
    """Run ``burn_in + keep * thin`` iterations and keep every ``thin``-th draw.

    ``response_update`` redraws a latent response at the top of each
    iteration (used by the binary classifier); otherwise ``y`` is fixed and
    must not be constant.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-d with one row per response value")
    if response_update is None and np.ptp(y) == 0:
        raise ValueError("response is constant")
    if state is None:
        state = init_state(X, config.n_trees, rng)
        if config.fixed_phi is not None:
            state.phi = float(config.fixed_phi)
    rec = _Recorder(config.n_trees)
    for it in range(config.burn_in + config.keep * config.thin):
        resp = y if response_update is None else response_update(state, rng)
        gibbs_iteration(state, X, resp, config, rng, update_structure=update_structure)
        if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0:
            rec.record(state)
    var, val, right, ptr, phi = rec.arrays()
    draws = PosteriorDraws(
        var=var, val=val, right=right, tree_ptr=ptr, phi=phi, n_trees=config.n_trees,
        n_features=X.shape[1],
        transform=transform if transform is not None else TransformRecord.identity(),
        config=config.to_dict(), kind=kind,
        acceptance=state.acceptance_rates(),
    )
    return draws, state
