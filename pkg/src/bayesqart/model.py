"""Conditional-quantile regression with a sum of Bayesian quantile trees."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Literal

import numpy as np

from .draws import PosteriorDraws, TransformRecord
from .sampler import SamplerConfig, run_chain
from .simdata import Dataset

Summary = Literal["mean", "median"]


def transform_response(y) -> tuple[np.ndarray, TransformRecord]:
    """Rescale ``y`` onto [-0.5, 0.5]; refuses a constant response."""
    rec = TransformRecord.fit(y)
    return rec.forward(y), rec


def inverse_transform(v, t: TransformRecord):
    return t.inverse(v)


def chain_generators(seed: int, chains: int) -> list[np.random.Generator]:
    """Independent sub-streams of one master seed, one per chain."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(chains)]


def run_chains(run_one: Callable[[np.random.Generator], PosteriorDraws],
               config: SamplerConfig) -> PosteriorDraws:
    rngs = chain_generators(config.seed, config.chains)
    if config.chains == 1:
        return run_one(rngs[0])
    with ThreadPoolExecutor(max_workers=config.chains) as pool:
        parts = list(pool.map(run_one, rngs))
    return PosteriorDraws.pool(parts)


def fit(data: Dataset, config: SamplerConfig | None = None) -> PosteriorDraws:
    """Fit the quantile-tree ensemble at level ``config.tau``.

    Deterministic given ``config.seed`` and ``config.chains``.
    """
    config = config or SamplerConfig()
    y_t, rec = transform_response(data.y)

    def run_one(rng):
        draws, _ = run_chain(data.X, y_t, config, rng, transform=rec)
        return draws

    draws = run_chains(run_one, config)
    draws.columns = list(data.columns)
    draws.target = data.target
    return draws


def predict_draws(post: PosteriorDraws, X) -> np.ndarray:
    """Per-snapshot conditional quantile on the response scale, ``(n_snapshots, n_rows)``."""
    return post.transform.inverse(post.ensemble_fit(X))


def predict_quantile(post: PosteriorDraws, X, summary: Summary = "mean") -> np.ndarray:
    """Point estimate of the conditional ``tau``-quantile at each row of ``X``.

    The ensemble fit is the quantile because the error's ``tau``-quantile is
    zero; snapshots are summarised on the model scale and mapped back.
    """
    G = post.ensemble_fit(X)
    if summary == "mean":
        point = G.mean(axis=0)
    elif summary == "median":
        point = np.median(G, axis=0)
    else:
        raise ValueError(f"summary must be 'mean' or 'median', got {summary!r}")
    return post.transform.inverse(point)


def predict_band(post: PosteriorDraws, X, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    """Equal-tailed posterior band of the conditional quantile over snapshots."""
    draws = predict_draws(post, X)
    lo, hi = np.quantile(draws, [(1 - level) / 2, (1 + level) / 2], axis=0)
    return lo, hi
