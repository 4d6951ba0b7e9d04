"""Seeded generators for the three simulation designs.

Each generator is a pure function of ``(n, seed)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

Design = Literal["friedman", "hetero", "circle"]

# Median of sum(x_j^2) for x ~ Unif(-1, 1)^10, from 10^7 draws
# (notebooks/calibrate_circle_radius.py).  Close to the mean d / 3.
CIRCLE_R2_D10 = 3.3006


@dataclass
class Dataset:
    """Predictor matrix, response and column names."""

    X: np.ndarray
    y: np.ndarray
    columns: list[str] = field(default_factory=list)
    target: str = "y"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be 2-d with one row per response value")
        if not self.columns:
            self.columns = [f"x{j + 1}" for j in range(self.X.shape[1])]
        if len(self.columns) != self.X.shape[1]:
            raise ValueError("one column name per predictor is required")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def friedman_mean(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return (10 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20 * (X[:, 2] - 0.5) ** 2
            + 10 * X[:, 3] + 5 * X[:, 4])


def friedman_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Two-component mixture: N(0, 1) w.p. 0.8, else N(1, 4) (variance 4)."""
    first = rng.random(n) < 0.8
    e1 = rng.standard_normal(n)
    e2 = 1.0 + 2.0 * rng.standard_normal(n)
    return np.where(first, e1, e2)


def gen_friedman(n: int, seed) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.random((n, 10))
    y = friedman_mean(X) + friedman_noise(n, rng)
    return Dataset(X, y)


HETERO_BETA = np.r_[np.ones(20), np.zeros(10)]
HETERO_GAMMA = np.r_[np.ones(5), np.zeros(25)]


def gen_hetero(n: int, seed) -> Dataset:
    """Linear location and linear scale in 30 uniform predictors."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, 30))
    eps = rng.standard_normal(n)
    y = X @ HETERO_BETA + (X @ HETERO_GAMMA) * eps
    return Dataset(X, y)


def circle_radius_sq(d: int) -> float:
    if d == 10:
        return CIRCLE_R2_D10
    return calibrate_circle_radius_sq(d)


def calibrate_circle_radius_sq(d: int, draws: int = 10**6, seed: int = 0) -> float:
    """Monte-Carlo median of the squared norm of a uniform point in [-1, 1]^d."""
    rng = np.random.default_rng(seed)
    total = np.zeros(draws)
    for _ in range(d):
        total += rng.uniform(-1.0, 1.0, draws) ** 2
    return float(np.median(total))


def gen_circle(n: int, seed, d: int = 10) -> Dataset:
    """Label 1 outside the hypersphere whose radius splits the classes evenly."""
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, d))
    y = (np.sum(X**2, axis=1) > circle_radius_sq(d)).astype(float)
    return Dataset(X, y)


GENERATORS = {"friedman": gen_friedman, "hetero": gen_hetero, "circle": gen_circle}


def simulate(design: Design, n: int, seed) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    try:
        gen = GENERATORS[design]
    except KeyError:
        raise ValueError(f"unknown design {design!r}; choose from {sorted(GENERATORS)}") from None
    return gen(n, seed)
