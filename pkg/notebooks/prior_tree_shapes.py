"""What trees does the prior favour?

With the likelihood switched off the structural sampler should reproduce the
tree-generating process.  Tabulate (depth, leaves) from both and compare.
"""
from collections import Counter

import numpy as np

from bayesqart.dists import QuantileSpec
from bayesqart.sampler import LeafPrior, MoveKernel, init_state, mh_step_tree
from bayesqart.tree import TreePrior, sample_prior_tree

if __name__ == "__main__":
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.permutation(8), rng.integers(0, 3, 8)]).astype(float)
    prior = TreePrior(0.95, 2.0)
    steps = 50_000

    state = init_state(X, 1, rng)
    chain = Counter()
    for _ in range(steps):
        mh_step_tree(state, 0, X, np.zeros(8), QuantileSpec(0.5), LeafPrior(), prior,
                     MoveKernel(), rng, use_likelihood=False)
        t = state.tree(0)
        chain[(t.depth(), t.n_leaves)] += 1

    direct = Counter()
    for _ in range(steps):
        t = sample_prior_tree(X, prior, rng)
        direct[(t.depth(), t.n_leaves)] += 1

    print(" depth leaves    chain   direct")
    for key in sorted(set(chain) | set(direct)):
        print(f"{key[0]:6d} {key[1]:6d}  {chain[key] / steps:7.4f}  {direct[key] / steps:7.4f}")
    tv = 0.5 * sum(abs(chain[k] - direct[k]) for k in set(chain) | set(direct)) / steps
    print(f"total variation: {tv:.4f}")
