"""Two readings of the leaf prior scale.

The quantity 1 / (2 kappa sqrt(n_trees)) can be used as the leaf prior
standard deviation ("sd") or as its variance ("variance").  On the rescaled
response the sd reading keeps the summed prior inside (-0.5, 0.5); the
variance reading is roughly sixty times wider and the ensemble overfits the
training rows.  This script shows the held-out effect on a few replications.
"""
import numpy as np

from bayesqart import SamplerConfig, fit, mwad, predict_quantile, simulate

if __name__ == "__main__":
    reps = 3
    for scale in ("sd", "variance"):
        train_err, test_err = [], []
        for r in range(reps):
            train = simulate("friedman", 100, seed=100 + r)
            test = simulate("friedman", 100, seed=200 + r)
            post = fit(train, SamplerConfig(tau=0.5, leaf_scale=scale, seed=r))
            train_err.append(mwad(predict_quantile(post, train.X), train.y, 0.5))
            test_err.append(mwad(predict_quantile(post, test.X), test.y, 0.5))
        print(f"{scale:8s} train MWAD {np.mean(train_err):.3f}   test MWAD {np.mean(test_err):.3f}")
