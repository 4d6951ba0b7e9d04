"""Fitting conditional quantiles on the Friedman design.

Fit the tree ensemble at three quantile levels on 100 training rows, then
check two things on fresh data: the held-out check loss, and whether roughly
a fraction tau of the test responses fall below the fitted tau-quantile.
"""
import numpy as np

from bayesqart import SamplerConfig, fit, mwad, predict_band, predict_quantile, simulate

if __name__ == "__main__":
    train = simulate("friedman", 100, seed=1)
    test = simulate("friedman", 1000, seed=2)

    for tau in (0.25, 0.5, 0.75):
        post = fit(train, SamplerConfig(tau=tau, seed=0))
        q = predict_quantile(post, test.X)
        below = np.mean(test.y <= q)
        loss = mwad(q, test.y, tau, flip=True)
        print(f"tau={tau:.2f}  MWAD={loss:.3f}  share below={below:.3f}  "
              f"phi~{np.median(post.phi):.4f}  acceptance={post.acceptance}")

    # a posterior band around the median at a few test rows
    post = fit(train, SamplerConfig(tau=0.5, seed=0))
    lo, hi = predict_band(post, test.X[:5], level=0.9)
    mid = predict_quantile(post, test.X[:5])
    for a, m, b, y in zip(lo, mid, hi, test.y[:5]):
        print(f"  {a:7.2f} <= {m:7.2f} <= {b:7.2f}   observed {y:7.2f}")
