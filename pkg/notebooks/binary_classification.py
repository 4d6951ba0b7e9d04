"""Classifying points inside and outside a 10-d hypersphere.

The classifier treats the label as the sign of a latent quantile-regression
response.  Neither class is linearly separable from the other, which is where
a sum of trees helps.
"""
import numpy as np

from bayesqart import (SamplerConfig, auc, error_rate, fit_classifier, predict_label,
                       predict_proba, simulate)

if __name__ == "__main__":
    train = simulate("circle", 100, seed=11)
    test = simulate("circle", 1000, seed=12)
    print("training balance:", train.y.mean())

    probs = {}
    for label, cfg in [("sampled phi", SamplerConfig(seed=0)),
                       ("phi fixed at 1", SamplerConfig(seed=0, fixed_phi=1.0))]:
        post = fit_classifier(train, cfg)
        p = probs[label] = predict_proba(post, test.X)
        err = error_rate(predict_label(post, test.X), test.y)
        print(f"{label:15s} error={err:.3f}  AUC={auc(p, test.y):.3f}  "
              f"mean phi={post.phi.mean():.3f}")

    # probability as a function of distance from the origin, sampled phi
    p = probs["sampled phi"]
    r = np.sqrt((test.X**2).sum(axis=1))
    bins = np.quantile(r, np.linspace(0, 1, 6))
    idx = np.digitize(r, bins[1:-1])
    for k in range(5):
        print(f"  radius {bins[k]:.2f}-{bins[k + 1]:.2f}: mean prob {p[idx == k].mean():.3f}")
