"""Radius of the hypersphere used by the binary simulation design.

Points are uniform on [-1, 1]^10 and the label is 1 outside a sphere.  The
radius is chosen so that the two classes are balanced, i.e. r^2 is the
median of sum(x_j^2).  No closed form is handy, so estimate it by Monte Carlo
and compare with the mean d / 3 as a sanity check.
"""
import numpy as np

from bayesqart.simdata import CIRCLE_R2_D10, calibrate_circle_radius_sq

if __name__ == "__main__":
    d = 10
    est = calibrate_circle_radius_sq(d, draws=10**7, seed=20240101)
    print(f"median r^2, d={d}: {est:.5f}   (mean d/3 = {d / 3:.5f})")
    print(f"stored constant:       {CIRCLE_R2_D10:.5f}")

    # spread of the estimate across seeds at a smaller budget
    reps = [calibrate_circle_radius_sq(d, draws=10**6, seed=s) for s in range(5)]
    print("10^6-draw estimates:", np.round(reps, 4))
