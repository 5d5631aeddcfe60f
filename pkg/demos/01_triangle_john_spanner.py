"""
Triangle, John position and an exact volumetric spanner
=======================================================

Walks through the equilateral triangle: its enclosing ellipsoid, the map to
John position with contact weights, and why all three vertices are needed.
"""
import math

import numpy as np

from volspan import PointSet, SpannerSet, ellipsoid_norms, exact_volumetric_spanner, john_decomposition, mvee_approx
from volspan.verify import verify_spanner

np.set_printoptions(precision=4, suppress=True)
spacer = "_" * 60

s3 = math.sqrt(3.0)
tri = PointSet([[0.0, 1.0], [-s3 / 2, -0.5], [s3 / 2, -0.5]])
print("triangle vertices")
print(tri.points)

print(spacer)
print("\nMinimum volume ellipsoid of K and -K (the hexagon)")
E = mvee_approx(tri, 1e-9)
print("shape matrix")
print(E.shape)
print("log volume", E.log_volume)

print(spacer)
print("\nJohn position: every contact point has unit length and")
print("the weighted outer products sum to the identity")
Kj, cert = john_decomposition(tri)
print("weights", cert.weights)
P = Kj.points
print("sum c x x^T =")
print((P.T * cert.weights) @ P)

print(spacer)
print("\nTwo vertices are not enough: the third sits at norm sqrt 2")
S2 = SpannerSet.from_points(tri, [1, 2])
print("norms w.r.t. {v1, v2}:", ellipsoid_norms(S2, tri.points))

S = exact_volumetric_spanner(tri)
rep = verify_spanner(S.indices, tri.points)
print("exact spanner indices", S.indices, "max norm", round(rep.max_norm, 4))
