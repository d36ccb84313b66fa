"""
Distances between networks, by hand
===================================

Two nets that compute the same function can look different: neurons can
be permuted and each (w, b) can be scaled by c > 0 with a divided by c.
The canonical form and the optimal matching remove both symmetries.
"""

import numpy as np

from sparse_relu import TwoLayerNet, brute_force_match, canonicalize, forward_batch, match_networks

rng = np.random.default_rng(0)
A = TwoLayerNet(rng.normal(size=(4, 3)), np.array([1.5, -0.5, 2.0]), rng.normal(size=3))

# permute neurons and rescale each one: same function, different parameters
perm, c = [2, 0, 1], np.array([0.5, 3.0, 10.0])
B = TwoLayerNet(A.W[:, perm] * c, A.a[perm] / c, A.b[perm] * c)
X = rng.normal(size=(5, 4))
print("max |f_A - f_B| =", np.max(np.abs(forward_batch(A, X) - forward_batch(B, X))))

m = match_networks(canonicalize(A), canonicalize(B))
print("D1 = %.2g  D2 = %.2g  permutation = %s" % (m.D1, m.D2, (m.permutation + 1).tolist()))

# flip the sign of one output weight: d2 charges 1 for a sign mismatch
C = TwoLayerNet(A.W, A.a * [1, 1, -1], A.b)
m = match_networks(canonicalize(A), canonicalize(C))
print("after sign flip: D2 = %.3f" % m.D2)

# a narrower net gets padded with empty neurons; compare the two pad rules
D = TwoLayerNet(A.W[:, :2], A.a[:2], A.b[:2])
for padding in ("neutral", "positive"):
    fast = match_networks(canonicalize(A), canonicalize(D), padding=padding)
    slow = brute_force_match(canonicalize(A), canonicalize(D), padding=padding)
    print("%-8s padding: D2 = %.3f (brute force %.3f)" % (padding, fast.D2, slow.D2))
