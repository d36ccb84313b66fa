"""
Recovering a planted sparse ReLU network
========================================

Draw data from a small planted network, fit an l1-penalised two-layer
ReLU net, and measure how far the fit is from the truth after removing
the scaling and permutation symmetries.
"""

import numpy as np

from sparse_relu import PlantedSpec, TrainConfig, canonicalize, fit, gen_planted, match_networks
from sparse_relu.train import mse

# a planted net with 3 neurons that only looks at the first 5 of 50 inputs
spec = PlantedSpec(p=50, r_star=3, s=5, n_train=2000, n_test=2000, normalize_columns=True, seed=0)
train, test = gen_planted(spec)
print("true support (1-based):", [i + 1 for i in sorted(train.true_support)])

# a wider student net; the penalty pushes unused input weights to zero
result = fit(train.X, train.y, TrainConfig(lam=0.005, width=20, learning_rate=0.01, epochs=500, seed=0))
print("final penalised loss: %.4g" % result.train_loss_trace[-1])
print("test MSE: %.4g" % mse(result.net, test.X, test.y))

# canonical form: each neuron rescaled so |a| = 1, dead neurons dropped
student = canonicalize(result.net)
teacher = canonicalize(train.planted_net)
print("student width after canonicalisation:", student.width)

match = match_networks(teacher, student)
print("D1 = %.3f   D2 = %.3f" % (match.D1, match.D2))
# teacher indices past its width are empty pad neurons
for j, (d1, d2, agree) in enumerate(match.per_neuron):
    k = match.permutation[j]
    partner = "teacher %d" % (k + 1) if k < teacher.width else "pad"
    print("  student neuron %2d <- %-9s  d2=%.3f" % (j + 1, partner, d2))

# the rows of W that survive tell us which inputs the fit uses
row_norms = np.abs(student.W).sum(axis=1)
print("largest input-weight rows:", (np.argsort(-row_norms)[:8] + 1).tolist())
