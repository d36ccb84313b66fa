"""
Variable selection from input-layer weights
===========================================

Turn a fitted network into a per-variable importance score, split the
scores into "signal" and "noise" groups, and compare cutoff rules.
"""

from sparse_relu import PlantedSpec, TrainConfig, fit, gen_planted, importance, roc_curve
from sparse_relu.select import select, trapezoid_area

train, _ = gen_planted(PlantedSpec(p=30, r_star=2, s=4, n_train=1000, sigma=0.5, seed=3))
net = fit(train.X, train.y, TrainConfig(lam=0.01, width=10, epochs=200, seed=1)).net

imp = importance(net)
print("importance (1-based index: value)")
for i, v in enumerate(imp.values):
    print("  %2d: %.4f%s" % (i + 1, v, "   <- true" if i in train.true_support else ""))

# four ways of drawing the line between signal and noise
for method, kw in [("gmm2", {}), ("kmeans2", {}), ("threshold", {"threshold": 0.05}), ("topk", {"k": 4})]:
    report = select(imp, method, true_support=train.true_support, **kw)
    print(method, report.to_dict())

# the ROC curve does not depend on any cutoff
points = roc_curve(imp, train.true_support)
print("ROC points:", len(points), " area = %.3f" % trapezoid_area(points))
