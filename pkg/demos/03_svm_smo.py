"""
Training a small SVM with SMO
=============================

The XOR points cannot be separated by a line.  An RBF kernel solves them.
The dual solution is checked against the KKT conditions.
"""

import numpy as np

from regionlift.svm import KernelSpec, dual_objective, kernel_matrix, kkt_violation, smo_train

X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
y = np.array([-1, -1, 1, 1])

# %%
# A linear kernel can do no better than a flat decision function here.
linear = smo_train(X, y, KernelSpec("linear"), C=10.0)
print("linear predictions:", np.sign(linear.decision_function(X)).astype(int), "labels:", y)

# %%
# The RBF kernel fits all four.
rbf = smo_train(X, y, KernelSpec("rbf", gamma=1.0), C=10.0)
print("rbf predictions:   ", np.sign(rbf.decision_function(X)).astype(int))
print("decision values:   ", np.round(rbf.decision_function(X), 4))

# %%
# Dual quantities: alphas in [0, C], sum(alpha * y) = 0, small KKT residual.
alpha = np.zeros(len(y))
alpha[rbf.support_index] = np.abs(rbf.dual_coef)
K = kernel_matrix(rbf.kernel, X, X)
print("alpha:", np.round(alpha, 4))
print("sum alpha*y:", float(rbf.dual_coef.sum()))
print("dual objective:", round(dual_objective(alpha, y, K), 6))
print("max KKT violation:", kkt_violation(rbf, X, y))

# %%
# Far from every support vector the RBF terms vanish and only the bias is left.
print("score at (100, 100):", float(rbf.decision_function([[100.0, 100.0]])[0]), "bias:", rbf.bias)
