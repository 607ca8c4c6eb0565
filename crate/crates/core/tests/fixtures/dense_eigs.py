# Dense generalized eigensolve of the periodic flux-form operator, independent
# of the crate's bisection solver.  Usage: dense_eigs.py <n> <weight>
import sys
import numpy as np
import scipy.linalg as sl

weights = {
    "ellipse": lambda t: np.cos(t) ** 2 + 2 * np.sin(t) ** 2,
    "cube4": lambda t: np.cos(t) ** 4 + np.sin(t) ** 4,
    "one": lambda t: np.ones_like(t),
}
n = int(sys.argv[1])
kfun = weights[sys.argv[2] if len(sys.argv) > 2 else "ellipse"]
h = 2 * np.pi / n
tc = (np.arange(n) + 0.5) * h
tf = (np.arange(n) + 1.0) * h
kc, kf = kfun(tc), kfun(tf)
K = np.zeros((n, n))
i = np.arange(n)
K[i, i] = (kf + np.roll(kf, 1)) / h**2
K[i, (i + 1) % n] = -kf / h**2
K[(i + 1) % n, i] = -kf / h**2
w = sl.eigh(K, np.diag(kc), eigvals_only=True, subset_by_index=[0, 4])
print(" ".join("%.12f" % x for x in w))
