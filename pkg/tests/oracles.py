"""Independent dense linear-algebra oracles shared across test modules."""

import numpy as np


def dense_darcy_solve(a, q):
    """Darcy oracle: assemble the dense interior system with plain loops."""
    n = a.shape[0]
    h = 1.0 / (n - 1)
    m = n - 2
    harm = lambda p, r: 2 * p * r / (p + r)
    A = np.zeros((m * m, m * m))
    rhs = np.full(m * m, float(q))
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            row = (i - 1) * m + (j - 1)
            for (ni, nj) in ((i, j + 1), (i, j - 1), (i + 1, j), (i - 1, j)):
                f = harm(a[i, j], a[ni, nj])
                A[row, row] += f / h**2
                if 1 <= ni <= n - 2 and 1 <= nj <= n - 2:
                    A[row, (ni - 1) * m + (nj - 1)] -= f / h**2
    u = np.zeros((n, n))
    u[1:-1, 1:-1] = np.linalg.solve(A, rhs).reshape(m, m)
    return u


def dense_helmholtz_solve(a, k):
    """Helmholtz oracle: dense 5-point system with zero Dirichlet boundary."""
    n = a.shape[0]
    h = 1.0 / (n - 1)
    m = n - 2
    A = np.zeros((m * m, m * m))
    for i in range(m):
        for j in range(m):
            row = i * m + j
            A[row, row] = -4 / h**2 + k * k
            for (ni, nj) in ((i, j + 1), (i, j - 1), (i + 1, j), (i - 1, j)):
                if 0 <= ni < m and 0 <= nj < m:
                    A[row, ni * m + nj] = 1 / h**2
    u = np.zeros((n, n))
    u[1:-1, 1:-1] = np.linalg.solve(A, a[1:-1, 1:-1].ravel()).reshape(m, m)
    return u
