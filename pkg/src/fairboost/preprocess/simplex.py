"""Euclidean projection onto the probability simplex."""

import numpy as np


def project_rows(A: np.ndarray) -> np.ndarray:
    """Project each row of ``A`` onto ``{x : x >= 0, sum(x) = 1}``.

    Sort-based method: for the sorted row ``u`` the threshold is
    ``(sum(u[:rho]) - 1) / rho`` with ``rho`` the largest index keeping
    ``u[rho-1]`` above it.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    U = -np.sort(-A, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    cond = U - css / ind > 0
    rho = n - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(m), rho - 1] / rho
    return np.maximum(A - theta[:, None], 0.0)
