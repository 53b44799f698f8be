"""Compiled inner loop of the master-equation right-hand side.

Matrices are stored by diagonals: ``vals[m, i] = A[i, i + offs[m]]`` (zero
where the index falls outside the matrix).  Every operator of the divider
model has only a handful of diagonals in the product basis, so this layout
turns ``A @ rho`` into contiguous row updates.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def lindblad_diag_rhs(rho, offs, vals, joffs, jvals, jgroup, jrate, out):
    """``out = -i(Heff rho - rho Heff^dag) + sum_g rate_g L_g rho L_g^dag`` for Hermitian ``rho``.

    ``Heff = H - (i/2) sum rate L^dag L`` is passed through ``offs``/``vals``.
    Jump diagonals sharing a ``jgroup`` id belong to the same operator.
    """
    n = rho.shape[0]
    k_mat = np.zeros_like(rho)
    for m in range(offs.shape[0]):
        k = offs[m]
        lo = max(0, -k)
        hi = min(n, n - k)
        for i in range(lo, hi):
            c = vals[m, i]
            if c != 0:
                r = i + k
                for j in range(n):
                    k_mat[i, j] += c * rho[r, j]
    for i in range(n):
        for j in range(n):
            out[i, j] = -1j * k_mat[i, j] + 1j * np.conj(k_mat[j, i])
    for m1 in range(joffs.shape[0]):
        k = joffs[m1]
        lo1 = max(0, -k)
        hi1 = min(n, n - k)
        for m2 in range(joffs.shape[0]):
            if jgroup[m2] != jgroup[m1]:
                continue
            l = joffs[m2]
            lo2 = max(0, -l)
            hi2 = min(n, n - l)
            rate = jrate[m1]
            for i in range(lo1, hi1):
                ci = rate * jvals[m1, i]
                if ci != 0:
                    for j in range(lo2, hi2):
                        cj = jvals[m2, j]
                        if cj != 0:
                            out[i, j] += ci * np.conj(cj) * rho[i + k, j + l]
    return out
