"""Pure-Python/numpy fallbacks for the compiled kernels in ``_kernels.pyx``."""
import math

import numpy as np


def jacobi_eigh(a_in, tol=1e-15, max_sweeps=60):
    a = np.array(a_in, dtype=np.float64, order="C", copy=True)
    n = a.shape[0]
    v = np.eye(n)
    fro = math.sqrt(float(np.sum(a * a)))
    sweeps_done = 0
    for _ in range(max_sweeps):
        off_diag = a - np.diag(np.diag(a))
        off = math.sqrt(float(np.sum(off_diag * off_diag)))
        if off <= tol * fro:
            break
        sweeps_done += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, :] = a[:, p]
                a[q, :] = a[:, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, sweeps_done


def batch_matmul(a_in, b_in):
    a = np.asarray(a_in, dtype=np.float64)
    b = np.asarray(b_in, dtype=np.float64)
    return np.matmul(a, b)
