"""Independent reference implementations used only by the tests.

Everything here is written with explicit loops, einsum or numpy.linalg so
it shares no code path with the package under test.
"""
import math

import numpy as np


def mode_product_loops(x, u, mode):
    n1, n2, n3 = x.shape
    j = u.shape[0]
    dims = [n1, n2, n3]
    dims[mode - 1] = j
    out = np.zeros(dims)
    for a in range(dims[0]):
        for b in range(dims[1]):
            for c in range(dims[2]):
                s = 0.0
                for i in range(x.shape[mode - 1]):
                    idx = [a, b, c]
                    row = idx[mode - 1]
                    idx[mode - 1] = i
                    s += u[row, i] * x[tuple(idx)]
                out[a, b, c] = s
    return out


def unfold_index(x, mode):
    """Matricization built element by element from the column-index formula."""
    dims = x.shape
    rest = [m for m in range(3) if m != mode - 1]
    out = np.zeros((dims[mode - 1], dims[rest[0]] * dims[rest[1]]))
    for i1 in range(dims[0]):
        for i2 in range(dims[1]):
            for i3 in range(dims[2]):
                idx = (i1, i2, i3)
                col = idx[rest[0]] + dims[rest[0]] * idx[rest[1]]
                out[idx[mode - 1], col] = x[idx]
    return out


def tucker_einsum(core, u1, u2, u3):
    return np.einsum("abc,ia,jb,kc->ijk", core, u1, u2, u3)


def hosvd_svd(x, ranks):
    """Truncated HOSVD with numpy's SVD; factors returned up to column sign."""
    us = []
    for mode, r in zip((1, 2, 3), ranks):
        m = np.moveaxis(x, mode - 1, 0).reshape(x.shape[mode - 1], -1)
        u, _, _ = np.linalg.svd(m, full_matrices=False)
        us.append(u[:, :r])
    core = np.einsum("ijk,ia,jb,kc->abc", x, *us)
    return core, us


def projector(u):
    return u @ u.T


def conv_full_einsum(x, s_powers, t_powers, theta):
    """Sum over order pairs: spatial mix, per-node temporal operator on the time index, feature map."""
    p = theta.shape[0] - 1
    out = 0.0
    for ks in range(p + 1):
        for kt in range(p + 1):
            xs = np.einsum("ij,jdt->idt", s_powers[ks], x)
            xt = np.einsum("its,ids->idt", t_powers[kt], xs)
            out = out + np.einsum("ed,idt->iet", theta[ks, kt], xt)
    return out


def metrics_one_pass(y, y_hat):
    y = [float(v) for v in np.ravel(y)]
    y_hat = [float(v) for v in np.ravel(y_hat)]
    n = len(y)
    sse = sae = syy = sy = sr = 0.0
    for a, b in zip(y, y_hat):
        r = a - b
        sse += r * r
        sae += abs(r)
        syy += a * a
        sy += a
        sr += r
    ybar = sy / n
    rbar = sr / n
    sst = sum((a - ybar) ** 2 for a in y)
    var_r = sum(((a - b) - rbar) ** 2 for a, b in zip(y, y_hat)) / n
    var_y = sst / n
    return {
        "rmse": math.sqrt(sse / n),
        "mae": sae / n,
        "accuracy": 1.0 - math.sqrt(sse) / math.sqrt(syy),
        "r2": 1.0 - sse / sst,
        "var": 1.0 - var_r / var_y,
    }


def window_count(length, t_in, t_out):
    count = 0
    for start in range(length):
        if start + t_in + t_out <= length:
            count += 1
    return count


def matrix_power_loops(m, k):
    out = np.eye(m.shape[0])
    for _ in range(k):
        nxt = np.zeros_like(out)
        for i in range(m.shape[0]):
            for j in range(m.shape[0]):
                nxt[i, j] = sum(out[i, l] * m[l, j] for l in range(m.shape[0]))
        out = nxt
    return out
