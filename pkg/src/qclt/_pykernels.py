"""Pure numpy versions of the compiled kernels.

Beam-splitter amplitudes are built per photon-number sector N from the
eigenbasis W of the symmetric tridiagonal matrix with off-diagonal
sqrt((j+1)(N-j)); see qclt.kernels.sector_basis. With theta = arccos(sqrt(eta))

    <j, N-j| U |k, N-k> = Re(i^(j-k) sum_m W[j,m] W[k,m] exp(-i theta (2m-N)))
"""
import numpy as np


def sector_block(W, N, theta, rows, cols):
    """Sub-block of the N-photon sector unitary, rows/cols are first-mode counts."""
    lam = 2.0 * np.arange(N + 1) - N
    c = W[rows] * np.cos(theta * lam)
    s = W[rows] * np.sin(theta * lam)
    cm = c @ W[cols].T
    sm = s @ W[cols].T
    d = (np.asarray(rows)[:, None] - np.asarray(cols)[None, :]) % 4
    return np.select([d == 0, d == 1, d == 2], [cm, sm, -cm], -sm)


def diag_convolve(p, q, theta, J, wcat, offsets):
    """r_j = sum_{k,l} p_k q_l <j, k+l-j|U|k, l>^2 for j <= J."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    K, L = len(p) - 1, len(q) - 1
    out = np.zeros(J + 1)
    for N in range(K + L + 1):
        ks = np.arange(max(0, N - L), min(N, K) + 1)
        w = p[ks] * q[N - ks]
        keep = w != 0.0
        if not keep.any():
            continue
        ks, w = ks[keep], w[keep]
        n1 = N + 1
        W = wcat[offsets[N]: offsets[N] + n1 * n1].reshape(n1, n1)
        rows = np.arange(min(N, J) + 1)
        blk = sector_block(W, N, theta, rows, ks)
        out[: len(rows)] += (blk * blk) @ w
    return out


def laguerre_project(u, wts, K):
    """out_j = sum_i wts_i exp(-u_i/2) L_j(u_i) for j <= K."""
    u = np.asarray(u, dtype=float)
    wts = np.asarray(wts, dtype=float)
    out = np.zeros(K + 1)
    l0 = np.exp(-0.5 * u)
    out[0] = wts @ l0
    if K == 0:
        return out
    l1 = (1.0 - u) * l0
    out[1] = wts @ l1
    for j in range(1, K):
        l0, l1 = l1, ((2 * j + 1 - u) * l1 - j * l0) / (j + 1)
        out[j + 1] = wts @ l1
    return out


def laguerre_eval(coef, u):
    """out_i = sum_k coef_k exp(-u_i/2) L_k(u_i)."""
    u = np.asarray(u, dtype=float)
    coef = np.asarray(coef, dtype=float)
    K = len(coef) - 1
    l0 = np.exp(-0.5 * u)
    acc = coef[0] * l0
    if K == 0:
        return acc
    l1 = (1.0 - u) * l0
    acc = acc + coef[1] * l1
    for j in range(1, K):
        l0, l1 = l1, ((2 * j + 1 - u) * l1 - j * l0) / (j + 1)
        acc = acc + coef[j + 1] * l1
    return acc
