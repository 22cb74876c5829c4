"""Pure numpy implementations of the hot kernels.

These are the reference fallbacks used when the compiled extension
``subkernel._ckernels`` is unavailable (or when ``SUBKERNEL_BACKEND=python``).
Every function here has an identically named counterpart in ``_ckernels.pyx``
with the same signature and return conventions.
"""

import numpy as np

_BLOCK = 256


def truncated_convolve(a, b, K):
    """First ``K + 1`` coefficients of the product of two series."""
    a = np.ascontiguousarray(a[: K + 1], dtype=float)
    b = np.ascontiguousarray(b[: K + 1], dtype=float)
    out = np.convolve(a, b)[: K + 1]
    if out.size < K + 1:
        out = np.concatenate([out, np.zeros(K + 1 - out.size)])
    return out


def renewal_sequence(pmf, S):
    """Renewal masses u_0..u_S for a step law ``pmf`` (pmf[0] must be 0).

    u_0 = 1 and u_s = sum_{k=1}^{s} pmf[k] u_{s-k}.
    """
    pmf = np.asarray(pmf, dtype=float)
    Kp = pmf.size - 1
    u = np.zeros(S + 1)
    u[0] = 1.0
    rev = pmf[1:][::-1].copy()  # rev[j] = pmf[Kp - j]
    for s in range(1, S + 1):
        m = min(s, Kp)
        # sum_{k=1}^{m} pmf[k] u[s-k]
        u[s] = np.dot(rev[Kp - m:], u[s - m:s])
    return u


def power_accumulate(PT, Vt0, W, inv_mu, leak_tol):
    """Stream the powers of a one-step probability matrix.

    Parameters
    ----------
    PT : scipy.sparse.csr_matrix, shape (N, N)
        Transpose of the one-step probability matrix P.
    Vt0 : ndarray, shape (N, m)
        Starting distributions stored column-wise (column r is row r of P^0).
    W : ndarray, shape (q, K + 1)
        Weights; output ``acc[j] = sum_k W[j, k] * (rows of P^k)``.
    inv_mu : ndarray, shape (N,)
        Reciprocal measure, used for the per-step density supremum.
    leak_tol : float
        Stop as soon as some row has lost more than this much mass.

    Returns
    -------
    acc : ndarray, shape (q, N, m)
    mass : ndarray, shape (K_eff + 1, m)
    sup : ndarray, shape (K_eff + 1, m)
        max_y P^k(x, y) / mu(y) per row.
    K_eff : int
        Last step that was accumulated.
    """
    N, m = Vt0.shape
    q, K1 = W.shape
    K = K1 - 1
    acc = np.zeros((q, N * m))
    mass = np.zeros((K + 1, m))
    sup = np.zeros((K + 1, m))
    V = np.array(Vt0, dtype=float, order="C")
    buf = np.empty((_BLOCK, N * m))
    inv = inv_mu[:, None]
    start = 0
    fill = 0
    K_eff = K
    for k in range(K + 1):
        if k > 0:
            V = PT @ V
        mk = V.sum(axis=0)
        if k > 0 and np.any(1.0 - mk > leak_tol):
            K_eff = k - 1
            break
        mass[k] = mk
        sup[k] = (V * inv).max(axis=0)
        buf[fill] = V.ravel()
        fill += 1
        if fill == _BLOCK:
            acc += W[:, start:start + fill] @ buf[:fill]
            start += fill
            fill = 0
    if fill:
        acc += W[:, start:start + fill] @ buf[:fill]
    return (acc.reshape(q, N, m), mass[: K_eff + 1], sup[: K_eff + 1], K_eff)


def sample_paths(step_cdf, indptr, indices, cumprob, x0, n_steps, n_paths, rng):
    """Simulate subordinate paths x0 -> S_{T_1} -> ... -> S_{T_n}.

    ``step_cdf[k]`` is P(R <= k) for k = 0..K. A draw above ``step_cdf[K]`` is a
    truncated step and the path is marked dead with code -2 from then on.
    ``cumprob`` holds per-row cumulative transition probabilities in CSR order;
    a uniform above the row total means the base chain was killed (code -1).

    Returns
    -------
    pos : int64 ndarray, shape (n_paths, n_steps)
    times : int64 ndarray, shape (n_paths, n_steps)
        Cumulative subordinator values T_n (-1 once a path is dead).
    """
    K = step_cdf.size - 1
    pos = np.empty((n_paths, n_steps), dtype=np.int64)
    times = np.empty((n_paths, n_steps), dtype=np.int64)
    x = np.full(n_paths, x0, dtype=np.int64)
    T = np.zeros(n_paths, dtype=np.int64)
    status = np.zeros(n_paths, dtype=np.int64)  # 0 alive, -1 killed, -2 truncated
    for n in range(n_steps):
        u = rng.random(n_paths)
        R = np.searchsorted(step_cdf, u, side="right")
        alive = status == 0
        trunc = alive & (R > K)
        status[trunc] = -2
        R[~(status == 0)] = 0
        T[status == 0] += R[status == 0]
        remaining = R.copy()
        while True:
            act = (remaining > 0) & (status == 0)
            if not act.any():
                break
            idx = np.nonzero(act)[0]
            xs = x[idx]
            lo = indptr[xs]
            hi = indptr[xs + 1]
            uu = rng.random(idx.size)
            newx = np.empty(idx.size, dtype=np.int64)
            for j in range(idx.size):
                seg = cumprob[lo[j]:hi[j]]
                p = np.searchsorted(seg, uu[j], side="right")
                if p >= seg.size:
                    newx[j] = -1
                else:
                    newx[j] = indices[lo[j] + p]
            dead = newx < 0
            status[idx[dead]] = -1
            x[idx[~dead]] = newx[~dead]
            remaining[idx] -= 1
        ok = status == 0
        pos[:, n] = np.where(ok, x, status)
        times[:, n] = np.where(ok, T, -1)
    return pos, times
