"""Hot loops: batched mean-shift ascent and one SGD epoch of the ranking loss.

Each kernel has a numba implementation and a pure-numpy one with the same
signature. The numba path is used when numba imports and the environment
variable ``ZSLCA_DISABLE_NUMBA`` is unset or ``0``; pass ``backend=`` to the
dispatchers to force either path (the tests and the benchmark do).
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAS_NUMBA = numba is not None
DISABLED = os.environ.get("ZSLCA_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")
BACKEND = "numba" if HAS_NUMBA and not DISABLED else "numpy"


def _resolve(backend):
    backend = backend or BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


# -- mean shift ----------------------------------------------------------------


def _mean_shift_numpy(rows, weights, sigma, tol, max_iter):
    n, _ = weights.shape
    L = rows.shape[1]
    pos = weights > 0
    r = (weights / weights.sum(axis=1, keepdims=True)) @ rows
    iters = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=np.bool_)
    active = np.arange(n)
    for _ in range(max_iter):
        if active.size == 0:
            break
        cur = r[active]
        d2 = ((cur[:, None, :] - rows[None, :, :]) ** 2).sum(axis=2)
        logk = np.where(pos[active], -d2 / sigma, -np.inf)
        k = weights[active] * np.exp(logk - logk.max(axis=1, keepdims=True))
        nxt = (k / k.sum(axis=1, keepdims=True)) @ rows
        step = np.abs(nxt - cur).max(axis=1) if L else np.zeros(active.size)
        r[active] = nxt
        iters[active] += 1
        done = step < tol
        converged[active[done]] = True
        active = active[~done]
    d2 = ((r[:, None, :] - rows[None, :, :]) ** 2).sum(axis=2)
    objective = (weights * np.exp(-d2 / sigma)).sum(axis=1)
    return r, objective, iters, converged


def _mean_shift_loop(rows, weights, sigma, tol, max_iter, r, objective, iters, converged):
    n, na = weights.shape
    L = rows.shape[1]
    logk = np.empty(na)
    kern = np.empty(na)
    nxt = np.empty(L)
    for s in range(n):
        total = 0.0
        for m in range(na):
            total += weights[s, m]
        for j in range(L):
            r[s, j] = 0.0
        for m in range(na):
            w = weights[s, m] / total
            for j in range(L):
                r[s, j] += w * rows[m, j]
        it = 0
        conv = False
        while it < max_iter:
            top = -np.inf
            for m in range(na):
                if weights[s, m] > 0:
                    d2 = 0.0
                    for j in range(L):
                        diff = r[s, j] - rows[m, j]
                        d2 += diff * diff
                    logk[m] = -d2 / sigma
                    if logk[m] > top:
                        top = logk[m]
            denom = 0.0
            for m in range(na):
                if weights[s, m] > 0:
                    kern[m] = weights[s, m] * np.exp(logk[m] - top)
                    denom += kern[m]
                else:
                    kern[m] = 0.0
            for j in range(L):
                nxt[j] = 0.0
            for m in range(na):
                if kern[m] > 0:
                    k = kern[m] / denom
                    for j in range(L):
                        nxt[j] += k * rows[m, j]
            step = 0.0
            for j in range(L):
                v = nxt[j]
                diff = abs(v - r[s, j])
                if diff > step:
                    step = diff
                r[s, j] = v
            it += 1
            if step < tol:
                conv = True
                break
        obj = 0.0
        for m in range(na):
            d2 = 0.0
            for j in range(L):
                diff = r[s, j] - rows[m, j]
                d2 += diff * diff
            obj += weights[s, m] * np.exp(-d2 / sigma)
        objective[s] = obj
        iters[s] = it
        converged[s] = conv


if HAS_NUMBA:
    _mean_shift_jit = numba.njit(cache=True, nogil=True)(_mean_shift_loop)
else:  # pragma: no cover
    _mean_shift_jit = None


def _mean_shift_numba(rows, weights, sigma, tol, max_iter):
    n = weights.shape[0]
    r = np.empty((n, rows.shape[1]))
    objective = np.empty(n)
    iters = np.empty(n, dtype=np.int64)
    converged = np.empty(n, dtype=np.bool_)
    _mean_shift_jit(rows, weights, float(sigma), float(tol), int(max_iter), r, objective, iters, converged)
    return r, objective, iters, converged


def mean_shift_batch(rows, weights, sigma, tol=1e-10, max_iter=500, backend=None, threads=1):
    """Run the weighted mean-shift ascent for every row of ``weights``.

    ``rows`` is the (N_a, L) rank profile shared by all samples; ``weights`` is
    (n, N_a), non-negative with a positive entry per row. Returns
    ``(r_star, objective, iterations, converged)``.
    """
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    weights = np.ascontiguousarray(np.atleast_2d(weights), dtype=np.float64)
    impl = _mean_shift_numba if _resolve(backend) == "numba" else _mean_shift_numpy
    n = weights.shape[0]
    if threads <= 1 or n < 2 * threads:
        return impl(rows, weights, sigma, tol, max_iter)
    bounds = np.linspace(0, n, threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(
            pool.map(
                lambda ab: impl(rows, weights[ab[0] : ab[1]], sigma, tol, max_iter),
                zip(bounds[:-1], bounds[1:]),
            )
        )
    return tuple(np.concatenate(p) for p in zip(*parts))


# -- ranking-loss SGD ----------------------------------------------------------


def _sgd_epoch_numpy(W, X, y, phi, order, lr, l2, rank_based):
    for n in order:
        x = X[n]
        scores = (x @ W) @ phi
        margins = 1.0 + scores - scores[y[n]]
        margins[y[n]] = 0.0
        active = np.flatnonzero(margins > 0)
        if active.size:
            if rank_based:
                ranked = active[np.argsort(-margins[active], kind="stable")]
                coef = 1.0 / np.arange(1, ranked.size + 1)
            else:
                ranked = active
                coef = np.ones(active.size)
            v = phi[:, ranked] @ coef - coef.sum() * phi[:, y[n]]
            W *= 1.0 - 2.0 * lr * l2
            W -= lr * np.outer(x, v)
        elif l2:
            W *= 1.0 - 2.0 * lr * l2
    return W


def _sgd_epoch_loop(W, X, y, phi, order, lr, l2, rank_based):
    d, na = W.shape
    K = phi.shape[1]
    xw = np.empty(na)
    scores = np.empty(K)
    v = np.empty(na)
    decay = 1.0 - 2.0 * lr * l2
    for t in range(order.shape[0]):
        n = order[t]
        yn = y[n]
        for a in range(na):
            acc = 0.0
            for i in range(d):
                acc += X[n, i] * W[i, a]
            xw[a] = acc
        for k in range(K):
            acc = 0.0
            for a in range(na):
                acc += xw[a] * phi[a, k]
            scores[k] = acc
        margins = 1.0 + scores - scores[yn]
        margins[yn] = 0.0
        n_active = 0
        for k in range(K):
            if margins[k] > 0:
                n_active += 1
        if decay != 1.0:
            for i in range(d):
                for a in range(na):
                    W[i, a] *= decay
        if n_active == 0:
            continue
        for a in range(na):
            v[a] = 0.0
        if rank_based:
            ranked = np.argsort(-margins, kind="mergesort")
            csum = 0.0
            for pos in range(n_active):
                k = ranked[pos]
                c = 1.0 / (pos + 1)
                csum += c
                for a in range(na):
                    v[a] += c * phi[a, k]
        else:
            csum = 0.0
            for k in range(K):
                if margins[k] > 0:
                    csum += 1.0
                    for a in range(na):
                        v[a] += phi[a, k]
        for a in range(na):
            v[a] -= csum * phi[a, yn]
        for i in range(d):
            xi = lr * X[n, i]
            for a in range(na):
                W[i, a] -= xi * v[a]
    return W


if HAS_NUMBA:
    _sgd_epoch_jit = numba.njit(cache=True, nogil=True)(_sgd_epoch_loop)
else:  # pragma: no cover
    _sgd_epoch_jit = None


def sgd_epoch(W, X, y, phi, order, lr, l2, rank_based, backend=None):
    """One in-place pass of per-sample SGD over ``order``.

    ``W`` is (d, N_a) and updated in place, ``phi`` holds the seen-class
    embeddings as columns (N_a, K) and ``y`` indexes into those columns.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    order = np.ascontiguousarray(order, dtype=np.int64)
    if _resolve(backend) == "numba":
        _sgd_epoch_jit(W, X, y, phi, order, float(lr), float(l2), bool(rank_based))
    else:
        _sgd_epoch_numpy(W, X, y, phi, order, float(lr), float(l2), bool(rank_based))
    return W
