"""Compiled inner loop of the point-set Kuhn-Munkres solver (dense weights).

Mirrors ``solver._PointSetKM`` step for step so both paths return the same
plan; the pure-Python class remains for problems over the dense budget.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def km_dense(W, pL, pR, tol, eps, budget):
    """Run the solver on weight table ``W``; ``pL``/``pR`` are consumed in place.

    Returns ``(flow, lx, ly, augmentations, label_updates, ok)``.  Weights of
    ``-inf`` mark absent edges.
    """
    nL, nR = W.shape
    lx = np.empty(nL)
    for k in range(nL):
        lx[k] = W[k].max()
    ly = np.zeros(nR)
    F = np.zeros((nL, nR))

    for k in range(nL):
        if pL[k] <= eps:
            continue
        for j in range(nR):
            if pR[j] <= eps or lx[k] + ly[j] - W[k, j] > tol:
                continue
            t = min(pL[k], pR[j])
            F[k, j] += t
            pL[k] -= t
            pR[j] -= t
            if pL[k] <= eps:
                pL[k] = 0.0
            if pR[j] <= eps:
                pR[j] = 0.0
            if pL[k] <= 0:
                break

    slack = np.empty(nR)
    slack_from = np.empty(nR, dtype=np.int64)
    reached_via = np.empty(nL, dtype=np.int64)
    in_S = np.zeros(nL, dtype=np.bool_)
    in_T = np.zeros(nR, dtype=np.bool_)
    S_list = np.empty(nL, dtype=np.int64)
    T_list = np.empty(nR, dtype=np.int64)
    path_k = np.empty(2 * nR + 2, dtype=np.int64)
    path_j = np.empty(2 * nR + 2, dtype=np.int64)
    path_s = np.empty(2 * nR + 2, dtype=np.int64)

    augmentations = 0
    label_updates = 0
    root = 0
    while True:
        while root < nL and pL[root] <= eps:
            root += 1
        if root == nL:
            break
        if augmentations >= budget:
            return F, lx, ly, augmentations, label_updates, False

        in_S[:] = False
        in_T[:] = False
        in_S[root] = True
        S_list[0] = root
        nS = 1
        nT = 0
        for j in range(nR):
            slack[j] = lx[root] + ly[j] - W[root, j]
            slack_from[j] = root

        while True:
            j = -1
            g = np.inf
            for jj in range(nR):
                if not in_T[jj] and slack[jj] < g:
                    g = slack[jj]
                    j = jj
            if g == np.inf:
                return F, lx, ly, augmentations, label_updates, False
            if g > tol:
                for s in range(nS):
                    lx[S_list[s]] -= g
                for t in range(nT):
                    ly[T_list[t]] += g
                for jj in range(nR):
                    if not in_T[jj]:
                        slack[jj] -= g
                label_updates += 1
            if pR[j] > eps:
                break
            in_T[j] = True
            T_list[nT] = j
            nT += 1
            for k in range(nL):
                if F[k, j] > 0 and not in_S[k]:
                    in_S[k] = True
                    S_list[nS] = k
                    nS += 1
                    reached_via[k] = j
                    for jj in range(nR):
                        if not in_T[jj]:
                            new = lx[k] + ly[jj] - W[k, jj]
                            if new < slack[jj]:
                                slack[jj] = new
                                slack_from[jj] = k

        n_path = 0
        jj = j
        while True:
            k = slack_from[jj]
            path_k[n_path] = k
            path_j[n_path] = jj
            path_s[n_path] = 1
            n_path += 1
            if k == root:
                break
            jb = reached_via[k]
            path_k[n_path] = k
            path_j[n_path] = jb
            path_s[n_path] = -1
            n_path += 1
            jj = jb
        amount = min(pL[root], pR[j])
        for p in range(n_path):
            if path_s[p] < 0 and F[path_k[p], path_j[p]] < amount:
                amount = F[path_k[p], path_j[p]]
        for p in range(n_path):
            f = F[path_k[p], path_j[p]] + path_s[p] * amount
            F[path_k[p], path_j[p]] = f if f > eps else 0.0
        pL[root] -= amount
        pR[j] -= amount
        if pL[root] <= eps:
            pL[root] = 0.0
        if pR[j] <= eps:
            pR[j] = 0.0
        augmentations += 1

    return F, lx, ly, augmentations, label_updates, True
