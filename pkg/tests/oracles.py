"""Slow, independent reference implementations used only by the tests."""

import itertools
import math

import numpy as np


def leibniz_det(A):
    """Determinant by the permutation expansion; fine up to ~7x7."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return 1.0
    total = 0.0
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        prod = 1.0
        for i in range(n):
            prod *= A[i, perm[i]]
        total += -prod if inv % 2 else prod
    return total


def kernel_by_loops(p):
    """S_ij = p_i p_j / N off the diagonal, rows completed to sum 1."""
    N = len(p)
    S = [[0.0] * N for _ in range(N)]
    for i in range(N):
        for j in range(N):
            if i != j:
                S[i][j] = p[i] * p[j] / N
        S[i][i] = 1.0 - sum(S[i][j] for j in range(N) if j != i)
    return np.array(S)


def log_sig(x):
    return -math.log1p(math.exp(-x)) if x >= 0 else x - math.log1p(math.exp(x))


def bns_by_loops(q, v_pos, extras, negs, tau):
    """Instance-level and class-level brace groups, summed term by term."""
    dot = lambda a, b: sum(float(x) * float(y) for x, y in zip(a, b))
    inst = log_sig(dot(q, v_pos) / tau) + sum(log_sig(-dot(q, vn) / tau) for vn in negs)
    cls = 0.0
    for qe in extras:
        cls += log_sig(dot(qe, v_pos) / tau) + sum(log_sig(-dot(qe, vn) / tau) for vn in negs)
    return inst, cls


def entropy_by_loops(p):
    return -sum(x * math.log(x) for x in p if x > 0)


def mi_by_loops(P):
    rows = [sum(r) for r in P]
    cols = [sum(P[i][j] for i in range(len(P))) for j in range(len(P[0]))]
    return sum(
        P[i][j] * math.log(P[i][j] / (rows[i] * cols[j]))
        for i in range(len(P))
        for j in range(len(P[0]))
        if P[i][j] > 0
    )


def spearman(a, b):
    ra = np.argsort(np.argsort(a)).astype(float)
    rb = np.argsort(np.argsort(b)).astype(float)
    ra -= ra.mean()
    rb -= rb.mean()
    return float(ra @ rb / np.sqrt((ra @ ra) * (rb @ rb)))
