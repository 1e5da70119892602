import itertools
import math
from collections import Counter
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"


def dense_objective(A, U, X, mu, lam):
    """Direct dense evaluation of ||A - UX^T||^2 + mu/2 ||UX^T - XU^T||^2 + lam tr(X^T L X)."""
    A = np.asarray(A, dtype=float)
    P = U @ X.T
    L = np.diag(A.sum(axis=1)) - A
    return (np.sum((A - P) ** 2) + 0.5 * mu * np.sum((P - P.T) ** 2)
            + lam * np.trace(X.T @ L @ X))


def numeric_gradient(fun, M, h=1e-6):
    G = np.zeros_like(M)
    for idx in np.ndindex(M.shape):
        plus, minus = M.copy(), M.copy()
        plus[idx] += h
        minus[idx] -= h
        G[idx] = (fun(plus) - fun(minus)) / (2 * h)
    return G


def brute_modularity(A, labels):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    k = A.sum(axis=1)
    two_m = A.sum()
    q = 0.0
    for i in range(n):
        for j in range(n):
            if labels[i] == labels[j]:
                q += A[i, j] - k[i] * k[j] / two_m
    return q / two_m


def brute_nmi(a, b):
    n = len(a)
    pa, pb, pab = Counter(a), Counter(b), Counter(zip(a, b))
    ha = -sum(c / n * math.log(c / n) for c in pa.values())
    hb = -sum(c / n * math.log(c / n) for c in pb.values())
    mi = 0.0
    for (x, y), c in pab.items():
        mi += c / n * math.log((c / n) / ((pa[x] / n) * (pb[y] / n)))
    if ha + hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    return 2 * mi / (ha + hb)


def brute_ari(a, b):
    """ARI by enumerating all node pairs, in exact rational arithmetic."""
    n = len(a)
    both = same_a = same_b = 0
    for i, j in itertools.combinations(range(n), 2):
        sa, sb = a[i] == a[j], b[i] == b[j]
        same_a += sa
        same_b += sb
        both += sa and sb
    pairs = n * (n - 1) // 2
    expected = Fraction(same_a * same_b, pairs)
    maximum = Fraction(same_a + same_b, 2)
    if maximum == expected:
        return 1.0
    return float((both - expected) / (maximum - expected))


def brute_ranks(row):
    """Average position of each entry over every descending ordering of the row."""
    m = len(row)
    totals = np.zeros(m)
    count = 0
    for perm in itertools.permutations(range(m)):
        if all(row[perm[i]] >= row[perm[i + 1]] for i in range(m - 1)):
            for pos, idx in enumerate(perm, start=1):
                totals[idx] += pos
            count += 1
    return totals / count


def random_graph(rng, n, p=None, weighted=False):
    p = rng.uniform(0.1, 0.6) if p is None else p
    A = np.triu((rng.random((n, n)) < p).astype(float), 1)
    if weighted:
        A *= rng.uniform(0.5, 3.0, size=(n, n))
    return A + A.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
