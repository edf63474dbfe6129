"""Compiled inner loops of the one-dependence scorers.

Both kernels return, per class ``y``,
``log(sum over parents i of P(y, x_i, t) prod_j P(x_j | y, x_i, t)) - log(#parents)``
using the smoothing documented in :mod:`saode.classifiers`.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _log_mean_exp(terms):
    top = terms.max()
    acc = 0.0
    for v in terms:
        acc += math.exp(v - top)
    return top + math.log(acc) - math.log(terms.shape[0])


@njit(cache=True)
def binary_ode(slab, ct, z, parents, k, alpha, log_norm):
    """``slab[y, i, j]`` holds present-present counts (diagonal = marginals).

    ``ct[y]`` is the class-season total, ``z`` the 0/1 query, ``log_norm`` the
    shared log denominator of the parent-joint estimate.  Classes beyond the
    slab have zero counts.
    """
    n = z.shape[0]
    out = np.empty(k)
    terms = np.empty(parents.shape[0])
    for y in range(k):
        has = y < slab.shape[0]
        cty = ct[y]
        for e in range(parents.shape[0]):
            i = parents[e]
            mi = slab[y, i, i] if has else 0
            zi = z[i] == 1
            d = mi if zi else cty - mi
            s = math.log(d + alpha) - log_norm
            denom = math.log(d + 2.0 * alpha)
            for j in range(n):
                p11 = 0
                mj = 0
                if has:
                    p11 = slab[y, i, j]
                    mj = slab[y, j, j]
                if zi:
                    c = p11 if z[j] == 1 else mi - p11
                else:
                    c = mj - p11 if z[j] == 1 else cty - mi - mj + p11
                s += math.log(c + alpha) - denom
            terms[e] = s
        out[y] = _log_mean_exp(terms)
    return out


@njit(cache=True)
def general_ode(slab, u, card, parents, k, alpha, log_norm):
    """``slab[y]`` is a (W, W) table over flattened attribute values.

    ``u`` holds the flattened positions of the known query values, ``card``
    their cardinalities, ``parents`` indexes into ``u`` and ``log_norm`` is per
    parent.
    """
    K = u.shape[0]
    # distinct cardinalities with multiplicities, so the denominators cost
    # one log per distinct value instead of one per attribute
    ucard = np.empty(K)
    umult = np.zeros(K)
    nu = 0
    for b in range(K):
        found = False
        for q in range(nu):
            if ucard[q] == card[b]:
                umult[q] += 1.0
                found = True
                break
        if not found:
            ucard[nu] = card[b]
            umult[nu] = 1.0
            nu += 1
    out = np.empty(k)
    terms = np.empty(parents.shape[0])
    for y in range(k):
        has = y < slab.shape[0]
        for e in range(parents.shape[0]):
            a = parents[e]
            ua = u[a]
            d = slab[y, ua, ua] if has else 0
            s = math.log(d + alpha) - log_norm[e]
            for q in range(nu):
                s -= umult[q] * math.log(d + alpha * ucard[q])
            for b in range(K):
                c = slab[y, ua, u[b]] if has else 0
                s += math.log(c + alpha)
            terms[e] = s
        out[y] = _log_mean_exp(terms)
    return out


@njit(cache=True)
def add_pairs(block, idx):
    """``block[i, j] += 1`` for every ordered pair drawn from ``idx``."""
    for a in range(idx.shape[0]):
        i = idx[a]
        for b in range(idx.shape[0]):
            block[i, idx[b]] += 1
