"""JIT-compiled pair-interaction kernels.

All O(N^2) inner loops live here. Parallel kernels split work over rows
(prange); within a row every partner is visited in ascending index order
and per-row results land in disjoint output slots, so the output is
bit-identical for any number of threads. Scalar reductions over rows are
done sequentially after the parallel region. fastmath stays off: the
accumulation order is part of the package's determinism contract.

The scalar `angle` / `angle_grad` functions share the same normalize,
dot, clamp, arccos primitives as the matrix kernels, so a matrix entry
is bit-identical to the corresponding scalar call.
"""

import math

import numpy as np
from numba import njit, prange

from ..constants import EPS_COS, EPS_COINCIDENT

_JIT = dict(cache=True)
_PJIT = dict(cache=True, parallel=True)


@njit(**_JIT)
def vec_norm(a):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * a[i]
    return math.sqrt(s)


@njit(**_JIT)
def _unit_dot(u, v):
    s = 0.0
    for i in range(u.shape[0]):
        s += u[i] * v[i]
    return s


@njit(**_JIT)
def _clamped_angle(s):
    if s > 1.0 - EPS_COS:
        s = 1.0 - EPS_COS
    elif s < -1.0 + EPS_COS:
        s = -1.0 + EPS_COS
    return math.acos(s)


@njit(**_JIT)
def angle(a, b):
    u = a / vec_norm(a)
    v = b / vec_norm(b)
    return _clamped_angle(_unit_dot(u, v))


@njit(**_JIT)
def angle_grad(a, b):
    """Angle and its gradient with respect to the first argument.

    Inside the cosine clamp band the gradient is defined as zero.
    """
    na = vec_norm(a)
    u = a / na
    v = b / vec_norm(b)
    s = _unit_dot(u, v)
    d = _clamped_angle(s)
    g = np.zeros(a.shape[0])
    if s < 1.0 - EPS_COS and s > -1.0 + EPS_COS:
        c = -1.0 / math.sqrt(1.0 - s * s)
        for i in range(a.shape[0]):
            g[i] = c * (v[i] - s * u[i]) / na
    return d, g


@njit(**_JIT)
def _normalize_rows(E):
    n, d = E.shape
    norms = np.empty(n)
    U = np.empty((n, d))
    for a in range(n):
        na = vec_norm(E[a])
        norms[a] = na
        for i in range(d):
            U[a, i] = E[a, i] / na
    return U, norms


@njit(**_PJIT)
def pairwise_angles(E):
    n = E.shape[0]
    U, _ = _normalize_rows(E)
    M = np.zeros((n, n))
    for a in prange(n):
        for b in range(a + 1, n):
            d = _clamped_angle(_unit_dot(U[a], U[b]))
            M[a, b] = d
            M[b, a] = d
    return M


@njit(**_PJIT)
def cross_angles(A, B):
    na_rows = A.shape[0]
    nb_rows = B.shape[0]
    UA, _ = _normalize_rows(A)
    UB, _ = _normalize_rows(B)
    M = np.empty((na_rows, nb_rows))
    for a in prange(na_rows):
        for b in range(nb_rows):
            M[a, b] = _clamped_angle(_unit_dot(UA[a], UB[b]))
    return M


@njit(**_PJIT)
def granular_embedding_forces(E, d0, k):
    """Contact loss over embedding angles, frozen-partner gradients.

    Returns (value, grad_E, contacts, angle_sum). grad_E[a] is the
    gradient of the loss with respect to e_a with every partner held
    constant; value, contacts and angle_sum count each unordered pair
    once.
    """
    n, dim = E.shape
    U, norms = _normalize_rows(E)
    grad = np.zeros((n, dim))
    val_part = np.zeros(n)
    dsum_part = np.zeros(n)
    cont_part = np.zeros(n, dtype=np.int64)
    for a in prange(n):
        for b in range(n):
            if b == a:
                continue
            s = _unit_dot(U[a], U[b])
            d = _clamped_angle(s)
            if b > a:
                dsum_part[a] += d
            if d < d0:
                if b > a:
                    val_part[a] += 0.5 * k * (d0 - d) * (d0 - d)
                    cont_part[a] += 1
                if s < 1.0 - EPS_COS and s > -1.0 + EPS_COS:
                    c = k * (d0 - d) / math.sqrt(1.0 - s * s)
                    for i in range(dim):
                        grad[a, i] += c * (U[b, i] - s * U[a, i]) / norms[a]
    value = 0.0
    dsum = 0.0
    contacts = 0
    for a in range(n):
        value += val_part[a]
        dsum += dsum_part[a]
        contacts += cont_part[a]
    return value, grad, contacts, dsum


@njit(**_PJIT)
def latent_granular_forces(V, d0, k):
    """Euclidean contact loss among variations of one identity.

    Coincident pairs (separation below EPS_COINCIDENT) contribute their
    full potential energy but no force: the contact direction is
    undefined there.
    """
    n, dim = V.shape
    grad = np.zeros((n, dim))
    val_part = np.zeros(n)
    dsum_part = np.zeros(n)
    cont_part = np.zeros(n, dtype=np.int64)
    for a in prange(n):
        for b in range(n):
            if b == a:
                continue
            r2 = 0.0
            for i in range(dim):
                diff = V[a, i] - V[b, i]
                r2 += diff * diff
            r = math.sqrt(r2)
            if b > a:
                dsum_part[a] += r
            if r < d0:
                if b > a:
                    val_part[a] += 0.5 * k * (d0 - r) * (d0 - r)
                    cont_part[a] += 1
                if r > EPS_COINCIDENT:
                    c = -k * (d0 - r) / r
                    for i in range(dim):
                        grad[a, i] += c * (V[a, i] - V[b, i])
    value = 0.0
    dsum = 0.0
    contacts = 0
    for a in range(n):
        value += val_part[a]
        dsum += dsum_part[a]
        contacts += cont_part[a]
    return value, grad, contacts, dsum


@njit(**_PJIT)
def cross_granular_forces(E, T, d_tr, k):
    """Repulsion of rows of E away from the constant rows of T."""
    n, dim = E.shape
    m = T.shape[0]
    U, norms = _normalize_rows(E)
    UT, _ = _normalize_rows(T)
    grad = np.zeros((n, dim))
    val_part = np.zeros(n)
    cont_part = np.zeros(n, dtype=np.int64)
    for a in prange(n):
        for t in range(m):
            s = _unit_dot(U[a], UT[t])
            d = _clamped_angle(s)
            if d < d_tr:
                val_part[a] += 0.5 * k * (d_tr - d) * (d_tr - d)
                cont_part[a] += 1
                if s < 1.0 - EPS_COS and s > -1.0 + EPS_COS:
                    c = k * (d_tr - d) / math.sqrt(1.0 - s * s)
                    for i in range(dim):
                        grad[a, i] += c * (UT[t, i] - s * U[a, i]) / norms[a]
    value = 0.0
    contacts = 0
    for a in range(n):
        value += val_part[a]
        contacts += cont_part[a]
    return value, grad, contacts


@njit(**_PJIT)
def angles_to_ref(E, ref):
    """Per-row angle to a constant reference and its gradient rows."""
    n, dim = E.shape
    U, norms = _normalize_rows(E)
    nr = vec_norm(ref)
    ur = ref / nr
    d = np.empty(n)
    grad = np.zeros((n, dim))
    for a in prange(n):
        s = _unit_dot(U[a], ur)
        d[a] = _clamped_angle(s)
        if s < 1.0 - EPS_COS and s > -1.0 + EPS_COS:
            c = -1.0 / math.sqrt(1.0 - s * s)
            for i in range(dim):
                grad[a, i] = c * (ur[i] - s * U[a, i]) / norms[a]
    return d, grad


@njit(**_PJIT)
def latent_min_mean(W):
    """Minimum and sum of Euclidean distances over unordered latent pairs."""
    n = W.shape[0]
    dim = W.shape[1]
    min_part = np.full(n, np.inf)
    sum_part = np.zeros(n)
    for a in prange(n):
        for b in range(a + 1, n):
            r2 = 0.0
            for i in range(dim):
                diff = W[a, i] - W[b, i]
                r2 += diff * diff
            r = math.sqrt(r2)
            sum_part[a] += r
            if r < min_part[a]:
                min_part[a] = r
    min_d = np.inf
    dsum = 0.0
    for a in range(n):
        dsum += sum_part[a]
        if min_part[a] < min_d:
            min_d = min_part[a]
    return min_d, dsum
