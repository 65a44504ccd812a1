"""Pure-numpy fallback kernels.

Same function surface and same mathematical definitions as the numba
backend, selected with BROWNPACK_BACKEND=numpy. Force kernels are
vectorized per row; the angle matrices deliberately use one scalar dot
per pair so that every matrix entry is bit-identical to the scalar
`angle` call, exactly as in the JIT backend.
"""

import math

import numpy as np

from ..constants import EPS_COS, EPS_COINCIDENT


def vec_norm(a):
    return math.sqrt(np.dot(a, a))


def _clamped_angle(s):
    if s > 1.0 - EPS_COS:
        s = 1.0 - EPS_COS
    elif s < -1.0 + EPS_COS:
        s = -1.0 + EPS_COS
    return math.acos(s)


def angle(a, b):
    u = a / vec_norm(a)
    v = b / vec_norm(b)
    return _clamped_angle(float(np.dot(u, v)))


def angle_grad(a, b):
    na = vec_norm(a)
    u = a / na
    v = b / vec_norm(b)
    s = float(np.dot(u, v))
    d = _clamped_angle(s)
    if s < 1.0 - EPS_COS and s > -1.0 + EPS_COS:
        g = (-1.0 / math.sqrt(1.0 - s * s)) * (v - s * u) / na
    else:
        g = np.zeros(a.shape[0])
    return d, g


def _normalize_rows(E):
    norms = np.array([vec_norm(E[a]) for a in range(E.shape[0])])
    return E / norms[:, None], norms


def pairwise_angles(E):
    n = E.shape[0]
    U, _ = _normalize_rows(E)
    M = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            d = _clamped_angle(float(np.dot(U[a], U[b])))
            M[a, b] = d
            M[b, a] = d
    return M


def cross_angles(A, B):
    UA, _ = _normalize_rows(A)
    UB, _ = _normalize_rows(B)
    M = np.empty((A.shape[0], B.shape[0]))
    for a in range(A.shape[0]):
        for b in range(B.shape[0]):
            M[a, b] = _clamped_angle(float(np.dot(UA[a], UB[b])))
    return M


def granular_embedding_forces(E, d0, k):
    n, dim = E.shape
    U, norms = _normalize_rows(E)
    S = np.clip(U @ U.T, -1.0 + EPS_COS, 1.0 - EPS_COS)
    D = np.arccos(S)
    grad = np.zeros((n, dim))
    iu = np.triu_indices(n, k=1)
    upper = D[iu]
    in_contact = upper < d0
    value = 0.5 * k * float(np.sum((d0 - upper[in_contact]) ** 2))
    contacts = int(np.count_nonzero(in_contact))
    dsum = float(np.sum(upper))
    unclamped = (S > -1.0 + EPS_COS) & (S < 1.0 - EPS_COS)
    for a in range(n):
        mask = (D[a] < d0) & unclamped[a]
        mask[a] = False
        if not mask.any():
            continue
        c = k * (d0 - D[a, mask]) / np.sqrt(1.0 - S[a, mask] ** 2)
        grad[a] = (c @ U[mask] - float(np.dot(c, S[a, mask])) * U[a]) / norms[a]
    return value, grad, contacts, dsum


def latent_granular_forces(V, d0, k):
    n, dim = V.shape
    grad = np.zeros((n, dim))
    value = 0.0
    contacts = 0
    dsum = 0.0
    for a in range(n):
        diff = V[a][None, :] - V
        r = np.sqrt(np.sum(diff * diff, axis=1))
        upper = r[a + 1:]
        in_contact = upper < d0
        value += 0.5 * k * float(np.sum((d0 - upper[in_contact]) ** 2))
        contacts += int(np.count_nonzero(in_contact))
        dsum += float(np.sum(upper))
        mask = (r < d0) & (r > EPS_COINCIDENT)
        mask[a] = False
        if mask.any():
            c = -k * (d0 - r[mask]) / r[mask]
            grad[a] = c @ diff[mask]
    return value, grad, contacts, dsum


def cross_granular_forces(E, T, d_tr, k):
    n, dim = E.shape
    U, norms = _normalize_rows(E)
    UT, _ = _normalize_rows(T)
    S = np.clip(U @ UT.T, -1.0 + EPS_COS, 1.0 - EPS_COS)
    D = np.arccos(S)
    in_contact = D < d_tr
    value = 0.5 * k * float(np.sum((d_tr - D[in_contact]) ** 2))
    contacts = int(np.count_nonzero(in_contact))
    unclamped = (S > -1.0 + EPS_COS) & (S < 1.0 - EPS_COS)
    grad = np.zeros((n, dim))
    for a in range(n):
        mask = in_contact[a] & unclamped[a]
        if not mask.any():
            continue
        c = k * (d_tr - D[a, mask]) / np.sqrt(1.0 - S[a, mask] ** 2)
        grad[a] = (c @ UT[mask] - float(np.dot(c, S[a, mask])) * U[a]) / norms[a]
    return value, grad, contacts


def angles_to_ref(E, ref):
    n, dim = E.shape
    U, norms = _normalize_rows(E)
    ur = ref / vec_norm(ref)
    s = np.clip(U @ ur, -1.0 + EPS_COS, 1.0 - EPS_COS)
    d = np.arccos(s)
    grad = np.zeros((n, dim))
    ok = (s > -1.0 + EPS_COS) & (s < 1.0 - EPS_COS)
    c = np.where(ok, -1.0 / np.sqrt(1.0 - s * s), 0.0)
    grad[ok] = (c[ok, None] * (ur[None, :] - s[ok, None] * U[ok])) / norms[ok, None]
    return d, grad


def latent_min_mean(W):
    n = W.shape[0]
    min_d = np.inf
    dsum = 0.0
    for a in range(n - 1):
        diff = W[a + 1:] - W[a][None, :]
        r = np.sqrt(np.sum(diff * diff, axis=1))
        dsum += float(np.sum(r))
        row_min = float(np.min(r))
        if row_min < min_d:
            min_d = row_min
    return min_d, dsum
