"""Shared SVD, truncation, and canonicalization helpers.

Used by both the complex MPS trajectory engine and the real-arithmetic MPDO
engine.  All routines work on lists of rank-3 site tensors with index order
(left bond, physical, right bond).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

# Schmidt values at or below this magnitude are treated as exact zeros when a
# lambda vector has to be inverted (pseudo-inverse convention).
PINV_FLOOR = 1e-12


def robust_svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD with a gesvd fallback for the rare gesdd convergence failure."""
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, check_finite=False,
                                lapack_driver="gesvd")


def split_truncate(
    m: np.ndarray, chi_max: int, svd_floor: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """SVD a matrix and truncate its spectrum.

    Keeps min(chi_max, #{s > svd_floor}) singular values, at least one.
    Returns (u, s, vh, discarded_weight) where discarded_weight is the
    squared-norm fraction 1 - sum(kept s^2)/sum(all s^2).
    """
    u, s, vh = robust_svd(m)
    total = float(s @ s)
    k = int(np.count_nonzero(s > svd_floor))
    k = max(1, min(chi_max, k))
    kept = float(s[:k] @ s[:k])
    weight = 0.0 if total <= 0.0 else max(0.0, 1.0 - kept / total)
    return u[:, :k], s[:k], vh[:k], weight


def safe_divide_bond(tensor: np.ndarray, lam: np.ndarray, axis: int) -> np.ndarray:
    """Divide a site tensor by a bond lambda along the given bond axis.

    Entries of lam at or below PINV_FLOOR are treated as exact zeros: the
    corresponding slices are zeroed instead of divided.
    """
    inv = np.where(lam > PINV_FLOOR, 1.0 / np.maximum(lam, PINV_FLOOR), 0.0)
    shape = [1, 1, 1]
    shape[axis] = lam.size
    return tensor * inv.reshape(shape)


def restore_site(
    tensors: list[np.ndarray],
    lambdas: list[np.ndarray],
    s: int,
    block: np.ndarray,
    chi_max: int,
    svd_floor: float,
    trunc_log: np.ndarray,
) -> float:
    """Install a unit-norm dressed site block and re-SVD its adjacent bonds.

    ``block`` is the fully dressed tensor lambda_left * Gamma * lambda_right
    of site ``s`` (already normalized).  One SVD per adjacent bond refreshes
    the two neighboring Schmidt vectors; the left (right) unitary factor is
    absorbed into the left (right) neighbor tensor so every site to the left
    stays left-isometric and every site to the right stays right-isometric.
    Distant lambdas are not touched; a full sweep (``canonical_sweep``)
    restores them.

    Returns the discarded weights (left bond, right bond) of the two
    truncations.
    """
    n = len(tensors)
    chi_l, d, chi_r = block.shape
    w_left = 0.0
    w_right = 0.0

    if s > 0:
        u, sv, wh, w_left = split_truncate(
            block.reshape(chi_l, d * chi_r), chi_max, svd_floor
        )
        norm = float(np.linalg.norm(sv))
        lam_left = sv / norm
        lambdas[s - 1] = lam_left
        left = tensors[s - 1]
        tensors[s - 1] = (left.reshape(-1, left.shape[2]) @ u).reshape(
            left.shape[0], left.shape[1], -1
        )
        trunc_log[s - 1] += w_left
        block = (sv[:, None] * wh / norm).reshape(-1, d, chi_r)
        chi_l = block.shape[0]
    else:
        lam_left = np.ones(1)

    if s < n - 1:
        x, tv, vh, w_right = split_truncate(
            block.reshape(chi_l * d, chi_r), chi_max, svd_floor
        )
        lambdas[s] = tv / float(np.linalg.norm(tv))
        right = tensors[s + 1]
        tensors[s + 1] = (vh @ right.reshape(right.shape[0], -1)).reshape(
            -1, right.shape[1], right.shape[2]
        )
        trunc_log[s] += w_right
        gamma = safe_divide_bond(x.reshape(chi_l, d, -1), lam_left, axis=0)
    else:
        gamma = safe_divide_bond(block, lam_left, axis=0)

    tensors[s] = gamma
    return w_left, w_right


def canonical_sweep(
    tensors: list[np.ndarray],
    lambdas: list[np.ndarray],
    chi_max: int,
    svd_floor: float,
    trunc_log: np.ndarray,
) -> float:
    """Restore the full canonical Gamma-lambda form by a two-pass sweep.

    Pass 1 (left to right) QR-orthogonalizes every site; pass 2 (right to
    left) SVDs each bond, which then yields the true Schmidt spectra because
    both environments are isometric.  The represented state is unchanged up
    to truncation below svd_floor / chi_max.  Returns the state norm absorbed
    during the sweep (1.0 for an already-normalized state).
    """
    n = len(tensors)
    d = tensors[0].shape[1]

    # Right-dressed site tensors T_s = Gamma_s * lambda_s (last site bare).
    site = [
        tensors[s] * lambdas[s][None, None, :] if s < n - 1 else tensors[s]
        for s in range(n)
    ]

    # Pass 1: left-to-right QR.
    carry = np.eye(1, dtype=tensors[0].dtype)
    for s in range(n):
        t = site[s]
        m = carry @ t.reshape(t.shape[0], -1)
        chi_l = carry.shape[0]
        q, r = np.linalg.qr(m.reshape(chi_l * d, -1))
        site[s] = q.reshape(chi_l, d, -1)
        carry = r
    norm = float(np.abs(carry[0, 0]))
    # carry is 1x1; fold its phase and magnitude into the last site.
    site[n - 1] = site[n - 1] * carry[0, 0]
    if norm > 0.0:
        site[n - 1] = site[n - 1] / norm

    # Pass 2: right-to-left SVDs produce true Schmidt vectors.
    carry_t = site[n - 1]
    for s in range(n - 1, 0, -1):
        chi_l, _, chi_r = carry_t.shape
        u, sv, vh, w = split_truncate(
            carry_t.reshape(chi_l, d * chi_r), chi_max, svd_floor
        )
        lam = sv / float(np.linalg.norm(sv))
        lambdas[s - 1] = lam
        trunc_log[s - 1] += w
        b = vh.reshape(-1, d, chi_r)
        if s < n - 1:
            tensors[s] = safe_divide_bond(b, lambdas[s], axis=2)
        else:
            tensors[s] = b
        prev = site[s - 1]
        carry_t = (prev.reshape(-1, prev.shape[2]) @ (u * lam[None, :])).reshape(
            prev.shape[0], d, -1
        )
    if n > 1:
        tensors[0] = safe_divide_bond(carry_t, lambdas[0], axis=2)
    else:
        tensors[0] = carry_t
    return norm
