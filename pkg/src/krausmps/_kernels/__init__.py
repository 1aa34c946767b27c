"""Kernel selection: compiled core when available, numpy fallback otherwise.

Set KRAUSMPS_PURE=1 to force the pure-Python implementation.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pure

if os.environ.get("KRAUSMPS_PURE"):
    _impl = _pure
    HAVE_EXT = False
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        HAVE_EXT = True
    except ImportError:
        _impl = _pure
        HAVE_EXT = False

IMPL_NAME = "compiled" if HAVE_EXT else "pure-python"

numu_cost = _impl.numu_cost
geo2_cost_from_grams = _impl.geo2_cost_from_grams
numu_select_raw = _impl.numu_select_raw
geo2_select_raw = _impl.geo2_select_raw
minimize_2d = _pure.minimize_2d  # generic python-callable optimizer


def geo2_precompute(a1: np.ndarray, a2: np.ndarray):
    """Gram blocks of the two base outcome tensors for both splittings.

    hl[k, l] = M_k^H M_l with M_k the (chi_l*2, chi_r) left-split matrix;
    hr[k, l] = M_k M_l^H with M_k the (chi_l, 2*chi_r) right-split matrix.
    The Gram of any rotated outcome tensor is a fixed linear combination of
    these four blocks, so each optimizer evaluation only pays O(chi^2) for
    the combination plus one Hermitian eigensolve.
    """
    chi_l, _, chi_r = a1.shape
    ml = [a.reshape(chi_l * 2, chi_r) for a in (a1, a2)]
    mr = [a.reshape(chi_l, 2 * chi_r) for a in (a1, a2)]
    hl = np.empty((2, 2, chi_r, chi_r), dtype=complex)
    hr = np.empty((2, 2, chi_l, chi_l), dtype=complex)
    for k in range(2):
        for l in range(k, 2):
            hl[k, l] = ml[k].conj().T @ ml[l]
            hr[k, l] = mr[k] @ mr[l].conj().T
            if l != k:
                hl[l, k] = hl[k, l].conj().T
                hr[l, k] = hr[k, l].conj().T
    return np.ascontiguousarray(hl), np.ascontiguousarray(hr)
