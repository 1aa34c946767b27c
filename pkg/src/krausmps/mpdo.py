"""Matrix product density operator engine in the Hermitian Pauli basis.

The density matrix is vectorized per site in the orthonormal basis
e_1 = 1/sqrt(2) I, e_2 = 1/sqrt(2) X, e_3 = 1/sqrt(2) Y, e_4 = 1/sqrt(2) Z
and decomposed as a tensor train with REAL rank-3 tensors (left bond,
physical component in 0..3, right bond) and unit-L2-normalized Schmidt
vectors per bond.  Hermiticity of the represented operator is automatic.

Gates and channels act as real superoperators in this component space
(orthogonal for unitary conjugation).  Truncation is with respect to the L2
norm of the vectorized density matrix; the physical trace is therefore not
exactly preserved under truncation.  Trace drift is logged, and an optional
switch renormalizes the trace after every operation.

A mixed state has component-vector L2 norm sqrt(tr rho^2) < 1, so the state
carries an explicit global ``scale`` factor while the tensor train itself
stays unit-normalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _svd, diagnostics
from .channels import IDENTITY_2, KrausSet, SIGMA_X, SIGMA_Y, SIGMA_Z
from .exceptions import CapacityError, DomainError, ValidationError

PAULI_BASIS = np.stack([
    IDENTITY_2 / math.sqrt(2.0),
    SIGMA_X / math.sqrt(2.0),
    SIGMA_Y / math.sqrt(2.0),
    SIGMA_Z / math.sqrt(2.0),
])

DENSE_DENSITY_MAX_QUBITS = 6
SUPEROP_IMAG_ATOL = 1e-12
GATE_UNITARITY_ATOL = 1e-10

_superop_cache: dict[tuple, np.ndarray] = {}


@dataclass
class MpdoState:
    """Pauli-basis MPDO with real tensors and truncation bookkeeping."""

    n: int
    tensors: list[np.ndarray]
    lambdas: list[np.ndarray]
    chi_max: int
    svd_floor: float = 1e-12
    scale: float = 1.0
    renormalize_trace: bool = False
    trunc_log: np.ndarray = field(default=None)  # type: ignore[assignment]
    trace_log: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.trunc_log is None:
            self.trunc_log = np.zeros(self.n - 1)

    def bond_dimensions(self) -> list[int]:
        return [lam.size for lam in self.lambdas]


def mpdo_from_bitstring(
    n: int, bits: str, chi_max: int = 64, svd_floor: float = 1e-12,
    renormalize_trace: bool = False,
) -> MpdoState:
    """Rank-1 product MPDO of |bits><bits|."""
    if n < 2:
        raise DomainError(f"need at least 2 qubits, got {n}")
    if len(bits) != n or any(b not in "01" for b in bits):
        raise DomainError(f"bitstring {bits!r} does not match n={n}")
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    tensors = []
    for b in bits:
        t = np.zeros((1, 4, 1))
        t[0, 0, 0] = inv_sqrt2
        t[0, 3, 0] = inv_sqrt2 if b == "0" else -inv_sqrt2
        tensors.append(t)
    lambdas = [np.ones(1) for _ in range(n - 1)]
    return MpdoState(n=n, tensors=tensors, lambdas=lambdas, chi_max=chi_max,
                     svd_floor=svd_floor, renormalize_trace=renormalize_trace)


def channel_superop(ks: KrausSet) -> np.ndarray:
    """Real 4x4 component-space action of sum_j E_j . E_j^dag.

    Cached per (label, rate) for the named channels.
    """
    key = (ks.label, ks.rate, len(ks.ops))
    if ks.label != "custom" and key in _superop_cache:
        return _superop_cache[key]
    m = np.empty((4, 4))
    for i in range(4):
        out = sum(op @ PAULI_BASIS[i] @ op.conj().T for op in ks.ops)
        for k in range(4):
            val = np.trace(PAULI_BASIS[k] @ out)
            if abs(val.imag) > SUPEROP_IMAG_ATOL:
                raise ValidationError("channel superoperator is not real")
            m[k, i] = val.real
    m.flags.writeable = False
    if ks.label != "custom":
        _superop_cache[key] = m
    return m


def gate_superop(gate: np.ndarray) -> np.ndarray:
    """Real 16x16 component-space action of U . U^dag on two sites."""
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (4, 4):
        raise ValidationError(f"gate has shape {gate.shape}, expected (4, 4)")
    if not np.allclose(gate.conj().T @ gate, np.eye(4), atol=GATE_UNITARITY_ATOL):
        raise ValidationError("gate is not unitary")
    pairs = np.stack([
        np.kron(PAULI_BASIS[i], PAULI_BASIS[j])
        for i in range(4) for j in range(4)
    ])
    transformed = gate @ pairs @ gate.conj().T
    m = np.einsum("aij,bji->ab", pairs, transformed)
    if np.abs(m.imag).max() > SUPEROP_IMAG_ATOL:
        raise ValidationError("gate superoperator is not real")
    return np.ascontiguousarray(m.real)


def is_trace_preserving(superop: np.ndarray) -> bool:
    """True iff the identity-component row passes through unchanged."""
    k = superop.shape[0]
    expected = np.zeros(k)
    expected[0] = 1.0
    return bool(np.allclose(superop[0], expected, atol=1e-10))


def _lam(state: MpdoState, bond: int) -> np.ndarray:
    if bond < 0 or bond >= state.n - 1:
        return np.ones(1)
    return state.lambdas[bond]


def _post_op(state: MpdoState) -> None:
    tr = mpdo_trace(state)
    state.trace_log.append(tr)
    if state.renormalize_trace and abs(tr) > 1e-300:
        state.scale /= tr


def apply_gate(state: MpdoState, gate: np.ndarray, site: int) -> float:
    """Two-site superoperator update with one SVD at the gate bond.

    Returns the discarded L2 weight; the global scale absorbs the norm the
    truncation removed so ``to_dense_density`` reproduces the truncated
    operator exactly.
    """
    if not 1 <= site <= state.n - 1:
        raise DomainError(f"site {site} out of range")
    s = site - 1
    m16 = gate_superop(gate)
    lam_l, lam_m, lam_r = _lam(state, s - 1), state.lambdas[s], _lam(state, s + 1)
    chi_l, chi_m, chi_r = lam_l.size, lam_m.size, lam_r.size

    left = (lam_l[:, None, None] * state.tensors[s]) * lam_m[None, None, :]
    right = state.tensors[s + 1] * lam_r[None, None, :]
    theta = left.reshape(chi_l * 4, chi_m) @ right.reshape(chi_m, 4 * chi_r)
    theta = theta.reshape(chi_l, 4, 4, chi_r)
    work = theta.transpose(1, 2, 0, 3).reshape(16, chi_l * chi_r)
    work = m16 @ work
    theta = work.reshape(4, 4, chi_l, chi_r).transpose(2, 0, 1, 3)

    u, sv, vh, weight = _svd.split_truncate(
        theta.reshape(chi_l * 4, 4 * chi_r), state.chi_max, state.svd_floor
    )
    k = sv.size
    state.lambdas[s] = sv / float(np.linalg.norm(sv))
    state.tensors[s] = _svd.safe_divide_bond(u.reshape(chi_l, 4, k), lam_l, axis=0)
    state.tensors[s + 1] = _svd.safe_divide_bond(vh.reshape(k, 4, chi_r), lam_r, axis=2)
    state.trunc_log[s] += weight
    state.scale *= math.sqrt(max(1.0 - weight, 0.0))
    _post_op(state)
    return weight


def apply_channel(state: MpdoState, ks: KrausSet, site: int) -> None:
    """Deterministic single-site channel update with local re-canonicalization."""
    if not 1 <= site <= state.n:
        raise DomainError(f"site {site} out of range")
    s = site - 1
    m4 = channel_superop(ks)
    updated = np.einsum("pq,aqb->apb", m4, state.tensors[s])
    block = _lam(state, s - 1)[:, None, None] * updated * _lam(state, s)[None, None, :]
    norm = float(np.linalg.norm(block))
    state.scale *= norm
    if norm > 0.0:
        block = block / norm
    w_left, w_right = _svd.restore_site(
        state.tensors, state.lambdas, s, block,
        state.chi_max, state.svd_floor, state.trunc_log,
    )
    state.scale *= math.sqrt(max((1.0 - w_left) * (1.0 - w_right), 0.0))
    _post_op(state)


def canonicalize(state: MpdoState) -> None:
    """Full sweep refreshing every Schmidt vector of the component MPS."""
    before = state.trunc_log.copy()
    norm = _svd.canonical_sweep(
        state.tensors, state.lambdas, state.chi_max, state.svd_floor,
        state.trunc_log,
    )
    state.scale *= norm
    for dw in state.trunc_log - before:
        state.scale *= math.sqrt(max(1.0 - dw, 0.0))


def mpdo_trace(state: MpdoState) -> float:
    """tr(rho): identity-component chain contraction times sqrt(2)^n."""
    vec = np.ones((1,))
    for s in range(state.n):
        t = state.tensors[s][:, 0, :]
        if s < state.n - 1:
            t = t * state.lambdas[s][None, :]
        vec = vec @ t
    return float(vec[0] * (2.0 ** (state.n / 2.0)) * state.scale)


def schmidt_spectrum(state: MpdoState, bond: int) -> np.ndarray:
    if not 1 <= bond <= state.n - 1:
        raise DomainError(f"bond {bond} out of range")
    lam = state.lambdas[bond - 1]
    return lam * lam


def operator_entanglement(state: MpdoState, bond: int) -> float:
    """OE = -sum (lambda^rho)^2 log2 (lambda^rho)^2 at a bond, in bits."""
    return diagnostics.von_neumann(schmidt_spectrum(state, bond))


def mpdo_effective_rank(
    state: MpdoState, bond: int, epsilon: float = diagnostics.DEFAULT_EPSILON
) -> diagnostics.SpectrumStats:
    """Chebyshev effective rank of the MPDO Schmidt spectrum at a bond."""
    return diagnostics.effective_rank(schmidt_spectrum(state, bond), epsilon)


def to_dense_density(state: MpdoState) -> np.ndarray:
    """Reconstruct the full 2^n x 2^n operator (site 1 = most significant)."""
    if state.n > DENSE_DENSITY_MAX_QUBITS:
        raise CapacityError(
            f"dense reconstruction limited to {DENSE_DENSITY_MAX_QUBITS} qubits"
        )
    comps = np.ones((1, 1))
    for s in range(state.n):
        t = state.tensors[s]
        if s < state.n - 1:
            t = t * state.lambdas[s][None, None, :]
        chi_r = t.shape[2]
        comps = comps @ t.reshape(t.shape[0], 4 * chi_r)
        comps = comps.reshape(-1, chi_r)
    work = comps.reshape((4,) * state.n).astype(complex)
    for _ in range(state.n):
        work = np.tensordot(work, PAULI_BASIS, axes=([0], [0]))
    order = [2 * i for i in range(state.n)] + [2 * i + 1 for i in range(state.n)]
    dim = 2**state.n
    return work.transpose(order).reshape(dim, dim) * state.scale
