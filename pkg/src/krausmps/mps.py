"""Canonical Gamma-lambda matrix product state for trajectory evolution.

Site/bond conventions: sites are numbered 1..n left to right, bond nu sits
between sites nu and nu+1.  Site 1 is the most significant bit of dense
exports (big-endian).  Gamma tensors have index order (left bond, physical,
right bond); lambda vectors hold the descending nonnegative Schmidt
coefficients of their bond with unit sum of squares.

Two-qubit gates follow the standard TEBD contraction with a single SVD at
the gate bond.  Single-site Kraus updates go through the dressed A-tensors;
committing an outcome re-SVDs the two adjacent bonds and absorbs the gauge
factors into the neighbor tensors, which keeps left/right isometry chains
exact for a left-to-right pass of channel applications.  ``canonicalize``
runs the full two-pass sweep that refreshes every lambda; the evolution loop
calls it once per noise layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _svd
from .channels import KrausSet
from .exceptions import (
    CapacityError,
    DomainError,
    UnsupportedArityError,
    ValidationError,
    ZeroProbabilityError,
)

DENSE_EXPORT_MAX_QUBITS = 14
GATE_UNITARITY_ATOL = 1e-10
ZERO_PROBABILITY_FLOOR = 1e-14

_ONE = np.ones(1)


@dataclass
class TrajectoryState:
    """MPS in canonical Gamma-lambda form with truncation bookkeeping.

    trunc_log accumulates the discarded squared weight per bond over the
    lifetime of the state.
    """

    n: int
    gammas: list[np.ndarray]
    lambdas: list[np.ndarray]
    chi_max: int
    svd_floor: float = 1e-12
    trunc_log: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.trunc_log is None:
            self.trunc_log = np.zeros(self.n - 1)

    def bond_dimensions(self) -> list[int]:
        return [lam.size for lam in self.lambdas]

    def max_truncation(self) -> float:
        return float(self.trunc_log.max()) if self.n > 1 else 0.0

    def copy(self) -> "TrajectoryState":
        return TrajectoryState(
            n=self.n,
            gammas=[g.copy() for g in self.gammas],
            lambdas=[l.copy() for l in self.lambdas],
            chi_max=self.chi_max,
            svd_floor=self.svd_floor,
            trunc_log=self.trunc_log.copy(),
        )


def product_state(
    n: int, bits: str, chi_max: int = 64, svd_floor: float = 1e-12
) -> TrajectoryState:
    """The computational basis state |bits> as a bond-dimension-1 MPS."""
    if n < 2:
        raise DomainError(f"need at least 2 qubits, got {n}")
    if len(bits) != n or any(b not in "01" for b in bits):
        raise DomainError(f"bitstring {bits!r} does not match n={n}")
    gammas = []
    for b in bits:
        g = np.zeros((1, 2, 1), dtype=complex)
        g[0, int(b), 0] = 1.0
        gammas.append(g)
    lambdas = [np.ones(1) for _ in range(n - 1)]
    return TrajectoryState(n=n, gammas=gammas, lambdas=lambdas,
                           chi_max=chi_max, svd_floor=svd_floor)


def _lam_left(state: TrajectoryState, s: int) -> np.ndarray:
    return state.lambdas[s - 1] if s > 0 else _ONE


def _lam_right(state: TrajectoryState, s: int) -> np.ndarray:
    return state.lambdas[s] if s < state.n - 1 else _ONE


def dressed_site(state: TrajectoryState, s: int) -> np.ndarray:
    """lambda_left * Gamma_s * lambda_right; the local expansion coefficients."""
    g = state.gammas[s]
    return _lam_left(state, s)[:, None, None] * g * _lam_right(state, s)[None, None, :]


def _check_site(state: TrajectoryState, site: int, upper: int) -> int:
    if not 1 <= site <= upper:
        raise DomainError(f"site {site} outside valid range 1..{upper}")
    return site - 1


def apply_two_qubit_gate(
    state: TrajectoryState, gate: np.ndarray, site: int
) -> float:
    """Apply a 4x4 unitary to sites (site, site+1) by TEBD contraction + SVD.

    Returns the discarded squared weight of the bond truncation.  The gate
    matrix is indexed with site ``site`` as the most significant qubit of
    the pair, matching the big-endian dense convention.
    """
    s = _check_site(state, site, state.n - 1)
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (4, 4):
        raise ValidationError(f"gate has shape {gate.shape}, expected (4, 4)")
    if not np.allclose(gate.conj().T @ gate, np.eye(4), atol=GATE_UNITARITY_ATOL):
        raise ValidationError("gate is not unitary")

    lam_l = _lam_left(state, s)
    lam_m = state.lambdas[s]
    lam_r = _lam_right(state, s + 1)
    chi_l, chi_m, chi_r = lam_l.size, lam_m.size, lam_r.size

    left = (lam_l[:, None, None] * state.gammas[s]) * lam_m[None, None, :]
    right = state.gammas[s + 1] * lam_r[None, None, :]
    theta = left.reshape(chi_l * 2, chi_m) @ right.reshape(chi_m, 2 * chi_r)
    theta = theta.reshape(chi_l, 2, 2, chi_r)

    # Contract the gate over the combined physical index.
    m = theta.transpose(1, 2, 0, 3).reshape(4, chi_l * chi_r)
    m = gate @ m
    theta = m.reshape(2, 2, chi_l, chi_r).transpose(2, 0, 1, 3)

    u, sv, vh, weight = _svd.split_truncate(
        theta.reshape(chi_l * 2, 2 * chi_r), state.chi_max, state.svd_floor
    )
    k = sv.size
    state.lambdas[s] = sv / float(np.linalg.norm(sv))
    state.gammas[s] = _svd.safe_divide_bond(u.reshape(chi_l, 2, k), lam_l, axis=0)
    state.gammas[s + 1] = _svd.safe_divide_bond(vh.reshape(k, 2, chi_r), lam_r, axis=2)
    state.trunc_log[s] += weight
    return weight


@dataclass(frozen=True)
class ChannelTensors:
    """Normalized outcome tensors and their probabilities for one channel.

    ``tensors[j]`` is the dressed site tensor of outcome j+1 divided by
    sqrt(p_{j+1}); probabilities sum to one for a complete Kraus set.
    """

    tensors: tuple[np.ndarray, ...]
    probs: tuple[float, ...]

    @property
    def a1(self) -> np.ndarray:
        return self.tensors[0]

    @property
    def a2(self) -> np.ndarray:
        return self.tensors[1]

    @property
    def p1(self) -> float:
        return self.probs[0]

    @property
    def p2(self) -> float:
        return self.probs[1]


def outcome_tensors_from_ops(
    state: TrajectoryState, ops: tuple[np.ndarray, ...], site: int
) -> ChannelTensors:
    """A-tensor machinery for an arbitrary number of Kraus operators."""
    s = _check_site(state, site, state.n)
    base = dressed_site(state, s)
    tensors = []
    probs = []
    for op in ops:
        a = np.tensordot(np.asarray(op, dtype=complex), base, axes=(1, 1)).transpose(1, 0, 2)
        p = float(np.vdot(a, a).real)
        probs.append(p)
        tensors.append(a / np.sqrt(p) if p > ZERO_PROBABILITY_FLOOR else a)
    return ChannelTensors(tensors=tuple(tensors), probs=tuple(probs))


def channel_tensors(state: TrajectoryState, ks: KrausSet, site: int) -> ChannelTensors:
    """Dressed outcome tensors A^(j) = f^(j) lambda Gamma lambda and probabilities.

    p_j = |A^(j)|^2; the retained tensors are normalized by sqrt(p_j).
    """
    if len(ks.ops) != 2:
        raise UnsupportedArityError(
            f"channel_tensors requires a 2-operator set, got {len(ks.ops)}"
        )
    return outcome_tensors_from_ops(state, ks.ops, site)


def commit_outcome(
    state: TrajectoryState, tensors: ChannelTensors, which: int, site: int
) -> float:
    """Replace the local tensor with outcome ``which`` (1-based) and re-SVD.

    One SVD per adjacent bond restores the canonical form around the site;
    the unitary factors are absorbed into the neighboring Gamma tensors.
    Returns the total discarded weight of the two truncations.
    """
    s = _check_site(state, site, state.n)
    if not 1 <= which <= len(tensors.tensors):
        raise DomainError(f"outcome {which} out of range")
    if tensors.probs[which - 1] < ZERO_PROBABILITY_FLOOR:
        raise ZeroProbabilityError(
            f"outcome {which} at site {site} has probability "
            f"{tensors.probs[which - 1]:.3e}"
        )
    block = tensors.tensors[which - 1]
    w_left, w_right = _svd.restore_site(
        state.gammas, state.lambdas, s, block,
        state.chi_max, state.svd_floor, state.trunc_log,
    )
    return w_left + w_right


def schmidt_spectrum(state: TrajectoryState, bond: int) -> np.ndarray:
    """Descending probabilities p_alpha = lambda_alpha^2 of the given bond."""
    if not 1 <= bond <= state.n - 1:
        raise DomainError(f"bond {bond} outside valid range 1..{state.n - 1}")
    lam = state.lambdas[bond - 1]
    return lam * lam


def overlaps(state: TrajectoryState, ks: KrausSet, site: int) -> np.ndarray:
    """Overlap matrix o[k,l] = <psi|E_k^dag E_l|psi> from the one-site density.

    The state enters only through the local reduced density matrix, so the
    contraction costs O(chi^2) and is done once per channel application.
    """
    if len(ks.ops) != 2:
        raise UnsupportedArityError(
            f"overlaps requires a 2-operator set, got {len(ks.ops)}"
        )
    s = _check_site(state, site, state.n)
    base = dressed_site(state, s)
    # rho_loc[i, i'] = sum_ab base[a,i,b] conj(base[a,i',b])
    chi_l, _, chi_r = base.shape
    flat = base.transpose(1, 0, 2).reshape(2, chi_l * chi_r)
    rho_loc = flat @ flat.conj().T
    o = np.empty((2, 2), dtype=complex)
    for k in range(2):
        ek_d = ks.ops[k].conj().T
        for l in range(2):
            op = ek_d @ ks.ops[l]
            o[k, l] = np.einsum("ij,ji->", op, rho_loc)
    return o


def to_dense(state: TrajectoryState) -> np.ndarray:
    """Contract the MPS to the full 2^n state vector (site 1 = MSB)."""
    if state.n > DENSE_EXPORT_MAX_QUBITS:
        raise CapacityError(
            f"dense export limited to {DENSE_EXPORT_MAX_QUBITS} qubits, got {state.n}"
        )
    vec = np.ones((1, 1), dtype=complex)
    for s in range(state.n):
        t = state.gammas[s]
        if s < state.n - 1:
            t = t * state.lambdas[s][None, None, :]
        chi_r = t.shape[2]
        vec = vec @ t.reshape(t.shape[0], 2 * chi_r)
        vec = vec.reshape(-1, chi_r)
    return vec.reshape(-1)


def from_dense(
    vec: np.ndarray, chi_max: int = 1 << 12, svd_floor: float = 1e-12
) -> TrajectoryState:
    """Encode a dense state vector into canonical Gamma-lambda form."""
    vec = np.asarray(vec, dtype=complex)
    n = int(np.log2(vec.size))
    if 2**n != vec.size:
        raise DomainError(f"vector length {vec.size} is not a power of two")
    if n < 2:
        raise DomainError("need at least 2 qubits")
    if n > DENSE_EXPORT_MAX_QUBITS:
        raise CapacityError(f"dense import limited to {DENSE_EXPORT_MAX_QUBITS} qubits")

    # Left-to-right QR chop into left-isometric site tensors.
    tensors: list[np.ndarray] = []
    m = vec.reshape(1, -1)
    chi = 1
    for _ in range(n - 1):
        q, r = np.linalg.qr(m.reshape(chi * 2, -1))
        tensors.append(q.reshape(chi, 2, -1))
        chi = q.shape[1]
        m = r
    tensors.append(m.reshape(chi, 2, 1))

    lambdas = [np.ones(1) for _ in range(n - 1)]
    trunc = np.zeros(n - 1)
    _svd.canonical_sweep(tensors, lambdas, chi_max, svd_floor, trunc)
    state = TrajectoryState(n=n, gammas=tensors, lambdas=lambdas,
                            chi_max=chi_max, svd_floor=svd_floor, trunc_log=trunc)
    return state


def canonicalize(state: TrajectoryState) -> float:
    """Full two-pass sweep restoring every lambda to the true Schmidt vector.

    Returns the norm absorbed by the sweep (1 for a normalized state).
    """
    return _svd.canonical_sweep(
        state.gammas, state.lambdas, state.chi_max, state.svd_floor, state.trunc_log
    )


def norm(state: TrajectoryState) -> float:
    """<psi|psi>^(1/2) by an environment fold (no dense export)."""
    env = np.ones((1, 1), dtype=complex)
    for s in range(state.n):
        t = dressed_site(state, s) if s == 0 else state.gammas[s]
        if s > 0:
            t = t * _lam_right(state, s)[None, None, :]
        # env_{b b'} = sum_{a a' i} conj(t[a',i,b']) env_{a a'} t[a,i,b]
        tmp = np.tensordot(env, t, axes=(0, 0))  # (a', i, b)
        env = np.tensordot(t.conj(), tmp, axes=([0, 1], [0, 1]))  # (b', b)
        env = env.T
    return float(np.sqrt(np.abs(env[0, 0].real)))


def canonical_defect(state: TrajectoryState) -> float:
    """Max deviation from identity of all cumulative environment contractions.

    Zero (to float precision) iff the stored lambdas are the true Schmidt
    vectors with orthonormal Schmidt bases on both sides of every bond.
    """
    worst = 0.0
    env = np.ones((1, 1), dtype=complex)
    for s in range(state.n - 1):
        a = _lam_left(state, s)[:, None, None] * state.gammas[s]
        tmp = np.tensordot(env, a, axes=(1, 0))
        env = np.tensordot(a.conj(), tmp, axes=([0, 1], [0, 1]))
        worst = max(worst, float(np.abs(env - np.eye(env.shape[0])).max()))
    env = np.ones((1, 1), dtype=complex)
    for s in range(state.n - 1, 0, -1):
        b = state.gammas[s] * _lam_right(state, s)[None, None, :]
        tmp = np.tensordot(b, env, axes=(2, 0))
        env = np.tensordot(tmp, b.conj(), axes=([1, 2], [1, 2]))
        worst = max(worst, float(np.abs(env - np.eye(env.shape[0])).max()))
    return worst
