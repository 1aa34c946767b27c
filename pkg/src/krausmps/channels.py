"""Kraus-operator representations of single-qubit noise channels.

A channel is stored as an explicit list of 2x2 Kraus matrices together with
its rate and a label.  The module also provides the two-angle unitary mixing
of a two-operator set, the precomputed four-index trace tensor used by the
non-unitarity cost, and the ancilla-entangling gate picture of the channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, UnsupportedArityError, ValidationError

COMPLETENESS_ATOL = 1e-12

IDENTITY_2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

AMPLITUDE_DAMPING = "amplitude-damping"
PHASE_FLIP = "phase-flip"
BIT_FLIP = "bit-flip"
BIT_PHASE_FLIP = "bit-phase-flip"
CUSTOM = "custom"

_PAULI_FOR_LABEL = {
    PHASE_FLIP: SIGMA_Z,
    BIT_FLIP: SIGMA_X,
    BIT_PHASE_FLIP: SIGMA_Y,
}


def normalize_label(label: str) -> str:
    """Map config-style names ('amplitude_damping', 'ad', 'pf') to canonical labels."""
    key = label.strip().lower().replace("_", "-")
    aliases = {
        "ad": AMPLITUDE_DAMPING,
        "pf": PHASE_FLIP,
        "bf": BIT_FLIP,
        "bpf": BIT_PHASE_FLIP,
        "dephasing": PHASE_FLIP,
    }
    key = aliases.get(key, key)
    if key not in (AMPLITUDE_DAMPING, PHASE_FLIP, BIT_FLIP, BIT_PHASE_FLIP, CUSTOM):
        raise DomainError(f"unknown channel label {label!r}")
    return key


def canonicalize_angles(theta: float, phi: float) -> tuple[float, float]:
    """Wrap angles into theta in [0, pi), phi in [-pi/2, pi/2).

    Both shifts theta -> theta + pi and phi -> phi + pi only flip the overall
    sign of the mixing unitary, which is physically irrelevant, so pi is the
    natural period for both angles.
    """
    theta = float(theta) % math.pi
    phi = (float(phi) + math.pi / 2.0) % math.pi - math.pi / 2.0
    # Guard against theta % pi returning pi due to rounding of tiny negatives.
    if theta >= math.pi:
        theta -= math.pi
    return theta, phi


@dataclass(frozen=True)
class RotationAngles:
    """Pair (theta, phi) parametrizing the unitary mixing of a 2-operator set.

    Angles are canonicalized on construction; see :func:`canonicalize_angles`.
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        theta, phi = canonicalize_angles(self.theta, self.phi)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class KrausSet:
    """An ordered set of 2x2 Kraus matrices with completeness metadata.

    Invariants (validated on construction):
      * every operator is a 2x2 complex matrix,
      * sum_j ops[j]^dag ops[j] = identity to 1e-12 per entry.
    Instances are immutable; the stored arrays are marked read-only.
    """

    ops: tuple[np.ndarray, ...]
    rate: float
    label: str = CUSTOM

    def __post_init__(self) -> None:
        if len(self.ops) == 0:
            raise ValidationError("KrausSet needs at least one operator")
        frozen = []
        for op in self.ops:
            arr = np.array(op, dtype=complex)
            if arr.shape != (2, 2):
                raise ValidationError(f"Kraus operator has shape {arr.shape}, expected (2, 2)")
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "ops", tuple(frozen))
        total = sum(op.conj().T @ op for op in self.ops)
        if not np.allclose(total, IDENTITY_2, atol=COMPLETENESS_ATOL, rtol=0.0):
            raise ValidationError("Kraus set is not complete: sum E^dag E != identity")

    def __len__(self) -> int:
        return len(self.ops)


def make_channel(label: str, rate: float) -> KrausSet:
    """Build the two-operator representation of a named single-qubit channel.

    amplitude-damping uses E1 = |0><0| + sqrt(1-p)|1><1|, E2 = sqrt(p)|0><1|;
    the Pauli channels use E1 = sqrt(1-p) I and E2 = sqrt(p) sigma.
    """
    label = normalize_label(label)
    if label == CUSTOM:
        raise DomainError("make_channel needs a named channel, not 'custom'")
    if not 0.0 <= rate <= 1.0:
        raise DomainError(f"rate must lie in [0, 1], got {rate}")
    if label == AMPLITUDE_DAMPING:
        e1 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - rate)]], dtype=complex)
        e2 = np.array([[0.0, math.sqrt(rate)], [0.0, 0.0]], dtype=complex)
    else:
        sigma = _PAULI_FOR_LABEL[label]
        e1 = math.sqrt(1.0 - rate) * IDENTITY_2
        e2 = math.sqrt(rate) * sigma
    return KrausSet(ops=(e1, e2), rate=float(rate), label=label)


def naive_phase_flip(rate: float) -> KrausSet:
    """Three-operator projective unraveling of the phase-flip channel.

    {sqrt(1-2p) I, sqrt(2p)|0><0|, sqrt(2p)|1><1|}; requires p <= 1/2 so the
    identity weight stays nonnegative.  The set has three operators and is
    therefore not eligible for the two-angle rotation.
    """
    if not 0.0 <= rate <= 0.5:
        raise DomainError(f"naive phase flip needs rate in [0, 0.5], got {rate}")
    f1 = math.sqrt(1.0 - 2.0 * rate) * IDENTITY_2
    f2 = math.sqrt(2.0 * rate) * np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    f3 = math.sqrt(2.0 * rate) * np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    return KrausSet(ops=(f1, f2, f3), rate=float(rate), label=PHASE_FLIP)


def rotation_unitary(angles: RotationAngles) -> np.ndarray:
    """The 2x2 mixing unitary U(theta, phi) = R(theta) diag(e^{i phi}, e^{-i phi})."""
    ct, st = math.cos(angles.theta), math.sin(angles.theta)
    ep = complex(math.cos(angles.phi), math.sin(angles.phi))
    em = ep.conjugate()
    return np.array([[ct * ep, st * em], [-st * ep, ct * em]], dtype=complex)


def rotate(ks: KrausSet, angles: RotationAngles) -> KrausSet:
    """Mix a two-operator set: F_j = sum_k u_jk E_k with u = U(theta, phi).

    Completeness is preserved exactly by unitarity of u (and re-validated by
    the KrausSet constructor).
    """
    if len(ks.ops) != 2:
        raise UnsupportedArityError(
            f"rotation is defined for 2-operator sets, got {len(ks.ops)}"
        )
    u = rotation_unitary(angles)
    f1 = u[0, 0] * ks.ops[0] + u[0, 1] * ks.ops[1]
    f2 = u[1, 0] * ks.ops[0] + u[1, 1] * ks.ops[1]
    return KrausSet(ops=(f1, f2), rate=ks.rate, label=ks.label)


def trace_tensor(ks: KrausSet) -> np.ndarray:
    """Precompute t[a,b,c,d] = tr(E_a^dag E_b E_c^dag E_d) for a 2-operator set.

    These sixteen numbers are all the channel data the non-unitarity cost
    needs besides the state overlaps, so they are computed once per channel.
    """
    if len(ks.ops) != 2:
        raise UnsupportedArityError(
            f"trace tensor is defined for 2-operator sets, got {len(ks.ops)}"
        )
    daggers = [op.conj().T for op in ks.ops]
    t = np.empty((2, 2, 2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            ab = daggers[a] @ ks.ops[b]
            for c in range(2):
                for d in range(2):
                    t[a, b, c, d] = np.trace(ab @ daggers[c] @ ks.ops[d])
    return t


def ancilla_gate(ks: KrausSet) -> np.ndarray:
    """System-ancilla gate G = E1 (x) I + E2 (x) sigma_x realizing the channel.

    Tensor order is system (x) ancilla.  Restricted to the ancilla |0>
    subspace, the columns of G are orthonormal by completeness.
    """
    if len(ks.ops) != 2:
        raise UnsupportedArityError(
            f"ancilla gate is defined for 2-operator sets, got {len(ks.ops)}"
        )
    return np.kron(ks.ops[0], IDENTITY_2) + np.kron(ks.ops[1], SIGMA_X)


def apply_channel_to_density(ks: KrausSet, rho: np.ndarray) -> np.ndarray:
    """Single-qubit channel action sum_j E_j rho E_j^dag (2x2 densities)."""
    out = np.zeros_like(rho, dtype=complex)
    for op in ks.ops:
        out += op @ rho @ op.conj().T
    return out
