"""Dense brute-force references and two-qubit closed forms.

Everything here exists to check the tensor-network engines: statevector and
density-matrix evolution, the trace-distance metric, the state-dependent and
Haar-averaged analytic non-unitarity of Pauli channels, the amplitude-damping
reduced-density eigenvalues, Wootters concurrence / entanglement of
formation, and the random-state angle-grid sweep.

Dense guards: 12 qubits for state vectors, 6 for density matrices.

Two-qubit closed forms follow the convention |psi> = a|00> + b|01> + c|10> +
d|11> with the channel acting on the second (least significant) qubit; that
is the convention under which x = |a|^2+|c|^2, y = |b|^2+|d|^2,
z = a* b + c* d.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .channels import (
    AMPLITUDE_DAMPING,
    PHASE_FLIP,
    KrausSet,
    RotationAngles,
    SIGMA_Y,
    make_channel,
    normalize_label,
    rotate,
    rotation_unitary,
)
from .exceptions import CapacityError, DomainError, ValidationError, ZeroProbabilityError

STATE_MAX_QUBITS = 12
DENSITY_MAX_QUBITS = 6
_SINGULAR_ATOL = 1e-14
_PSD_ATOL = 1e-10

_SYSY = np.kron(SIGMA_Y, SIGMA_Y)


def _check_state_size(n: int) -> None:
    if n > STATE_MAX_QUBITS:
        raise CapacityError(f"dense states limited to {STATE_MAX_QUBITS} qubits")


def _check_density_size(n: int) -> None:
    if n > DENSITY_MAX_QUBITS:
        raise CapacityError(f"dense densities limited to {DENSITY_MAX_QUBITS} qubits")


def _qubit_count(dim: int) -> int:
    n = int(round(math.log2(dim)))
    if 2**n != dim:
        raise DomainError(f"dimension {dim} is not a power of two")
    return n


def haar_state(n: int, rng: np.random.Generator) -> np.ndarray:
    """Normalized complex-Gaussian vector; Haar on the unit sphere."""
    _check_state_size(n)
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


def basis_state(n: int, bits: str) -> np.ndarray:
    _check_state_size(n)
    vec = np.zeros(2**n, dtype=complex)
    vec[int(bits, 2)] = 1.0
    return vec


def apply_gate_statevector(vec: np.ndarray, gate: np.ndarray, site: int) -> np.ndarray:
    """4x4 gate on sites (site, site+1); site 1 is the most significant bit."""
    n = _qubit_count(vec.size)
    if not 1 <= site <= n - 1:
        raise DomainError(f"site {site} out of range")
    left = 2 ** (site - 1)
    right = 2 ** (n - site - 1)
    work = vec.reshape(left, 4, right)
    return np.einsum("ij,ajb->aib", gate, work).reshape(-1)


def apply_single_qubit(vec: np.ndarray, op: np.ndarray, site: int) -> np.ndarray:
    n = _qubit_count(vec.size)
    if not 1 <= site <= n:
        raise DomainError(f"site {site} out of range")
    left = 2 ** (site - 1)
    right = 2 ** (n - site)
    work = vec.reshape(left, 2, right)
    return np.einsum("ij,ajb->aib", op, work).reshape(-1)


def _embed(op: np.ndarray, site: int, n: int) -> np.ndarray:
    left = np.eye(2 ** (site - 1))
    right = np.eye(2 ** (n - site - _qubit_count(op.shape[0]) + 1))
    return np.kron(np.kron(left, op), right)


def apply_channel_density(rho: np.ndarray, ks: KrausSet, site: int) -> np.ndarray:
    n = _qubit_count(rho.shape[0])
    out = np.zeros_like(rho)
    for op in ks.ops:
        full = _embed(op, site, n)
        out += full @ rho @ full.conj().T
    return out


def evolve_density(
    plan, ks: KrausSet, bits: str | None = None
) -> list[np.ndarray]:
    """Exact density matrix after each (gates + noise) layer of a plan."""
    n = plan.n
    _check_density_size(n)
    vec = basis_state(n, bits or "0" * n)
    rho = np.outer(vec, vec.conj())
    out = []
    for layer in plan.layers:
        for site, gate in layer:
            full = _embed(gate, site, n)
            rho = full @ rho @ full.conj().T
        for site in range(1, n + 1):
            rho = apply_channel_density(rho, ks, site)
        out.append(rho.copy())
    return out


def trace_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """T(a, b) = (1/2) ||a - b||_1."""
    diff = rho_a - rho_b
    ev = np.linalg.eigvalsh((diff + diff.conj().T) / 2.0)
    return float(np.abs(ev).sum() / 2.0)


def schmidt_probs_dense(vec: np.ndarray, cut: int) -> np.ndarray:
    """Descending squared Schmidt values across bipartition [1..cut] | rest."""
    n = _qubit_count(vec.size)
    if not 1 <= cut <= n - 1:
        raise DomainError(f"cut {cut} out of range")
    m = vec.reshape(2**cut, -1)
    s = np.linalg.svd(m, compute_uv=False)
    p = s * s
    return np.sort(p)[::-1]


def npc_dense(vec: np.ndarray, ks: KrausSet, site: int) -> float:
    """Averaged post-channel non-unitarity from the definition.

    For each outcome operator O: Q = O / sqrt(<O^dag O>); the contribution is
    p * tr[(Q^dag Q - 1)^dag (Q^dag Q - 1)] on the single-qubit factor
    (tr 1 = 2 convention).  Zero-probability outcomes carry zero weight.
    """
    total = 0.0
    for op in ks.ops:
        phi = apply_single_qubit(vec, np.asarray(op, dtype=complex), site)
        w = float(np.vdot(phi, phi).real)
        if w < _SINGULAR_ATOL:
            continue
        m = np.asarray(op).conj().T @ np.asarray(op) / w - np.eye(2)
        total += w * float(np.vdot(m, m).real)
    return total


def _pauli_fs(theta: float, phi: float, p: float) -> tuple[float, float]:
    f1 = (1.0 - p) * math.cos(theta) ** 2 + p * math.sin(theta) ** 2
    f2 = math.sqrt(max(p - p * p, 0.0)) * math.sin(2 * theta) * math.cos(2 * phi)
    return f1, f2


def npc_pauli_analytic(theta: float, phi: float, p: float, s: float) -> float:
    """State-dependent N_pc of a Pauli channel; s = <sigma> on the input state."""
    f1, f2 = _pauli_fs(theta, phi, p)
    den = f1 - f1 * f1 + s * (f2 - 2.0 * f1 * f2 - s * f2 * f2)
    if abs(den) <= _SINGULAR_ATOL:
        raise DomainError(
            f"N_pc singular at theta={theta}, p={p}: outcome probability vanishes"
        )
    num = f1 - f1 * f1 + f2 * f2 + s * (f2 - 2.0 * f1 * f2)
    return 2.0 * (num / den - 1.0)


def npc_pauli_haar(theta: float, phi: float, p: float) -> float:
    """Haar-averaged N_pc of a Pauli channel (input expectation replaced by 0)."""
    return npc_pauli_analytic(theta, phi, p, 0.0)


def _xyz(state2q: np.ndarray) -> tuple[float, float, complex, complex]:
    a, b, c, d = (complex(x) for x in np.asarray(state2q).reshape(4))
    x = abs(a) ** 2 + abs(c) ** 2
    y = abs(b) ** 2 + abs(d) ** 2
    z = a.conjugate() * b + c.conjugate() * d
    c0 = 2.0 * abs(a * d - b * c)
    return x, y, z, c0


def ad_reduced_eigenvalues(
    state2q: np.ndarray, theta: float, phi: float, p: float, j: int
) -> tuple[float, float]:
    """Closed-form reduced-density eigenvalues after one amplitude-damping outcome.

    Outcome j in {1, 2} applies F_j = alpha_j E1 + beta_j E2 (rows of the
    mixing unitary) to the least-significant qubit of the two-qubit state.
    Returns (lambda_plus, lambda_minus) with lambda_+ + lambda_- = 1.
    """
    if j not in (1, 2):
        raise DomainError(f"outcome index must be 1 or 2, got {j}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"rate must lie in [0, 1], got {p}")
    u = rotation_unitary(RotationAngles(theta, phi))
    alpha, beta = u[j - 1]
    x, y, z, c0 = _xyz(state2q)
    weight = (
        x * abs(alpha) ** 2
        + p * y * abs(beta) ** 2
        + (1.0 - p) * y * abs(alpha) ** 2
        + 2.0 * math.sqrt(p) * (z * alpha.conjugate() * beta).real
    )
    if weight < _SINGULAR_ATOL:
        raise ZeroProbabilityError(f"outcome {j} has vanishing probability")
    disc = 1.0 - (1.0 - p) * abs(alpha) ** 4 * c0 * c0 / weight**2
    root = math.sqrt(min(max(disc, 0.0), 1.0))
    return (1.0 + root) / 2.0, (1.0 - root) / 2.0


def concurrence2q(state_or_density: np.ndarray) -> float:
    """Two-qubit concurrence: 2|ad - bc| for pure states, Wootters otherwise."""
    arr = np.asarray(state_or_density, dtype=complex)
    if arr.ndim == 1 or arr.shape == (4, 1):
        a, b, c, d = arr.reshape(4)
        return float(2.0 * abs(a * d - b * c))
    if arr.shape != (4, 4):
        raise DomainError(f"expected a 4-vector or 4x4 density, got {arr.shape}")
    ev_min = float(np.linalg.eigvalsh((arr + arr.conj().T) / 2.0).min())
    if ev_min < -_PSD_ATOL:
        raise ValidationError(f"density is not PSD: min eigenvalue {ev_min:.3e}")
    r = arr @ _SYSY @ arr.conj() @ _SYSY
    ev = np.linalg.eigvals(r)
    roots = np.sqrt(np.abs(np.real(ev)))
    roots.sort()
    return float(max(0.0, roots[3] - roots[2] - roots[1] - roots[0]))


def _binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return float(-x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x))


def eof2q(density: np.ndarray) -> float:
    """Entanglement of formation in bits from the concurrence."""
    c = concurrence2q(density)
    return _binary_entropy((1.0 + math.sqrt(max(1.0 - c * c, 0.0))) / 2.0)


def optimal_theta_condition(
    state2q: np.ndarray, p: float, theta: float, phi: float
) -> float:
    """Residual |cos(2t) p y - sin(2t) sqrt(p) Re{e^{i phi} z}| of the
    equal-concurrence stationarity condition for amplitude damping."""
    _, y, z, _ = _xyz(state2q)
    lhs = math.cos(2 * theta) * p * y
    rhs = math.sin(2 * theta) * math.sqrt(p) * (np.exp(1j * phi) * z).real
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# Random-state angle-grid sweep
# ---------------------------------------------------------------------------

DEFAULT_SWEEP_GRID = tuple(k * math.pi / 20 for k in range(6))


@dataclass(frozen=True)
class SweepRow:
    theta: float
    phi: float
    excess_te: float
    excess_te_se: float
    neg_npc: float
    neg_npc_se: float


@dataclass(frozen=True)
class SweepTable:
    channel: str
    rate: float
    n_samples: int
    rows: tuple[SweepRow, ...]

    def row(self, theta: float, phi: float) -> SweepRow:
        for r in self.rows:
            if abs(r.theta - theta) < 1e-12 and abs(r.phi - phi) < 1e-12:
                return r
        raise KeyError((theta, phi))


def _batched_schmidt_probs(states: np.ndarray) -> np.ndarray:
    """Squared singular values of a batch of 2x2 coefficient matrices."""
    m = states.reshape(-1, 2, 2)
    frob = np.einsum("nij,nij->n", m, m.conj()).real
    det = np.abs(m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]) ** 2
    disc = np.sqrt(np.clip(frob * frob - 4.0 * det, 0.0, None))
    hi = np.clip((frob + disc) / 2.0, 0.0, None)
    lo = np.clip((frob - disc) / 2.0, 0.0, None)
    return np.stack([hi, lo], axis=1)


def _entropy_bits(probs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, -probs * np.log2(probs), 0.0)
    return terms.sum(axis=-1)


def _batched_concurrence(rhos: np.ndarray) -> np.ndarray:
    r = rhos @ _SYSY @ rhos.conj() @ _SYSY
    ev = np.linalg.eigvals(r)
    roots = np.sort(np.sqrt(np.abs(ev.real)), axis=1)
    c = roots[:, 3] - roots[:, 2] - roots[:, 1] - roots[:, 0]
    return np.clip(c, 0.0, 1.0)


def angle_grid_sweep(
    channel: str,
    rate: float,
    n_samples: int,
    seed: int = 2024,
    grid: Sequence[float] = DEFAULT_SWEEP_GRID,
) -> SweepTable:
    """Haar-random two-qubit statistics of excess entropy and non-unitarity.

    For every (theta, phi) on the grid, the rotated Kraus pair is applied to
    the second qubit of ``n_samples`` random states; reported are the means
    and standard errors of S_pc - E_f (excess post-channel entropy over the
    entanglement of formation of the post-channel mixed state) and of
    -N_pc.
    """
    label = normalize_label(channel)
    ks = make_channel(label, rate)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    states = rng.standard_normal((n_samples, 4)) + 1j * rng.standard_normal(
        (n_samples, 4)
    )
    states /= np.linalg.norm(states, axis=1, keepdims=True)

    rows = []
    for theta in grid:
        for phi in grid:
            fset = rotate(ks, RotationAngles(theta, phi))
            s_pc = np.zeros(n_samples)
            npc = np.zeros(n_samples)
            rho_post = np.zeros((n_samples, 4, 4), dtype=complex)
            for op in fset.ops:
                out = states.reshape(-1, 2, 2) @ np.asarray(op).T
                out = out.reshape(-1, 4)
                w = np.einsum("ni,ni->n", out, out.conj()).real
                safe_w = np.where(w > _SINGULAR_ATOL, w, 1.0)
                probs = _batched_schmidt_probs(out) / safe_w[:, None]
                ent = np.where(w > _SINGULAR_ATOL, _entropy_bits(probs), 0.0)
                s_pc += w * ent
                m = np.asarray(op).conj().T @ np.asarray(op)
                tr_m2 = float(np.vdot(m, m).real)
                npc += np.where(w > _SINGULAR_ATOL,
                                tr_m2 / safe_w - 2.0 * float(np.trace(m).real)
                                + 2.0 * w, 0.0)
                rho_post += np.einsum("ni,nj->nij", out, out.conj())
            conc = _batched_concurrence(rho_post)
            eof = np.array([_binary_entropy((1 + math.sqrt(1 - c * c)) / 2)
                            for c in conc])
            excess = s_pc - eof
            rows.append(SweepRow(
                theta=theta, phi=phi,
                excess_te=float(excess.mean()),
                excess_te_se=float(excess.std(ddof=1) / math.sqrt(n_samples)),
                neg_npc=float(-npc.mean()),
                neg_npc_se=float(npc.std(ddof=1) / math.sqrt(n_samples)),
            ))
    return SweepTable(channel=label, rate=rate, n_samples=n_samples,
                      rows=tuple(rows))


SWEEP_HEADER = ("theta", "phi", "excess_te", "excess_te_se", "neg_npc", "neg_npc_se")


def write_sweep_csv(path: str | Path, table: SweepTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for r in table.rows:
            writer.writerow([repr(r.theta), repr(r.phi), repr(r.excess_te),
                             repr(r.excess_te_se), repr(r.neg_npc),
                             repr(r.neg_npc_se)])
