"""Stochastic trajectory updates under pluggable Kraus-representation strategies.

Strategies: ``naive`` (use the given operator set as-is), ``fixed`` (one
rotation for every application), ``numu`` (adaptively maximize the averaged
post-channel non-unitarity, O(chi^2) per optimization), and ``geo2``
(directly minimize the averaged post-channel entanglement entropy, O(chi^3)
per cost evaluation).

The optimizers are deterministic: the outcome randomness of a trajectory is
drawn from exactly one uniform per channel application regardless of
strategy, so outcome streams stay aligned across strategies for
variance-reduction comparisons.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, mps
from .channels import KrausSet, RotationAngles, rotate, rotation_unitary, trace_tensor
from .exceptions import DomainError, ValidationError, ZeroProbabilityError

DEFAULT_GRID_SEEDS = (
    (0.0, 0.0),
    (math.pi / 8, 0.0),
    (math.pi / 4, 0.0),
    (3 * math.pi / 8, 0.0),
    (math.pi / 4, math.pi / 8),
)

_BOND_MODES = {"left": 0, "right": 1, "both": 2}


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for the multi-start quasi-Newton angle search.

    The starts actually used are ``grid_seeds[:restarts]``; gradients are
    central finite differences with step ``grad_step``; convergence is a
    cost decrease below ``tol`` between accepted steps.
    """

    max_iters: int = 100
    restarts: int = 5
    grid_seeds: tuple[tuple[float, float], ...] = DEFAULT_GRID_SEEDS
    grad_step: float = 1e-4
    tol: float = 1e-9

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if not self.grid_seeds:
            raise ValidationError("grid_seeds must be non-empty")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")

    def seed_array(self) -> np.ndarray:
        return _seed_array_cached(self.grid_seeds[: self.restarts])


@functools.lru_cache(maxsize=64)
def _seed_array_cached(seeds: tuple[tuple[float, float], ...]) -> np.ndarray:
    canon = [RotationAngles(t, p) for t, p in seeds]
    arr = np.array([[a.theta, a.phi] for a in canon], dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class UnravelingStrategy:
    """Tagged unraveling policy: naive | fixed(angles) | numu | geo2."""

    kind: str
    angles: RotationAngles | None = None
    optimizer: OptimizerConfig | None = None
    entropy_bond: str = "both"

    def __post_init__(self) -> None:
        if self.kind not in ("naive", "fixed", "numu", "geo2"):
            raise ValidationError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "fixed" and self.angles is None:
            raise ValidationError("fixed strategy needs angles")
        if self.entropy_bond not in _BOND_MODES:
            raise ValidationError(f"entropy_bond must be one of {sorted(_BOND_MODES)}")
        if self.kind in ("numu", "geo2") and self.optimizer is None:
            object.__setattr__(self, "optimizer", OptimizerConfig())

    @property
    def adaptive(self) -> bool:
        return self.kind in ("numu", "geo2")

    @classmethod
    def naive(cls) -> "UnravelingStrategy":
        return cls(kind="naive")

    @classmethod
    def fixed(cls, theta: float, phi: float = 0.0) -> "UnravelingStrategy":
        return cls(kind="fixed", angles=RotationAngles(theta, phi))

    @classmethod
    def numu(cls, optimizer: OptimizerConfig | None = None) -> "UnravelingStrategy":
        return cls(kind="numu", optimizer=optimizer)

    @classmethod
    def geo2(
        cls,
        optimizer: OptimizerConfig | None = None,
        entropy_bond: str = "both",
    ) -> "UnravelingStrategy":
        return cls(kind="geo2", optimizer=optimizer, entropy_bond=entropy_bond)

    @classmethod
    def from_config(cls, spec: dict | str) -> "UnravelingStrategy":
        """Parse {"strategy": "numu"} / {"strategy": "fixed", "theta": ..} etc."""
        if isinstance(spec, str):
            spec = {"strategy": spec}
        spec = dict(spec)
        kind = spec.pop("strategy", None)
        if kind is None:
            raise ValidationError("strategy spec needs a 'strategy' key")
        angles = None
        if kind == "fixed":
            angles = RotationAngles(spec.pop("theta"), spec.pop("phi", 0.0))
        entropy_bond = spec.pop("entropy_bond", "both")
        opt_spec = spec.pop("optimizer", None)
        optimizer = OptimizerConfig(**{
            k: tuple(tuple(s) for s in v) if k == "grid_seeds" else v
            for k, v in opt_spec.items()
        }) if opt_spec else None
        if spec:
            raise ValidationError(f"unknown strategy keys: {sorted(spec)}")
        return cls(kind=kind, angles=angles, optimizer=optimizer,
                   entropy_bond=entropy_bond)


@dataclass(frozen=True)
class UpdateRecord:
    """One stochastic channel application: where, what was chosen, what happened."""

    site: int
    layer: int
    outcome: int
    probability: float
    angles: RotationAngles | None = None
    cost: float | None = None
    converged: bool = True


@dataclass(frozen=True)
class SelectResult:
    angles: RotationAngles
    cost: float
    converged: bool


def numu_cost(angles: RotationAngles, overlap: np.ndarray, trace_t: np.ndarray) -> float:
    """Negated averaged post-channel non-unitarity, -N_pc.

    N_pc = -tr(1) + sum_j tr(F_j^dag F_j F_j^dag F_j) / p_j with the
    single-qubit trace convention tr(1) = 2.  Pure O(1) arithmetic in the
    overlap matrix and the precomputed trace tensor; returns +inf when any
    outcome probability falls below 1e-14 (degenerate unitary direction).
    """
    return float(_kernels.numu_cost(angles.theta, angles.phi,
                                    np.asarray(overlap, dtype=complex),
                                    np.asarray(trace_t, dtype=complex)))


def _numu_select_raw(
    state: mps.TrajectoryState, ks: KrausSet, site: int, cfg: OptimizerConfig,
    trace_t: np.ndarray | None = None,
) -> SelectResult:
    o = mps.overlaps(state, ks, site)
    t = trace_tensor(ks) if trace_t is None else trace_t
    theta, phi, cost, n_conv = _kernels.numu_select_raw(
        o, t, cfg.seed_array(), cfg.max_iters, cfg.grad_step, cfg.tol
    )
    return SelectResult(RotationAngles(theta, phi), float(cost), n_conv > 0)


def numu_select(
    state: mps.TrajectoryState, ks: KrausSet, site: int,
    cfg: OptimizerConfig | None = None,
) -> RotationAngles:
    """Angles maximizing the averaged post-channel non-unitarity at a site.

    Computes the O(chi^2) overlap contraction once; every optimizer
    iteration is O(1).  Deterministic given (state, ks, cfg).  If no start
    converges, the best point seen is returned with a warning.
    """
    result = _numu_select_raw(state, ks, site, cfg or OptimizerConfig())
    if not result.converged:
        warnings.warn("numu_select: optimizer did not converge; returning best point",
                      RuntimeWarning, stacklevel=2)
    return result.angles


def _geo2_payload(state: mps.TrajectoryState, ks: KrausSet, site: int):
    if len(ks.ops) != 2:
        raise DomainError("geo2 requires a 2-operator Kraus set")
    o = mps.overlaps(state, ks, site)
    base = mps.dressed_site(state, site - 1)
    raw = [
        np.tensordot(op, base, axes=(1, 1)).transpose(1, 0, 2)
        for op in ks.ops
    ]
    hl, hr = _kernels.geo2_precompute(raw[0], raw[1])
    return o, hl, hr


def geo2_cost(
    state: mps.TrajectoryState, ks: KrausSet, site: int, angles: RotationAngles,
    entropy_bond: str = "both",
) -> float:
    """Averaged post-channel entanglement entropy S_pc at the given angles.

    S_pc = p1 S(F1|psi>/sqrt(p1)) + p2 S(F2|psi>/sqrt(p2)); each entropy is
    evaluated from the dressed outcome tensor reshaped toward the left and/or
    right bond per ``entropy_bond``.  Costs O(chi^3) per call.
    """
    o, hl, hr = _geo2_payload(state, ks, site)
    return float(_kernels.geo2_cost_from_grams(
        angles.theta, angles.phi, o, hl, hr, _BOND_MODES[entropy_bond]
    ))


def _geo2_select_raw(
    state: mps.TrajectoryState, ks: KrausSet, site: int, cfg: OptimizerConfig,
    entropy_bond: str = "both",
) -> SelectResult:
    o, hl, hr = _geo2_payload(state, ks, site)
    theta, phi, cost, n_conv = _kernels.geo2_select_raw(
        o, hl, hr, _BOND_MODES[entropy_bond],
        cfg.seed_array(), cfg.max_iters, cfg.grad_step, cfg.tol,
    )
    return SelectResult(RotationAngles(theta, phi), float(cost), n_conv > 0)


def geo2_select(
    state: mps.TrajectoryState, ks: KrausSet, site: int,
    cfg: OptimizerConfig | None = None, entropy_bond: str = "both",
) -> RotationAngles:
    """Angles minimizing the averaged post-channel entanglement entropy."""
    result = _geo2_select_raw(state, ks, site, cfg or OptimizerConfig(),
                              entropy_bond)
    if not result.converged:
        warnings.warn("geo2_select: optimizer did not converge; returning best point",
                      RuntimeWarning, stacklevel=2)
    return result.angles


def stochastic_update(
    state: mps.TrajectoryState,
    ks: KrausSet,
    site: int,
    strategy: UnravelingStrategy,
    rng: np.random.Generator,
    layer: int = 0,
    trace_t: np.ndarray | None = None,
) -> UpdateRecord:
    """One strategy-driven channel application at a site.

    Adaptive strategies first choose rotation angles, then the outcome is
    drawn by cumulative probability from a single uniform and committed via
    :func:`mps.commit_outcome`.  All strategies consume exactly one uniform
    per application, keeping outcome streams aligned across strategies.
    """
    s = site - 1
    if not 0 <= s < state.n:
        raise DomainError(f"site {site} outside valid range 1..{state.n}")
    angles: RotationAngles | None = None
    cost: float | None = None
    converged = True

    g = state.gammas[s]
    chi_l, _, chi_r = g.shape
    block = g * state.lambdas[s][None, None, :] if s < state.n - 1 else g
    if s > 0:
        block = state.lambdas[s - 1][:, None, None] * block
    base_flat = np.ascontiguousarray(block.transpose(1, 0, 2)).reshape(2, -1)

    raw = [np.asarray(op, dtype=complex) @ base_flat for op in ks.ops]

    if strategy.kind == "naive":
        flats = raw
    else:
        if len(raw) != 2:
            raise DomainError("rotated strategies need a 2-operator Kraus set")
        if strategy.kind == "fixed":
            angles = strategy.angles
        else:
            o = np.empty((2, 2), dtype=complex)
            o[0, 0] = np.vdot(raw[0], raw[0])
            o[1, 1] = np.vdot(raw[1], raw[1])
            o[0, 1] = np.vdot(raw[0], raw[1])
            o[1, 0] = o[0, 1].conjugate()
            cfg = strategy.optimizer
            if strategy.kind == "numu":
                t = trace_tensor(ks) if trace_t is None else trace_t
                theta, phi, cost, n_conv = _kernels.numu_select_raw(
                    o, t, cfg.seed_array(), cfg.max_iters, cfg.grad_step, cfg.tol
                )
            else:
                shaped = [
                    np.ascontiguousarray(
                        a.reshape(2, chi_l, chi_r).transpose(1, 0, 2)
                    )
                    for a in raw
                ]
                hl, hr = _kernels.geo2_precompute(shaped[0], shaped[1])
                theta, phi, cost, n_conv = _kernels.geo2_select_raw(
                    o, hl, hr, _BOND_MODES[strategy.entropy_bond],
                    cfg.seed_array(), cfg.max_iters, cfg.grad_step, cfg.tol,
                )
            angles = RotationAngles(theta, phi)
            cost = float(cost)
            converged = n_conv > 0
        u = rotation_unitary(angles)
        flats = [u[j, 0] * raw[0] + u[j, 1] * raw[1] for j in range(2)]

    tensors_list = []
    probs = []
    for flat in flats:
        p = float(np.vdot(flat, flat).real)
        probs.append(p)
        shaped = flat.reshape(2, chi_l, chi_r).transpose(1, 0, 2)
        tensors_list.append(shaped / math.sqrt(p)
                            if p > mps.ZERO_PROBABILITY_FLOOR else shaped)
    tensors = mps.ChannelTensors(tensors=tuple(tensors_list), probs=tuple(probs))

    r = rng.random()
    cum = 0.0
    outcome = len(probs)
    for j, p in enumerate(probs, start=1):
        cum += p
        if r < cum:
            outcome = j
            break
    p_out = probs[outcome - 1]
    mps.commit_outcome(state, tensors, outcome, site)
    return UpdateRecord(site=site, layer=layer, outcome=outcome,
                        probability=float(p_out), angles=angles, cost=cost,
                        converged=converged)
