"""Config-driven experiment orchestration.

One experiment = one brickwork circuit plan shared by every strategy and
engine, a channel, and an engine choice (stochastic MPS trajectories,
deterministic MPDO, or the dense density-matrix oracle).  Trajectories are
farmed over a process pool in fixed-size chunks whose boundaries do not
depend on the worker count, and per-chunk partial results are combined in
chunk order, so outputs are bit-identical for any pool size.

Per-trajectory randomness comes from counter-based Philox streams keyed by
(experiment_seed, trajectory_index); the gate stream is separate, so circuit
identity is independent of strategy and trajectory count.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, mpdo, mps, oracle
from .channels import KrausSet, make_channel, naive_phase_flip, normalize_label, trace_tensor
from .circuits import CircuitPlan, brickwork, dump_plan
from .diagnostics import EnsembleStats, central_bond_window
from .exceptions import DomainError, ValidationError
from .unraveling import UnravelingStrategy, stochastic_update

_TRAJECTORY_STREAM = 1
ENGINES = ("trajectories", "mpdo", "dense-oracle")
DENSITY_ACCUM_MAX_QUBITS = 8


@dataclass
class ExperimentConfig:
    """Validated experiment description; parses from a JSON document.

    Unknown keys are rejected.  ``chi_ladder`` is only consumed by
    :func:`convergence_ladder`.
    """

    n: int = 16
    layers: int = 40
    channel: str = "amplitude-damping"
    rate: float = 0.3
    strategy: dict | str = "fixed"
    n_trajectories: int = 500
    chi_max: int = 64
    chi_ladder: list[int] | None = None
    epsilon: float = 1e-4
    bond_window: int = diagnostics.DEFAULT_BOND_WINDOW_WIDTH
    circuit_instances: int = 10
    experiment_seed: int = 1
    engine: str = "trajectories"
    out_dir: str | None = None
    svd_floor: float = 1e-12
    workers: int | None = None
    chunk_size: int = 200
    accumulate_density: bool = False
    renormalize_trace: bool = False
    initial_bits: str | None = None
    hard_chi_threshold: float = 100.0

    def __post_init__(self) -> None:
        self.channel = normalize_label(self.channel)
        if self.n < 2:
            raise ValidationError("n must be >= 2")
        if self.layers < 1:
            raise ValidationError("layers must be >= 1")
        if self.n_trajectories < 1:
            raise ValidationError("n_trajectories must be >= 1")
        if self.chi_max < 1:
            raise ValidationError("chi_max must be >= 1")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        if self.engine not in ENGINES:
            raise ValidationError(f"engine must be one of {ENGINES}")
        if self.chi_ladder is not None:
            ladder = list(self.chi_ladder)
            if any(b <= a for a, b in zip(ladder, ladder[1:])):
                raise ValidationError("chi_ladder must be strictly increasing")
        if self.chunk_size < 1:
            raise ValidationError("chunk_size must be >= 1")
        if self.initial_bits is not None and len(self.initial_bits) != self.n:
            raise ValidationError("initial_bits length must equal n")
        # Fail fast on malformed strategy specs.
        self.build_strategy()

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def build_strategy(self) -> UnravelingStrategy:
        return UnravelingStrategy.from_config(self.strategy)

    def bits(self) -> str:
        return self.initial_bits or "0" * self.n

    def window(self) -> list[int]:
        return central_bond_window(self.n, self.bond_window)


def strategy_kraus_set(channel: str, rate: float, kind: str) -> KrausSet:
    """The operator set a strategy evolves with, for a named channel.

    The naive strategy uses the projective 3-operator set for phase flip and
    the bare 2-operator set for amplitude damping.
    """
    label = normalize_label(channel)
    if kind != "naive":
        return make_channel(label, rate)
    if label == "phase-flip":
        return naive_phase_flip(rate)
    if label == "amplitude-damping":
        return make_channel(label, rate)
    raise DomainError(f"naive unraveling is not defined for channel {label}")


def worker_count(config: ExperimentConfig) -> int:
    env = os.environ.get("TRAJ_WORKERS")
    if env:
        return max(1, int(env))
    if config.workers:
        return max(1, int(config.workers))
    return max(1, os.cpu_count() or 1)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_TRAJECTORY_STREAM, index))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class _ChunkResult:
    start: int
    entropies: np.ndarray  # (count, layers, window)
    chi_effs: np.ndarray
    trunc_max: np.ndarray  # (count, layers)
    thetas: np.ndarray
    phis: np.ndarray
    rec_layers: np.ndarray
    rho_sums: np.ndarray | None


def _run_trajectory_chunk(args) -> _ChunkResult:
    config, plan, start, count = args
    strategy = config.build_strategy()
    ks = strategy_kraus_set(config.channel, config.rate, strategy.kind)
    tt = trace_tensor(ks) if strategy.kind == "numu" else None
    window = config.window()
    n_layers = plan.n_layers

    entropies = np.zeros((count, n_layers, len(window)))
    chi_effs = np.zeros((count, n_layers, len(window)))
    trunc_max = np.zeros((count, n_layers))
    thetas: list[float] = []
    phis: list[float] = []
    rec_layers: list[int] = []
    rho_sums = None
    if config.accumulate_density:
        if config.n > DENSITY_ACCUM_MAX_QUBITS:
            raise DomainError(
                f"density accumulation limited to {DENSITY_ACCUM_MAX_QUBITS} qubits"
            )
        dim = 2**config.n
        rho_sums = np.zeros((n_layers, dim, dim), dtype=complex)

    for k in range(count):
        idx = start + k
        rng = trajectory_rng(config.experiment_seed, idx)
        state = mps.product_state(config.n, config.bits(), config.chi_max,
                                  config.svd_floor)
        for layer_i, layer in enumerate(plan.layers):
            for site, gate in layer:
                mps.apply_two_qubit_gate(state, gate, site)
            for site in range(1, config.n + 1):
                rec = stochastic_update(state, ks, site, strategy, rng,
                                        layer=layer_i + 1, trace_t=tt)
                if rec.angles is not None:
                    thetas.append(rec.angles.theta)
                    phis.append(rec.angles.phi)
                    rec_layers.append(rec.layer)
            mps.canonicalize(state)
            for b, bond in enumerate(window):
                spec = mps.schmidt_spectrum(state, bond)
                ent, chi_eff = diagnostics.spectrum_summary(spec, config.epsilon)
                entropies[k, layer_i, b] = ent
                chi_effs[k, layer_i, b] = chi_eff
            trunc_max[k, layer_i] = state.max_truncation()
            if rho_sums is not None:
                vec = mps.to_dense(state)
                rho_sums[layer_i] += np.outer(vec, vec.conj())

    return _ChunkResult(
        start=start,
        entropies=entropies,
        chi_effs=chi_effs,
        trunc_max=trunc_max,
        thetas=np.array(thetas),
        phis=np.array(phis),
        rec_layers=np.array(rec_layers, dtype=int),
        rho_sums=rho_sums,
    )


@dataclass
class TrajectoryRunData:
    """Raw per-trajectory samples plus per-layer aggregates."""

    config: ExperimentConfig
    plan: CircuitPlan
    window: list[int]
    entropies: np.ndarray  # (n_T, layers, window)
    chi_effs: np.ndarray
    trunc_max: np.ndarray  # (n_T, layers)
    thetas: np.ndarray
    phis: np.ndarray
    rec_layers: np.ndarray
    avg_rho: list[np.ndarray] | None
    layer_stats: list[EnsembleStats] = field(default_factory=list)

    def strategy_name(self) -> str:
        s = self.config.build_strategy()
        if s.kind == "fixed":
            return f"fixed({s.angles.theta:.6f},{s.angles.phi:.6f})"
        return s.kind


def simulate_trajectories(
    config: ExperimentConfig, plan: CircuitPlan | None = None
) -> TrajectoryRunData:
    """Evolve the configured trajectory ensemble and aggregate per layer."""
    if plan is None:
        plan = brickwork(config.n, config.layers, config.experiment_seed)
    n_t = config.n_trajectories
    chunks = [
        (config, plan, start, min(config.chunk_size, n_t - start))
        for start in range(0, n_t, config.chunk_size)
    ]
    n_workers = min(worker_count(config), len(chunks))
    if n_workers > 1:
        import multiprocessing as _mp

        with ProcessPoolExecutor(
            max_workers=n_workers, mp_context=_mp.get_context("spawn")
        ) as pool:
            results = list(pool.map(_run_trajectory_chunk, chunks))
    else:
        results = [_run_trajectory_chunk(c) for c in chunks]
    results.sort(key=lambda r: r.start)

    entropies = np.concatenate([r.entropies for r in results])
    chi_effs = np.concatenate([r.chi_effs for r in results])
    trunc_max = np.concatenate([r.trunc_max for r in results])
    thetas = np.concatenate([r.thetas for r in results])
    phis = np.concatenate([r.phis for r in results])
    rec_layers = np.concatenate([r.rec_layers for r in results])
    avg_rho = None
    if config.accumulate_density:
        sums = np.zeros_like(results[0].rho_sums)
        for r in results:
            sums = sums + r.rho_sums
        avg_rho = [sums[i] / n_t for i in range(plan.n_layers)]

    data = TrajectoryRunData(
        config=config, plan=plan, window=config.window(),
        entropies=entropies, chi_effs=chi_effs, trunc_max=trunc_max,
        thetas=thetas, phis=phis, rec_layers=rec_layers, avg_rho=avg_rho,
    )
    name = data.strategy_name()
    for layer_i in range(plan.n_layers):
        mask = rec_layers == layer_i + 1
        data.layer_stats.append(diagnostics.aggregate(
            entropies[:, layer_i, :], chi_effs[:, layer_i, :],
            layer=layer_i + 1, strategy=name,
            thetas=thetas[mask] if mask.any() else None,
            phis=phis[mask] if mask.any() else None,
            trunc_max=float(trunc_max[:, layer_i].max()),
        ))
    return data


@dataclass
class MpdoRunData:
    config: ExperimentConfig
    oe: np.ndarray        # (instances, layers, window)
    chi_effs: np.ndarray  # (instances, layers, window)
    traces: np.ndarray    # (instances, layers)
    trunc_max: np.ndarray
    layer_stats: list[EnsembleStats] = field(default_factory=list)


def simulate_mpdo(
    config: ExperimentConfig, plan: CircuitPlan | None = None
) -> MpdoRunData:
    """Deterministic MPDO evolution over the configured circuit instances.

    Instance 0 reuses the trajectory plan; further instances draw fresh
    circuits from the same master seed.
    """
    ks = make_channel(config.channel, config.rate)
    window = config.window()
    n_inst = config.circuit_instances
    oe = np.zeros((n_inst, config.layers, len(window)))
    chi_effs = np.zeros_like(oe)
    traces = np.zeros((n_inst, config.layers))
    trunc_max = np.zeros((n_inst, config.layers))

    for inst in range(n_inst):
        inst_plan = plan if (inst == 0 and plan is not None) else brickwork(
            config.n, config.layers, config.experiment_seed, instance=inst
        )
        state = mpdo.mpdo_from_bitstring(
            config.n, config.bits(), config.chi_max, config.svd_floor,
            renormalize_trace=config.renormalize_trace,
        )
        for layer_i, layer in enumerate(inst_plan.layers):
            for site, gate in layer:
                mpdo.apply_gate(state, gate, site)
            for site in range(1, config.n + 1):
                mpdo.apply_channel(state, ks, site)
            mpdo.canonicalize(state)
            for b, bond in enumerate(window):
                stats = mpdo.mpdo_effective_rank(state, bond, config.epsilon)
                oe[inst, layer_i, b] = stats.entropy_vn
                chi_effs[inst, layer_i, b] = stats.chi_eff
            traces[inst, layer_i] = mpdo.mpdo_trace(state)
            trunc_max[inst, layer_i] = float(state.trunc_log.max())

    data = MpdoRunData(config=config, oe=oe, chi_effs=chi_effs, traces=traces,
                       trunc_max=trunc_max)
    for layer_i in range(config.layers):
        data.layer_stats.append(diagnostics.aggregate(
            oe[:, layer_i, :], chi_effs[:, layer_i, :],
            layer=layer_i + 1, strategy="mpdo",
            trunc_max=float(trunc_max[:, layer_i].max()),
        ))
    return data


def simulate_dense(
    config: ExperimentConfig, plan: CircuitPlan | None = None
) -> list[np.ndarray]:
    """Exact density matrix after each layer (small n only)."""
    if plan is None:
        plan = brickwork(config.n, config.layers, config.experiment_seed)
    ks = make_channel(config.channel, config.rate)
    return oracle.evolve_density(plan, ks, config.bits())


@dataclass
class RunManifest:
    """Echo of the config, produced files, and wall time of one run."""

    config: dict
    version: str
    engine: str
    outputs: dict[str, str]
    wall_time_s: float
    convergence: list[dict] | None = None
    data: object | None = None  # in-memory result, never serialized

    def to_json(self) -> str:
        doc = {
            "config": self.config,
            "version": self.version,
            "engine": self.engine,
            "outputs": self.outputs,
            "wall_time_s": self.wall_time_s,
            "convergence": self.convergence,
        }
        return json.dumps(doc, indent=1, sort_keys=True)


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _density_to_json(rho: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in rho]


def run(config: ExperimentConfig, dump_circuit: str | Path | None = None) -> RunManifest:
    """Execute one experiment and write CSV/JSON outputs plus a manifest.

    Per trajectory the evolution is: for each layer, apply the layer's
    gates, then apply the strategy-driven stochastic channel to every qubit
    left to right, then restore canonical form and collect diagnostics.
    """
    t0 = time.perf_counter()
    out_dir = Path(config.out_dir) if config.out_dir else Path.cwd() / "runs"
    out_dir.mkdir(parents=True, exist_ok=True)
    plan = brickwork(config.n, config.layers, config.experiment_seed)
    outputs: dict[str, str] = {}

    if dump_circuit:
        dump_plan(plan, dump_circuit)
        outputs["circuit"] = str(dump_circuit)

    convergence = None
    if config.engine == "trajectories":
        data = simulate_trajectories(config, plan)
        series = out_dir / "series.csv"
        diagnostics.write_series_csv(series, data.layer_stats)
        outputs["series"] = str(series)
        final = data.layer_stats[-1]
        hist_path = out_dir / "chi_eff_hist.csv"
        diagnostics.write_histogram_csv(hist_path, final.chi_eff_hist)
        outputs["chi_eff_hist"] = str(hist_path)
        if final.theta_hist is not None:
            tpath = out_dir / "theta_hist.csv"
            diagnostics.write_histogram_csv(tpath, final.theta_hist)
            outputs["theta_hist"] = str(tpath)
            ppath = out_dir / "phi_hist.csv"
            diagnostics.write_histogram_csv(ppath, final.phi_hist)
            outputs["phi_hist"] = str(ppath)
        if data.avg_rho is not None:
            rpath = out_dir / "avg_density.json"
            _write_atomic(rpath, json.dumps(
                [_density_to_json(r) for r in data.avg_rho]
            ))
            outputs["avg_density"] = str(rpath)
    elif config.engine == "mpdo":
        data = simulate_mpdo(config, plan)
        series = out_dir / "series.csv"
        diagnostics.write_series_csv(series, data.layer_stats)
        outputs["series"] = str(series)
    else:
        rhos = simulate_dense(config, plan)
        data = rhos
        rpath = out_dir / "dense_density.json"
        _write_atomic(rpath, json.dumps([_density_to_json(r) for r in rhos]))
        outputs["dense_density"] = str(rpath)

    manifest = RunManifest(
        config=config.to_dict(), version=__version__, engine=config.engine,
        outputs=outputs, wall_time_s=time.perf_counter() - t0,
        convergence=convergence, data=data,
    )
    _write_atomic(out_dir / "manifest.json", manifest.to_json())
    return manifest


# ---------------------------------------------------------------------------
# Convergence ladder and scaling report
# ---------------------------------------------------------------------------


@dataclass
class LadderEntry:
    chi_pair: tuple[int, int]
    converged_by_layer: list[bool]
    converged_depth: int


def convergence_ladder(config: ExperimentConfig) -> list[LadderEntry]:
    """Run the chi ladder and mark layer-wise convergence.

    A layer is converged for a chi pair when the chi_eff-mean standard-error
    bands of the two runs overlap.  The converged depth of a pair is the last
    layer of the all-converged prefix.  All ladder runs share the circuit
    plan and the trajectory outcome streams.
    """
    if not config.chi_ladder or len(config.chi_ladder) < 2:
        raise DomainError("convergence ladder needs at least two chi values")
    plan = brickwork(config.n, config.layers, config.experiment_seed)
    runs = {}
    for chi in config.chi_ladder:
        cfg = ExperimentConfig.from_dict({
            **config.to_dict(), "chi_max": int(chi), "chi_ladder": None,
        })
        runs[chi] = simulate_trajectories(cfg, plan)

    entries = []
    for chi_a, chi_b in zip(config.chi_ladder, config.chi_ladder[1:]):
        flags = []
        for la, lb in zip(runs[chi_a].layer_stats, runs[chi_b].layer_stats):
            gap = abs(la.chi_eff_mean - lb.chi_eff_mean)
            flags.append(bool(gap <= la.chi_eff_se + lb.chi_eff_se))
        depth = 0
        for ok in flags:
            if not ok:
                break
            depth += 1
        entries.append(LadderEntry(chi_pair=(int(chi_a), int(chi_b)),
                                   converged_by_layer=flags,
                                   converged_depth=depth))
    return entries


@dataclass
class ScalingRow:
    rate: float
    strategy: str
    layer: int
    inv_layer: float
    chi_eff_over_layer: float
    se_over_layer: float
    masked: bool


def scaling_report(
    config: ExperimentConfig,
    rates: list[float],
    depths: list[int] | None = None,
) -> list[ScalingRow]:
    """chi_eff / L as a function of 1 / L per rate, with the hard-regime mask.

    Rows with chi_eff above ``config.hard_chi_threshold`` are flagged masked
    (numerically hard regime); depths defaults to every layer of the run.
    """
    depths = depths or list(range(1, config.layers + 1))
    rows: list[ScalingRow] = []
    for rate in rates:
        cfg = ExperimentConfig.from_dict({**config.to_dict(), "rate": float(rate)})
        data = simulate_trajectories(cfg)
        for depth in depths:
            st = data.layer_stats[depth - 1]
            rows.append(ScalingRow(
                rate=float(rate), strategy=st.strategy, layer=depth,
                inv_layer=1.0 / depth,
                chi_eff_over_layer=st.chi_eff_mean / depth,
                se_over_layer=st.chi_eff_se / depth,
                masked=bool(st.chi_eff_mean > config.hard_chi_threshold),
            ))
    return rows


def write_scaling_csv(path: str | Path, rows: list[ScalingRow]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("rate", "strategy", "layer", "inv_layer",
                         "chi_eff_over_layer", "se_over_layer", "masked"))
        for r in rows:
            writer.writerow([repr(r.rate), r.strategy, r.layer, repr(r.inv_layer),
                             repr(r.chi_eff_over_layer), repr(r.se_over_layer),
                             int(r.masked)])


def write_ladder_csv(path: str | Path, entries: list[LadderEntry]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("chi_lo", "chi_hi", "converged_depth", "flags"))
        for e in entries:
            writer.writerow([e.chi_pair[0], e.chi_pair[1], e.converged_depth,
                             "".join("1" if f else "0" for f in e.converged_by_layer)])
