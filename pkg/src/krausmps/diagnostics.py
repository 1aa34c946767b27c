"""Entropies, Chebyshev effective Schmidt ranks, and ensemble aggregation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DomainError, ValidationError

DEFAULT_EPSILON = 1e-4
DEFAULT_BOND_WINDOW_WIDTH = 21
HISTOGRAM_BINS = 64
SPECTRUM_NEG_ATOL = 1e-12
DEFAULT_RENYI_ORDERS = (0.5, 2.0)


def _validate_spectrum(spectrum: np.ndarray, sum_atol: float = 1e-8) -> np.ndarray:
    p = np.asarray(spectrum, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("spectrum must be a non-empty 1-D array")
    if p.min() < -SPECTRUM_NEG_ATOL:
        raise ValidationError(f"spectrum has negative entry {p.min():.3e}")
    if abs(p.sum() - 1.0) > sum_atol:
        raise ValidationError(f"spectrum sums to {p.sum():.10f}, expected 1")
    return np.clip(p, 0.0, None)


def von_neumann(spectrum: Sequence[float]) -> float:
    """Shannon entropy in bits of a probability spectrum, with 0 log 0 := 0."""
    p = _validate_spectrum(np.asarray(spectrum))
    nz = p[p > 0.0]
    return float(-(nz * np.log2(nz)).sum()) if nz.size else 0.0


def renyi(spectrum: Sequence[float], order: float) -> float:
    """Renyi entropy (1/(1-n)) log2 sum p^n in bits; order n > 0, n != 1."""
    if order <= 0 or order == 1:
        raise DomainError(f"Renyi order must be positive and != 1, got {order}")
    p = _validate_spectrum(np.asarray(spectrum))
    nz = p[p > 0.0]
    return float(np.log2((nz**order).sum()) / (1.0 - order))


@dataclass(frozen=True)
class SpectrumStats:
    """Index moments and the Chebyshev effective rank of one spectrum.

    chi_eff = mu + sigma / sqrt(epsilon); truncating at ceil(chi_eff) is
    guaranteed to discard weight at most epsilon.
    """

    mu: float
    sigma: float
    chi_eff: float
    epsilon: float
    entropy_vn: float
    renyi: dict[float, float] = field(default_factory=dict)


def effective_rank(spectrum: Sequence[float], epsilon: float = DEFAULT_EPSILON,
                   renyi_orders: Iterable[float] = DEFAULT_RENYI_ORDERS) -> SpectrumStats:
    """Mean index, index deviation, and chi_eff of a descending spectrum.

    The caller must supply the spectrum sorted in descending order (that is
    what makes the index a meaningful truncation variable).
    """
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    p = _validate_spectrum(np.asarray(spectrum))
    if np.any(np.diff(p) > SPECTRUM_NEG_ATOL):
        raise ValidationError("spectrum must be sorted in descending order")
    alpha = np.arange(1, p.size + 1, dtype=float)
    mu = float(alpha @ p)
    var = float((alpha * alpha) @ p - mu * mu)
    sigma = math.sqrt(max(var, 0.0))
    chi_eff = mu + sigma / math.sqrt(epsilon)
    ent = von_neumann(p)
    ren = {order: renyi(p, order) for order in renyi_orders}
    return SpectrumStats(mu=mu, sigma=sigma, chi_eff=chi_eff, epsilon=epsilon,
                         entropy_vn=ent, renyi=ren)


def spectrum_summary(spectrum: np.ndarray, epsilon: float) -> tuple[float, float]:
    """(entropy_bits, chi_eff) of a trusted descending spectrum; no validation.

    Fast path for the per-layer collection loop; semantics identical to
    :func:`von_neumann` + :func:`effective_rank`.
    """
    nz = spectrum[spectrum > 0.0]
    ent = float(-(nz * np.log2(nz)).sum()) if nz.size else 0.0
    alpha = np.arange(1, nz.size + 1, dtype=float)
    mu = float(alpha @ nz)
    var = float((alpha * alpha) @ nz - mu * mu)
    chi_eff = mu + math.sqrt(max(var, 0.0) / epsilon)
    return ent, chi_eff


def truncation_tail(spectrum: Sequence[float], chi_eff: float) -> float:
    """Discarded weight when keeping the first ceil(chi_eff) entries."""
    p = np.asarray(spectrum, dtype=float)
    keep = int(math.ceil(chi_eff))
    return float(p[keep:].sum()) if keep < p.size else 0.0


def central_bond_window(n: int, width: int = DEFAULT_BOND_WINDOW_WIDTH) -> list[int]:
    """1-based bond indices of the averaging window centered at floor(n/2)."""
    if n < 2:
        raise DomainError("need at least 2 qubits")
    w = min(n - 1, width)
    center = n // 2
    start = center - w // 2
    start = max(1, min(start, n - w))
    return list(range(start, start + w))


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _linear_histogram(values: np.ndarray, lo: float, hi: float,
                      bins: int = HISTOGRAM_BINS) -> Histogram:
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return Histogram(edges=edges, counts=counts)


def _log_histogram(values: np.ndarray, bins: int = HISTOGRAM_BINS) -> Histogram:
    lo = max(float(values.min()), 1.0)
    hi = max(float(values.max()), lo * (1.0 + 1e-9)) * (1.0 + 1e-9)
    edges = np.geomspace(lo, hi, bins + 1)
    counts, edges = np.histogram(values, bins=edges)
    return Histogram(edges=edges, counts=counts)


@dataclass
class EnsembleStats:
    """Aggregates of one (layer, strategy) sample set.

    Means and standard errors are taken over the trajectory x bond samples;
    angle histograms cover the canonical boxes [0, pi) and [-pi/2, pi/2).
    """

    layer: int
    strategy: str
    te_mean: float
    te_se: float
    chi_eff_mean: float
    chi_eff_se: float
    chi_eff_hist: Histogram
    theta_hist: Histogram | None
    phi_hist: Histogram | None
    trunc_max: float
    n_samples: int


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    m = float(values.mean())
    if values.size < 2:
        return m, 0.0
    return m, float(values.std(ddof=1) / math.sqrt(values.size))


def aggregate(
    entropies: np.ndarray,
    chi_effs: np.ndarray,
    layer: int = 0,
    strategy: str = "",
    thetas: np.ndarray | None = None,
    phis: np.ndarray | None = None,
    trunc_max: float = 0.0,
) -> EnsembleStats:
    """Reduce per-trajectory, per-bond samples into one EnsembleStats row.

    ``entropies`` and ``chi_effs`` have shape (n_trajectories, n_bonds);
    ``thetas``/``phis`` are flat arrays of adaptively chosen angles (absent
    for non-adaptive strategies).
    """
    ent = np.asarray(entropies, dtype=float)
    chi = np.asarray(chi_effs, dtype=float)
    if ent.size == 0 or chi.size == 0:
        raise DomainError("empty sample set")
    te_mean, te_se = _mean_se(ent.reshape(-1))
    chi_mean, chi_se = _mean_se(chi.reshape(-1))
    theta_hist = None
    phi_hist = None
    if thetas is not None and len(thetas):
        theta_hist = _linear_histogram(np.asarray(thetas, dtype=float), 0.0, math.pi)
    if phis is not None and len(phis):
        phi_hist = _linear_histogram(np.asarray(phis, dtype=float),
                                     -math.pi / 2, math.pi / 2)
    return EnsembleStats(
        layer=layer, strategy=strategy,
        te_mean=te_mean, te_se=te_se,
        chi_eff_mean=chi_mean, chi_eff_se=chi_se,
        chi_eff_hist=_log_histogram(chi.reshape(-1)),
        theta_hist=theta_hist, phi_hist=phi_hist,
        trunc_max=float(trunc_max), n_samples=int(ent.size),
    )


SERIES_HEADER = ("layer", "strategy", "te_mean", "te_se",
                 "chi_eff_mean", "chi_eff_se", "trunc_max")


def write_series_csv(path: str | Path, rows: Iterable[EnsembleStats]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_HEADER)
        for r in rows:
            writer.writerow([r.layer, r.strategy, repr(r.te_mean), repr(r.te_se),
                             repr(r.chi_eff_mean), repr(r.chi_eff_se),
                             repr(r.trunc_max)])


def write_histogram_csv(path: str | Path, hist: Histogram) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("value_bin_lo", "value_bin_hi", "count"))
        for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
            writer.writerow([repr(float(lo)), repr(float(hi)), int(c)])
