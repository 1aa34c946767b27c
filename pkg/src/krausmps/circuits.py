"""Seeded brickwork circuits of Haar-random two-qubit gates.

Odd layers (1, 3, ...) couple pairs (1,2), (3,4), ...; even layers couple
(2,3), (4,5), ....  A single-qubit noise channel on every qubit follows each
gate layer (the noise itself lives in the runner; the plan only fixes the
gates).  Plans regenerate bit-identically from (n, layers, seed): the gate
RNG stream is derived from the seed alone and is separate from all
trajectory-outcome streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DomainError, ValidationError

GATE_ATOL = 1e-12
_CIRCUIT_STREAM = 0


@dataclass(frozen=True)
class CircuitPlan:
    """Immutable gate schedule: layers of (site, 4x4 unitary) pairs."""

    n: int
    n_layers: int
    seed: int
    layers: tuple[tuple[tuple[int, np.ndarray], ...], ...]

    def __post_init__(self) -> None:
        for layer in self.layers:
            seen: set[int] = set()
            for site, gate in layer:
                if not 1 <= site <= self.n - 1:
                    raise DomainError(f"gate site {site} out of range")
                if seen & {site, site + 1}:
                    raise ValidationError("gates within a layer overlap")
                seen.update((site, site + 1))
                if not np.allclose(gate.conj().T @ gate, np.eye(4), atol=GATE_ATOL):
                    raise ValidationError(f"gate at site {site} is not unitary")


def layer_pair_sites(n: int, layer: int) -> list[int]:
    """Left sites of the pairs coupled in a (1-based) layer."""
    first = 1 if layer % 2 == 1 else 2
    return list(range(first, n, 2))


def sample_haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The R-factor diagonal phases are divided out, which makes the QR
    decomposition unique and the resulting Q exactly Haar.
    """
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    z /= np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def circuit_rng(seed: int, instance: int = 0) -> np.random.Generator:
    """Counter-based gate stream; independent of all trajectory streams."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_CIRCUIT_STREAM, instance))
    return np.random.Generator(np.random.Philox(ss))


def brickwork(n: int, n_layers: int, seed: int, instance: int = 0) -> CircuitPlan:
    """Deterministic brickwork plan of Haar-random two-qubit gates."""
    if n < 2:
        raise DomainError(f"need at least 2 qubits, got {n}")
    if n_layers < 1:
        raise DomainError(f"need at least 1 layer, got {n_layers}")
    rng = circuit_rng(seed, instance)
    layers = []
    for layer in range(1, n_layers + 1):
        gates = []
        for site in layer_pair_sites(n, layer):
            u = sample_haar_unitary(4, rng)
            u.flags.writeable = False
            gates.append((site, u))
        layers.append(tuple(gates))
    return CircuitPlan(n=n, n_layers=n_layers, seed=seed, layers=tuple(layers))


def _gate_to_json(gate: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in gate]


def _gate_from_json(data: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])


def plan_to_json(plan: CircuitPlan) -> str:
    doc = {
        "n": plan.n,
        "n_layers": plan.n_layers,
        "seed": plan.seed,
        "parity": "odd-layers-couple-(1,2)(3,4)...",
        "layers": [
            [{"site": site, "matrix": _gate_to_json(gate)} for site, gate in layer]
            for layer in plan.layers
        ],
    }
    return json.dumps(doc, indent=1)


def plan_from_json(text: str) -> CircuitPlan:
    doc = json.loads(text)
    layers = tuple(
        tuple((entry["site"], _gate_from_json(entry["matrix"])) for entry in layer)
        for layer in doc["layers"]
    )
    return CircuitPlan(n=doc["n"], n_layers=doc["n_layers"], seed=doc["seed"],
                       layers=layers)


def dump_plan(plan: CircuitPlan, path: str | Path) -> None:
    Path(path).write_text(plan_to_json(plan))
