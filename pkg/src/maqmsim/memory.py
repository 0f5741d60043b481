"""Phenomenological model of one multiplexed atomic quantum memory (MAQM).

A MAQM is a cold-atom cloud partitioned into an n_x x n_y grid of
micro-ensemble cells, each individually addressable through a pair of
crossed AODs.  This module owns the per-cell bookkeeping:

* efficiency maps for the write (herald), read (retrieval) and EIT
  (storage-retrieval) stages,
* the storage-time survival model
  ``exp(-(t/tau_mem)^2) * cos^2(pi t / t_larmor)`` -- a Gaussian motional
  envelope modulated by Larmor precession with a full revival every period,
* the RF frequency grid that maps a cell index to AOD tone frequencies,
* a nearest-neighbour crosstalk splitting rule.

The envelope is a model choice (the underlying experiments quote only a
memory-time scalar); swap in an exponential by subclassing if needed.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MemoryId",
    "CellAddress",
    "RfGrid",
    "MemorySpec",
    "EfficiencyRecord",
    "ProbeResult",
    "survival",
    "cell_efficiency",
    "retrieval_record",
    "eit_efficiency_probe",
    "crosstalk_map",
    "default_efficiency_map",
    "load_memory_spec",
    "memory_spec_from_dict",
    "memory_spec_to_dict",
]


class MemoryId(enum.Enum):
    """Identity of one of the two memories in a transfer link."""

    MAQM1 = "MAQM1"
    MAQM2 = "MAQM2"


@dataclass(frozen=True)
class CellAddress:
    """One micro-ensemble cell: (memory, column x, row y), 0-based."""

    memory: MemoryId
    x: int
    y: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"cell indices must be non-negative, got ({self.x}, {self.y})")

    def sort_key(self) -> tuple:
        return (self.memory.value, self.x, self.y)


@dataclass(frozen=True)
class RfGrid:
    """Per-axis AOD frequency ramp: f(index) = origin + step * index, MHz."""

    x_origin: float
    x_step: float
    y_origin: float
    y_step: float

    def __post_init__(self):
        if self.x_step <= 0 or self.y_step <= 0:
            raise ValueError("rf_grid steps must be positive")

    def x_freq(self, index: int) -> float:
        return self.x_origin + self.x_step * index

    def y_freq(self, index: int) -> float:
        return self.y_origin + self.y_step * index


def _as_map(values, n_x: int, n_y: int, name: str) -> np.ndarray:
    """Coerce a scalar or row-major flat array into an (n_y, n_x) map in [0,1]."""
    if np.isscalar(values):
        arr = np.full((n_y, n_x), float(values))
    else:
        arr = np.asarray(values, dtype=float)
        if arr.size != n_x * n_y:
            raise ValueError(f"{name}: expected {n_x * n_y} entries, got {arr.size}")
        arr = arr.reshape(n_y, n_x)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError(f"{name}: efficiencies must lie in [0, 1]")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MemorySpec:
    """Static description of one memory: grid, efficiencies, decay, RF map.

    Efficiency maps are stored as read-only (n_y, n_x) arrays; flat inputs
    are interpreted row-major (index = y * n_x + x).  ``eta_eit`` is only
    meaningful for the receiving memory and may be None.
    """

    memory: MemoryId
    n_x: int
    n_y: int
    eta_write: np.ndarray
    eta_read: np.ndarray
    tau_mem: float
    t_larmor: float
    rf_grid: RfGrid
    eta_eit: np.ndarray | None = None
    crosstalk_eps: float = 0.0

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("grid sizes must be >= 1")
        if not self.tau_mem > 0:
            raise ValueError("tau_mem must be positive")
        if not self.t_larmor > 0:
            raise ValueError("t_larmor must be positive")
        if not 0.0 <= self.crosstalk_eps < 0.5:
            raise ValueError("crosstalk_eps must lie in [0, 0.5)")
        object.__setattr__(self, "eta_write", _as_map(self.eta_write, self.n_x, self.n_y, "eta_write"))
        object.__setattr__(self, "eta_read", _as_map(self.eta_read, self.n_x, self.n_y, "eta_read"))
        if self.eta_eit is not None:
            object.__setattr__(self, "eta_eit", _as_map(self.eta_eit, self.n_x, self.n_y, "eta_eit"))

    def contains(self, cell: CellAddress) -> bool:
        return 0 <= cell.x < self.n_x and 0 <= cell.y < self.n_y

    def require_cell(self, cell: CellAddress) -> None:
        if cell.memory is not self.memory:
            raise ValueError(f"cell belongs to {cell.memory.value}, spec is {self.memory.value}")
        if not self.contains(cell):
            raise ValueError(
                f"cell ({cell.x}, {cell.y}) outside {self.n_x}x{self.n_y} grid of {self.memory.value}"
            )


@dataclass(frozen=True)
class EfficiencyRecord:
    """Retrieval bookkeeping for one cell: efficiency x survival after t_stored."""

    cell: CellAddress
    t_stored: float
    survival: float

    def __post_init__(self):
        if self.survival > 1.0 or self.survival < 0.0:
            raise ValueError("survival must lie in [0, 1]")


@dataclass(frozen=True)
class ProbeResult:
    """Efficiency estimate with a binomial standard error."""

    estimate: float
    stderr: float


def survival(spec: MemorySpec, t: float) -> float:
    """Survival probability of a spin wave stored for ``t`` microseconds.

    Gaussian envelope times Larmor modulation:
    ``exp(-(t/tau_mem)^2) * cos^2(pi t / t_larmor)``.  At integer multiples
    of the Larmor period the modulation revives fully and only the envelope
    remains.

    Parameters
    ----------
    spec : MemorySpec
    t : float
        Storage duration in microseconds, must be >= 0.
    """
    if t < 0:
        raise ValueError(f"storage time must be non-negative, got {t}")
    envelope = np.exp(-((t / spec.tau_mem) ** 2))
    modulation = np.cos(np.pi * t / spec.t_larmor) ** 2
    return float(envelope * modulation)


_STAGES = {"read": "eta_read", "eit": "eta_eit", "write": "eta_write"}


def cell_efficiency(spec: MemorySpec, cell: CellAddress, stage: str) -> float:
    """Configured efficiency of ``cell`` for one stage ('write', 'read' or 'eit')."""
    spec.require_cell(cell)
    try:
        attr = _STAGES[stage]
    except KeyError:
        raise ValueError(f"unknown stage {stage!r}, expected one of {sorted(_STAGES)}") from None
    table = getattr(spec, attr)
    if table is None:
        raise ValueError(f"{spec.memory.value} has no {stage} efficiency map configured")
    return float(table[cell.y, cell.x])


def retrieval_record(spec: MemorySpec, cell: CellAddress, stage: str, t: float) -> EfficiencyRecord:
    """Total retrieval probability for a stored excitation: efficiency x survival(t)."""
    eta = cell_efficiency(spec, cell, stage)
    return EfficiencyRecord(cell=cell, t_stored=t, survival=eta * survival(spec, t))


def eit_efficiency_probe(
    spec: MemorySpec,
    cell: CellAddress,
    mean_photon_number: float,
    shots: int,
    seed: int,
    t_store: float = 0.0,
) -> ProbeResult:
    """Estimate a cell's storage-retrieval efficiency with a weak coherent probe.

    Each shot sends a pulse with Poisson-distributed photon number (mean
    ``mean_photon_number``); every photon independently survives storage with
    probability ``eta_eit(cell) * survival(t_store)``.  The estimate is the
    detected fraction of the photons actually sent, with a binomial standard
    error.  Deterministic for a fixed seed.
    """
    if mean_photon_number <= 0:
        raise ValueError("mean_photon_number must be positive")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    q = cell_efficiency(spec, cell, "eit") * survival(spec, t_store)
    rng = np.random.default_rng([seed])
    n_in = rng.poisson(mean_photon_number, size=shots)
    total_in = int(n_in.sum())
    if total_in == 0:
        return ProbeResult(estimate=0.0, stderr=0.0)
    detected = int(rng.binomial(n_in, q).sum())
    p_hat = detected / total_in
    stderr = float(np.sqrt(p_hat * (1.0 - p_hat) / total_in))
    return ProbeResult(estimate=p_hat, stderr=stderr)


def crosstalk_map(spec: MemorySpec, target: CellAddress) -> list[tuple[CellAddress, float]]:
    """Leakage weights when addressing ``target``: 1-eps on it, eps split over 4-neighbours.

    Weights always sum to 1; neighbours outside the grid receive nothing and
    the in-grid neighbours absorb their share.
    """
    spec.require_cell(target)
    eps = spec.crosstalk_eps
    if eps == 0.0:
        return [(target, 1.0)]
    neighbours = [
        CellAddress(target.memory, target.x + dx, target.y + dy)
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
        if 0 <= target.x + dx < spec.n_x and 0 <= target.y + dy < spec.n_y
    ]
    out = [(target, 1.0 - eps)]
    out.extend((nbr, eps / len(neighbours)) for nbr in neighbours)
    return out


def default_efficiency_map(n_x: int, n_y: int, seed: int = 7, low: float = 0.10, high: float = 0.30) -> np.ndarray:
    """Default per-cell efficiency map: uniform draw from [low, high), fixed seed."""
    rng = np.random.default_rng([seed])
    return rng.uniform(low, high, size=(n_y, n_x))


def memory_spec_from_dict(doc: dict) -> MemorySpec:
    """Build a MemorySpec from a JSON-style dict (maps row-major, length n_x*n_y)."""
    try:
        memory = MemoryId(doc["memory"])
        grid = doc["rf_grid"]
        return MemorySpec(
            memory=memory,
            n_x=int(doc["n_x"]),
            n_y=int(doc["n_y"]),
            eta_write=doc["eta_write"],
            eta_read=doc["eta_read"],
            eta_eit=doc.get("eta_eit"),
            tau_mem=float(doc["tau_mem"]),
            t_larmor=float(doc["t_larmor"]),
            rf_grid=RfGrid(
                x_origin=float(grid["x_origin"]),
                x_step=float(grid["x_step"]),
                y_origin=float(grid["y_origin"]),
                y_step=float(grid["y_step"]),
            ),
            crosstalk_eps=float(doc.get("crosstalk_eps", 0.0)),
        )
    except KeyError as exc:
        raise ValueError(f"memory config missing field {exc.args[0]!r}") from None


def memory_spec_to_dict(spec: MemorySpec) -> dict:
    """Inverse of memory_spec_from_dict; maps emitted row-major."""
    doc = {
        "memory": spec.memory.value,
        "n_x": spec.n_x,
        "n_y": spec.n_y,
        "eta_write": [float(v) for v in spec.eta_write.ravel()],
        "eta_read": [float(v) for v in spec.eta_read.ravel()],
        "tau_mem": spec.tau_mem,
        "t_larmor": spec.t_larmor,
        "rf_grid": {
            "x_origin": spec.rf_grid.x_origin,
            "x_step": spec.rf_grid.x_step,
            "y_origin": spec.rf_grid.y_origin,
            "y_step": spec.rf_grid.y_step,
        },
        "crosstalk_eps": spec.crosstalk_eps,
    }
    if spec.eta_eit is not None:
        doc["eta_eit"] = [float(v) for v in spec.eta_eit.ravel()]
    return doc


def load_memory_spec(path) -> MemorySpec:
    """Load a MemorySpec from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return memory_spec_from_dict(json.load(fh))
