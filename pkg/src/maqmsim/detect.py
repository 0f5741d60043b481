"""Stochastic measurement layer: projective settings, coincidence counts, CSV.

Coincidences are herald-conditioned: probabilities are computed against the
unnormalized weighted amplitudes of a protocol run, so branch loss and
detection efficiency show up as missing counts rather than renormalized
statistics.  Sampling is binomial per setting on independent substreams, so
tables are reproducible and independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .protocol import TransferOutcome

__all__ = [
    "MeasurementSetting",
    "CountRow",
    "CountsTable",
    "tomography_settings",
    "w_settings",
    "coincidence_probability",
    "sample_counts",
    "counts_to_csv",
    "counts_from_csv",
    "CSV_HEADER",
]

CSV_HEADER = "label,heralds,coincidences"

BASIS_NORM_ATOL = 1e-9


@dataclass(frozen=True)
class MeasurementSetting:
    """Product projection: signal analyzer basis x atom analyzer basis."""

    label: str
    signal_basis: tuple
    atom_basis: tuple

    def __post_init__(self):
        object.__setattr__(self, "signal_basis", tuple(complex(c) for c in self.signal_basis))
        object.__setattr__(self, "atom_basis", tuple(complex(c) for c in self.atom_basis))
        for name, vec in (("signal_basis", self.signal_basis), ("atom_basis", self.atom_basis)):
            norm = np.linalg.norm(vec)
            if abs(norm - 1.0) > BASIS_NORM_ATOL:
                raise ValueError(f"{name} must be unit-norm, got |v| = {norm!r}")

    def signal_vector(self) -> np.ndarray:
        return np.asarray(self.signal_basis, dtype=complex)

    def atom_vector(self) -> np.ndarray:
        return np.asarray(self.atom_basis, dtype=complex)


@dataclass(frozen=True)
class CountRow:
    label: str
    heralds: int
    coincidences: int

    def __post_init__(self):
        if self.heralds < 0 or self.coincidences < 0:
            raise ValueError("counts must be non-negative")
        if self.coincidences > self.heralds:
            raise ValueError("coincidences cannot exceed heralds")


@dataclass(frozen=True)
class CountsTable:
    rows: tuple[CountRow, ...]
    shots_requested: int = 0
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    def row(self, label: str) -> CountRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def labels(self) -> tuple[str, ...]:
        return tuple(r.label for r in self.rows)


# single-qubit analyzer kets on the {upper, lower} mode pair
_KETS = {
    "U": (1.0, 0.0),
    "D": (0.0, 1.0),
    "S": (1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0)),
    "R": (1.0 / np.sqrt(2.0), -1.0j / np.sqrt(2.0)),
}
_KET_ORDER = "UDSR"


def tomography_settings(dimension: int = 2) -> tuple[MeasurementSetting, ...]:
    """The 16-projector two-qubit set, signal letter first in the label.

    {U, D, S, R} per side: populations, balanced superposition, and circular
    analyzers; informationally complete for a two-qubit state.
    """
    if dimension != 2:
        raise ValueError("tomography settings are defined for dimension 2 only")
    return tuple(
        MeasurementSetting(s + a, _KETS[s], _KETS[a])
        for s in _KET_ORDER for a in _KET_ORDER
    )


def w_settings(dimension: int = 4) -> tuple[MeasurementSetting, ...]:
    """Population plus pairwise-superposition settings for a W-state check.

    The signal photon is always analyzed in the balanced superposition of its
    branches; the memory side is projected onto each branch (labels ``Pi``)
    and onto (|i> +- |j>)/sqrt(2) for every pair (labels ``Cij+``/``Cij-``).
    """
    if dimension < 2:
        raise ValueError("need at least two branches")
    d = dimension
    uniform = tuple(np.full(d, 1.0 / np.sqrt(d), dtype=complex))
    out = []
    for i in range(d):
        atom = np.zeros(d, dtype=complex)
        atom[i] = 1.0
        out.append(MeasurementSetting(f"P{i}", uniform, tuple(atom)))
    for i in range(d):
        for j in range(i + 1, d):
            for sign, tag in ((1.0, "+"), (-1.0, "-")):
                atom = np.zeros(d, dtype=complex)
                atom[i] = 1.0 / np.sqrt(2.0)
                atom[j] = sign / np.sqrt(2.0)
                out.append(MeasurementSetting(f"C{i}{j}{tag}", uniform, tuple(atom)))
    return tuple(out)


def coincidence_probability(outcome: TransferOutcome, setting: MeasurementSetting,
                            eta_det: float) -> float:
    """Herald-conditioned probability of a signal/atom coincidence."""
    if not 0.0 < eta_det <= 1.0:
        raise ValueError("eta_det must be in (0, 1]")
    d = outcome.config.dimension
    s = setting.signal_vector()
    a = setting.atom_vector()
    if s.size != d or a.size != d:
        raise ValueError(f"setting vectors must have length {d}")
    # weighted state is diagonal in the branch pairing: sum_k v_k |s_k>|a_k>
    amp = np.sum(np.conj(s) * np.conj(a) * outcome.branch_amplitudes)
    return float(abs(amp) ** 2 * eta_det)


def sample_counts(outcome: TransferOutcome, settings, heralds_per_setting: int,
                  eta_det: float, dark_rate: float, seed: int) -> CountsTable:
    """Draw one coincidence table; row i uses substream (seed, i)."""
    if heralds_per_setting < 1:
        raise ValueError("heralds_per_setting must be at least 1")
    if dark_rate < 0:
        raise ValueError("dark_rate must be non-negative")
    rows = []
    for i, setting in enumerate(settings):
        p = coincidence_probability(outcome, setting, eta_det) + dark_rate
        if p > 1.0:
            raise ValueError(f"setting {setting.label!r}: probability {p!r} exceeds 1")
        rng = np.random.default_rng([seed, i])
        c = int(rng.binomial(heralds_per_setting, p))
        rows.append(CountRow(setting.label, heralds_per_setting, c))
    return CountsTable(tuple(rows), shots_requested=heralds_per_setting, seed=seed)


def counts_to_csv(table: CountsTable) -> str:
    lines = [CSV_HEADER]
    lines.extend(f"{r.label},{r.heralds},{r.coincidences}" for r in table.rows)
    return "\n".join(lines) + "\n"


def counts_from_csv(text: str) -> CountsTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"first line must be the header {CSV_HEADER!r}")
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"line {n}: expected 3 comma-separated fields")
        label, heralds, coincidences = parts
        try:
            rows.append(CountRow(label, int(heralds), int(coincidences)))
        except ValueError as err:
            raise ValueError(f"line {n}: {err}") from err
    return CountsTable(tuple(rows))
