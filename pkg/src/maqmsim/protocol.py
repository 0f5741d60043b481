"""Heralded pair generation and sequential time-bin transfer between memories.

The model follows the experiment's three stages.  A write pulse on the source
memory produces, conditioned on a herald click, an entangled state between the
signal photon's spatial mode and a spin wave,

    (1/sqrt(d)) sum_k e^{i theta_k} |s_k> |a_k>.

Read pulses then convert the spin-wave branches to photons one bin at a time;
bin i fires at t1 + i*tau and carries branch sigma(i), where sigma is the
retrieval order.  Each bin accumulates the read-laser phase alpha_i, and
storage in the target memory adds the coupling-laser phase -beta_i, so with a
common laser the two cancel bin by bin and only deliberate drift terms
survive.  Amplitudes pick up sqrt(efficiency * survival) factors at every
retrieval and storage step; the unnormalized weighted amplitudes therefore
carry the full per-branch transmission budget, and its squared norm is the
probability that the delivered excitation is still alive at verification
time, conditioned on the herald.

Nothing here is stochastic except ``herald_loop``; the rest is exact
bookkeeping so tests can pin numbers to closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .memory import CellAddress, MemorySpec, cell_efficiency, survival
from .qstate import ModeLabel, PureState, atom_mode, bin_mode, product_basis, signal_mode

__all__ = [
    "PhaseEntry",
    "PhaseLedger",
    "ProtocolConfig",
    "TransferOutcome",
    "WProjection",
    "PostSelectionError",
    "bin_time",
    "storage_dwell",
    "run_protocol",
    "project_w",
    "herald_loop",
]


class PostSelectionError(RuntimeError):
    """Raised when a projection conditions on an event of probability zero."""


@dataclass(frozen=True)
class PhaseEntry:
    """Laser phases seen by one time bin: read (alpha), coupling (beta), drift."""

    alpha: float
    beta: float
    drift: float = 0.0

    def net(self) -> float:
        return self.alpha - self.beta + self.drift


@dataclass(frozen=True)
class PhaseLedger:
    """Per-bin record of the phases imprinted during retrieval and storage."""

    entries: tuple[PhaseEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def bin_phase(self, i: int) -> float:
        return self.entries[i].net()

    @staticmethod
    def common(alphas, drifts=None) -> "PhaseLedger":
        """Ledger for a shared read/coupling laser: beta_i = alpha_i exactly."""
        alphas = list(alphas)
        if drifts is None:
            drifts = [0.0] * len(alphas)
        if len(drifts) != len(alphas):
            raise ValueError("need one drift entry per bin")
        return PhaseLedger(tuple(PhaseEntry(a, a, d) for a, d in zip(alphas, drifts)))

    @staticmethod
    def independent(alphas, betas, drifts=None) -> "PhaseLedger":
        alphas, betas = list(alphas), list(betas)
        if len(alphas) != len(betas):
            raise ValueError("alphas and betas must have equal length")
        if drifts is None:
            drifts = [0.0] * len(alphas)
        if len(drifts) != len(alphas):
            raise ValueError("need one drift entry per bin")
        return PhaseLedger(tuple(PhaseEntry(a, b, d) for a, b, d in zip(alphas, betas, drifts)))

    @staticmethod
    def zeros(n: int) -> "PhaseLedger":
        return PhaseLedger.common([0.0] * n)


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything needed to run one heralded transfer.

    ``source_cells`` and ``target_cells`` pair up branch by branch: branch k
    starts in source_cells[k] and, if transferred, ends in target_cells[k].
    ``retrieval_order`` maps bin index to branch index; identity by default.
    Times are microseconds.
    """

    dimension: int
    spec1: MemorySpec
    spec2: MemorySpec
    source_cells: tuple[CellAddress, ...]
    target_cells: tuple[CellAddress, ...]
    t1: float
    tau: float
    t2: float
    write_phases: tuple[float, ...] = ()
    ledger: PhaseLedger | None = None
    retrieval_order: tuple[int, ...] = ()

    def __post_init__(self):
        d = self.dimension
        if d < 2:
            raise ValueError("dimension must be at least 2")
        object.__setattr__(self, "source_cells", tuple(self.source_cells))
        object.__setattr__(self, "target_cells", tuple(self.target_cells))
        if len(self.source_cells) != d or len(self.target_cells) != d:
            raise ValueError("need exactly one source and one target cell per branch")
        if len(set(self.source_cells)) != d or len(set(self.target_cells)) != d:
            raise ValueError("cells must be distinct within each memory")
        for c in self.source_cells:
            self.spec1.require_cell(c)
        for c in self.target_cells:
            self.spec2.require_cell(c)
        if self.t1 <= 0 or self.tau <= 0:
            raise ValueError("t1 and tau must be positive")
        if self.t2 < 0:
            raise ValueError("t2 must be non-negative")
        phases = tuple(self.write_phases) if self.write_phases else (0.0,) * d
        if len(phases) != d:
            raise ValueError("need one write phase per branch")
        object.__setattr__(self, "write_phases", phases)
        ledger = self.ledger if self.ledger is not None else PhaseLedger.zeros(d)
        if len(ledger) < d:
            raise ValueError("phase ledger must cover every bin")
        object.__setattr__(self, "ledger", ledger)
        order = tuple(self.retrieval_order) if self.retrieval_order else tuple(range(d))
        if sorted(order) != list(range(d)):
            raise ValueError("retrieval_order must be a permutation of the bins")
        object.__setattr__(self, "retrieval_order", order)


def bin_time(config: ProtocolConfig, i: int) -> float:
    """Read time of bin i, measured from the heralded write."""
    return config.t1 + i * config.tau

def storage_dwell(config: ProtocolConfig, i: int) -> float:
    # bin i sits in the target memory from arrival until all bins are in
    # and the verification delay t2 has elapsed
    return (config.dimension - 1 - i) * config.tau + config.t2


@dataclass(frozen=True)
class TransferOutcome:
    """Result of one exact protocol run.

    ``weighted_amplitudes`` is aligned with ``ideal_state.basis`` and is not
    normalized: its squared norm is the herald-conditioned probability that
    the branch excitation survives to verification.  ``branch_amplitudes``
    holds the same numbers in branch order.
    """

    config: ProtocolConfig
    transfer: bool
    ideal_state: PureState
    weighted_amplitudes: np.ndarray
    signal_modes: tuple[ModeLabel, ...]
    output_modes: tuple[ModeLabel, ...]
    branch_amplitudes: np.ndarray
    herald_probability: float
    predicted_fidelity: float
    snapshots: tuple[tuple[str, PureState], ...] = field(repr=False, default=())

    @property
    def survival_probability(self) -> float:
        return float(np.sum(np.abs(self.weighted_amplitudes) ** 2))


def run_protocol(config: ProtocolConfig, transfer: bool = True) -> TransferOutcome:
    """Run the exact bookkeeping for one heralded write plus readout chain.

    With ``transfer`` false the run stops at the source memory: branches are
    read out on the same bin schedule and verified directly, with no storage
    leg and no coupling phase.  With it true every bin is stored in the
    paired target cell and the verification happens t2 after the last bin.
    """
    d = config.dimension
    signal = tuple(signal_mode(c) for c in config.source_cells)
    if transfer:
        output = tuple(atom_mode(c) for c in config.target_cells)
    else:
        output = tuple(atom_mode(c) for c in config.source_cells)

    # bin_of[k] = the bin that carries branch k
    bin_of = [0] * d
    for i, k in enumerate(config.retrieval_order):
        bin_of[k] = i

    branch = np.zeros(d, dtype=complex)
    for k in range(d):
        i = bin_of[k]
        t_read = bin_time(config, i)
        w = cell_efficiency(config.spec1, config.source_cells[k], "read")
        w *= survival(config.spec1, t_read)
        phase = config.write_phases[k]
        if transfer:
            w *= cell_efficiency(config.spec2, config.target_cells[k], "eit")
            w *= survival(config.spec2, storage_dwell(config, i))
            phase += config.ledger.bin_phase(i)
        branch[k] = np.sqrt(w) * np.exp(1j * phase) / np.sqrt(d)

    ideal = _pair_state(signal, output, config.write_phases)
    weighted = np.zeros(ideal.dimension, dtype=complex)
    for k in range(d):
        weighted[ideal.index_of((signal[k], output[k]))] = branch[k]

    norm_sq = float(np.sum(np.abs(branch) ** 2))
    if norm_sq > 0:
        predicted = float(abs(np.vdot(ideal.amplitudes, weighted)) ** 2 / norm_sq)
    else:
        predicted = 0.0

    eta_w = [cell_efficiency(config.spec1, c, "write") for c in config.source_cells]
    herald_p = float(np.mean(eta_w))

    snapshots = [("herald", _pair_state(signal, tuple(atom_mode(c) for c in config.source_cells),
                                        config.write_phases))]
    if norm_sq > 0:
        bins = tuple(bin_mode(bin_of[k]) for k in range(d))
        snapshots.append(("timebin", _normalized_pair(signal, bins, branch)))
        if transfer:
            snapshots.append(("stored", PureState(ideal.basis, weighted / np.sqrt(norm_sq))))

    return TransferOutcome(
        config=config,
        transfer=transfer,
        ideal_state=ideal,
        weighted_amplitudes=weighted,
        signal_modes=signal,
        output_modes=output,
        branch_amplitudes=branch,
        herald_probability=herald_p,
        predicted_fidelity=predicted,
        snapshots=tuple(snapshots),
    )


def _pair_state(signal, output, phases) -> PureState:
    d = len(signal)
    basis = product_basis(list(signal), list(output))
    amps = np.zeros(len(basis), dtype=complex)
    index = {el: i for i, el in enumerate(basis)}
    for k in range(d):
        amps[index[(signal[k], output[k])]] = np.exp(1j * phases[k]) / np.sqrt(d)
    return PureState(basis, amps)


def _normalized_pair(signal, partners, branch) -> PureState:
    basis = product_basis(list(signal), list(partners))
    amps = np.zeros(len(basis), dtype=complex)
    index = {el: i for i, el in enumerate(basis)}
    for k, (s, p) in enumerate(zip(signal, partners)):
        amps[index[(s, p)]] = branch[k]
    return PureState(basis, amps / np.linalg.norm(amps))


@dataclass(frozen=True)
class WProjection:
    state: PureState
    fidelity: float


def project_w(outcome: TransferOutcome) -> WProjection:
    """Collapse the pair onto a single-excitation state of the output modes.

    Detecting the heralded signal photon in the balanced superposition of its
    d spatial modes leaves the memory in sum_k v_k |k> up to normalization.
    The reported fidelity is the overlap with the uniform target, so branch
    loss shows up directly: one dead branch out of four gives 3/4.
    """
    d = outcome.config.dimension
    v = outcome.branch_amplitudes
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise PostSelectionError("every branch amplitude is zero; nothing to project on")
    state = PureState([(m,) for m in outcome.output_modes], v / norm)
    f = float(abs(np.sum(v / norm)) ** 2 / d)
    return WProjection(state=state, fidelity=f)


def herald_loop(p_signal: float, max_cycles: int, seed: int, runs: int = 1):
    """Sample how many write attempts precede the first herald.

    Returns ``(cycles, exhausted)``: attempt counts capped at ``max_cycles``
    and a flag per run marking the ones that hit the cap without a herald.
    """
    if not 0.0 < p_signal <= 1.0:
        raise ValueError("p_signal must be in (0, 1]")
    if max_cycles < 1:
        raise ValueError("max_cycles must be at least 1")
    if runs < 1:
        raise ValueError("runs must be at least 1")
    rng = np.random.default_rng([seed])
    raw = rng.geometric(p_signal, size=runs)
    exhausted = raw > max_cycles
    cycles = np.where(exhausted, max_cycles, raw).astype(np.int64)
    return cycles, exhausted
