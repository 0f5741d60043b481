"""Compilation of protocol timings into timed AOD/RF control events.

The compiler turns a :class:`~maqmsim.protocol.ProtocolConfig` into a flat
list of pulse events, one per control action, each carrying the RF tones for
the two AOD axes of the memory it drives.  Compilation never fails on timing
problems; instead every schedule carries a verdict, a list of violations with
severities, so a near-miss schedule can still be inspected.  Patterns the
crossed AODs physically cannot produce (cell weights that do not factor into
an x tone set times a y tone set) are the one hard error.

Timing lives on a 1 ns grid.  The emission format is JSON Lines, one line per
(event, axis), and parsing an emitted schedule and emitting it again
reproduces the bytes exactly.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .memory import CellAddress, MemorySpec
from .protocol import ProtocolConfig, bin_time

__all__ = [
    "Channel",
    "Tone",
    "PulseEvent",
    "Violation",
    "ScheduleConstraints",
    "Schedule",
    "WRITE_DURATION_US",
    "READ_DURATION_US",
    "COUPLING_DURATION_US",
    "FINAL_DURATION_US",
    "cell_to_rf",
    "superposition_rf",
    "compile_schedule",
    "validate_schedule",
    "derive_timings",
    "constraints_for_specs",
    "schedule_to_jsonl",
    "schedule_from_jsonl",
]

WRITE_DURATION_US = 0.1
READ_DURATION_US = 0.5
COUPLING_DURATION_US = 0.7
FINAL_DURATION_US = 1.0

FACTOR_RTOL = 1e-10     # relative second-singular-value bound for product patterns
WEIGHT_NORM_ATOL = 1e-9


class Channel(enum.Enum):
    """Control channels in their tie-break order at equal start times.

    ``aod_retune`` marks the window in which the deflectors move to the next
    bin's cell; it drives no light but occupies the switch time, so it is
    scheduled like any other event.
    """

    WRITE = "write"
    CLEAN = "clean"
    READ = "read"
    COUPLING = "coupling"
    AOD_RETUNE = "aod_retune"
    COUPLING_FINAL = "coupling_final"


_CHANNEL_RANK = {c: i for i, c in enumerate(Channel)}


def _snap(t: float) -> float:
    # 1 ns timing grid; also scrubs float-sum dust out of emitted times
    return round(t * 1e3) / 1e3


@dataclass(frozen=True)
class Tone:
    f_mhz: float
    amp: float
    phase_rad: float

    def __post_init__(self):
        if not 0.0 <= self.amp <= 1.0 + 1e-12:
            raise ValueError(f"tone amplitude must be in [0, 1], got {self.amp!r}")


@dataclass(frozen=True)
class PulseEvent:
    """One timed control action with its per-axis RF tones."""

    t_start_us: float
    duration_us: float
    channel: Channel
    x_tones: tuple[Tone, ...]
    y_tones: tuple[Tone, ...]

    def __post_init__(self):
        if self.t_start_us < 0:
            raise ValueError("event start must be non-negative")
        if self.duration_us <= 0:
            raise ValueError("event duration must be positive")
        object.__setattr__(self, "x_tones", tuple(self.x_tones))
        object.__setattr__(self, "y_tones", tuple(self.y_tones))

    @property
    def t_end_us(self) -> float:
        return self.t_start_us + self.duration_us


@dataclass(frozen=True)
class Violation:
    severity: str   # "error" or "warning"
    code: str
    message: str

    def __post_init__(self):
        if self.severity not in ("error", "warning"):
            raise ValueError("severity must be 'error' or 'warning'")


@dataclass(frozen=True)
class ScheduleConstraints:
    """Hardware limits a schedule is validated against.

    ``larmor_periods`` and ``memory_times`` are (source, target) pairs in
    microseconds; retrieval times must sit on the source memory's Larmor
    grid and storage verification on the target's.
    """

    larmor_periods: tuple[float, float]
    memory_times: tuple[float, float]
    aod_switch_time: float = 2.0
    min_guard: float = 0.05
    larmor_tolerance: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "larmor_periods", tuple(self.larmor_periods))
        object.__setattr__(self, "memory_times", tuple(self.memory_times))
        values = (*self.larmor_periods, *self.memory_times,
                  self.aod_switch_time, self.min_guard, self.larmor_tolerance)
        if len(self.larmor_periods) != 2 or len(self.memory_times) != 2:
            raise ValueError("larmor_periods and memory_times are (source, target) pairs")
        if any(v <= 0 for v in values):
            raise ValueError("all constraint values must be positive")


def constraints_for_specs(spec1: MemorySpec, spec2: MemorySpec,
                          aod_switch_time: float = 2.0,
                          min_guard: float = 0.05) -> ScheduleConstraints:
    return ScheduleConstraints(
        larmor_periods=(spec1.t_larmor, spec2.t_larmor),
        memory_times=(spec1.tau_mem, spec2.tau_mem),
        aod_switch_time=aod_switch_time,
        min_guard=min_guard,
    )


@dataclass(frozen=True)
class Schedule:
    """Time-ordered events plus the validation verdict attached at compile time."""

    events: tuple[PulseEvent, ...]
    violations: tuple[Violation, ...] = ()

    def __post_init__(self):
        ordered = sorted(self.events,
                         key=lambda e: (e.t_start_us, _CHANNEL_RANK[e.channel]))
        object.__setattr__(self, "events", tuple(ordered))
        object.__setattr__(self, "violations", tuple(self.violations))

    @property
    def valid(self) -> bool:
        return not any(v.severity == "error" for v in self.violations)

    def on_channel(self, channel: Channel) -> tuple[PulseEvent, ...]:
        return tuple(e for e in self.events if e.channel is channel)


def cell_to_rf(spec: MemorySpec, cell: CellAddress) -> tuple[float, float]:
    """RF tone pair (f_x, f_y) in MHz that steers both AOD axes onto a cell."""
    spec.require_cell(cell)
    return (spec.rf_grid.x_freq(cell.x), spec.rf_grid.y_freq(cell.y))


def superposition_rf(spec: MemorySpec, cells, weights):
    """Factor a weighted cell pattern into per-axis multi-tone settings.

    Crossed AODs produce the outer product of their tone patterns, so the
    requested complex weights, laid out on the (x, y) index grid, must have
    rank one.  Returns ``(x_tones, y_tones)``; each axis gets one tone per
    distinct frequency, unit total power per axis, and the global phase is
    fixed by making the strongest x tone real and positive.
    """
    cells = list(cells)
    weights = np.asarray(weights, dtype=complex)
    if len(cells) != weights.size or not cells:
        raise ValueError("need one weight per cell")
    if len(set(cells)) != len(cells):
        raise ValueError("cells must be distinct")
    for c in cells:
        spec.require_cell(c)
    norm_sq = float(np.sum(np.abs(weights) ** 2))
    if abs(norm_sq - 1.0) > WEIGHT_NORM_ATOL:
        raise ValueError(f"weights must be normalized, sum |w|^2 = {norm_sq!r}")

    xs = sorted({c.x for c in cells})
    ys = sorted({c.y for c in cells})
    grid = np.zeros((len(xs), len(ys)), dtype=complex)
    xi = {x: i for i, x in enumerate(xs)}
    yi = {y: j for j, y in enumerate(ys)}
    for c, w in zip(cells, weights):
        grid[xi[c.x], yi[c.y]] = w

    if len(xs) == 1:
        u, v = np.ones(1, dtype=complex), grid[0, :].copy()
    elif len(ys) == 1:
        u, v = grid[:, 0].copy(), np.ones(1, dtype=complex)
    else:
        svals = np.linalg.svd(grid, compute_uv=False)
        if svals[1] > FACTOR_RTOL * svals[0]:
            raise ValueError(
                "cell weights do not factor into independent x and y tone patterns; "
                "crossed deflectors cannot produce this superposition"
            )
        umat, svals, vh = np.linalg.svd(grid)
        u = umat[:, 0]
        v = svals[0] * vh[0, :]

    # global phase onto the y axis: strongest x tone real positive
    j = int(np.argmax(np.abs(u)))
    ph = u[j] / abs(u[j])
    u = u * np.conj(ph)
    v = v * ph

    x_tones = tuple(Tone(spec.rf_grid.x_freq(x), float(abs(a)), float(np.angle(a)))
                    for x, a in zip(xs, u) if abs(a) > 1e-12)
    y_tones = tuple(Tone(spec.rf_grid.y_freq(y), float(abs(a)), float(np.angle(a)))
                    for y, a in zip(ys, v) if abs(a) > 1e-12)
    return x_tones, y_tones


def _single_cell_tones(spec, cell):
    fx, fy = cell_to_rf(spec, cell)
    return (Tone(fx, 1.0, 0.0),), (Tone(fy, 1.0, 0.0),)


def compile_schedule(config: ProtocolConfig,
                     constraints: ScheduleConstraints) -> Schedule:
    """Compile one heralded write plus readout chain into timed events.

    The write pulse fires at t = 0 carrying the source superposition.  Each
    bin i pairs a read pulse on the source memory with a storage (coupling)
    pulse on the target, both starting at t1 + i*tau; the deflectors retune
    to the next cell in the gap after each read.  The retune window tracks
    the read-side deflectors; the target-side pair moves in the same window.
    A final coupling pulse t2 after the last bin reads the stored
    superposition back out.  The returned schedule carries the verdict from
    :func:`validate_schedule`; violations never abort compilation.
    """
    d = config.dimension
    spec1, spec2 = config.spec1, config.spec2
    order = config.retrieval_order
    write_weights = np.exp(1j * np.asarray(config.write_phases)) / np.sqrt(d)

    events = [PulseEvent(0.0, WRITE_DURATION_US, Channel.WRITE,
                         *superposition_rf(spec1, config.source_cells, write_weights))]
    for i in range(d):
        t_i = _snap(bin_time(config, i))
        src = config.source_cells[order[i]]
        tgt = config.target_cells[order[i]]
        events.append(PulseEvent(t_i, READ_DURATION_US, Channel.READ,
                                 *_single_cell_tones(spec1, src)))
        events.append(PulseEvent(t_i, COUPLING_DURATION_US, Channel.COUPLING,
                                 *_single_cell_tones(spec2, tgt)))
        if i + 1 < d:
            nxt = config.source_cells[order[i + 1]]
            events.append(PulseEvent(_snap(t_i + READ_DURATION_US),
                                     constraints.aod_switch_time, Channel.AOD_RETUNE,
                                     *_single_cell_tones(spec1, nxt)))
    t_final = _snap(bin_time(config, d - 1) + config.t2)
    final_weights = np.full(d, 1.0 / np.sqrt(d), dtype=complex)
    events.append(PulseEvent(t_final, FINAL_DURATION_US, Channel.COUPLING_FINAL,
                             *superposition_rf(spec2, config.target_cells, final_weights)))

    schedule = Schedule(tuple(events))
    return Schedule(schedule.events, validate_schedule(schedule, constraints))


def derive_timings(schedule: Schedule) -> tuple[float, float, float]:
    """Recover (t1, tau, t2) from a schedule's read and final-readout events."""
    reads = schedule.on_channel(Channel.READ)
    finals = schedule.on_channel(Channel.COUPLING_FINAL)
    if len(reads) < 2 or not finals:
        raise ValueError("schedule needs at least two read events and a final readout")
    writes = schedule.on_channel(Channel.WRITE)
    origin = writes[0].t_start_us if writes else 0.0
    times = [e.t_start_us for e in reads]
    t1 = times[0] - origin
    tau = times[1] - times[0]
    t2 = finals[0].t_start_us - times[-1]
    return t1, tau, t2


def _off_grid(t: float, period: float, tol: float) -> bool:
    ratio = t / period
    return abs(ratio - round(ratio)) > tol


def validate_schedule(schedule: Schedule,
                      constraints: ScheduleConstraints) -> tuple[Violation, ...]:
    """Check a schedule against hardware timing constraints.

    Timings are re-derived from the events themselves rather than trusted
    from whatever produced them.  Checks: retrieval times on the source
    Larmor grid, verification delay on the target grid, inter-bin gaps long
    enough to retune, source dwell against the memory time (warning past
    1x, error past 2x), and per-channel overlap and guard spacing.
    """
    out: list[Violation] = []
    t_l1, t_l2 = constraints.larmor_periods
    tol = constraints.larmor_tolerance

    writes = schedule.on_channel(Channel.WRITE)
    origin = writes[0].t_start_us if writes else 0.0
    reads = schedule.on_channel(Channel.READ)
    finals = schedule.on_channel(Channel.COUPLING_FINAL)

    if reads:
        t1 = reads[0].t_start_us - origin
        if _off_grid(t1, t_l1, tol):
            out.append(Violation("error", "larmor_t1",
                                 f"first retrieval at {t1:g} us is off the source "
                                 f"Larmor grid ({t_l1:g} us)"))
        for a, b in zip(reads, reads[1:]):
            gap = b.t_start_us - a.t_start_us
            if _off_grid(gap, t_l1, tol):
                out.append(Violation("error", "larmor_tau",
                                     f"bin spacing {gap:g} us is off the source "
                                     f"Larmor grid ({t_l1:g} us)"))
            floor = constraints.aod_switch_time + a.duration_us
            if gap < floor - 1e-9:
                out.append(Violation("error", "bin_gap",
                                     f"bin spacing {gap:g} us is below the retune floor "
                                     f"{floor:g} us (switch {constraints.aod_switch_time:g} "
                                     f"+ read {a.duration_us:g})"))
        if finals:
            t2 = finals[0].t_start_us - reads[-1].t_start_us
            if _off_grid(t2, t_l2, tol):
                out.append(Violation("error", "larmor_t2",
                                     f"verification delay {t2:g} us is off the target "
                                     f"Larmor grid ({t_l2:g} us)"))
        dwell = reads[-1].t_start_us - origin
        mem1 = constraints.memory_times[0]
        if dwell > 2.0 * mem1:
            out.append(Violation("error", "dwell",
                                 f"last bin dwells {dwell:g} us in the source memory, "
                                 f"over twice the memory time {mem1:g} us"))
        elif dwell > mem1:
            out.append(Violation("warning", "dwell",
                                 f"last bin dwells {dwell:g} us in the source memory, "
                                 f"past the memory time {mem1:g} us"))

    for channel in Channel:
        on = schedule.on_channel(channel)
        for a, b in zip(on, on[1:]):
            if b.t_start_us < a.t_end_us - 1e-9:
                out.append(Violation("error", "overlap",
                                     f"{channel.value} events at {a.t_start_us:g} and "
                                     f"{b.t_start_us:g} us overlap"))
            elif b.t_start_us < a.t_end_us + constraints.min_guard - 1e-9:
                out.append(Violation("error", "guard",
                                     f"{channel.value} events at {a.t_start_us:g} and "
                                     f"{b.t_start_us:g} us are closer than the "
                                     f"{constraints.min_guard:g} us guard"))
    return tuple(out)


def _tone_doc(tone: Tone) -> dict:
    return {"f_mhz": tone.f_mhz, "amp": tone.amp, "phase_rad": tone.phase_rad}


def schedule_to_jsonl(schedule: Schedule) -> str:
    """One JSON line per (event, axis), x before y, trailing newline."""
    lines = []
    for e in schedule.events:
        for axis, tones in (("x", e.x_tones), ("y", e.y_tones)):
            if not tones:
                continue
            lines.append(json.dumps({
                "t_start_us": e.t_start_us,
                "duration_us": e.duration_us,
                "channel": e.channel.value,
                "axis": axis,
                "tones": [_tone_doc(t) for t in tones],
            }))
    return "\n".join(lines) + "\n"


def schedule_from_jsonl(text: str) -> Schedule:
    """Parse emitted lines back into a schedule; the verdict is not serialized."""
    partial: dict[tuple, dict] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as err:
            raise ValueError(f"line {n}: not valid JSON ({err.msg})") from err
        try:
            key = (doc["t_start_us"], doc["duration_us"], doc["channel"])
            axis = doc["axis"]
            tones = tuple(Tone(t["f_mhz"], t["amp"], t["phase_rad"]) for t in doc["tones"])
        except KeyError as err:
            raise ValueError(f"line {n}: missing field {err.args[0]!r}") from err
        if axis not in ("x", "y"):
            raise ValueError(f"line {n}: axis must be 'x' or 'y'")
        slot = partial.setdefault(key, {"x": (), "y": ()})
        if slot[axis]:
            raise ValueError(f"line {n}: duplicate {axis} axis for event at "
                             f"t={key[0]!r} on channel {key[2]!r}")
        slot[axis] = tones
    events = [PulseEvent(t, dur, Channel(ch), axes["x"], axes["y"])
              for (t, dur, ch), axes in partial.items()]
    return Schedule(tuple(events))
