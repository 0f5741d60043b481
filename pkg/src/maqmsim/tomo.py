"""Density-matrix and W-state fidelity estimation from coincidence tables.

Reconstruction happens on a fixed logical two-qubit basis (signal branch x
time-bin branch), so states estimated before and after a transfer can be
compared directly.  Two estimators are provided: plain linear inversion,
which can return a non-physical matrix, and a maximum-likelihood fit over
the Cholesky-like parameterization rho = T T^dag / tr(T T^dag), which is
physical by construction.

The likelihood treats each setting's coincidence count as an independent
Poisson draw with a shared unknown rate scale; the scale is profiled out
analytically, leaving

    l(T) = sum_s c_s ln q_s - C ln Q,   q_s = tr(T T^dag P_s),
    Q = sum_s N_s q_s,                  C = sum_s c_s,

maximized with an analytic gradient.  The recorded likelihood trace is
checked to be non-decreasing across accepted steps; a violation means the
optimizer misbehaved and raises immediately rather than returning a bad fit.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .detect import CountsTable, MeasurementSetting, tomography_settings
from .qstate import DensityMatrix, ModeKind, ModeLabel, PureState, fidelity, product_basis

__all__ = [
    "ReconstructionResult",
    "FidelityEstimate",
    "WFidelityData",
    "logical_basis",
    "bell_target",
    "linear_inversion",
    "mle_reconstruct",
    "monte_carlo_fidelity",
    "w_fidelity",
    "w_data_from_counts",
    "w_data_from_density",
    "monte_carlo_w_fidelity",
]

Q_FLOOR = 1e-14         # keeps logs finite when a projector is exactly dark
TRACE_RTOL = 1e-9       # likelihood monotonicity slack, relative to |l|


def logical_basis(dimension: int = 2):
    """Shared reconstruction basis: signal branches x time-bin branches."""
    signal = [ModeLabel(ModeKind.SIGNAL, k) for k in range(dimension)]
    bins = [ModeLabel(ModeKind.TIMEBIN, k) for k in range(dimension)]
    return product_basis(signal, bins)


def bell_target(relative_phase: float = 0.0) -> PureState:
    """(|00> + e^{i phi} |11>)/sqrt(2) on the logical basis."""
    amps = np.zeros(4, dtype=complex)
    amps[0] = 1.0 / np.sqrt(2.0)
    amps[3] = np.exp(1j * relative_phase) / np.sqrt(2.0)
    return PureState(logical_basis(2), amps)


@dataclass(frozen=True)
class ReconstructionResult:
    rho: DensityMatrix
    log_likelihood: float
    iterations: int
    converged: bool
    likelihood_trace: tuple[float, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho.to_json_dict(),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    sigma: float
    n_resamples: int
    n_failed: int = 0
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("fidelity value must lie in [0, 1]")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError("sigma must be finite and non-negative")

    def to_json_dict(self) -> dict:
        return {"value": self.value, "sigma": self.sigma, "n_resamples": self.n_resamples}


def _projector(setting: MeasurementSetting) -> np.ndarray:
    ket = np.kron(setting.signal_vector(), setting.atom_vector())
    return np.outer(ket, ket.conj())


def _aligned_projectors(counts: CountsTable, settings):
    if settings is None:
        settings = tomography_settings(2)
    table = {s.label: s for s in settings}
    projectors, observed, exposures = [], [], []
    for row in counts.rows:
        if row.label not in table:
            raise ValueError(f"no measurement setting named {row.label!r}")
        projectors.append(_projector(table[row.label]))
        observed.append(row.coincidences)
        exposures.append(row.heralds)
    return (np.array(projectors), np.asarray(observed, dtype=float),
            np.asarray(exposures, dtype=float))


def linear_inversion(counts: CountsTable, settings=None) -> np.ndarray:
    """Solve the measurement linear system; the result may be non-physical.

    Frequencies are fit to tr(A P_s) over Hermitian A by least squares in a
    real operator basis, then A is trace-normalized.  Detection efficiency
    only rescales A, so it drops out in the normalization.  Raises when the
    setting set is not informationally complete.
    """
    projectors, observed, exposures = _aligned_projectors(counts, settings)
    if (exposures <= 0).any():
        raise ValueError("every row needs at least one herald")
    d = projectors.shape[1]
    ops = _hermitian_basis(d)
    design = np.array([[np.trace(p @ b).real for b in ops] for p in projectors])
    rank = np.linalg.matrix_rank(design)
    if rank < d * d:
        raise ValueError(f"setting set is not informationally complete "
                         f"(design rank {rank} < {d * d})")
    freq = observed / exposures
    coef, *_ = np.linalg.lstsq(design, freq, rcond=None)
    mat = np.tensordot(coef, ops, axes=1)
    trace = np.trace(mat).real
    if abs(trace) < 1e-12:
        raise ValueError("reconstructed matrix has vanishing trace")
    return mat / trace


def _hermitian_basis(d: int):
    ops = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        ops.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[i, j] = s[j, i] = 1.0 / np.sqrt(2.0)
            ops.append(s)
            a = np.zeros((d, d), dtype=complex)
            a[i, j] = -1.0j / np.sqrt(2.0)
            a[j, i] = 1.0j / np.sqrt(2.0)
            ops.append(a)
    return ops


def _pack(t_mat: np.ndarray) -> np.ndarray:
    d = t_mat.shape[0]
    parts = [t_mat.diagonal().real]
    lower = [(t_mat[i, j].real, t_mat[i, j].imag)
             for i in range(d) for j in range(i)]
    if lower:
        parts.append(np.concatenate([np.array(p) for p in lower]))
    return np.concatenate(parts)


def _unpack(x: np.ndarray, d: int) -> np.ndarray:
    t_mat = np.zeros((d, d), dtype=complex)
    t_mat[np.diag_indices(d)] = x[:d]
    pos = d
    for i in range(d):
        for j in range(i):
            t_mat[i, j] = x[pos] + 1j * x[pos + 1]
            pos += 2
    return t_mat


def _grad_pack(m_mat: np.ndarray) -> np.ndarray:
    d = m_mat.shape[0]
    parts = [2.0 * m_mat.diagonal().real]
    lower = []
    for i in range(d):
        for j in range(i):
            lower.extend((2.0 * m_mat[i, j].real, 2.0 * m_mat[i, j].imag))
    if lower:
        parts.append(np.array(lower))
    return np.concatenate(parts)


def _fit_mle(projectors, observed, exposures, init_rho, tol, max_iter):
    d = projectors.shape[1]
    c_total = float(observed.sum())
    s_op = np.tensordot(exposures, projectors, axes=1)

    def split(x):
        t_mat = _unpack(x, d)
        a_mat = t_mat @ t_mat.conj().T
        q = np.einsum("sij,ji->s", projectors, a_mat).real
        return t_mat, a_mat, q

    def neg_ll(x):
        _, a_mat, q = split(x)
        q = np.clip(q, Q_FLOOR, None)
        big_q = max(float(np.einsum("ij,ji->", s_op, a_mat).real), Q_FLOOR)
        return -(float(observed @ np.log(q)) - c_total * np.log(big_q))

    def neg_grad(x):
        t_mat, a_mat, q = split(x)
        q = np.clip(q, Q_FLOOR, None)
        big_q = max(float(np.einsum("ij,ji->", s_op, a_mat).real), Q_FLOOR)
        g_mat = np.tensordot(observed / q, projectors, axes=1) - (c_total / big_q) * s_op
        return -_grad_pack(g_mat @ t_mat)

    x0 = _pack(_initial_t(init_rho, d))
    trace = [-neg_ll(x0)]

    def record(xk):
        ll = -neg_ll(xk)
        prev = trace[-1]
        assert ll >= prev - TRACE_RTOL * (1.0 + abs(prev)), (
            f"likelihood decreased across an accepted step: {prev!r} -> {ll!r}")
        trace.append(ll)

    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(neg_ll, x0, jac=neg_grad, method="L-BFGS-B",
                       callback=record,
                       options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-12})

    t_mat = _unpack(res.x, d)
    a_mat = t_mat @ t_mat.conj().T
    a_mat = (a_mat + a_mat.conj().T) / 2.0
    rho = a_mat / np.trace(a_mat).real
    converged = bool(res.success)
    return rho, float(-res.fun), int(res.nit), converged, tuple(trace)


def _initial_t(init_rho: np.ndarray, d: int) -> np.ndarray:
    jitter = 1e-9
    mat = (init_rho + jitter * np.eye(d)) / (1.0 + jitter * d)
    return np.linalg.cholesky(mat)


def mle_reconstruct(counts: CountsTable, settings=None, init: DensityMatrix | None = None,
                    tol: float = 1e-9, max_iter: int = 1000) -> ReconstructionResult:
    """Maximum-likelihood state fit, physical by construction.

    ``converged`` reports whether the relative likelihood change dropped
    below ``tol`` within ``max_iter`` accepted steps; on exhaustion the best
    iterate is still returned.  All-zero tables are a flat likelihood, so
    the initial state (maximally mixed by default) comes back unchanged.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    projectors, observed, exposures = _aligned_projectors(counts, settings)
    d = projectors.shape[1]
    basis = logical_basis(int(round(np.sqrt(d))))
    init_mat = init.entries if init is not None else np.eye(d) / d
    if init is not None and list(init.basis) != list(basis):
        raise ValueError("init must live on the logical reconstruction basis")
    rho, ll, nit, converged, trace = _fit_mle(projectors, observed, exposures,
                                              np.asarray(init_mat), tol, max_iter)
    return ReconstructionResult(
        rho=DensityMatrix(basis, rho),
        log_likelihood=ll,
        iterations=nit,
        converged=converged,
        likelihood_trace=trace,
    )


def monte_carlo_fidelity(counts: CountsTable, target: PureState, n_resamples: int,
                         seed: int, settings=None, tol: float = 1e-9,
                         max_iter: int = 1000) -> FidelityEstimate:
    """Poisson-resample the table, refit each draw, report point and spread.

    The point estimate is the base fit's fidelity; the resample mean sits
    systematically low (each resample carries the sampling noise twice) and
    centering on it would break 1-sigma coverage.  Resampled counts are
    treated as raw Poisson draws (they may exceed the recorded herald
    number; the likelihood only cares about rates).  Each refit warm-starts
    from the base reconstruction.  Failed refits are skipped and counted.
    """
    if n_resamples < 2:
        raise ValueError("n_resamples must be at least 2")
    projectors, observed, exposures = _aligned_projectors(counts, settings)
    base_rho, *_ = _fit_mle(projectors, observed, exposures,
                            np.eye(projectors.shape[1]) / projectors.shape[1],
                            tol, max_iter)
    basis = logical_basis(int(round(np.sqrt(projectors.shape[1]))))
    if list(target.basis) != list(basis):
        raise ValueError("target must live on the logical reconstruction basis")

    values, failed = [], 0
    for r in range(n_resamples):
        rng = np.random.default_rng([seed, r])
        resampled = rng.poisson(observed).astype(float)
        try:
            rho, *_ = _fit_mle(projectors, resampled, exposures, base_rho, tol, max_iter)
            values.append(fidelity(DensityMatrix(basis, rho), target))
        except (ValueError, AssertionError, np.linalg.LinAlgError):
            failed += 1
    if len(values) < 2:
        raise RuntimeError(f"only {len(values)} of {n_resamples} resamples succeeded")
    arr = np.asarray(values)
    return FidelityEstimate(
        value=fidelity(DensityMatrix(basis, base_rho), target),
        sigma=float(arr.std(ddof=1)),
        n_resamples=len(values),
        n_failed=failed,
    )


@dataclass(frozen=True)
class WFidelityData:
    """Populations and pairwise Re rho_ij estimates for a W-state check.

    ``pair_visibilities`` is ordered lexicographically over pairs (i, j)
    with i < j.
    """

    populations: tuple[float, ...]
    pair_visibilities: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "populations", tuple(float(p) for p in self.populations))
        object.__setattr__(self, "pair_visibilities",
                           tuple(float(v) for v in self.pair_visibilities))
        d = len(self.populations)
        if d < 2:
            raise ValueError("need at least two populations")
        if any(p < 0 for p in self.populations):
            raise ValueError("populations must be non-negative")
        if len(self.pair_visibilities) != d * (d - 1) // 2:
            raise ValueError("need one visibility per branch pair")

    @property
    def dimension(self) -> int:
        return len(self.populations)

    def visibility(self, i: int, j: int) -> float:
        if not 0 <= i < j < self.dimension:
            raise ValueError("need 0 <= i < j < dimension")
        pos = 0
        for a in range(self.dimension):
            for b in range(a + 1, self.dimension):
                if (a, b) == (i, j):
                    return self.pair_visibilities[pos]
                pos += 1
        raise AssertionError("unreachable")


def w_fidelity(data: WFidelityData, consistency_tol: float = 0.05) -> FidelityEstimate:
    """F_W from populations and pairwise coherences.

    F_W = (1/d)(sum_i p_i + 2 sum_{i<j} Re rho_ij); a visibility larger in
    magnitude than sqrt(p_i p_j)(1 + tol) is physically impossible and gets
    a warning attached rather than silently entering the average.
    """
    d = data.dimension
    total = sum(data.populations)
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"populations must be normalized, got sum {total!r}")
    notes = []
    pos = 0
    for i in range(d):
        for j in range(i + 1, d):
            vis = data.pair_visibilities[pos]
            bound = np.sqrt(data.populations[i] * data.populations[j])
            if abs(vis) > bound * (1.0 + consistency_tol) + 1e-12:
                notes.append(f"visibility ({i},{j}) = {vis:.4g} exceeds the "
                             f"population bound {bound:.4g}")
            pos += 1
    value = (sum(data.populations) + 2.0 * sum(data.pair_visibilities)) / d
    if not 0.0 <= value <= 1.0:
        notes.append(f"raw estimate {value:.4g} clipped into [0, 1]")
        value = float(np.clip(value, 0.0, 1.0))
    return FidelityEstimate(value=float(value), sigma=0.0, n_resamples=0,
                            warnings=tuple(notes))


def w_data_from_density(rho: DensityMatrix) -> WFidelityData:
    """Exact populations and Re rho_ij read off a known density matrix."""
    d = rho.dimension
    pops = tuple(float(rho.entries[i, i].real) for i in range(d))
    vis = tuple(float(rho.entries[i, j].real)
                for i in range(d) for j in range(i + 1, d))
    return WFidelityData(pops, vis)


def _w_data_from_raw(counts_by_label: dict, dimension: int) -> WFidelityData:
    pops_raw = [counts_by_label[f"P{i}"] for i in range(dimension)]
    total = float(sum(pops_raw))
    if total <= 0:
        raise ValueError("population counts are all zero")
    pops = [c / total for c in pops_raw]
    vis = []
    for i in range(dimension):
        for j in range(i + 1, dimension):
            plus = counts_by_label[f"C{i}{j}+"]
            minus = counts_by_label[f"C{i}{j}-"]
            vis.append((plus - minus) / (2.0 * total))
    return WFidelityData(tuple(pops), tuple(vis))


def w_data_from_counts(table: CountsTable, dimension: int = 4) -> WFidelityData:
    """Estimate W-state data from a counts table produced with ``w_settings``.

    Populations are normalized within the population family, and pair
    visibilities share that normalization, so a flat background inflates the
    denominator and pulls the fidelity toward 1/d rather than biasing it up.
    """
    heralds = {r.heralds for r in table.rows}
    if len(heralds) > 1:
        raise ValueError("rows must share one herald count for a consistent scale")
    by_label = {r.label: float(r.coincidences) for r in table.rows}
    missing = [f"P{i}" for i in range(dimension) if f"P{i}" not in by_label]
    if missing:
        raise ValueError(f"table lacks population rows: {missing}")
    return _w_data_from_raw(by_label, dimension)


def monte_carlo_w_fidelity(table: CountsTable, dimension: int = 4,
                           n_resamples: int = 100, seed: int = 0,
                           consistency_tol: float = 0.05) -> FidelityEstimate:
    """Poisson-resample the W counts table and spread the fidelity estimate."""
    if n_resamples < 2:
        raise ValueError("n_resamples must be at least 2")
    base = w_data_from_counts(table, dimension)  # validates labels up front
    labels = [r.label for r in table.rows]
    observed = np.array([float(r.coincidences) for r in table.rows])
    values, failed, notes = [], 0, ()
    for r in range(n_resamples):
        rng = np.random.default_rng([seed, r])
        resampled = dict(zip(labels, rng.poisson(observed).astype(float)))
        try:
            est = w_fidelity(_w_data_from_raw(resampled, dimension), consistency_tol)
            values.append(est.value)
        except ValueError:
            failed += 1
    if len(values) < 2:
        raise RuntimeError(f"only {len(values)} of {n_resamples} resamples succeeded")
    arr = np.asarray(values)
    point = w_fidelity(base, consistency_tol)
    return FidelityEstimate(
        value=point.value,
        sigma=float(arr.std(ddof=1)),
        n_resamples=len(values),
        n_failed=failed,
        warnings=point.warnings,
    )
