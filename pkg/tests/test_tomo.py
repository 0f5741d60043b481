import numpy as np
import pytest
from numpy.testing import assert_allclose

from maqmsim.detect import (
    CountRow,
    CountsTable,
    coincidence_probability,
    sample_counts,
    tomography_settings,
    w_settings,
)
from maqmsim.memory import CellAddress, MemoryId, MemorySpec, RfGrid
from maqmsim.protocol import ProtocolConfig, project_w, run_protocol
from maqmsim.qstate import DensityMatrix, PureState, bin_mode, fidelity, state_fidelity, w_state
from maqmsim.tomo import (
    FidelityEstimate,
    WFidelityData,
    bell_target,
    linear_inversion,
    logical_basis,
    mle_reconstruct,
    monte_carlo_fidelity,
    monte_carlo_w_fidelity,
    w_data_from_counts,
    w_data_from_density,
    w_fidelity,
)

GRID1 = RfGrid(97.0, 1.5, 95.5, 1.5)
GRID2 = RfGrid(101.1, 1.2, 99.0, 1.2)


def make_config(dimension=2, eta_read=1.0, eta_eit=1.0):
    coords = [(1, 1), (1, 2)] if dimension == 2 else [(2, 2), (2, 3), (3, 2), (3, 3)]
    spec1 = MemorySpec(MemoryId.MAQM1, 5, 6, 0.01, eta_read, 1e18,
                       7.8 if dimension == 2 else 3.9, GRID1)
    spec2 = MemorySpec(MemoryId.MAQM2, 5, 6, 0.01, 0.2, 1e18, 1.3, GRID2,
                       eta_eit=eta_eit)
    return ProtocolConfig(
        dimension=dimension, spec1=spec1, spec2=spec2,
        source_cells=tuple(CellAddress(MemoryId.MAQM1, x, y) for x, y in coords),
        target_cells=tuple(CellAddress(MemoryId.MAQM2, x, y) for x, y in coords),
        t1=15.6 if dimension == 2 else 11.7,
        tau=7.8 if dimension == 2 else 3.9,
        t2=7.8,
    )


def setting_probability(rho_entries, setting):
    # independent restatement of the projection rule
    ket = np.kron(setting.signal_vector(), setting.atom_vector())
    return float(np.real(np.conj(ket) @ rho_entries @ ket))


def exact_counts(probabilities, labels, heralds=4_000_000):
    rows = []
    for label, p in zip(labels, probabilities):
        c = p * heralds
        assert abs(c - round(c)) < 1e-6, "test wants exactly representable counts"
        rows.append(CountRow(label, heralds, int(round(c))))
    return CountsTable(tuple(rows))


def bell_table(heralds=4_000_000):
    settings = tomography_settings(2)
    target = bell_target()
    rho = np.outer(target.amplitudes, target.amplitudes.conj())
    probs = [setting_probability(rho, s) for s in settings]
    return exact_counts(probs, [s.label for s in settings], heralds)


def ginibre_density(dim, rng):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    mat = g @ g.conj().T
    return mat / np.trace(mat).real


class TestLinearInversion:
    def test_exact_bell_probabilities(self):
        target = bell_target()
        truth = np.outer(target.amplitudes, target.amplitudes.conj())
        mat = linear_inversion(bell_table())
        assert_allclose(mat, truth, rtol=0, atol=1e-10)

    def test_exact_mixed_probabilities(self):
        settings = tomography_settings(2)
        probs = [0.25] * 16
        counts = exact_counts(probs, [s.label for s in settings])
        assert_allclose(linear_inversion(counts), np.eye(4) / 4, rtol=0, atol=1e-10)

    def test_detection_efficiency_drops_out(self):
        settings = tomography_settings(2)
        target = bell_target()
        rho = np.outer(target.amplitudes, target.amplitudes.conj())
        probs = [0.4 * setting_probability(rho, s) for s in settings]
        counts = exact_counts(probs, [s.label for s in settings])
        assert_allclose(linear_inversion(counts), rho, rtol=0, atol=1e-10)

    def test_sampled_counts_give_hermitian_unit_trace(self):
        out = run_protocol(make_config())
        table = sample_counts(out, tomography_settings(2), 2000, 0.8, 0.0, seed=21)
        mat = linear_inversion(table)
        assert_allclose(mat, mat.conj().T, atol=1e-12)
        assert_allclose(np.trace(mat).real, 1.0, atol=1e-12)

    def test_incomplete_settings_rejected(self):
        rows = [CountRow(lbl, 1000, 250) for lbl in ("UU", "UD", "DU", "DD")]
        with pytest.raises(ValueError):
            linear_inversion(CountsTable(tuple(rows)))

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError):
            linear_inversion(CountsTable((CountRow("XX", 10, 1),)))


class TestMleReconstruct:
    def test_large_count_consistency(self):
        res = mle_reconstruct(bell_table())
        assert res.converged
        assert fidelity(res.rho, bell_target()) >= 0.9999

    def test_mixed_truth_recovered(self):
        rng = np.random.default_rng(3)
        target = bell_target()
        pure = np.outer(target.amplitudes, target.amplitudes.conj())
        truth = 0.8 * pure + 0.2 * np.eye(4) / 4
        settings = tomography_settings(2)
        probs = [setting_probability(truth, s) for s in settings]
        counts = CountsTable(tuple(
            CountRow(s.label, 10_000_000, int(round(p * 10_000_000)))
            for s, p in zip(settings, probs)))
        res = mle_reconstruct(counts)
        assert_allclose(res.rho.entries, truth, rtol=0, atol=2e-3)

    def test_trace_monotone(self):
        out = run_protocol(make_config())
        table = sample_counts(out, tomography_settings(2), 1000, 0.5, 1e-4, seed=5)
        res = mle_reconstruct(table)
        trace = np.array(res.likelihood_trace)
        assert len(trace) >= 2
        assert (np.diff(trace) >= -1e-9 * (1 + np.abs(trace[:-1]))).all()

    def test_all_zero_counts_returns_init(self):
        settings = tomography_settings(2)
        counts = CountsTable(tuple(CountRow(s.label, 1000, 0) for s in settings))
        res = mle_reconstruct(counts)
        assert_allclose(res.rho.entries, np.eye(4) / 4, rtol=0, atol=1e-9)

    def test_exhaustion_flags_non_convergence(self):
        out = run_protocol(make_config())
        table = sample_counts(out, tomography_settings(2), 1000, 0.5, 0.0, seed=6)
        res = mle_reconstruct(table, max_iter=1)
        assert not res.converged

    def test_agrees_with_linear_inversion_on_exact_input(self):
        counts = bell_table()
        lin = linear_inversion(counts)
        res = mle_reconstruct(counts)
        lin_rho = DensityMatrix(logical_basis(2), (lin + lin.conj().T) / 2)
        assert state_fidelity(res.rho, lin_rho) >= 1.0 - 1e-6

    def test_result_always_physical(self):
        out = run_protocol(make_config(eta_read=[0.3] * 30))
        for seed in range(5):
            table = sample_counts(out, tomography_settings(2), 200, 0.4, 1e-3, seed=seed)
            res = mle_reconstruct(table)
            eigs = np.linalg.eigvalsh(res.rho.entries)
            assert eigs.min() >= -1e-10
            assert_allclose(np.trace(res.rho.entries).real, 1.0, atol=1e-10)

    def test_json_fields(self):
        res = mle_reconstruct(bell_table())
        doc = res.to_json_dict()
        assert set(doc) == {"rho", "log_likelihood", "iterations", "converged"}


class TestMonteCarloFidelity:
    def test_high_count_sigma_small(self):
        out = run_protocol(make_config())
        table = sample_counts(out, tomography_settings(2), 20_000, 1.0, 0.0, seed=8)
        est = monte_carlo_fidelity(table, bell_target(), n_resamples=20, seed=17)
        assert est.value >= 0.99
        assert 0.0 < est.sigma < 0.01
        assert est.n_failed == 0

    def test_deterministic_in_seed(self):
        out = run_protocol(make_config())
        table = sample_counts(out, tomography_settings(2), 2000, 1.0, 0.0, seed=9)
        a = monte_carlo_fidelity(table, bell_target(), n_resamples=5, seed=23)
        b = monte_carlo_fidelity(table, bell_target(), n_resamples=5, seed=23)
        assert a == b

    def test_too_few_resamples_rejected(self):
        out = run_protocol(make_config())
        table = sample_counts(out, tomography_settings(2), 2000, 1.0, 0.0, seed=9)
        with pytest.raises(ValueError):
            monte_carlo_fidelity(table, bell_target(), n_resamples=1, seed=23)

    def test_json_fields(self):
        est = FidelityEstimate(0.9, 0.01, 50)
        assert est.to_json_dict() == {"value": 0.9, "sigma": 0.01, "n_resamples": 50}


class TestWFidelity:
    def test_ideal_w_data(self):
        data = WFidelityData((0.25,) * 4, (0.25,) * 6)
        est = w_fidelity(data)
        assert est.value == pytest.approx(1.0, abs=1e-12)
        assert est.warnings == ()

    def test_incoherent_mixture(self):
        data = WFidelityData((0.25,) * 4, (0.0,) * 6)
        assert w_fidelity(data).value == pytest.approx(0.25, abs=1e-12)

    def test_matches_overlap_oracle_on_random_states(self):
        rng = np.random.default_rng(11)
        basis = [(bin_mode(k),) for k in range(4)]
        target = w_state(4)
        for _ in range(25):
            rho = DensityMatrix(basis, ginibre_density(4, rng))
            est = w_fidelity(w_data_from_density(rho), consistency_tol=1.0)
            assert_allclose(est.value, fidelity(rho, target), rtol=0, atol=1e-12)

    def test_unnormalized_populations_rejected(self):
        with pytest.raises(ValueError):
            w_fidelity(WFidelityData((0.3,) * 4, (0.0,) * 6))

    def test_impossible_visibility_warns(self):
        data = WFidelityData((0.5, 0.5), (0.6,))
        est = w_fidelity(data)
        assert est.warnings
        assert "exceeds" in est.warnings[0]


class TestWPipeline:
    def qudit_outcome(self, **kw):
        return run_protocol(make_config(4, **kw))

    def test_counts_reproduce_projection_fidelity(self):
        # lossless run: estimate from sampled counts should sit on the exact
        # projected fidelity within Monte Carlo error
        out = self.qudit_outcome()
        table = sample_counts(out, w_settings(4), 100_000, 0.8, 0.0, seed=31)
        est = monte_carlo_w_fidelity(table, 4, n_resamples=30, seed=32)
        exact = project_w(out).fidelity
        assert abs(est.value - exact) < 5 * max(est.sigma, 1e-4)

    def test_nonuniform_efficiency_lowers_w_fidelity(self):
        values = [1.0] * 30
        for (x, y), eta in zip([(2, 2), (2, 3), (3, 2), (3, 3)],
                               [1.0, 0.6, 0.35, 0.15]):
            values[y * 5 + x] = eta
        out = self.qudit_outcome(eta_eit=values)
        table = sample_counts(out, w_settings(4), 200_000, 0.8, 0.0, seed=41)
        est = monte_carlo_w_fidelity(table, 4, n_resamples=30, seed=42)
        exact = project_w(out).fidelity
        assert exact < 0.95
        assert abs(est.value - exact) < 5 * max(est.sigma, 1e-4)

    def test_dark_counts_pull_toward_mixed(self):
        out = self.qudit_outcome()
        clean = sample_counts(out, w_settings(4), 200_000, 0.5, 0.0, seed=51)
        dark = sample_counts(out, w_settings(4), 200_000, 0.5, 5e-3, seed=51)
        f_clean = w_fidelity(w_data_from_counts(clean)).value
        f_dark = w_fidelity(w_data_from_counts(dark)).value
        assert f_dark < f_clean
        assert f_dark > 0.25

    def test_mixed_heralds_rejected(self):
        rows = (CountRow("P0", 100, 1), CountRow("P1", 200, 1))
        with pytest.raises(ValueError):
            w_data_from_counts(CountsTable(rows), dimension=2)

    def test_missing_population_rows_rejected(self):
        rows = (CountRow("P0", 100, 1),)
        with pytest.raises(ValueError):
            w_data_from_counts(CountsTable(rows), dimension=2)


class TestTransmissionFidelity:
    def test_noiseless_stages_agree(self):
        cfg = make_config()
        stage1 = run_protocol(cfg, transfer=False)
        stage2 = run_protocol(cfg, transfer=True)
        settings = tomography_settings(2)
        rho1 = mle_reconstruct(sample_counts(stage1, settings, 500_000, 1.0, 0.0, seed=61)).rho
        rho2 = mle_reconstruct(sample_counts(stage2, settings, 500_000, 1.0, 0.0, seed=62)).rho
        f12 = state_fidelity(rho1, rho2)
        f21 = state_fidelity(rho2, rho1)
        assert_allclose(f12, f21, rtol=0, atol=1e-8)
        assert f12 >= 0.999
