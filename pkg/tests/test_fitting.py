"""Tests for least-squares mutation-rate fitting."""
import math

import numpy as np
import pytest

import core.fitting as fitting
from core.approx_pmf import ApproxRnPMF, approx_rn_pmf, choose_k
from core.container import Container
from core.errors import DomainError
from core.fitting import (
    atom_cells,
    cell_log_densities,
    empirical_log_density,
    filter_observations,
    fit_frequencies,
    fit_overlay,
    fit_pB,
    golden_section,
    model_log_density,
    observed_frequencies,
    pool_cells,
    squared_log_error,
)
from core.simulate import run_ensemble
from storage.models import BinSpec, FitConfig, SimConfig, SiteObservation, UrnParams


def site(depth: int, alt: int, bias: float = 1.0, sample: str = "S1", position: int = 100):
    return SiteObservation(
        sample_id=sample, site=position, depth=depth, alt_count=alt, strand_bias=bias
    )


def atoms(locations, masses) -> ApproxRnPMF:
    locations = np.asarray(locations, dtype=float)
    return ApproxRnPMF(
        n=10, k=locations.size - 1, locations=locations,
        masses=np.asarray(masses, dtype=float), drift=None,
    )


@pytest.fixture
def uniform_freqs() -> np.ndarray:
    return np.random.default_rng(8).uniform(0.0, 0.002, size=5_000)


def cell_matched_model(freqs: np.ndarray, config: FitConfig, target: float):
    """Atoms every 5 bins carrying the data's cell fractions times p / target."""
    counts, _ = np.histogram(freqs, bins=config.bins.edges)
    fractions = counts.reshape(-1, 5).sum(axis=1) / freqs.size
    locations = config.bins.edges[::5]

    def model(p_b: float, cfg: FitConfig) -> ApproxRnPMF:
        return atoms(locations, np.append(fractions, 0.0) * (p_b / target))

    return model


class TestObservations:
    def test_filters(self):
        obs = [
            site(2000, 1),
            site(999, 1),
            site(5000, 2, bias=10.0),
            site(5000, 2, bias=10.5),
        ]
        kept = filter_observations(obs, FitConfig())
        assert [o.depth for o in kept] == [2000, 5000]

    def test_frequencies_skip_empty_sites(self):
        freqs = observed_frequencies([site(0, 0), site(400, 1), site(1000, 0)])
        np.testing.assert_allclose(freqs, [0.0025, 0.0])


class TestEmpiricalDensity:
    def test_out_of_range_kept_in_total(self):
        bins = BinSpec(lo=0.0, hi=1.0, count=10)
        freqs = [0.05, 0.05, 0.95, 2.0]
        plain = empirical_log_density(freqs, bins)
        truncated = empirical_log_density(freqs, bins, truncate_renormalize=True)
        assert plain.bin_index.tolist() == [0, 9]
        assert plain.values[0] == pytest.approx(math.log(0.5 / 0.1))
        assert truncated.values[0] == pytest.approx(math.log((2 / 3) / 0.1))

    def test_no_data(self):
        density = empirical_log_density([], BinSpec(lo=0.0, hi=1.0, count=4))
        assert density.bin_index.size == 0


class TestObjective:
    def test_disjoint_bins(self):
        bins = BinSpec(lo=0.0, hi=1.0, count=10)
        model = empirical_log_density([0.05], bins)
        data = empirical_log_density([0.95], bins)
        assert squared_log_error(model, data) == (math.inf, 0)

    def test_shared_bins_only(self):
        bins = BinSpec(lo=0.0, hi=1.0, count=10)
        model = empirical_log_density([0.05, 0.55], bins)
        data = empirical_log_density([0.05, 0.05, 0.05, 0.95], bins)
        value, shared = squared_log_error(model, data)
        assert shared == 1
        assert value == pytest.approx(math.log(0.5 / 0.75) ** 2)

    def test_weighted_by_data_counts(self):
        bins = BinSpec(lo=0.0, hi=1.0, count=10)
        model = empirical_log_density([0.05, 0.55], bins)
        data = empirical_log_density([0.05, 0.05, 0.05, 0.55], bins)
        value, shared = squared_log_error(model, data, weighted=True)
        assert shared == 2
        assert value == pytest.approx(
            3 * math.log(0.5 / 0.75) ** 2 + math.log(0.5 / 0.25) ** 2
        )


class TestAtomCells:
    def test_partial_and_point_atoms(self):
        bins = BinSpec(lo=0.0, hi=1.0, count=10)
        pmf = atoms([0.25, 0.55, 0.95, 1.5], [0.4, 0.3, 0.2, 0.1])
        starts, masses = atom_cells(pmf, bins)
        assert starts.tolist() == [0, 5, 9]
        np.testing.assert_allclose(masses, [0.4, 0.3, 0.2 * 0.05 / 0.55])

    def test_atom_below_range_contributes_its_share(self):
        bins = BinSpec(lo=0.5, hi=1.0, count=5)
        pmf = atoms([0.2, 0.75, 2.0], [0.5, 0.5, 0.0])
        starts, masses = atom_cells(pmf, bins)
        assert starts.tolist() == [0, 2]
        np.testing.assert_allclose(masses, [0.5 * 0.25 / 0.55, 0.5 * 0.2])

    def test_coincident_atoms_are_points(self):
        bins = BinSpec(lo=0.0, hi=1.0, count=10)
        starts, masses = atom_cells(atoms([0.35, 0.35, 0.65], [0.2, 0.3, 0.5]), bins)
        assert starts.tolist() == [0, 6]
        np.testing.assert_allclose(masses, [0.5, 0.5])

    def test_nothing_in_range(self):
        starts, masses = atom_cells(atoms([2.0, 3.0], [0.5, 0.5]), BinSpec(lo=0.0, hi=1.0))
        assert starts.size == 0
        assert masses.size == 0


class TestPoolCells:
    def test_pools_until_minimum(self):
        assert pool_cells([0, 3, 4, 10, 1], 5).tolist() == [0, 3]

    def test_exact_minimum_closes_group(self):
        assert pool_cells([5, 5], 5).tolist() == [0, 1]

    def test_too_few_counts(self):
        assert pool_cells([1, 1, 1], 5).tolist() == [0]


class TestCellDensities:
    @pytest.fixture
    def pmf(self) -> ApproxRnPMF:
        return atoms([0.0, 0.5, 1.0], [0.6, 0.4, 0.0])

    def test_matching_cells_give_zero(self, pmf):
        config = FitConfig(freq_range=(0.0, 1.0), bin_count=10, min_cell_count=1)
        counts = np.array([3, 0, 0, 0, 0, 1, 1, 0, 0, 0])
        model, data = cell_log_densities(pmf, counts, 5.0, config)
        assert model.bin_index.tolist() == [0, 5]
        np.testing.assert_allclose(data.weights, [3, 2])
        np.testing.assert_allclose(model.values, [math.log(1.2), math.log(0.8)])
        value, used = squared_log_error(model, data, weighted=True)
        assert value == pytest.approx(0.0, abs=1e-24)
        assert used == 2

    def test_pooling_merges_cells(self, pmf):
        config = FitConfig(freq_range=(0.0, 1.0), bin_count=10)
        counts = np.array([3, 0, 0, 0, 0, 1, 1, 0, 0, 0])
        model, data = cell_log_densities(pmf, counts, 5.0, config)
        assert model.bin_index.tolist() == [0]
        assert model.values[0] == pytest.approx(0.0, abs=1e-12)
        assert data.values[0] == pytest.approx(0.0, abs=1e-12)

    def test_out_of_range_data_lowers_density(self, pmf):
        config = FitConfig(freq_range=(0.0, 1.0), bin_count=10, min_cell_count=1)
        counts = np.array([3, 0, 0, 0, 0, 1, 1, 0, 0, 0])
        _, data = cell_log_densities(pmf, counts, 10.0, config)
        np.testing.assert_allclose(data.values, [math.log(0.6), math.log(0.4)])

    def test_renormalized_model(self):
        pmf = atoms([0.0, 0.5, 2.0], [0.3, 0.2, 0.5])
        config = FitConfig(
            freq_range=(0.0, 1.0), bin_count=10, min_cell_count=1, truncate_renormalize=True
        )
        counts = np.array([3, 0, 0, 0, 0, 2, 0, 0, 0, 0])
        model, _ = cell_log_densities(pmf, counts, 5.0, config)
        assert model.inside_mass == pytest.approx(0.3 + 0.2 * 0.5 / 1.5)


class TestGoldenSection:
    def test_parabola(self):
        c, d = golden_section(lambda x: (x - 0.3) ** 2, -2.0, 2.0, 1e-6)
        assert d - c <= 1e-6 * 1.01
        assert c <= 0.3 <= d

    def test_narrow_bracket(self):
        assert golden_section(lambda x: x, 1.0, 1.0 + 1e-9, 1e-6) == (1.0, 1.0 + 1e-9)

    def test_reversed_limits(self):
        c, d = golden_section(lambda x: abs(x + 1.0), 0.0, -3.0, 1e-5)
        assert c <= -1.0 <= d


class TestFit:
    def test_recovers_minimum(self, uniform_freqs, monkeypatch):
        config = FitConfig()
        monkeypatch.setattr(fitting, "model_pmf", cell_matched_model(uniform_freqs, config, 3.7e-6))
        result = fit_frequencies(uniform_freqs, config)
        assert result.p_b_hat == pytest.approx(3.7e-6, rel=1e-12)
        assert result.used_bins == 20
        assert result.warnings == []
        ps = [p for p, _ in result.objective_curve]
        assert ps == sorted(ps)
        assert len(ps) >= config.grid_points

    def test_boundary_warning(self, uniform_freqs, monkeypatch):
        config = FitConfig()
        monkeypatch.setattr(fitting, "model_pmf", cell_matched_model(uniform_freqs, config, 1e-10))
        result = fit_frequencies(uniform_freqs, config)
        assert result.p_b_hat == pytest.approx(1e-8, rel=0.01)
        assert any("boundary" in w for w in result.warnings)

    def test_sparse_cells_are_pooled(self, uniform_freqs, monkeypatch):
        config = FitConfig(min_cell_count=600)
        monkeypatch.setattr(fitting, "model_pmf", cell_matched_model(uniform_freqs, config, 3.7e-6))
        result = fit_frequencies(uniform_freqs, config)
        assert result.p_b_hat == pytest.approx(3.7e-6, rel=1e-12)
        assert 1 <= result.used_bins < 10

    def test_no_data_in_range(self):
        with pytest.raises(DomainError):
            fit_frequencies(np.array([0.5, 0.7]), FitConfig())

    def test_everything_filtered(self):
        with pytest.raises(DomainError):
            fit_pB([site(10, 1)], FitConfig())

    def test_end_to_end(self):
        rng = np.random.default_rng(12)
        depths = rng.integers(1_000, 20_000, size=3_000)
        alts = rng.binomial(depths, 2e-4)
        obs = [site(int(d), int(a), position=i + 1) for i, (d, a) in enumerate(zip(depths, alts))]
        config = FitConfig(n=100_000, search_range=(-6.0, -4.0), grid_points=9)
        result = fit_pB(obs, config)
        assert 1e-6 <= result.p_b_hat <= 1e-4
        assert result.filtered_count == 3_000
        assert result.used_bins >= 1
        assert all(math.isfinite(v) for _, v in result.objective_curve)

    def test_model_density_uses_heuristic_cut(self):
        config = FitConfig(n=50_000)
        density = model_log_density(1e-5, config)
        assert density.bin_index.size > 0
        assert density.inside_mass <= 1.0 + 1e-12


def test_overlay_rows(uniform_freqs):
    config = FitConfig(n=50_000, bin_count=20)
    rows = fit_overlay(uniform_freqs, config, 1e-5)
    assert len(rows) == 20
    assert rows[0]["bin_center"] == pytest.approx(0.00005)
    assert all(math.isfinite(r["empirical_log_density"]) for r in rows)
    assert any(math.isnan(r["model_log_density"]) for r in rows)


def test_fit_is_deterministic():
    truth = UrnParams(u=0, v=1, p_w=1e-5 / 3, p_b=1e-5)
    pmf = approx_rn_pmf(truth, 100_000, choose_k(truth))
    freqs = np.random.default_rng(6).choice(pmf.locations, p=pmf.masses, size=5_000)
    config = FitConfig(n=100_000, search_range=(-6.0, -4.0), grid_points=11)

    first = fit_frequencies(freqs, config)
    Container.reset()
    second = fit_frequencies(freqs, config)
    assert first == second
    assert 5e-6 <= first.p_b_hat <= 2e-5


@pytest.mark.slow
def test_recovers_rate_from_atomic_samples():
    truth = UrnParams(u=0, v=1, p_w=1e-6 / 3, p_b=1e-6)
    pmf = approx_rn_pmf(truth, 1_000_000, choose_k(truth))
    config = FitConfig()
    within = 0
    for seed in range(20):
        freqs = np.random.default_rng(seed).choice(pmf.locations, p=pmf.masses, size=5_000)
        within += 0.5e-6 <= fit_frequencies(freqs, config).p_b_hat <= 2e-6
    assert within >= 18


@pytest.mark.slow
def test_recovers_rate_from_simulated_ensembles():
    truth = UrnParams(u=0, v=1, p_w=1e-5 / 3, p_b=1e-5)
    config = FitConfig(n=100_000)
    within = 0
    for seed in range(20):
        ensemble = SimConfig(params=truth, n=100_000, replications=10_000, master_seed=seed)
        freqs = run_ensemble(ensemble).values / 100_000
        within += 0.5e-5 <= fit_frequencies(freqs, config).p_b_hat <= 2e-5
    assert within >= 18
