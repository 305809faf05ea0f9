import numpy as np
import pytest

from gclust.evaluation import (
    BlockModelSpec,
    MonteCarloConfig,
    adjusted_rand_index,
    block_contraction,
    community_pair,
    default_block_patterns,
    generate_swimmer,
    gmm_pca_cluster,
    pairwise_frobenius,
    pamk,
    permutation_from_cycles,
    run_monte_carlo,
    save_report,
    simulate_block_poisson,
    swimmer_parts,
    two_pattern_matrix,
    zhu_ghodsi_elbow,
)
from gclust.ingest import DataMatrix, GraphSequence, contract_vertices, vectorize
from gclust.spectral import singular_values
from gclust.util import derive_rng
from oracles import brute_force_ari, profile_likelihood_split


class TestAdjustedRandIndex:
    def test_identical_labelings(self):
        assert adjusted_rand_index([1, 1, 2, 2], [1, 1, 2, 2]) == 1.0
        assert adjusted_rand_index([1, 1, 2, 2], [5, 5, 9, 9]) == 1.0

    def test_hand_computed_crossing(self):
        assert abs(adjusted_rand_index([1, 1, 2, 2], [1, 2, 1, 2]) - (-0.5)) < 1e-12

    def test_matches_pair_enumeration_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(4, 20))
            a = rng.integers(1, 4, size=n)
            b = rng.integers(1, 4, size=n)
            assert abs(adjusted_rand_index(a, b) - brute_force_ari(a, b)) < 1e-12

    def test_chance_level_near_zero(self):
        rng = np.random.default_rng(1)
        vals = []
        for _ in range(10_000):
            a = rng.integers(1, 4, size=50)
            b = rng.integers(1, 4, size=50)
            vals.append(adjusted_rand_index(a, b))
        assert abs(np.mean(vals)) < 0.02

    def test_invariant_under_relabeling(self):
        rng = np.random.default_rng(2)
        a = rng.integers(1, 4, size=30)
        b = rng.integers(1, 4, size=30)
        remap = {1: 7, 2: 5, 3: 6}
        a2 = np.array([remap[int(x)] for x in a])
        assert adjusted_rand_index(a, b) == adjusted_rand_index(a2, b)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            adjusted_rand_index([1, 2], [1, 2, 3])


class TestPairwiseFrobenius:
    def test_identical_slices_distance_zero(self):
        gs = GraphSequence(np.ones((2, 3, 3)))
        D = pairwise_frobenius(gs)
        assert D[0, 1] == 0.0

    def test_single_entry_difference(self):
        slices = np.ones((2, 3, 3))
        slices[1, 0, 0] += 3.0
        D = pairwise_frobenius(GraphSequence(slices))
        assert D[0, 1] == 3.0

    def test_symmetric_zero_diagonal_triangle_inequality(self):
        rng = np.random.default_rng(3)
        gs = GraphSequence(rng.uniform(0, 2, size=(6, 4, 4)))
        D = pairwise_frobenius(gs)
        assert np.array_equal(D, D.T)
        assert not np.diag(D).any()
        for i in range(6):
            for j in range(6):
                for k in range(6):
                    assert D[i, j] <= D[i, k] + D[k, j] + 1e-12


class TestPamk:
    def test_two_far_groups(self):
        slices = np.concatenate([np.zeros((5, 3, 3)), np.full((5, 3, 3), 9.0)])
        rng = np.random.default_rng(4)
        slices += rng.uniform(0, 0.01, size=slices.shape)
        D = pairwise_frobenius(GraphSequence(slices))
        k, labels = pamk(D, (2, 3, 4))
        assert k == 2
        assert adjusted_rand_index(labels, [1] * 5 + [2] * 5) == 1.0

    def test_structureless_matrix_falls_back_to_one(self):
        D = np.zeros((6, 6))
        k, labels = pamk(D, (2, 3))
        assert k == 1
        assert set(labels.tolist()) == {1}

    def test_two_pattern_columns_split(self):
        dm, truth = two_pattern_matrix(kappa=0.1)
        from gclust.ingest import devectorize
        D = pairwise_frobenius(devectorize(dm))
        k, labels = pamk(D, (2, 3, 4))
        assert k == 2
        assert adjusted_rand_index(labels, truth) == 1.0

    def test_k_range_beyond_limit_rejected(self):
        with pytest.raises(ValueError):
            pamk(np.zeros((4, 4)), (2, 4))


class TestZhuGhodsiElbow:
    def test_three_high_values(self):
        vals = (10.0, 9.5, 9.0, 1.0, 0.9, 0.8)
        assert zhu_ghodsi_elbow(vals) == 3
        assert profile_likelihood_split(vals) == 3

    def test_two_values(self):
        assert zhu_ghodsi_elbow((10.0, 1.0)) == 1

    def test_constant_sequence_degenerates_to_one(self):
        assert zhu_ghodsi_elbow((5.0, 5.0, 5.0, 5.0)) == 1

    def test_matches_direct_enumeration_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            vals = np.sort(rng.uniform(0.5, 10, size=rng.integers(3, 10)))[::-1]
            assert zhu_ghodsi_elbow(vals) == profile_likelihood_split(vals)

    def test_increasing_sequence_rejected(self):
        with pytest.raises(ValueError):
            zhu_ghodsi_elbow((1.0, 2.0))


class TestGmmPcaCluster:
    def _two_cluster_matrix(self):
        rng = np.random.default_rng(6)
        base1 = rng.uniform(1, 2, size=16)
        base2 = rng.uniform(1, 2, size=16)
        cols = [base1 + rng.normal(0, 0.01, 16) for _ in range(5)]
        cols += [base2 + rng.normal(0, 0.01, 16) for _ in range(5)]
        return DataMatrix(np.abs(np.column_stack(cols)))

    def test_two_tight_clusters(self):
        dm = self._two_cluster_matrix()
        k, labels = gmm_pca_cluster(dm, (1, 2, 3), seed=0)
        assert k == 2
        assert adjusted_rand_index(labels, [1] * 5 + [2] * 5) == 1.0

    def test_single_blob_selects_one_by_bic(self):
        rng = np.random.default_rng(7)
        base = rng.uniform(1, 2, size=16)
        cols = [np.abs(base + rng.normal(0, 0.05, 16)) for _ in range(12)]
        dm = DataMatrix(np.column_stack(cols))
        k, _ = gmm_pca_cluster(dm, (1, 2, 3), seed=0)
        assert k == 1

    def test_deterministic_given_seed(self):
        dm = self._two_cluster_matrix()
        a = gmm_pca_cluster(dm, (1, 2, 3), seed=5)
        b = gmm_pca_cluster(dm, (1, 2, 3), seed=5)
        assert a[0] == b[0]
        assert np.array_equal(a[1], b[1])


class TestBlockModel:
    def test_pattern_entries_as_printed(self):
        B1, B2 = default_block_patterns()
        assert B1[0, 0] == 0.1
        assert B1[3, 3] == 0.29
        assert B1.shape == (5, 5)
        # permuted variant preserves total intensity but not the layout
        assert np.isclose(B1.sum(), B2.sum())
        assert not np.array_equal(B1, B2)

    def test_row_and_column_permutation_layout(self):
        B1, B2 = default_block_patterns()
        # rows (4152): row 4 -> position 1, 5 -> 2, 3 stays, 2 -> 4, 1 -> 5;
        # then columns 3 and 4 swap
        expected_first_row = B1[3, [0, 1, 3, 2, 4]]
        assert np.array_equal(B2[0], expected_first_row)
        assert np.array_equal(B2[4], B1[0, [0, 1, 3, 2, 4]])

    def test_cycle_helper(self):
        sigma = permutation_from_cycles(5, [(4, 1, 5, 2)])
        # 1-based: 4->1, 1->5, 5->2, 2->4, 3 fixed
        assert sigma.tolist() == [4, 3, 2, 0, 1]

    def test_near_zero_intensity_gives_empty_graphs(self):
        B1, B2 = default_block_patterns()
        spec = BlockModelSpec([B1, B2], m=5, schedule=np.tile([1, 2], 5), rho=1e-6)
        gs = simulate_block_poisson(spec, seed=0)
        assert gs.slices.sum() == 0

    def test_empirical_entry_mean(self):
        B1, B2 = default_block_patterns()
        spec = BlockModelSpec([B1], m=1, schedule=np.array([1]), rho=0.5)
        draws = np.array([simulate_block_poisson(spec, seed=s).slices[0, 3, 3]
                          for s in range(10_000)])
        target = 0.5 * B1[3, 3]
        stderr = draws.std(ddof=1) / np.sqrt(draws.size)
        assert abs(draws.mean() - target) < 4 * stderr

    def test_block_membership_layout(self):
        B1, _ = default_block_patterns()
        spec = BlockModelSpec([B1], m=3, schedule=np.array([1]), rho=1.0)
        mean = spec.mean_slice(0)
        assert mean.shape == (15, 15)
        # vertex i belongs to block i // m
        assert mean[0, 0] == B1[0, 0]
        assert mean[4, 13] == B1[1, 4]

    def test_contraction_mean_additivity(self):
        # contracting within blocks sums m^2 independent Poisson entries,
        # so the empirical block means scale by m^2
        B1, _ = default_block_patterns()
        spec = BlockModelSpec([B1], m=4, schedule=np.array([1]), rho=1.0)
        cmap = block_contraction(spec)
        acc = np.zeros((5, 5))
        reps = 2000
        for s in range(reps):
            gs = simulate_block_poisson(spec, seed=s)
            acc += contract_vertices(gs, cmap).slices[0]
        expected = 16 * B1
        stderr = np.sqrt(16 * B1 / reps) + 1e-9
        assert np.all(np.abs(acc / reps - expected) < 4 * stderr + 0.05)


class TestSwimmer:
    def test_dimensions_and_binary_values(self):
        dm = generate_swimmer()
        assert dm.X.shape == (220, 256)
        assert set(np.unique(dm.X)) == {0.0, 1.0}

    def test_torso_always_on(self):
        dm = generate_swimmer()
        parts = swimmer_parts()
        torso_rows = [r * 11 + c for r, c in parts["torso"]]
        assert np.all(dm.X[torso_rows, :] == 1.0)

    def test_sixteen_distinct_part_supports(self):
        parts = swimmer_parts()
        supports = [frozenset(pos) for limb in parts["limbs"] for pos in limb]
        assert len(supports) == 16
        assert len(set(supports)) == 16
        # supports are pairwise disjoint (and disjoint from the torso)
        allpix = [px for s in supports for px in s] + parts["torso"]
        assert len(allpix) == len(set(allpix))

    def test_numerical_rank_thirteen(self):
        sv = singular_values(generate_swimmer().X)
        assert sv[13] / sv[0] < 1e-8
        assert sv[12] / sv[0] > 1e-8

    def test_every_combination_once(self):
        dm = generate_swimmer()
        cols = {tuple(col) for col in dm.X.T}
        assert len(cols) == 256


class TestMonteCarlo:
    def _tiny_config(self):
        return MonteCarloConfig(rho_grid=(1.0,), contraction_levels=("blocks",),
                                replicates=2, seed=42, restarts=2, r_max=3,
                                nmf_max_iter=150)

    def test_single_replicate_reproducible(self):
        cfg = self._tiny_config()
        a = run_monte_carlo(cfg)
        b = run_monte_carlo(cfg)
        for ra, rb in zip(a.rows, b.rows):
            assert (ra.mean_ari, ra.stderr, ra.reps) == (rb.mean_ari, rb.stderr, rb.reps)

    def test_report_schema(self, tmp_path):
        report = run_monte_carlo(self._tiny_config())
        path = tmp_path / "report.csv"
        save_report(report, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "rho,contraction,method,mean_ari,stderr,reps"
        assert len(lines) == 1 + len(report.rows)

    def test_parity_with_direct_library_calls(self):
        # one cell, one replicate, pamk only: driver output equals a direct call
        cfg = MonteCarloConfig(rho_grid=(1.0,), contraction_levels=("blocks",),
                               replicates=1, seed=7, methods=("pamk_dist",))
        report = run_monte_carlo(cfg)
        from gclust.util import derive_seed
        B1, B2 = default_block_patterns()
        spec = BlockModelSpec([B1, B2], m=cfg.m, schedule=np.asarray(cfg.schedule), rho=1.0)
        gs = simulate_block_poisson(spec, seed=derive_seed(7, 0, 0))
        gs = contract_vertices(gs, block_contraction(spec))
        _, labels = pamk(pairwise_frobenius(gs), [k for k in cfg.pamk_ks])
        expected = adjusted_rand_index(np.asarray(cfg.schedule), labels)
        assert report.rows[0].mean_ari == expected

    def test_config_json_round_trip(self, tmp_path):
        cfg = self._tiny_config()
        path = tmp_path / "config.json"
        cfg.to_json(path)
        back = MonteCarloConfig.from_json(path)
        assert back == cfg


class TestCommunityPair:
    def test_intended_communities_hold(self):
        M_tilde, M_bar = community_pair(kappa=0.1)
        strong = 1.0 / 1.21
        for i, j in ((1, 6), (2, 3), (4, 5)):
            assert np.isclose(M_tilde[i - 1, j - 1], strong)
        for i, j in ((1, 2), (3, 4), (5, 6)):
            assert np.isclose(M_bar[i - 1, j - 1], strong)

    def test_same_total_mass_and_spectrum(self):
        M_tilde, M_bar = community_pair(kappa=0.1)
        assert np.isclose(M_tilde.sum(), M_bar.sum())
        assert np.allclose(np.linalg.eigvalsh(M_tilde), np.linalg.eigvalsh(M_bar))

    def test_two_pattern_matrix_rank_two(self):
        dm, labels = two_pattern_matrix(kappa=0.1)
        assert dm.X.shape == (36, 10)
        sv = singular_values(dm.X)
        assert sv[2] / sv[0] < 1e-12
        assert labels.tolist() == [1] * 5 + [2] * 5
        assert np.allclose(dm.N, 12.0)
