"""Core data model: grid, probability maps, metrics, response records."""

import numpy as np
import pytest

from pairseg.data import (
    AggregatedCounts,
    Block,
    PairSet,
    ResponseDataset,
    aggregate_responses,
    validate_dataset,
)
from pairseg.errors import ContractViolation
from pairseg.grid import GridSpec
from pairseg.maps import (
    ProbMaps,
    align_labels,
    argmax_segmap,
    entropy_map,
    mae_aligned,
    mean_entropy,
    onehot_maps,
    prob_same,
    uniform_maps,
)

from conftest import random_probmaps


class TestGridSpec:
    def test_odd_lattice(self):
        g = GridSpec(n=5, image_px=20)
        assert g.centering == "odd"
        assert list(g.lattice_coords()) == [-2, -1, 0, 1, 2]

    def test_even_lattice(self):
        g = GridSpec(n=4, image_px=16)
        assert g.centering == "even"
        assert list(g.lattice_coords()) == [-2, -1, 0, 1]

    def test_minimum_side(self):
        with pytest.raises(ContractViolation):
            GridSpec(n=2, image_px=8)

    def test_indivisible_image(self):
        with pytest.raises(ContractViolation):
            GridSpec(n=3, image_px=10)

    def test_regions_partition_image(self):
        g = GridSpec(n=4, image_px=8)
        seen = np.zeros((8, 8), dtype=int)
        for row in range(4):
            for col in range(4):
                rs, cs = g.cell_slices(col, row)
                seen[rs, cs] += 1
        assert (seen == 1).all()

    def test_mismatched_centering_flag(self):
        with pytest.raises(ContractViolation):
            GridSpec(n=5, image_px=20, centering="even")

    def test_centers(self):
        g = GridSpec(n=3, image_px=9)
        assert g.cell_center_px(0, 0) == (1.5, 1.5)
        assert g.cell_center_px(2, 1) == (7.5, 4.5)


class TestProbSame:
    def test_identical_onehot(self):
        assert prob_same([1, 0, 0], [1, 0, 0]) == 1.0

    def test_uniform_forces_third(self, rng):
        q = rng.dirichlet(np.ones(3))
        assert prob_same([1 / 3, 1 / 3, 1 / 3], q) == pytest.approx(1 / 3)

    def test_hand_value(self):
        # 0.6*0.2 + 0.4*0.8 = 0.12 + 0.32
        assert prob_same([0.6, 0.4], [0.2, 0.8]) == pytest.approx(0.44)

    def test_symmetry_and_range(self, rng):
        for _ in range(50):
            k = int(rng.integers(2, 6))
            p = rng.dirichlet(np.ones(k))
            q = rng.dirichlet(np.ones(k))
            v = prob_same(p, q)
            assert v == prob_same(q, p)
            assert 0.0 <= v <= 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            prob_same([0.5, 0.5], [1 / 3, 1 / 3, 1 / 3])

    def test_off_simplex_rejected(self):
        with pytest.raises(ContractViolation):
            prob_same([0.7, 0.7], [0.5, 0.5])


class TestProbMaps:
    def test_simplex_enforced(self):
        bad = np.full((2, 3, 3), 0.4)
        with pytest.raises(ContractViolation):
            ProbMaps(bad)

    def test_range_enforced(self):
        bad = np.zeros((2, 3, 3))
        bad[0] = 1.2
        bad[1] = -0.2
        with pytest.raises(ContractViolation):
            ProbMaps(bad)

    def test_immutable(self):
        p = uniform_maps(2, 3)
        with pytest.raises(ValueError):
            p.values[0, 0, 0] = 0.9

    def test_permuted_roundtrip(self, rng):
        p = ProbMaps(random_probmaps(rng, 3, 4))
        q = p.permuted([2, 0, 1])
        assert np.allclose(q.values[0], p.values[2])


class TestArgmaxSegmap:
    def test_basic(self):
        v = np.zeros((3, 1, 1))
        v[:, 0, 0] = [0.2, 0.7, 0.1]
        assert argmax_segmap(ProbMaps(v)).labels[0, 0] == 1

    def test_tie_breaks_low(self):
        v = np.zeros((2, 1, 1))
        v[:, 0, 0] = [0.5, 0.5]
        assert argmax_segmap(ProbMaps(v)).labels[0, 0] == 0

    def test_onehot_roundtrip(self, rng):
        labels = rng.integers(0, 3, size=(5, 5))
        p = onehot_maps(labels, 3)
        assert (argmax_segmap(p).labels == labels).all()

    def test_permutation_equivariance(self, rng):
        v = random_probmaps(rng, 3, 6)
        p = ProbMaps(v)
        perm = (2, 0, 1)
        lab = argmax_segmap(p).labels
        lab_perm = argmax_segmap(p.permuted(perm)).labels
        # new map j holds old map perm[j]: old label L appears as perm^-1(L)
        inv = np.argsort(perm)
        unique = np.sort(v, axis=0)[-1] - np.sort(v, axis=0)[-2] > 1e-12
        assert (lab_perm[unique] == inv[lab][unique]).all()


class TestEntropy:
    def test_onehot_zero(self):
        p = onehot_maps(np.zeros((3, 3), dtype=int), 2)
        assert entropy_map(p).max() == 0.0

    def test_half_half(self):
        p = uniform_maps(2, 3)
        assert entropy_map(p) == pytest.approx(np.log(2))

    def test_uniform_three(self):
        p = uniform_maps(3, 4)
        assert entropy_map(p) == pytest.approx(np.log(3))

    def test_range(self, rng):
        p = ProbMaps(random_probmaps(rng, 4, 5))
        h = entropy_map(p)
        assert (h >= 0).all() and (h <= np.log(4) + 1e-12).all()

    def test_mean_entropy_deterministic(self):
        p = onehot_maps(np.zeros((4, 4), dtype=int), 2)
        assert mean_entropy(p) == (0.0, 0.0)

    def test_mean_entropy_constant(self):
        mean, se = mean_entropy(uniform_maps(2, 4))
        assert mean == pytest.approx(np.log(2))
        assert se == pytest.approx(0.0)

    def test_mean_entropy_mixed(self):
        # half the cells one-hot, half (0.5, 0.5): direct average oracle
        n = 4
        v = np.zeros((2, n, n))
        v[0, : n // 2] = 1.0
        v[:, n // 2 :] = 0.5
        p = ProbMaps(v)
        h = entropy_map(p).ravel()
        expected_mean = h.mean()
        assert expected_mean == pytest.approx(np.log(2) / 2)
        mean, se = mean_entropy(p)
        assert mean == pytest.approx(expected_mean)
        assert se == pytest.approx(h.std(ddof=1) / np.sqrt(h.size))


class TestAlignment:
    def test_identity(self, rng):
        p = ProbMaps(random_probmaps(rng, 3, 4))
        assert align_labels(p, p) == (0, 1, 2)

    def test_swap(self, rng):
        p = ProbMaps(random_probmaps(rng, 2, 4))
        swapped = p.permuted([1, 0])
        assert align_labels(swapped, p) == (1, 0)

    def test_constructed_permutation_recovered(self, rng):
        p = ProbMaps(random_probmaps(rng, 3, 5))
        perm = (2, 0, 1)
        q = p.permuted(perm)
        # q map j = p map perm[j]; aligning q to p must invert that
        got = align_labels(q, p)
        assert tuple(np.argsort(perm)) == got
        assert mae_aligned(q, p) == pytest.approx(0.0, abs=1e-12)

    def test_mae_zero_any_permutation(self, rng):
        p = ProbMaps(random_probmaps(rng, 4, 4))
        for perm in [(1, 0, 2, 3), (3, 2, 1, 0), (2, 3, 0, 1)]:
            assert mae_aligned(p.permuted(perm), p) == pytest.approx(0.0, abs=1e-12)

    def test_single_cell_value(self):
        p = ProbMaps(np.array([[[1.0]], [[0.0]]]))
        ref = ProbMaps(np.array([[[0.5]], [[0.5]]]))
        # |1-0.5| + |0-0.5| = 1.0 per the hand oracle
        assert mae_aligned(p, ref) == pytest.approx(1.0)

    def test_k_bound(self):
        p = uniform_maps(9, 3)
        with pytest.raises(ContractViolation):
            align_labels(p, p)
        # explicit override allows k = 9
        assert align_labels(p, p, max_k=9) == tuple(range(9))

    def test_shape_mismatch(self, rng):
        a = ProbMaps(random_probmaps(rng, 2, 4))
        b = ProbMaps(random_probmaps(rng, 3, 4))
        with pytest.raises(ContractViolation):
            mae_aligned(a, b)


class TestPairSet:
    def test_canonicalized(self):
        ps = PairSet(np.array([[5, 2], [1, 3]]))
        assert ps.pairs.tolist() == [[2, 5], [1, 3]]

    def test_rejects_self_pair(self):
        with pytest.raises(ContractViolation):
            PairSet(np.array([[2, 2]]))

    def test_rejects_duplicates(self):
        with pytest.raises(ContractViolation):
            PairSet(np.array([[1, 2], [2, 1]]))


def _dataset(grid, block_specs):
    blocks = [
        Block(pair_set=PairSet(np.array(pairs)), responses=np.array(resp))
        for pairs, resp in block_specs
    ]
    return ResponseDataset(blocks=tuple(blocks), grid=grid, image_id="test")


class TestAggregateResponses:
    def test_mean_across_blocks(self):
        g = GridSpec(n=3, image_px=9)
        d = _dataset(g, [([[0, 1]], [1]), ([[0, 1]], [1]), ([[0, 1]], [0]), ([[0, 1]], [1])])
        agg = aggregate_responses(d)
        assert agg.entries[(0, 1)] == (0.75, 4)

    def test_single_observation(self):
        g = GridSpec(n=3, image_px=9)
        agg = aggregate_responses(_dataset(g, [([[4, 7]], [1])]))
        assert agg.entries[(4, 7)] == (1.0, 1)

    def test_unordered_merge(self):
        g = GridSpec(n=3, image_px=9)
        d = _dataset(g, [([[2, 5]], [1]), ([[5, 2]], [0])])
        agg = aggregate_responses(d)
        assert agg.entries[(2, 5)] == (0.5, 2)

    def test_empty_dataset(self):
        g = GridSpec(n=3, image_px=9)
        d = ResponseDataset(blocks=(), grid=g)
        assert len(aggregate_responses(d)) == 0

    def test_matches_bruteforce(self, rng):
        g = GridSpec(n=4, image_px=8)
        records = []
        blocks = []
        for _ in range(6):
            m = int(rng.integers(1, 30))
            pairs = []
            seen = set()
            while len(pairs) < m:
                i, j = rng.integers(0, 16, size=2)
                key = (min(i, j), max(i, j))
                if i != j and key not in seen:
                    seen.add(key)
                    pairs.append([i, j])
            resp = rng.integers(0, 2, size=m)
            blocks.append((pairs, resp))
            records.extend(
                ((min(i, j), max(i, j)), r) for (i, j), r in zip(pairs, resp)
            )
        agg = aggregate_responses(_dataset(g, blocks))
        # brute-force oracle: count ratios over the flat record list
        for key in {k for k, _ in records}:
            rs = [r for k2, r in records if k2 == key]
            k_rate, n_obs = agg.entries[key]
            assert n_obs == len(rs)
            assert k_rate == pytest.approx(sum(rs) / len(rs))

    def test_counts_invariant(self):
        with pytest.raises(ContractViolation):
            AggregatedCounts(entries={(0, 1): (0.3, 2)})  # 0.6 is not a count


class TestValidateDataset:
    def test_clean(self):
        g = GridSpec(n=3, image_px=9)
        assert validate_dataset(_dataset(g, [([[0, 1], [2, 3]], [1, 0])])) == []

    def test_identical_pair_flagged(self):
        g = GridSpec(n=3, image_px=9)
        ps = PairSet.unchecked(np.array([[4, 4]]))
        d = ResponseDataset(
            blocks=(Block.unchecked(ps, np.array([1])),), grid=g
        )
        v = validate_dataset(d)
        assert len(v) == 1 and v[0].kind == "identical_pair"

    def test_out_of_grid_flagged(self):
        g = GridSpec(n=3, image_px=9)
        ps = PairSet.unchecked(np.array([[0, 9]]))  # 9 == n^2 is out of range
        d = ResponseDataset(blocks=(Block.unchecked(ps, np.array([0])),), grid=g)
        v = validate_dataset(d)
        assert len(v) == 1 and v[0].kind == "out_of_grid"

    def test_length_mismatch_flagged(self):
        g = GridSpec(n=3, image_px=9)
        ps = PairSet.unchecked(np.array([[0, 1], [1, 2]]))
        d = ResponseDataset(blocks=(Block.unchecked(ps, np.array([1])),), grid=g)
        v = validate_dataset(d)
        assert any(x.kind == "length_mismatch" for x in v)
