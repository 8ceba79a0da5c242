"""张量基础运算测试：Khatri-Rao、展开/折叠、Kruskal 重构与掩码范数。"""

import itertools

import numpy as np
import pytest

from core.errors import DimensionError, InputError
from core.tensor_core import (
    FactorSet,
    check_finite,
    dense_tensor,
    khatri_rao,
    khatri_rao_chain,
    kruskal_reconstruct,
    kruskal_slice,
    masked_frobenius,
    mode_fold,
    mode_unfold,
    observation_mask,
)


def _loop_reconstruct(mats):
    shape = tuple(m.shape[0] for m in mats)
    out = np.zeros(shape)
    for index in itertools.product(*(range(s) for s in shape)):
        out[index] = sum(np.prod([m[i, r] for m, i in zip(mats, index)]) for r in range(mats[0].shape[1]))
    return out


def _random_factors(rng, shape, rank):
    return FactorSet(tuple(rng.standard_normal((s, rank)) for s in shape))


class TestKhatriRao:
    def test_small_example(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[5.0, 6.0], [7.0, 8.0]])
        expected = np.array([[5.0, 12.0], [7.0, 16.0], [15.0, 24.0], [21.0, 32.0]])
        np.testing.assert_allclose(khatri_rao(a, b), expected)

    def test_columns_are_kronecker_products(self, rng):
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((5, 4))
        result = khatri_rao(a, b)
        assert result.shape == (15, 4)
        for r in range(4):
            np.testing.assert_allclose(result[:, r], np.kron(a[:, r], b[:, r]))

    def test_rank_mismatch(self):
        with pytest.raises(DimensionError):
            khatri_rao(np.ones((2, 2)), np.ones((2, 3)))

    def test_chain_without_remaining_matrices_is_ones_row(self):
        chain = khatri_rao_chain([np.ones((4, 3))], skip=0)
        np.testing.assert_array_equal(chain, np.ones((1, 3)))


class TestUnfold:
    def test_fold_inverts_unfold(self, rng):
        x = rng.standard_normal((3, 4, 5))
        for n in range(3):
            unfolded = mode_unfold(x, n)
            assert unfolded.shape == (x.shape[n], x.size // x.shape[n])
            np.testing.assert_array_equal(mode_fold(unfolded, n, x.shape), x)

    def test_unfold_matches_khatri_rao_chain(self, rng):
        factors = _random_factors(rng, (3, 4, 5), 2)
        x = kruskal_reconstruct(factors)
        for n in range(3):
            expected = factors.matrices[n] @ khatri_rao_chain(factors.matrices, skip=n).T
            np.testing.assert_allclose(mode_unfold(x, n), expected, atol=1e-12)

    def test_mode_out_of_range(self):
        with pytest.raises(DimensionError):
            mode_unfold(np.zeros((2, 2)), 2)

    def test_fold_size_mismatch(self):
        with pytest.raises(DimensionError):
            mode_fold(np.zeros((2, 5)), 0, (2, 2))


class TestKruskal:
    def test_matches_loop_oracle(self, rng):
        factors = _random_factors(rng, (3, 4, 2), 3)
        np.testing.assert_allclose(kruskal_reconstruct(factors), _loop_reconstruct(factors.matrices), atol=1e-12)

    def test_rank_one_outer_product(self):
        a = np.array([[1.0], [2.0]])
        b = np.array([[3.0], [4.0], [5.0]])
        np.testing.assert_allclose(kruskal_reconstruct([a, b]), np.outer(a[:, 0], b[:, 0]))

    def test_slice_equals_reconstruction_of_one_row(self, rng):
        factors = _random_factors(rng, (3, 4, 6), 2)
        full = kruskal_reconstruct(factors)
        for t in range(6):
            np.testing.assert_allclose(
                kruskal_slice(factors.nontemporal, factors.temporal[t]), full[..., t], atol=1e-12
            )

    def test_slice_rank_mismatch(self):
        with pytest.raises(DimensionError):
            kruskal_slice([np.ones((2, 3))], np.ones(2))

    def test_normalized_preserves_reconstruction(self, rng):
        factors = _random_factors(rng, (4, 3, 5), 3)
        normalized = factors.normalized()
        np.testing.assert_allclose(kruskal_reconstruct(normalized), kruskal_reconstruct(factors), atol=1e-10)
        for m in normalized.nontemporal:
            np.testing.assert_allclose(np.linalg.norm(m, axis=0), np.ones(3))

    def test_normalized_keeps_zero_column(self):
        mats = (np.array([[0.0, 3.0], [0.0, 4.0]]), np.array([[1.0, 1.0]]))
        normalized = FactorSet(mats).normalized()
        np.testing.assert_array_equal(normalized.matrices[0][:, 0], [0.0, 0.0])
        np.testing.assert_allclose(normalized.matrices[1], [[1.0, 5.0]])

    def test_factor_set_rejects_mixed_ranks(self):
        with pytest.raises(DimensionError):
            FactorSet((np.ones((2, 2)), np.ones((3, 3))))

    def test_copy_is_independent(self, rng):
        factors = _random_factors(rng, (2, 3), 2)
        clone = factors.copy()
        clone.matrices[0][0, 0] = 99.0
        assert factors.matrices[0][0, 0] != 99.0


class TestDenseAndMask:
    def test_dense_tensor_row_major(self):
        x = dense_tensor(range(6), (2, 3))
        assert x[1, 0] == 3.0

    def test_dense_tensor_size_mismatch(self):
        with pytest.raises(DimensionError):
            dense_tensor([1.0, 2.0], (2, 2))

    def test_dense_tensor_degenerate_shape(self):
        with pytest.raises(InputError):
            dense_tensor([], (0, 2))

    def test_observation_mask(self):
        mask = observation_mask([1, 0, 0, 1], (2, 2))
        assert mask.dtype == bool
        assert mask[0, 0] and mask[1, 1] and not mask[0, 1]

    def test_masked_frobenius_ignores_unobserved(self):
        x = np.array([[3.0, 100.0], [4.0, -100.0]])
        mask = np.array([[True, False], [True, False]])
        assert masked_frobenius(x, mask) == pytest.approx(5.0)

    def test_check_finite_only_inside_mask(self):
        x = np.array([1.0, np.nan])
        check_finite("x", x, np.array([True, False]))
        with pytest.raises(InputError):
            check_finite("x", x)
