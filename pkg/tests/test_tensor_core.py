import numpy as np
import pytest

from bdsense import tensor_core as tc
from bdsense.errors import InvalidModeError, ShapeError


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class TestUnfoldFold:
    def test_unfold_mode0_enumeration(self):
        # 2x2x2 tensor holding 1..8 with the first index fastest
        a = tc.fold(np.array([[1, 3, 5, 7], [2, 4, 6, 8]]), 0, (2, 2, 2))
        assert np.array_equal(tc.unfold(a, 0), [[1, 3, 5, 7], [2, 4, 6, 8]])

    def test_unfold_mode1_enumeration(self):
        a = tc.fold(np.array([[1, 3, 5, 7], [2, 4, 6, 8]]), 0, (2, 2, 2))
        assert np.array_equal(tc.unfold(a, 1), [[1, 2, 5, 6], [3, 4, 7, 8]])

    def test_linear_layout_first_index_fastest(self):
        a = np.arange(1, 9).reshape(2, 2, 2, order="F")
        assert np.array_equal(tc.unfold(a, 0), [[1, 3, 5, 7], [2, 4, 6, 8]])

    def test_round_trip_all_modes(self, rng):
        a = crandn(rng, 3, 4, 5)
        for n in range(3):
            assert np.array_equal(tc.fold(tc.unfold(a, n), n, a.shape), a)

    def test_fold_degenerate(self):
        t = tc.fold(np.array([[1.0]]), 0, (1, 1, 1))
        assert t.shape == (1, 1, 1) and t[0, 0, 0] == 1.0

    def test_mode_out_of_range(self, rng):
        a = crandn(rng, 2, 3)
        with pytest.raises(InvalidModeError):
            tc.unfold(a, 2)
        with pytest.raises(InvalidModeError):
            tc.fold(tc.unfold(a, 0), 5, a.shape)

    def test_fold_shape_mismatch(self):
        with pytest.raises(ShapeError):
            tc.fold(np.ones((2, 3)), 0, (2, 2, 2))


class TestModeProduct:
    def test_identity_factor(self, rng):
        a = crandn(rng, 2, 3, 4)
        for n in range(3):
            assert np.allclose(tc.mode_product(a, np.eye(a.shape[n]), n), a)

    def test_swap_slices(self):
        a = np.arange(1, 9).reshape(2, 2, 2, order="F")
        swapped = tc.mode_product(a, np.array([[0, 1], [1, 0]]), 0)
        assert np.array_equal(swapped[0], a[1])
        assert np.array_equal(swapped[1], a[0])

    def test_distinct_modes_commute(self, rng):
        a = crandn(rng, 2, 3, 4)
        b = crandn(rng, 5, 2)
        c = crandn(rng, 6, 3)
        lhs = tc.mode_product(tc.mode_product(a, b, 0), c, 1)
        rhs = tc.mode_product(tc.mode_product(a, c, 1), b, 0)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ShapeError):
            tc.mode_product(crandn(rng, 2, 3), crandn(rng, 4, 4), 0)

    def test_matches_unfolded_product(self, rng):
        a = crandn(rng, 2, 3, 4)
        b = crandn(rng, 5, 3)
        assert np.allclose(tc.unfold(tc.mode_product(a, b, 1), 1),
                           b @ tc.unfold(a, 1))


class TestProducts:
    def test_kron_ordering(self):
        out = tc.kronecker(np.array([[1], [2]]), np.array([[1], [10]]))
        assert np.array_equal(out, [[1], [10], [2], [20]])

    def test_vec_abc_identity(self, rng):
        a, b, c = crandn(rng, 2, 3), crandn(rng, 3, 2), crandn(rng, 2, 2)
        lhs = tc.vec(a @ b @ c)
        rhs = tc.kronecker(c.T, a) @ tc.vec(b)
        assert np.allclose(lhs, rhs, rtol=1e-13)

    def test_vec_diag_identity(self, rng):
        # load-bearing for the delay/Doppler LS updates
        a, b, c = crandn(rng, 3, 2), crandn(rng, 2), crandn(rng, 2, 3)
        lhs = tc.vec(a @ np.diag(b) @ c)
        rhs = tc.khatri_rao(c.T, a) @ b
        assert np.allclose(lhs, rhs, rtol=1e-13)

    def test_khatri_rao_is_columnwise_kron(self, rng):
        a, b = crandn(rng, 3, 4), crandn(rng, 2, 4)
        out = tc.khatri_rao(a, b)
        for j in range(4):
            assert np.allclose(out[:, j], np.kron(a[:, j], b[:, j]))

    def test_khatri_rao_column_mismatch(self, rng):
        with pytest.raises(ShapeError):
            tc.khatri_rao(crandn(rng, 3, 4), crandn(rng, 2, 3))

    def test_hadamard(self, rng):
        a, b = crandn(rng, 2, 3), crandn(rng, 2, 3)
        assert np.allclose(tc.hadamard(a, b), a * b)
        with pytest.raises(ShapeError):
            tc.hadamard(a, crandn(rng, 3, 2))

    def test_unvec_round_trip(self, rng):
        a = crandn(rng, 3, 5)
        assert np.array_equal(tc.unvec(tc.vec(a), 3, 5), a)
        with pytest.raises(ShapeError):
            tc.unvec(tc.vec(a), 4, 4)


class TestPinv:
    def test_identity(self):
        assert np.allclose(tc.pinv(np.eye(4)), np.eye(4))

    def test_orthonormal_rows(self, rng):
        q, _ = np.linalg.qr(crandn(rng, 5, 3))
        m = q.conj().T  # 3x5 with orthonormal rows
        assert np.allclose(tc.pinv(m), m.conj().T, atol=1e-12)

    def test_rank_one(self):
        m = np.ones((2, 2))
        out, rank = tc.pinv(m, return_rank=True)
        assert rank == 1
        assert np.allclose(out, 0.25 * np.ones((2, 2)))

    def test_penrose_identities(self, rng):
        m = crandn(rng, 6, 4) @ crandn(rng, 4, 5)  # rank <= 4
        p = tc.pinv(m)
        assert np.allclose(m @ p @ m, m, atol=1e-10 * np.linalg.norm(m))
        assert np.allclose(p @ m @ p, p, atol=1e-10 * np.linalg.norm(p))
        assert np.allclose((m @ p).conj().T, m @ p, atol=1e-10)
        assert np.allclose((p @ m).conj().T, p @ m, atol=1e-10)


class TestCore:
    def test_degenerate(self):
        core = tc.build_core(1)
        assert core.shape == (1, 1, 1, 1) and core[0, 0, 0, 0] == 1.0

    def test_mode2_unfolding_is_identity(self):
        core = tc.build_core(2)
        assert np.array_equal(tc.unfold(core, 2), np.eye(16))

    def test_mode3_slices(self):
        # each row of the mode-3 unfolding has exactly N^2 ones, all entries in {0,1}
        core = tc.build_core(2)
        m = tc.unfold(core, 3)
        assert set(np.unique(m.real)) <= {0.0, 1.0}
        assert np.all(m.imag == 0)
        assert np.array_equal(np.count_nonzero(m, axis=1), [4, 4, 4, 4])


class TestTuckerConvention:
    """Locks the unfolding convention of the whole package."""

    @pytest.mark.parametrize("seed", range(4))
    def test_tucker_unfoldings(self, seed):
        rng = np.random.default_rng(seed)
        core = crandn(rng, 2, 3, 4, 2)
        factors = [crandn(rng, 4, 2), crandn(rng, 5, 3), crandn(rng, 3, 4),
                   crandn(rng, 2, 2)]
        t = core
        for n, u in enumerate(factors):
            t = tc.mode_product(t, u, n)
        for n in range(4):
            rest = [factors[m] for m in range(4) if m != n][::-1]
            chain = rest[0]
            for r in rest[1:]:
                chain = tc.kronecker(chain, r)
            lhs = tc.unfold(t, n)
            rhs = factors[n] @ tc.unfold(core, n) @ chain.T
            err = np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)
            assert err <= 1e-12
