import numpy as np
import pytest
from oracles import random_chain

from liftcs.lifting import (
    Filter,
    LiftingChain,
    LiftingStage,
    apply_predict,
    apply_update,
    compose_filterbank,
    filterbank_from_csv,
    filterbank_to_csv,
    forward_1d,
    inverse_1d,
    lazy_merge,
    lazy_split,
    reflect_index,
    transpose_inverse_1d,
)

LEGALL = LiftingChain.single([0.5, 0.5], [0.25, 0.25])
LAZY_CHAIN = LiftingChain.single([0.0, 0.0], [0.0, 0.0])


def dense_inverse(length, chain):
    """Matrix of inverse_1d built column by column."""
    ne = (length + 1) // 2
    cols = []
    for j in range(length):
        e = np.zeros(length)
        e[j] = 1.0
        cols.append(inverse_1d(e[:ne], e[ne:], chain))
    return np.column_stack(cols)


def test_stage_rejects_odd_length():
    with pytest.raises(ValueError):
        LiftingStage([1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        LiftingStage([0.5, 0.5], [0.1, 0.2, 0.3])


def test_stage_rejects_non_finite():
    with pytest.raises(ValueError):
        LiftingStage([np.nan, 0.5], [0.25, 0.25])


def test_chain_must_be_non_empty():
    with pytest.raises(ValueError):
        LiftingChain(())


def test_reflect_index():
    np.testing.assert_array_equal(reflect_index(np.array([-2, -1, 0, 5, 6, 7]), 6), [2, 1, 0, 5, 4, 3])


@pytest.mark.parametrize(
    "x,even,odd",
    [([1, 2, 3, 4], [1, 3], [2, 4]), ([1, 2, 3, 4, 5], [1, 3, 5], [2, 4])],
)
def test_lazy_split_examples(x, even, odd):
    e, o = lazy_split(x)
    np.testing.assert_array_equal(e, even)
    np.testing.assert_array_equal(o, odd)


def test_lazy_merge_examples():
    np.testing.assert_array_equal(lazy_merge([1, 3], [2, 4]), [1, 2, 3, 4])
    np.testing.assert_array_equal(lazy_merge([7], []), [7])


def test_lazy_merge_rejects_bad_lengths():
    with pytest.raises(ValueError):
        lazy_merge([1], [2, 3])


def test_lazy_round_trip_random():
    rng = np.random.default_rng(2)
    for _ in range(100):
        x = rng.normal(size=rng.integers(2, 66))
        np.testing.assert_array_equal(lazy_merge(*lazy_split(x)), x)


def test_predict_ramp_example():
    e, o = lazy_split(np.arange(6.0))
    np.testing.assert_allclose(apply_predict(e, o, [0.5, 0.5]), [0, 0, 1])


def test_predict_index_example():
    e, o = lazy_split([1.0, 2, 3, 4])
    np.testing.assert_allclose(apply_predict(e, o, [0, 1]), [-1, 1])


def test_predict_constant_annihilated():
    rng = np.random.default_rng(3)
    t = rng.uniform(-1, 1, 4)
    t /= t.sum()
    e, o = lazy_split(np.full(11, 3.7))
    np.testing.assert_allclose(apply_predict(e, o, t), 0, atol=1e-12)


def test_update_examples():
    np.testing.assert_allclose(apply_update([1.0, 1.0], [2.0, 2.0], [0.25, 0.25]), [2, 2])
    even = np.array([4.0, 5.0, 6.0])
    np.testing.assert_array_equal(apply_update(even, [1.0, 2.0], [0.0, 0.0]), even)


def test_forward_constant_legall():
    a, d = forward_1d([5.0, 5, 5, 5], LEGALL)
    np.testing.assert_allclose(d, 0)
    np.testing.assert_allclose(a, 5)


def test_forward_ramp_interior_detail_zero():
    _, d = forward_1d(np.arange(20.0), LEGALL)
    np.testing.assert_allclose(d[:-1], 0, atol=1e-12)


def test_perfect_reconstruction_random():
    rng = np.random.default_rng(4)
    for _ in range(100):
        chain = random_chain(rng)
        x = rng.normal(size=rng.integers(2, 257))
        rec = inverse_1d(*forward_1d(x, chain), chain)
        assert np.linalg.norm(rec - x) <= 1e-12 * np.linalg.norm(x) * 10


def test_perfect_reconstruction_legall_lengths():
    rng = np.random.default_rng(5)
    for n in range(2, 130):
        x = rng.normal(size=n)
        np.testing.assert_allclose(inverse_1d(*forward_1d(x, LEGALL), LEGALL), x, rtol=0, atol=1e-12)


def test_forward_broadcasts_over_columns():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(9, 4))
    a, d = forward_1d(x, LEGALL)
    for j in range(4):
        aj, dj = forward_1d(x[:, j], LEGALL)
        np.testing.assert_allclose(a[:, j], aj)
        np.testing.assert_allclose(d[:, j], dj)


def test_inverse_rejects_inconsistent_lengths():
    with pytest.raises(ValueError):
        inverse_1d(np.zeros(2), np.zeros(4), LEGALL)


def test_transpose_dot_test():
    rng = np.random.default_rng(7)
    for _ in range(50):
        chain = LEGALL if rng.random() < 0.5 else random_chain(rng)
        n = int(rng.integers(2, 65))
        ne = (n + 1) // 2
        a, d, y = rng.normal(size=ne), rng.normal(size=n - ne), rng.normal(size=n)
        lhs = inverse_1d(a, d, chain) @ y
        aa, dd = transpose_inverse_1d(y, chain)
        rhs = a @ aa + d @ dd
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_transpose_of_lazy_is_split():
    x = np.arange(7.0)
    a, d = transpose_inverse_1d(x, LAZY_CHAIN)
    e, o = lazy_split(x)
    np.testing.assert_array_equal(a, e)
    np.testing.assert_array_equal(d, o)


def test_double_transpose_equals_inverse():
    rng = np.random.default_rng(8)
    for _ in range(10):
        chain = random_chain(rng)
        n = int(rng.integers(2, 40))
        mat = dense_inverse(n, chain)
        cols = [np.concatenate(transpose_inverse_1d(np.eye(n)[j], chain)) for j in range(n)]
        transpose = np.column_stack(cols)
        np.testing.assert_allclose(transpose.T, mat, atol=1e-10)


def test_predict_support_is_lt_nearest_evens():
    n_full = 40
    for lt in (2, 4, 6):
        t = np.arange(1.0, lt + 1)
        ne = n_full // 2
        n = 10
        touched = set()
        for j in range(ne):
            e = np.zeros(ne)
            e[j] = 1.0
            if apply_predict(e, np.zeros(ne), t)[n] != 0:
                touched.add(2 * j)
        nearest = sorted(range(0, n_full, 2), key=lambda p: abs(p - (2 * n + 1)))[:lt]
        assert touched == set(nearest)


def test_update_support():
    rng = np.random.default_rng(11)
    n_full, n = 60, 15
    for ls in (2, 4, 6):
        chain = LiftingChain.single(rng.uniform(0.1, 1, 2), rng.uniform(0.1, 1, ls))
        touched = set()
        for j in range(n_full):
            x = np.zeros(n_full)
            x[j] = 1.0
            if forward_1d(x, chain)[0][n] != 0:
                touched.add(j)
        assert touched == set(range(2 * n - ls, 2 * n + ls + 1))


def test_legall_filterbank():
    bank = compose_filterbank(LEGALL)
    np.testing.assert_allclose(bank.h0.taps, [-1 / 8, 1 / 4, 3 / 4, 1 / 4, -1 / 8])
    np.testing.assert_allclose(bank.h1.taps, [-1 / 2, 1, -1 / 2])


def test_published_design_filterbank():
    bank = compose_filterbank(LiftingChain.single([0.5028, 0.4941], [0.2858, 0.2790]))
    np.testing.assert_allclose(bank.h0.taps, [-0.1412, 0.2858, 0.7185, 0.2790, -0.1403], atol=1.5e-4)
    np.testing.assert_allclose(bank.h1.taps, [-0.4941, 1.0, -0.5028], atol=1e-12)


def test_lazy_filterbank():
    bank = compose_filterbank(LAZY_CHAIN)
    assert bank.h0 == Filter(0, [1.0])
    assert bank.h1 == Filter(-1, [1.0])


def _analysis(x, h, phase):
    """``out[n] = sum_j h[j] x[2n + phase - j]`` with symmetric extension."""
    n_out = (len(x) + 1 - phase) // 2
    out = np.zeros(n_out)
    for n in range(n_out):
        for k, c in zip(h.support, h.taps):
            out[n] += c * x[reflect_index(2 * n - k, len(x))]
    return out


def test_filterbank_matches_lifting_interior():
    rng = np.random.default_rng(9)
    for _ in range(10):
        chain = random_chain(rng)
        bank = compose_filterbank(chain)
        x = rng.normal(size=64)
        a, d = forward_1d(x, chain)
        fa, fd = _analysis(x, bank.h0, 0), _analysis(x, bank.h1, 0)
        margin = max(len(bank.h0.taps), len(bank.h1.taps))
        np.testing.assert_allclose(fa[margin:-margin], a[margin:-margin], atol=1e-10)
        np.testing.assert_allclose(fd[margin:-margin], d[margin:-margin], atol=1e-10)


def test_synthesis_filters_reconstruct_interior():
    rng = np.random.default_rng(10)
    chain = random_chain(rng, 2)
    bank = compose_filterbank(chain)
    x = rng.normal(size=64)
    a, d = forward_1d(x, chain)
    # x[k] = sum_n a[n] f0[k - 2n] + d[n] f1[k - 2n]
    rec = np.zeros(64)
    for coeff, filt in ((a, bank.f0), (d, bank.f1)):
        for n, c in enumerate(coeff):
            for j, f in zip(filt.support, filt.taps):
                if 0 <= 2 * n + j < 64:
                    rec[2 * n + j] += c * f
    margin = 20
    np.testing.assert_allclose(rec[margin:-margin], x[margin:-margin], atol=1e-10)


def test_filterbank_csv_round_trip():
    bank = compose_filterbank(LEGALL)
    text = filterbank_to_csv(bank, prefix="col_")
    back = filterbank_from_csv(text.splitlines())
    assert set(back) == {"col_h0", "col_h1", "col_f0", "col_f1"}
    for name, filt in bank.items():
        assert back["col_" + name] == filt
