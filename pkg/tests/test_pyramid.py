import numpy as np
import pytest

from liftcs.imaging import Image
from liftcs.lifting import LiftingChain, forward_1d
from liftcs.pyramid import (
    DecompositionPlan,
    SubbandTree,
    SynthesisOperator,
    forward_2d,
    inverse_2d,
    read_tree,
    subband_layout,
    synthesis_adjoint,
    synthesis_apply,
    write_tree,
)
from liftcs.standard import bior53, get_chain

LEGALL = bior53()
PLANS = [
    (strategy, levels, rule)
    for strategy in ("l-pyramid", "r-pyramid")
    for levels in (1, 2, 3)
    for rule in ("recursive", "latest-trio")
]


def plan(strategy="l-pyramid", levels=2, l_rule="recursive", chain=LEGALL):
    return DecompositionPlan.uniform(chain, levels=levels, strategy=strategy, l_rule=l_rule)


def layout(shape, p):
    return [(s.label, s.rows, s.cols) for s in subband_layout(shape, p)]


def test_l_pyramid_level_two_layout():
    got = subband_layout((8, 8), plan("l-pyramid", 2))
    assert [(s.label, s.row0, s.col0, s.rows, s.cols) for s in got] == [
        ("L2L2", 0, 0, 2, 2), ("L2H2", 0, 2, 2, 2), ("H2L2", 2, 0, 2, 2), ("H2H2", 2, 2, 2, 2),
        ("L2H1", 0, 4, 2, 4), ("H2H1", 2, 4, 2, 4),
        ("H1L2", 4, 0, 4, 2), ("H1H2", 4, 2, 4, 2),
        ("H1H1", 4, 4, 4, 4),
    ]
    assert sum(r * c for _, r, c in layout((8, 8), plan("l-pyramid", 2))) == 64


def test_l_pyramid_level_two_rules_agree():
    assert layout((8, 8), plan("l-pyramid", 2, "recursive")) == layout((8, 8), plan("l-pyramid", 2, "latest-trio"))


def test_r_pyramid_level_two_layout():
    assert layout((8, 8), plan("r-pyramid", 2)) == [
        ("LL2", 2, 2), ("LH2", 2, 2), ("HL2", 2, 2), ("HH2", 2, 2),
        ("LH1", 4, 4), ("HL1", 4, 4), ("HH1", 4, 4),
    ]


def test_single_level_strategies_coincide():
    lp = subband_layout((4, 4), plan("l-pyramid", 1))
    rp = subband_layout((4, 4), plan("r-pyramid", 1))
    assert len(lp) == len(rp) == 4
    assert [(s.row0, s.col0, s.rows, s.cols) for s in lp] == [(s.row0, s.col0, s.rows, s.cols) for s in rp]
    img = np.random.default_rng(0).normal(size=(4, 4))
    np.testing.assert_array_equal(forward_2d(img, plan("l-pyramid", 1)).coeffs,
                                  forward_2d(img, plan("r-pyramid", 1)).coeffs)


@pytest.mark.parametrize("strategy,levels,rule", PLANS)
def test_count_conservation_and_unique_labels(strategy, levels, rule):
    for shape in ((16, 16), (24, 40), (17, 23)):
        p = plan(strategy, levels, rule)
        subs = subband_layout(shape, p)
        assert sum(s.rows * s.cols for s in subs) == shape[0] * shape[1]
        labels = [s.label for s in subs]
        assert len(labels) == len(set(labels))
        cover = np.zeros(shape, dtype=int)
        for s in subs:
            cover[s.region] += 1
        assert np.all(cover == 1)


def test_too_many_levels_rejected():
    with pytest.raises(ValueError):
        subband_layout((8, 8), plan(levels=3))


def test_bad_strategy_rejected():
    with pytest.raises(ValueError):
        plan("q-pyramid")


def test_constant_image_details_vanish():
    tree = forward_2d(np.full((16, 16), 7.0), plan("l-pyramid", 2))
    for label, _, _, block in tree.subbands:
        if label == "L2L2":
            np.testing.assert_allclose(block, 7.0)
        else:
            np.testing.assert_allclose(block, 0.0, atol=1e-12)


@pytest.mark.parametrize("strategy,levels,rule", PLANS)
def test_perfect_reconstruction(strategy, levels, rule):
    rng = np.random.default_rng(1)
    for chain in (LEGALL, get_chain("db2")):
        p = plan(strategy, levels, rule, chain)
        for _ in range(3):
            img = rng.normal(size=(16, 16)) * 50
            rec = inverse_2d(forward_2d(img, p)).pixels
            assert np.linalg.norm(rec - img) <= 1e-10 * np.linalg.norm(img)


def test_perfect_reconstruction_odd_shape():
    rng = np.random.default_rng(2)
    img = rng.normal(size=(19, 13))
    p = plan("l-pyramid", 2)
    np.testing.assert_allclose(inverse_2d(forward_2d(img, p)).pixels, img, atol=1e-10)


def test_mixed_chains_round_trip():
    rng = np.random.default_rng(3)
    other = LiftingChain.single([0.6, 0.4], [0.3, 0.2])
    p = DecompositionPlan(LEGALL, other, levels=2)
    img = rng.normal(size=(16, 16))
    np.testing.assert_allclose(inverse_2d(forward_2d(img, p)).pixels, img, atol=1e-10)


def test_level_one_is_separable():
    rng = np.random.default_rng(4)
    col_chain = LiftingChain.single([0.6, 0.4], [0.3, 0.2])
    row_chain = LEGALL
    img = rng.normal(size=(16, 12))
    a, d = forward_1d(img, col_chain)
    cols = np.vstack([a, d])
    a, d = forward_1d(cols.T, row_chain)
    expected = np.vstack([a, d]).T
    got = forward_2d(img, DecompositionPlan(col_chain, row_chain, levels=1)).coeffs
    np.testing.assert_allclose(got, expected, atol=1e-12)


@pytest.mark.parametrize("strategy", ["l-pyramid", "r-pyramid"])
def test_synthesis_dot_test(strategy):
    rng = np.random.default_rng(5)
    for chain in (LEGALL, get_chain("db4")):
        p = plan(strategy, 2, chain=chain)
        for _ in range(5):
            s = rng.normal(size=256)
            y = rng.normal(size=(16, 16))
            lhs = np.sum(synthesis_apply(s, p, (16, 16)).pixels * y)
            rhs = s @ synthesis_adjoint(Image(y), p)
            assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


@pytest.mark.parametrize("strategy,levels,rule", PLANS)
def test_fast_operator_matches_reference(strategy, levels, rule):
    rng = np.random.default_rng(6)
    p = plan(strategy, levels, rule)
    op = SynthesisOperator(p, (16, 16))
    s = rng.normal(size=256)
    y = rng.normal(size=(16, 16))
    np.testing.assert_allclose(op.apply(s), synthesis_apply(s, p, (16, 16)).pixels, atol=1e-10)
    np.testing.assert_allclose(op.adjoint(y), synthesis_adjoint(Image(y), p), atol=1e-10)


def test_deepest_approximation_impulse():
    p = plan("l-pyramid", 2)
    s = np.zeros(64)
    s[0] = 1.0
    img = synthesis_apply(s, p, (8, 8))
    tree = forward_2d(img, p)
    np.testing.assert_allclose(tree.flatten(), s, atol=1e-12)
    # the footprint is the outer product of the 1-D two-level scaling functions
    e = np.zeros(2)
    e[0] = 1.0
    from liftcs.lifting import inverse_1d

    phi = inverse_1d(inverse_1d(e, np.zeros(2), LEGALL), np.zeros(4), LEGALL)
    np.testing.assert_allclose(img.pixels, np.outer(phi, phi), atol=1e-12)


def test_zero_vector_gives_zero_image():
    p = plan("r-pyramid", 2)
    assert np.all(synthesis_apply(np.zeros(64), p, (8, 8)).pixels == 0)


def test_flatten_from_vector_round_trip():
    rng = np.random.default_rng(7)
    p = plan("l-pyramid", 3)
    v = rng.normal(size=24 * 32)
    tree = SubbandTree.from_vector(v, p, (24, 32))
    np.testing.assert_array_equal(tree.flatten(), v)
    first = subband_layout((24, 32), p)[0]
    np.testing.assert_array_equal(tree[first.label].ravel(), v[: first.rows * first.cols])


def test_tree_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    p = plan("l-pyramid", 2)
    tree = forward_2d(rng.normal(size=(16, 16)), p)
    write_tree(tree, tmp_path / "t.bin")
    back = read_tree(tmp_path / "t.bin", LEGALL)
    np.testing.assert_array_equal(back.coeffs, tree.coeffs)
    assert back.labels == tree.labels


def test_tree_header_mismatch_rejected(tmp_path):
    tree = forward_2d(np.zeros((8, 8)), plan("l-pyramid", 2))
    write_tree(tree, tmp_path / "t.bin")
    data = (tmp_path / "t.bin").read_bytes().replace(b"H1H1 4 4", b"H1H1 4 3")
    (tmp_path / "t.bin").write_bytes(data)
    with pytest.raises(ValueError):
        read_tree(tmp_path / "t.bin", LEGALL)


def top_energy_fraction(coeffs, k):
    e = np.sort(np.ravel(coeffs) ** 2)[::-1]
    return e[:k].sum() / e.sum()


def test_l_pyramid_compacts_separable_smooth_images():
    i = np.linspace(0.0, 1.0, 64)
    pairs = [(i**2, np.sqrt(i + 0.1)), (np.sin(2 * i) + i, np.exp(i)), (1 + i, 1 + 2 * i)]
    for u, v in pairs:
        img = 100 * np.outer(u, v)
        lp = forward_2d(img, plan("l-pyramid", 3)).coeffs
        rp = forward_2d(img, plan("r-pyramid", 3)).coeffs
        assert top_energy_fraction(lp, 64) > top_energy_fraction(rp, 64)
