import math

import numpy as np
import pytest

from sregular import geometry as geo
from sregular import trees as tr
from sregular.errors import DomainError, PreconditionError

LOG2, LOG3 = math.log(2), math.log(3)


def cantor_tree(depth=4, x0=0.5):
    return tr.tree_from_ifs(geo.cantor_ifs(), [x0], depth)


def sierpinski_tree(depth=3):
    ifs = geo.sierpinski_ifs()
    return tr.tree_from_ifs(ifs, geo.attractor_point(ifs, (2, 0)), depth)


def mixed_tree(depth=6):
    ifs = geo.cantor_ifs(0.5, 1 / 3)
    return tr.tree_from_ifs(ifs, geo.attractor_point(ifs, (0, 1)), depth)


class TestTreeFromIfs:
    def test_cantor_depth1_example(self):
        t = cantor_tree(depth=1)
        x0, r0 = t.node((0,))
        x1, r1 = t.node((1,))
        assert x0[0] == pytest.approx(1 / 6)
        assert x1[0] == pytest.approx(5 / 6)
        assert r0 == r1 == pytest.approx(1 / 3)
        c = t.constants
        assert c.C == pytest.approx(0.5)
        assert c.D == pytest.approx(1.0)
        assert c.rho == c.R == pytest.approx(1 / 3)
        assert c.E == 1.0

    def test_sierpinski_equal_ratios(self):
        t = sierpinski_tree(depth=2)
        assert all(
            t.node(w)[1] == pytest.approx(0.25) for w in t.level(2)
        )

    def test_depth_zero_single_node(self):
        t = tr.tree_from_ifs(geo.cantor_ifs(), [0.5], 0)
        assert len(t) == 1
        assert t.node(())[1] == 1.0

    def test_seed_outside_witness_rejected(self):
        with pytest.raises(PreconditionError):
            tr.tree_from_ifs(geo.cantor_ifs(), [2.0], 2)

    def test_uncertified_ifs_rejected(self):
        bad = geo.Ifs(
            [geo.Similarity(0.6, [0.0]), geo.Similarity(0.6, [0.4])],
            open_set_witness=[geo.Box((0.0,), (1.0,))],
        )
        with pytest.raises(PreconditionError):
            tr.tree_from_ifs(bad, [0.5], 2)

    def test_json_roundtrip(self):
        t = mixed_tree(depth=3)
        back = tr.RegularTree.from_json(t.to_json())
        assert back.words == t.words
        assert np.allclose(back.x, t.x)
        assert np.allclose(back.r, t.r)
        assert back.constants.s == pytest.approx(t.constants.s)


class TestVerifyAxioms:
    def test_ifs_tree_passes_exactly(self):
        for t in (cantor_tree(5), sierpinski_tree(3), mixed_tree(6)):
            report = tr.verify_axioms(t)
            assert report.ok, [c for c in report.checks if not c.ok]
            assert report["mass-spread-E"].measured <= 1 + 1e-9
            assert report["mass-conservation"].measured <= 1e-9

    def test_separation_holds_with_certified_constant(self):
        t = mixed_tree(6)
        report = tr.verify_axioms(t)
        assert report["separation"].measured >= t.constants.C

    def test_direct_separation_assertion(self):
        # distance of incomparable nodes at least C (r_I + r_J)
        t = cantor_tree(5)
        C = t.constants.C
        for wi in t.words:
            for wj in t.words:
                if wi >= wj:
                    continue
                k = min(len(wi), len(wj))
                if wi[:k] == wj[:k]:
                    continue
                d = abs(t.node(wi)[0][0] - t.node(wj)[0][0])
                assert d >= C * (t.node(wi)[1] + t.node(wj)[1]) - 1e-12

    def test_perturbed_radius_fails_mass(self):
        t = cantor_tree(3)
        nodes = {w: (t.x[t.index[w]], t.r[t.index[w]]) for w in t.words}
        x, r = nodes[(0,)]
        nodes[(0,)] = (x, r * 1.1)
        bad = tr.RegularTree(t.shift, nodes, t.constants)
        report = tr.verify_axioms(bad)
        assert not report.ok
        assert not report["mass-conservation"].ok
        assert report["mass-conservation"].witness is not None


class TestPrunedMass:
    def test_ternary_closed_form(self):
        t = sierpinski_tree(depth=6)
        assert t.constants.s == pytest.approx(LOG3 / LOG2, abs=1e-12)
        for m in range(7):
            val = tr.pruned_mass(t, lambda w: 0, (), m)
            assert val == pytest.approx((2 / 3) ** m, rel=1e-12)

    def test_nothing_pruned(self):
        t = cantor_tree(3)
        assert tr.pruned_mass(t, lambda w: 0, (0,), 0) == pytest.approx(
            t.node((0,))[1] ** t.constants.s
        )

    def test_bound_over_random_choices(self):
        t = mixed_tree(depth=6)
        c = t.constants
        rng = np.random.default_rng(42)
        for _ in range(100):
            table = rng.integers(0, 2, size=1024)

            def choice(w, table=table):
                return int(table[hash(w) % 1024])

            for m in (1, 3, 5):
                val = tr.pruned_mass(t, choice, (), m)
                bound = c.E**2 * (1 - c.rho**c.s) ** m
                assert val <= bound + 1e-12

    def test_depth_overflow_rejected(self):
        t = cantor_tree(3)
        with pytest.raises(DomainError):
            tr.pruned_mass(t, lambda w: 0, (), 4)


class TestPowerTree:
    def test_identity(self):
        t = cantor_tree(4)
        assert tr.power_tree(t, 1) is t

    def test_cantor_squared(self):
        t = cantor_tree(6)
        p = tr.power_tree(t, 2)
        assert p.depth == 3
        assert p.shift.alphabet_size == 4
        assert all(p.node(w)[1] == pytest.approx(1 / 9) for w in p.level(1))

    def test_point_sets_identical(self):
        t = mixed_tree(6)
        for m in (2, 3):
            p = tr.power_tree(t, m)
            for k in range(1, t.depth // m + 1):
                orig = np.sort(
                    np.concatenate([t.node(w)[0] for w in t.level(m * k)])
                )
                powd = np.sort(
                    np.concatenate([p.node(w)[0] for w in p.level(k)])
                )
                assert np.array_equal(orig, powd)

    def test_level_sums_preserved(self):
        t = mixed_tree(6)
        p = tr.power_tree(t, 2)
        s = p.constants.s
        lvl = [p.node(w)[1] ** s for w in p.level(1)]
        assert sum(lvl) == pytest.approx(1.0, abs=1e-9)
        assert sorted(round(p.node(w)[1], 10) for w in p.level(1)) == [
            pytest.approx(1 / 9),
            pytest.approx(1 / 6),
            pytest.approx(1 / 6),
            pytest.approx(1 / 4),
        ]

    def test_insufficient_depth(self):
        with pytest.raises(DomainError):
            tr.power_tree(cantor_tree(1), 2)


class TestRatioLimit:
    def test_ifs_constant_series(self):
        t = mixed_tree(5)
        series = tr.ratio_limit_diagnostic(t, 0, (1, 0, 1, 0))
        assert np.allclose(series, 0.5)
        series = tr.ratio_limit_diagnostic(t, 1, (0, 0, 0, 0))
        assert np.allclose(series, 1 / 3)

    def test_max_depth_prefix(self):
        t = cantor_tree(3)
        series = tr.ratio_limit_diagnostic(t, 0, (0, 0))
        assert series.size == 3

    def test_bad_symbol(self):
        t = cantor_tree(3)
        with pytest.raises(DomainError):
            tr.ratio_limit_diagnostic(t, 7, (0,))


class TestTreeFromPacking:
    def test_two_point_cloud(self):
        cloud = geo.PointCloud(np.array([[0.0], [1.0]]), 1e-9)
        t = tr.tree_from_packing(cloud, 0.1, 1.0, 1)
        assert len(t) == 3
        assert t.node((0,))[1] == pytest.approx(0.5)
        assert t.node((1,))[1] == pytest.approx(0.5)

    def test_single_point_chain(self):
        cloud = geo.PointCloud(np.array([[0.3]]), 1e-12)
        t = tr.tree_from_packing(cloud, 0.1, 1.0, 3)
        assert len(t) == 4
        assert np.allclose(t.r, 1.0)

    def test_cantor_sample_certifies(self):
        cloud = geo.sample_attractor(geo.cantor_ifs(), 3.0**-8)
        s = LOG2 / LOG3
        t = tr.tree_from_packing(cloud, 0.15, s, 3)
        report = tr.verify_axioms(t)
        assert report.ok, [c for c in report.checks if not c.ok]
        # mass conservation exact by routing
        assert report["mass-conservation"].measured <= 1e-9

    def test_cantor_sample_paper_scaling(self):
        # edge lengths obey d(x_I, x_IJ) <= 2/(1-delta) * delta^|I|
        delta = 0.15
        cloud = geo.sample_attractor(geo.cantor_ifs(), 3.0**-8)
        t = tr.tree_from_packing(cloud, delta, LOG2 / LOG3, 3)
        bound = 2.0 / (1.0 - delta)
        for w in t.words:
            xw = t.node(w)[0]
            for w2 in t.words:
                if len(w2) > len(w) and w2[: len(w)] == w:
                    d = np.linalg.norm(xw - t.node(w2)[0])
                    assert d <= bound * delta ** len(w)

    def test_weights_must_normalize(self):
        cloud = geo.PointCloud(np.array([[0.0], [1.0]]), 1e-9)
        with pytest.raises(DomainError):
            tr.tree_from_packing(cloud, 0.1, 1.0, 1, weights=[0.2, 0.2])

    def test_delta_range_enforced(self):
        cloud = geo.PointCloud(np.array([[0.0], [1.0]]), 1e-9)
        with pytest.raises(DomainError):
            tr.tree_from_packing(cloud, 0.5, 1.0, 1)

    def test_resolution_precondition(self):
        cloud = geo.PointCloud(np.array([[0.0], [1.0]]), 0.05)
        with pytest.raises(PreconditionError):
            tr.tree_from_packing(cloud, 0.1, 1.0, 3)
