import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sregular import symbolic as sym
from sregular.errors import (
    BudgetError,
    DomainError,
    InsufficientContextError,
    StructuralError,
)

LOG2 = math.log(2)
LOG3 = math.log(3)

FULL2 = sym.SubshiftFT.full(2)
FULL3 = sym.SubshiftFT.full(3)
# golden-mean shift: 00 forbidden
GOLDEN = sym.SubshiftFT([[0, 1], [1, 1]])


def two_value_potential(a=LOG2, b=LOG3, shift=FULL2):
    return sym.LocallyConstantPotential(1, {(0,): a, (1,): b}, shift)


def bisect_root(fn, lo, hi, iters=200):
    """Independent bisection oracle for a decreasing function."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestSubshift:
    def test_rejects_reducible(self):
        with pytest.raises(StructuralError):
            sym.SubshiftFT([[1, 0], [0, 1]])

    def test_rejects_periodic(self):
        # pure 2-cycle is irreducible but not aperiodic
        with pytest.raises(StructuralError):
            sym.SubshiftFT([[0, 1], [1, 0]])

    def test_full_shift(self):
        assert FULL3.is_full
        assert FULL3.alphabet_size == 3
        assert not GOLDEN.is_full

    def test_json_roundtrip(self):
        doc = GOLDEN.to_json()
        assert doc == {"alphabet": 2, "transition": [[0, 1], [1, 1]]}
        assert sym.SubshiftFT.from_json(doc) == GOLDEN


class TestAdmissibility:
    def test_empty_word_always_admissible(self):
        assert sym.is_admissible((), FULL2)
        assert sym.is_admissible((), GOLDEN)

    def test_full_shift_allows_all(self):
        assert sym.is_admissible((0, 1), FULL2)

    def test_forbidden_pair(self):
        assert not sym.is_admissible((0, 0), GOLDEN)
        assert sym.is_admissible((0, 1, 1, 0, 1), GOLDEN)

    def test_symbol_out_of_range(self):
        with pytest.raises(DomainError):
            sym.is_admissible((0, 2), FULL2)

    def test_admissible_words_golden(self):
        # lengths follow the Fibonacci recursion: 2, 3, 5, 8
        for n, count in [(1, 2), (2, 3), (3, 5), (4, 8)]:
            assert len(sym.admissible_words(GOLDEN, n)) == count


class TestPotential:
    def test_missing_value_rejected(self):
        with pytest.raises(DomainError):
            sym.LocallyConstantPotential(1, {(0,): 1.0}, FULL2)

    def test_inadmissible_key_rejected(self):
        with pytest.raises(DomainError):
            sym.LocallyConstantPotential(
                2, {(0, 0): 1.0, (0, 1): 1.0, (1, 0): 1.0, (1, 1): 1.0}, GOLDEN
            )

    def test_variation(self):
        f = two_value_potential()
        assert f.variation(0) == pytest.approx(LOG3 - LOG2)
        assert f.variation(1) == 0.0
        assert f.variation(5) == 0.0
        g = sym.LocallyConstantPotential(
            2, {(0, 0): 1.0, (0, 1): 3.0, (1, 0): 2.0, (1, 1): 2.5}, FULL2
        )
        assert g.variation(0) == pytest.approx(2.0)
        assert g.variation(1) == pytest.approx(2.0)  # spread within [0*]
        assert g.variation(2) == 0.0

    def test_json_roundtrip(self):
        f = two_value_potential()
        g = sym.LocallyConstantPotential.from_json(f.to_json(), FULL2)
        assert g.values == f.values


class TestBirkhoffSum:
    def test_constant_potential(self):
        f = sym.LocallyConstantPotential.constant(0.7, FULL2)
        assert sym.birkhoff_sum(f, (0, 1, 0, 1), 4) == pytest.approx(4 * 0.7)

    def test_hand_value(self):
        # f(0)=log2, f(1)=log3 on word 0110: log2 + 2*log3
        f = two_value_potential()
        val = sym.birkhoff_sum(f, (0, 1, 1, 0), 3)
        assert val == pytest.approx(2.890371757896165, abs=1e-12)

    def test_empty_sum(self):
        f = two_value_potential()
        assert sym.birkhoff_sum(f, (0, 1), 0) == 0.0

    def test_insufficient_context(self):
        f = sym.LocallyConstantPotential.constant(1.0, FULL2, depth=2)
        with pytest.raises(InsufficientContextError):
            sym.birkhoff_sum(f, (0, 1, 0), 3)

    @settings(max_examples=60, deadline=None)
    @given(
        word=st.lists(st.integers(0, 1), min_size=2, max_size=14),
        n1=st.integers(0, 14),
        n2=st.integers(0, 14),
    )
    def test_cocycle_identity(self, word, n1, n2):
        word = tuple(word)
        if n1 + n2 > len(word):
            return
        f = two_value_potential()
        lhs = sym.birkhoff_sum(f, word, n1 + n2)
        rhs = sym.birkhoff_sum(f, word, n1) + sym.birkhoff_sum(f, word[n1:], n2)
        assert lhs == pytest.approx(rhs, abs=1e-12)


class TestPressure:
    def test_zero_potential_gives_entropy(self):
        f = sym.LocallyConstantPotential.constant(0.0, FULL3)
        for t in (0.0, 1.0, -2.5):
            assert sym.pressure(FULL3, f, t) == pytest.approx(LOG3, abs=1e-12)

    def test_constant_potential(self):
        f = sym.LocallyConstantPotential.constant(LOG2, FULL3)
        assert sym.pressure(FULL3, f, 1.0) == pytest.approx(math.log(1.5), abs=1e-12)

    def test_two_value_direct_formula(self):
        f = two_value_potential()
        expected = math.log(2**-0.5 + 3**-0.5)
        assert sym.pressure(FULL2, f, 0.5) == pytest.approx(expected, abs=1e-12)

    def test_depth_two_matches_depth_one(self):
        # a depth-1 potential re-expressed at depth 2 has identical pressure
        f1 = two_value_potential()
        vals = {w: f1.values[w[:1]] for w in sym.admissible_words(FULL2, 2)}
        f2 = sym.LocallyConstantPotential(2, vals, FULL2)
        for t in (0.3, 0.7879, 1.5):
            assert sym.pressure(FULL2, f2, t) == pytest.approx(
                sym.pressure(FULL2, f1, t), abs=1e-11
            )

    def test_golden_mean_entropy(self):
        f = sym.LocallyConstantPotential.constant(0.0, GOLDEN)
        phi = (1 + math.sqrt(5)) / 2
        assert sym.pressure(GOLDEN, f, 1.0) == pytest.approx(math.log(phi), abs=1e-12)

    def test_strictly_decreasing_in_t(self):
        f = two_value_potential()
        ts = np.linspace(-1.0, 3.0, 20)
        ps = [sym.pressure(FULL2, f, t) for t in ts]
        assert all(a > b for a, b in zip(ps, ps[1:]))


class TestBowenRoot:
    def test_closed_form_constant(self):
        f = sym.LocallyConstantPotential.constant(LOG2, FULL3)
        assert sym.bowen_root(FULL3, f) == pytest.approx(LOG3 / LOG2, abs=1e-9)

    def test_two_value_against_bisection_oracle(self):
        f = two_value_potential()
        oracle = bisect_root(lambda s: 0.5**s + (1 / 3) ** s - 1, 0.0, 2.0)
        assert oracle == pytest.approx(0.7878849110258697, abs=1e-12)
        assert sym.bowen_root(FULL2, f) == pytest.approx(oracle, abs=1e-9)

    def test_equal_halves(self):
        f = sym.LocallyConstantPotential.constant(LOG2, FULL2)
        assert sym.bowen_root(FULL2, f) == pytest.approx(1.0, abs=1e-10)

    def test_rejects_nonpositive_potential(self):
        f = sym.LocallyConstantPotential(1, {(0,): 1.0, (1,): 0.0}, FULL2)
        with pytest.raises(DomainError):
            sym.bowen_root(FULL2, f)


class TestIsLattice:
    def test_exact_double(self):
        ok, gen = sym.is_lattice([LOG2, math.log(4)])
        assert ok and gen == pytest.approx(LOG2, abs=1e-14)

    def test_single_value(self):
        ok, gen = sym.is_lattice([LOG3, LOG3])
        assert ok and gen == pytest.approx(LOG3, abs=1e-14)

    def test_log2_log3_irrational(self):
        ok, gen = sym.is_lattice([LOG2, LOG3])
        assert not ok and gen is None

    def test_generator_is_largest(self):
        ok, gen = sym.is_lattice([math.log(8), math.log(4)])
        assert ok and gen == pytest.approx(LOG2, abs=1e-14)

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            sym.is_lattice([])


class TestPowerRecode:
    def test_identity_block(self):
        f = two_value_potential()
        s2, f2 = sym.power_recode(FULL2, f, 1)
        assert s2.alphabet_size == 2
        assert f2.values == f.values

    def test_constant_cube(self):
        f = sym.LocallyConstantPotential.constant(LOG2, FULL2)
        s2, f2 = sym.power_recode(FULL2, f, 3)
        assert s2.alphabet_size == 8
        assert s2.is_full
        assert all(v == pytest.approx(3 * LOG2) for v in f2.values.values())

    def test_two_block_sums(self):
        f = two_value_potential()
        s2, f2 = sym.power_recode(FULL2, f, 2)
        assert s2.alphabet_size == 4
        blocks = sym.admissible_words(FULL2, 2)
        for idx, block in enumerate(blocks):
            expected = f.values[block[:1]] + f.values[block[1:]]
            assert f2.values[(idx,)] == pytest.approx(expected, abs=1e-14)

    def test_bowen_root_invariant(self):
        f = two_value_potential()
        root = sym.bowen_root(FULL2, f)
        for m in (1, 2, 3):
            s2, f2 = sym.power_recode(FULL2, f, m)
            assert sym.bowen_root(s2, f2) == pytest.approx(root, abs=1e-9)

    def test_bowen_root_invariant_golden(self):
        f = two_value_potential(shift=GOLDEN)
        root = sym.bowen_root(GOLDEN, f)
        for m in (2, 3):
            s2, f2 = sym.power_recode(GOLDEN, f, m)
            assert sym.bowen_root(s2, f2) == pytest.approx(root, abs=1e-9)

    def test_rejects_bad_m(self):
        with pytest.raises(DomainError):
            sym.power_recode(FULL2, two_value_potential(), 0)


def renewal_spec(f=None, shift=FULL2, anchor=(0,), kernel=sym.kernel_one):
    f = f or sym.LocallyConstantPotential.constant(LOG2, shift)
    g = sym.LocallyConstantPotential.constant(1.0, shift)
    return sym.RenewalSpec(shift, f, g, kernel=kernel, anchor=anchor)


class TestRenewalSum:
    def test_hand_enumeration_a1(self):
        # S_1 = log2 <= 1 < S_2 = 2 log2 for both length-1 words
        assert sym.renewal_sum(renewal_spec(), 1.0) == 2.0

    def test_hand_enumeration_a05(self):
        # only the empty word: S_0 = 0 <= 0.5 < log2
        assert sym.renewal_sum(renewal_spec(), 0.5) == 1.0

    def test_zero_weight_rejected(self):
        g0 = sym.LocallyConstantPotential.constant(0.0, FULL2)
        f = sym.LocallyConstantPotential.constant(LOG2, FULL2)
        with pytest.raises(DomainError):
            sym.RenewalSpec(FULL2, f, g0, anchor=(0,))

    def test_constant_potential_power_counts(self):
        # N^floor(a/c) words straddle level a when a is not a multiple of c
        spec = renewal_spec()
        for a in (0.9, 1.7, 3.3, 5.5):
            expected = 2.0 ** math.floor(a / LOG2)
            assert sym.renewal_sum(spec, a) == expected

    def test_methods_agree(self):
        f = two_value_potential()
        spec = renewal_spec(f)
        for a in (0.4, 2.1, 5.3):
            dfs = sym.renewal_sum(spec, a, method="dfs")
            fast = sym.renewal_sum(spec, a, method="multinomial")
            assert dfs == pytest.approx(fast, rel=1e-12)

    def test_depth_two_weight_dfs(self):
        # depth-2 data forces the DFS path; check against direct enumeration
        f = sym.LocallyConstantPotential(
            2, {(0, 0): 0.5, (0, 1): 0.7, (1, 0): 0.6, (1, 1): 0.9}, FULL2
        )
        g = sym.LocallyConstantPotential.constant(1.0, FULL2)
        spec = sym.RenewalSpec(FULL2, f, g, anchor=(0, 0))
        a = 1.5

        def brute(a):
            total = 0.0
            for n in range(8):
                for word in (
                    [()] if n == 0 else (
                        tuple(w)
                        for w in np.ndindex(*([2] * n))
                    )
                ):
                    full = tuple(word) + (0, 0)
                    s_n = sym.birkhoff_sum(f, full, n)
                    s_n1 = sym.birkhoff_sum(f, full, n + 1)
                    if s_n <= a < s_n1:
                        total += 1.0
            return total

        assert sym.renewal_sum(spec, a) == pytest.approx(brute(a), rel=1e-12)

    def test_budget_error_carries_partial(self):
        spec = renewal_spec()
        with pytest.raises(BudgetError) as err:
            sym.renewal_sum(spec, 12.0, budget=100)
        assert err.value.visited == 101
        assert err.value.partial is not None

    def test_subshift_enumeration(self):
        # golden-mean shift: straddling words must avoid 00
        f = sym.LocallyConstantPotential.constant(LOG2, GOLDEN)
        g = sym.LocallyConstantPotential.constant(1.0, GOLDEN)
        spec = sym.RenewalSpec(GOLDEN, f, g, anchor=(1,))
        a = 3 * LOG2 + 0.1
        count = sym.renewal_sum(spec, a)
        brute = sum(
            1
            for w in sym.admissible_words(GOLDEN, 3)
            if GOLDEN.transition[w[-1], 1]
        )
        assert brute == 5
        assert count == brute


class TestRenewalSeries:
    def test_single_point_grid(self):
        ser = sym.renewal_convergence_series(renewal_spec(), [2.0], 1.0)
        assert ser.rescaled.shape == (1,)
        assert math.isnan(ser.rel_variation)

    def test_nonlattice_converges(self):
        f = two_value_potential()
        spec = renewal_spec(f)
        delta = sym.bowen_root(FULL2, f)
        ser = sym.renewal_convergence_series(spec, np.linspace(5, 15, 201), delta)
        assert ser.rel_variation < 0.05
        assert ser.method == "multinomial"

    def test_lattice_oscillates(self):
        spec = renewal_spec()
        grid = np.linspace(5, 15, 201)
        ser = sym.renewal_convergence_series(spec, grid, 1.0)
        # closed form: exp(-a) * 2^floor(a/log2) = exp(-(a mod log2))
        expected = np.exp(-(grid % LOG2))
        assert np.allclose(ser.rescaled, expected, rtol=1e-9)
        assert ser.raw_rel_variation > 0.3

    def test_decreasing_grid_rejected(self):
        with pytest.raises(DomainError):
            sym.renewal_convergence_series(renewal_spec(), [3.0, 2.0], 1.0)
