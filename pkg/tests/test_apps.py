import cmath
import math

import numpy as np
import pytest

from levynoise import apps
from levynoise import integrands as ig
from levynoise import integrate as it
from levynoise.measure import DiscreteAtoms, Shell, TruncatedStable
from levynoise.prm import Window, replicate_seed, simulate

ATOMS = DiscreteAtoms(((0.6, 1.0), (-1.1, 0.7), (1.7, 0.4)))
TSTABLE = TruncatedStable(alpha=1.0, c=1.0, r=1.5)
WIN = Window(1.0, ((-0.5, 0.5),), Shell(0.3, 2.0))
X_SMOOTH = ig.term(time=ig.Exp(-0.5), space=ig.Poly((1.0, 0.4)))
H_CONST = ig.ONE * 0.9


class TestMomentBound:
    def test_zero_integrand_degenerate(self):
        row = apps.moment_bound_cell(ig.ONE * 0.0, ATOMS, 2.0, 1.0, WIN,
                                     replicates=10, master_seed=1)
        assert row.lhs_mean == 0.0
        assert row.bracket == 0.0
        assert math.isnan(row.ratio)

    def test_lp_bracket_oracle(self):
        from scipy import integrate as si
        got = apps.lp_bracket(X_SMOOTH, WIN, 1.0, 3.0)
        f2, _ = si.dblquad(lambda x, s: (math.exp(-0.5 * s) * (1 + 0.4 * x)) ** 2,
                           0, 1, -0.5, 0.5, epsabs=1e-12)
        f3, _ = si.dblquad(lambda x, s: abs(math.exp(-0.5 * s) * (1 + 0.4 * x)) ** 3,
                           0, 1, -0.5, 0.5, epsabs=1e-12)
        assert got == pytest.approx(f2 ** 1.5 + f3, rel=1e-10)

    @pytest.mark.parametrize("m", [ATOMS, TSTABLE], ids=["atoms", "tstable"])
    def test_p2_isometry(self, m):
        row = apps.moment_bound_cell(X_SMOOTH, m, 2.0, 1.0, WIN,
                                     replicates=4000, master_seed=7)
        v_shell = m.shell_moment(WIN.shell, 2.0)
        target = v_shell * it.compensator(X_SMOOTH.squared(), WIN, m, 1.0) \
            / m.shell_mass(WIN.shell)
        assert abs(row.isometry_mean - target) <= 4 * row.isometry_se

    def test_sup_monotone_in_t(self):
        config = simulate(WIN, ATOMS, 5)
        path = apps.noise_path(X_SMOOTH, config, ATOMS)
        sups = [path.sup_abs(t) for t in (0.25, 0.5, 0.75, 1.0)]
        assert all(a <= b + 1e-15 for a, b in zip(sups, sups[1:]))

    def test_infinite_moment_rejected(self):
        import levynoise.measure as me
        m = me.TemperedStable(alpha=0.5, c=1.0, theta=1.0)
        w = Window(1.0, ((-0.5, 0.5),), Shell(0.2, math.inf))
        # moments of every order are finite for the tempered family; the
        # guard trips only on p < 2
        with pytest.raises(ValueError):
            apps.moment_bound_cell(X_SMOOTH, m, 1.5, 1.0, w, 10, 0)


class TestExpMartingale:
    def test_h_zero_is_one(self):
        c = simulate(WIN, ATOMS, 3)
        assert apps.exp_martingale(ig.ONE * 0.0, c, ATOMS, 1.0) == 1.0 + 0.0j

    def test_psi_rule_matches_measure_psi(self):
        for m in (ATOMS, TSTABLE):
            us = np.array([-1.5, -0.3, 0.0, 0.7, 2.0])
            rule = apps.psi_shell_rule(m, WIN.shell, us, n_per_side=64)
            exact = np.array([m.psi_shell(WIN.shell, u) for u in us])
            np.testing.assert_allclose(rule, exact, atol=1e-9)

    def test_mean_one(self):
        n = 4000
        psi_int = apps.psi_space_time_integral(H_CONST, WIN, ATOMS, 1.0)
        vals = np.empty(n, dtype=complex)
        for k in range(n):
            c = simulate(WIN, ATOMS, replicate_seed(800, k))
            vals[k] = apps.exp_martingale(H_CONST, c, ATOMS, 1.0, psi_int)
        for comp in (vals.real - 1.0, vals.imag):
            se = comp.std(ddof=1) / math.sqrt(n)
            assert abs(comp.mean()) <= 4 * se

    def test_modulus_identity(self):
        psi_int = apps.psi_space_time_integral(X_SMOOTH, WIN, TSTABLE, 1.0)
        for seed in range(20):
            c = simulate(WIN, TSTABLE, replicate_seed(801, seed))
            assert apps.modulus_gap(X_SMOOTH, c, TSTABLE, 1.0, psi_int) <= 1e-10


class TestRepresentation:
    def test_h_zero_residual_zero(self):
        c = simulate(WIN, ATOMS, 4)
        assert apps.representation_residual(ig.ONE * 0.0, c, ATOMS, 1.0) <= 1e-14

    def test_single_atom_constant_h_recursion_oracle(self):
        z0, wgt, cc = 0.8, 1.2, 0.9
        m = DiscreteAtoms(((z0, wgt),))
        win = Window(1.0, ((-0.5, 0.5),), Shell(0.5, 1.0))
        h = ig.ONE * cc
        vol = 1.0  # |B|
        psi_atom = wgt * (cmath.exp(1j * cc * z0) - 1 - 1j * cc * z0)
        kappa = -1j * vol * cc * wgt * z0 - vol * psi_atom  # continuous log-slope
        jump_factor = cmath.exp(1j * cc * z0)
        for seed in range(10):
            c = simulate(win, m, replicate_seed(802, seed))
            # oracle: piecewise closed-form recursion between jumps
            mval, rhs, prev = 1.0 + 0.0j, 1.0 + 0.0j, 0.0
            for tj in c.t:
                seg = tj - prev
                rhs -= vol * (jump_factor - 1) * wgt * mval \
                    * (cmath.exp(kappa * seg) - 1) / kappa
                mval *= cmath.exp(kappa * seg)   # continuous evolution to tj-
                rhs += (jump_factor - 1) * mval  # jump term uses the left limit
                mval *= jump_factor
                prev = tj
            seg = 1.0 - prev
            rhs -= vol * (jump_factor - 1) * wgt * mval \
                * (cmath.exp(kappa * seg) - 1) / kappa
            mval *= cmath.exp(kappa * seg)
            got = apps.exp_martingale(h, c, m, 1.0)
            assert got == pytest.approx(mval, abs=1e-10)
            assert abs(got - rhs) <= 1e-10
            assert apps.representation_residual(h, c, m, 1.0) <= 1e-10

    @pytest.mark.parametrize("m", [ATOMS, TSTABLE], ids=["atoms", "tstable"])
    def test_random_paths_residual(self, m):
        for seed in range(30):
            c = simulate(WIN, m, replicate_seed(803, seed))
            assert apps.representation_residual(X_SMOOTH, c, m, 1.0) <= 1e-6


def box_slot(t0, t1, x0, x1, zlo, zhi):
    return ig.term(time=ig.Indicator(t0, t1), space=ig.Indicator(x0, x1),
                   jump=ig.AbsIndicator(zlo, zhi))


SLOT_A = box_slot(0.0, 0.5, -0.5, 0.0, 0.3, 1.0)
SLOT_B = box_slot(0.5, 1.0, 0.0, 0.5, 1.0, 2.0)
SLOT_C = box_slot(0.0, 1.0, -0.5, 0.5, 2.0, 3.0)


class TestMultipleIntegral:
    def test_order_one_is_compensated_integral(self):
        f = apps.ChaosFunction((SLOT_A,))
        for seed in range(10):
            c = simulate(WIN, ATOMS, seed)
            got = apps.multiple_integral(f, c, ATOMS)
            want = it.int_Nhat(SLOT_A, c, ATOMS, 1.0)
            assert got == pytest.approx(want, abs=1e-11)

    def test_disjoint_product_identity(self):
        f = apps.ChaosFunction((SLOT_A, SLOT_B))
        for seed in range(25):
            c = simulate(WIN, ATOMS, replicate_seed(804, seed))
            got = apps.multiple_integral(f, c, ATOMS)
            want = it.int_Nhat(SLOT_A, c, ATOMS, 1.0) * it.int_Nhat(SLOT_B, c, ATOMS, 1.0)
            assert got == pytest.approx(want, abs=1e-10)

    def test_order_three_product_identity(self):
        win = Window(1.0, ((-0.5, 0.5),), Shell(0.3, 3.0))
        m = DiscreteAtoms(((0.6, 1.0), (-1.1, 0.7), (2.5, 0.8)))
        f = apps.ChaosFunction((SLOT_A, SLOT_B, SLOT_C))
        for seed in range(10):
            c = simulate(win, m, replicate_seed(805, seed))
            got = apps.multiple_integral(f, c, m)
            want = (it.int_Nhat(SLOT_A, c, m, 1.0)
                    * it.int_Nhat(SLOT_B, c, m, 1.0)
                    * it.int_Nhat(SLOT_C, c, m, 1.0))
            assert got == pytest.approx(want, abs=1e-9)

    def test_empty_configuration_collapses(self):
        # a configuration on the working window that happens to hold no points
        empty = simulate(WIN, DiscreteAtoms(((3.0, 1e-12),)), 0)
        assert len(empty) == 0
        f1 = apps.ChaosFunction((SLOT_A,))
        got1 = apps.multiple_integral(f1, empty, ATOMS)
        mu_a = it.compensator(SLOT_A, WIN, ATOMS, 1.0)
        assert got1 == pytest.approx(-mu_a, rel=1e-12)
        f2 = apps.ChaosFunction((SLOT_A, SLOT_B))
        got2 = apps.multiple_integral(f2, empty, ATOMS)
        mu_b = it.compensator(SLOT_B, WIN, ATOMS, 1.0)
        assert got2 == pytest.approx(mu_a * mu_b, rel=1e-10)

    def test_overlap_rejected(self):
        f = apps.ChaosFunction((SLOT_A, SLOT_A))
        c = simulate(WIN, ATOMS, 2)
        with pytest.raises(apps.OverlapError):
            apps.multiple_integral(f, c, ATOMS)

    def test_norm_closed_form(self):
        f = apps.ChaosFunction((SLOT_A, SLOT_B))
        got = apps.chaos_norm_sq(f, WIN, ATOMS, 1.0)
        mu_a = it.compensator(SLOT_A, WIN, ATOMS, 1.0)
        mu_b = it.compensator(SLOT_B, WIN, ATOMS, 1.0)
        assert got == pytest.approx(0.5 * mu_a * mu_b, rel=1e-12)

    def test_second_chaos_expansion_exact(self):
        for seed in range(20):
            c = simulate(WIN, ATOMS, replicate_seed(806, seed))
            res = apps.second_chaos_expansion_residual(SLOT_A, c, ATOMS)
            assert abs(res) <= 1e-10


class TestChaosMoments:
    def test_isometry_and_orthogonality(self):
        n = 1500
        f2 = apps.ChaosFunction((SLOT_A, SLOT_B))
        f1 = apps.ChaosFunction((SLOT_C,))
        win = Window(1.0, ((-0.5, 0.5),), Shell(0.3, 3.0))
        m = DiscreteAtoms(((0.6, 1.0), (-1.1, 0.7), (2.5, 0.8)))
        i1 = np.empty(n)
        i2 = np.empty(n)
        for k in range(n):
            c = simulate(win, m, replicate_seed(807, k))
            i1[k] = it.int_Nhat(SLOT_C, c, m, 1.0)
            i2[k] = (it.int_Nhat(SLOT_A, c, m, 1.0)
                     * it.int_Nhat(SLOT_B, c, m, 1.0))
        # E I1 = 0
        se = i1.std(ddof=1) / math.sqrt(n)
        assert abs(i1.mean()) <= 4 * se
        # E I2^2 = 2 ||f2||^2
        target = 2.0 * apps.chaos_norm_sq(f2, win, m, 1.0)
        sq = i2 ** 2
        se2 = sq.std(ddof=1) / math.sqrt(n)
        assert abs(sq.mean() - target) <= 4 * se2
        # E I1 I2 = 0
        cross = i1 * i2
        se3 = cross.std(ddof=1) / math.sqrt(n)
        assert abs(cross.mean()) <= 4 * se3
