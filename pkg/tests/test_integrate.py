import cmath
import math

import numpy as np
import pytest
from scipy import integrate as si

from levynoise import integrands as ig
from levynoise import integrate as it
from levynoise import prm
from levynoise.measure import DiscreteAtoms, Shell, TemperedStable, TruncatedStable
from levynoise.prm import Window, replicate_seed, simulate

ATOMS = DiscreteAtoms(((0.6, 1.0), (-1.1, 0.7), (1.7, 0.4)))
TSTABLE = TruncatedStable(alpha=1.0, c=1.0, r=1.0)
TEMPERED = TemperedStable(alpha=0.5, c=0.8, theta=1.5)
WIN = Window(1.0, ((-0.5, 0.5),), Shell(0.3, 2.0))

H_GEN = ig.term(time=ig.Exp(-1.0), space=ig.Poly((1.0, 0.5)), jump=ig.SignPow(1.0)) \
    + ig.term(time=ig.Cos(2.0), space=ig.ExpAbs(-0.8), jump=ig.AbsPow(2.0)) * 0.3


def brute_compensator(H, window, measure, t):
    """Independent tensor-product oracle: adaptive quadrature in s and x,
    generic nu-integration in z (no factorization shortcuts)."""
    def nu_slice(s, x):
        return measure.nu_integral(lambda z: float(H(s, x, z)), window.shell)

    (xlo, xhi), = window.box

    def over_x(s):
        val, _ = si.quad(lambda x: nu_slice(s, x), xlo, xhi, epsabs=1e-12, limit=200)
        return val

    val, _ = si.quad(over_x, 0.0, t, epsabs=1e-12, limit=200)
    return val


class TestIntTime:
    def test_trivial(self):
        assert it.int_time(ig.from_time(ig.Const(0.0)), 2.0) == 0.0
        assert it.int_time(ig.from_time(ig.Const(3.0)), 2.0) == pytest.approx(6.0)
        assert it.int_time(ig.from_time(ig.Poly((0.0, 1.0))), 2.0) == pytest.approx(2.0)

    def test_exponential_vs_oracle(self):
        got = it.int_time(ig.from_time(ig.Exp(-1.0)), 1.0)
        oracle, _ = si.quad(lambda s: math.exp(-s), 0.0, 1.0, epsabs=1e-14)
        assert got == pytest.approx(oracle, abs=1e-12)
        assert got == pytest.approx(1.0 - math.exp(-1.0), abs=1e-13)

    def test_rejects_space_dependence(self):
        with pytest.raises(ValueError):
            it.int_time(H_GEN, 1.0)


class TestCompensator:
    def test_constant_integrand(self):
        H = ig.ONE
        for m in (ATOMS, TSTABLE):
            got = it.compensator(H, WIN, m, 0.7)
            assert got == pytest.approx(0.7 * 1.0 * m.shell_mass(WIN.shell), rel=1e-14)

    def test_linear_jump_factorizes(self):
        H = ig.jump_identity()
        got = it.compensator(H, WIN, ATOMS, 1.0)
        assert got == pytest.approx(ATOMS.shell_moment(WIN.shell, 1.0, signed=True),
                                    rel=1e-14)
        assert it.compensator(H, WIN, TSTABLE, 1.0) == 0.0  # symmetric

    @pytest.mark.parametrize("m", [ATOMS, TSTABLE, TEMPERED],
                             ids=["atoms", "tstable", "tempered"])
    def test_generic_vs_brute_tensor_oracle(self, m):
        got = it.compensator(H_GEN, WIN, m, 1.0)
        assert got == pytest.approx(brute_compensator(H_GEN, WIN, m, 1.0), rel=1e-10)

    def test_cos_jump_routes_through_quadrature(self):
        H = ig.from_jump(ig.Cos(3.0))
        got = it.compensator(H, WIN, TSTABLE, 1.0)
        assert got == pytest.approx(brute_compensator(H, WIN, TSTABLE, 1.0), rel=1e-9)

    def test_infinite_compensator(self):
        w = Window(1.0, ((-0.5, 0.5),), Shell(0.0, 1.0))
        with pytest.raises(it.InfiniteCompensatorError):
            it.compensator(ig.ONE, w, TSTABLE, 1.0)

    def test_one_sided_indicator(self):
        H = ig.from_jump(ig.Indicator(0.5, 2.0))
        got = it.compensator(H, WIN, TSTABLE, 1.0)
        # positive side of {0.5 < z <= 1}: half the symmetric shell mass
        assert got == pytest.approx(0.5 * TSTABLE.shell_mass(Shell(0.5, 1.0)), rel=1e-12)
        got_atoms = it.compensator(H, WIN, ATOMS, 1.0)
        assert got_atoms == pytest.approx(1.0 + 0.4, rel=1e-14)  # atoms 0.6, 1.7


class TestIntN:
    def test_empty_configuration(self):
        c = simulate(Window(1.0, ((-0.5, 0.5),), Shell(3.0, 9.0)), ATOMS, 0)
        assert it.int_N(ig.ONE, c, 1.0) == 0.0

    def test_counting(self):
        c = simulate(WIN, ATOMS, 21)
        assert it.int_N(ig.ONE, c, 1.0) == len(c)
        tcut = 0.5
        assert it.int_N(ig.ONE, c, tcut) == int(np.sum(c.t <= tcut))

    @pytest.mark.parametrize("m", [ATOMS, TSTABLE], ids=["atoms", "tstable"])
    def test_mean_identity_eq3(self, m):
        H = H_GEN.squared()  # nonnegative, generic
        n = 10 ** 4
        vals = np.empty(n)
        for k in range(n):
            c = simulate(WIN, m, replicate_seed(100, k))
            vals[k] = it.int_N(H, c, 1.0)
        target = it.compensator(H, WIN, m, 1.0)
        se = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean() - target) <= 4 * se


class TestIntNhat:
    def test_zero_integrand(self):
        c = simulate(WIN, ATOMS, 3)
        assert it.int_Nhat(ig.ONE * 0.0, c, ATOMS, 1.0) == 0.0

    @pytest.mark.parametrize("m", [ATOMS, TSTABLE], ids=["atoms", "tstable"])
    def test_isometry_eq2(self, m):
        H = H_GEN
        n = 10 ** 4
        vals = np.empty(n)
        for k in range(n):
            c = simulate(WIN, m, replicate_seed(200, k))
            vals[k] = it.int_Nhat(H, c, m, 1.0)
        # zero mean
        se = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean()) <= 4 * se
        # variance = compensator of |H|^2
        target = it.compensator(H.squared(), WIN, m, 1.0)
        sq = vals ** 2
        se2 = sq.std(ddof=1) / math.sqrt(n)
        assert abs(sq.mean() - target) <= 4 * se2


class TestBuildPath:
    def test_pure_step_function(self):
        c = simulate(WIN, ATOMS, 31)
        K = ig.jump_identity()
        path = it.build_path(None, K, None, c, ATOMS, split=0.0)
        partial = np.cumsum(c.z)
        for i, t in enumerate(c.t):
            assert path.eval(t) == pytest.approx(partial[i], rel=1e-14)
            assert path.eval_left(t) == pytest.approx(partial[i] - c.z[i], rel=1e-13, abs=1e-13)

    def test_left_limits_chain(self):
        c = simulate(WIN, TSTABLE, 32)
        path = it.build_path(None, ig.jump_identity(), None, c, TSTABLE, split=0.0)
        for i in range(1, len(c)):
            assert path.eval_left(c.t[i]) == pytest.approx(path.eval(c.t[i - 1]), rel=1e-13)

    @pytest.mark.parametrize("m", [ATOMS, TSTABLE], ids=["atoms", "tstable"])
    def test_consistency_identity(self, m):
        G = ig.from_time(ig.Cos(1.0)) * 0.7
        K = ig.term(time=ig.Poly((1.0, 0.3)), jump=ig.SignPow(1.0))
        H = H_GEN
        for seed in range(20):
            c = simulate(WIN, m, replicate_seed(300, seed))
            path = it.build_path(G, K, H, c, m, split=1.0)
            lhs = path.eval(1.0)
            rhs = (it.int_time(G, 1.0)
                   + it.int_N(K.restrict_jump_abs(1.0, math.inf), c, 1.0)
                   + it.int_Nhat(H.restrict_jump_abs(0.0, 1.0), c, m, 1.0))
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_jump_reconstruction(self):
        c = simulate(WIN, ATOMS, 33)
        path = it.build_path(ig.from_time(ig.Const(0.5)), ig.jump_identity(),
                             H_GEN, c, ATOMS, split=1.0)
        assert float(np.sum(path.jumps)) == pytest.approx(
            path.eval(1.0) - path.drift(np.asarray(1.0)), abs=1e-12)

    def test_sup_abs_linear_drift_exact(self):
        c = simulate(WIN, ATOMS, 34)
        path = it.build_path(ig.from_time(ig.Const(-0.4)), ig.jump_identity(),
                             None, c, ATOMS, split=0.0)
        # brute force on a very fine grid as oracle
        grid = np.linspace(0.0, 1.0, 200001)
        oracle = np.max(np.abs(path.eval(grid)))
        assert path.sup_abs(1.0) >= oracle - 1e-9
        assert path.sup_abs(1.0) == pytest.approx(oracle, abs=1e-4)

    def test_sup_abs_scan_refines_nonmonotone_drift(self):
        # drift cos-shaped with no jumps: max at interior point
        path = it.CadlagPath(np.empty(0), np.empty(0),
                             lambda ts: np.sin(np.asarray(ts) * 3.0), WIN)
        got = path.sup_abs(1.0, scan=64)
        assert got == pytest.approx(1.0, abs=1e-8)


class TestZofSet:
    def test_empty_config_drift_only(self):
        c = simulate(Window(1.0, ((0.0, 1.0),), Shell(3.0, 9.0)), ATOMS, 0)
        got = it.z_of_set(1.0, ((0.0, 1.0),), (0.0, 1.0), c, ATOMS)
        assert got == pytest.approx(1.0)

    def test_additivity_exact(self):
        c = simulate(WIN, ATOMS, 55)
        whole = it.z_of_set(0.7, ((-0.5, 0.5),), (0.0, 1.0), c, ATOMS)
        left = it.z_of_set(0.7, ((-0.5, 0.0),), (0.0, 1.0), c, ATOMS)
        right = it.z_of_set(0.7, ((0.0, 0.5),), (0.0, 1.0), c, ATOMS)
        boundary = np.sum(c.z[c.x[:, 0] == 0.0])
        assert whole == pytest.approx(left + right - boundary, abs=1e-12)
        early = it.z_of_set(0.7, ((-0.5, 0.5),), (0.0, 0.5), c, ATOMS)
        late = it.z_of_set(0.7, ((-0.5, 0.5),), (0.5, 1.0), c, ATOMS)
        assert whole == pytest.approx(early + late, abs=1e-12)

    @pytest.mark.parametrize("m", [ATOMS, TSTABLE], ids=["atoms", "tstable"])
    def test_characteristic_function(self, m):
        # E e^{iuZ} = exp{|Bt|(iua + shell Levy-Khintchine exponent)}
        a = 0.4
        box, interval = ((-0.5, 0.5),), (0.0, 1.0)
        n = 2 * 10 ** 4
        us = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
        acc = np.zeros(len(us), dtype=complex)
        for k in range(n):
            c = simulate(WIN, m, replicate_seed(400, k))
            zval = it.z_of_set(a, box, interval, c, m)
            acc += np.exp(1j * us * zval)
        emp = acc / n
        vol = 1.0
        big = WIN.shell.clip(1.0, math.inf)
        big_m1 = m.shell_moment(big, 1.0, signed=True) if big else 0.0
        for u, e in zip(us, emp):
            exact = cmath.exp(vol * (1j * u * a + m.psi_shell(WIN.shell, u)
                                     + 1j * u * big_m1))
            assert abs(e - exact) <= 4.0 / math.sqrt(n)


class TestLIntegral:
    def test_zero_and_definitional(self):
        c = simulate(WIN, ATOMS, 66)
        assert it.l_integral(ig.ONE * 0.0, c, ATOMS, 1.0) == 0.0
        # X = 1 on the whole window equals the noise charge with a = 0
        got = it.l_integral(ig.ONE, c, ATOMS, 1.0)
        want = it.z_of_set(0.0, ((-0.5, 0.5),), (0.0, 1.0), c, ATOMS)
        # z_of_set compensates only small jumps; on this shell both sides
        # differ by the big-jump compensator
        big = WIN.shell.clip(1.0, math.inf)
        want -= ATOMS.shell_moment(big, 1.0, signed=True)
        assert got == pytest.approx(want, rel=1e-12)

    def test_rejects_jump_dependence(self):
        c = simulate(WIN, ATOMS, 67)
        with pytest.raises(ValueError):
            it.l_integral(ig.jump_identity(), c, ATOMS, 1.0)

    @pytest.mark.parametrize("m", [ATOMS, TSTABLE], ids=["atoms", "tstable"])
    def test_isometry(self, m):
        X = ig.term(time=ig.Exp(-0.5), space=ig.Poly((1.0, 0.4)))
        n = 10 ** 4
        vals = np.empty(n)
        for k in range(n):
            c = simulate(WIN, m, replicate_seed(500, k))
            vals[k] = it.l_integral(X, c, m, 1.0)
        v_shell = m.shell_moment(WIN.shell, 2.0)
        target = v_shell * it.compensator(X.squared(), WIN, m, 1.0) / m.shell_mass(WIN.shell)
        # compensator of X^2 * 1 integrates the constant jump factor: divide
        # the shell mass back out to get the plain (s, x) integral
        sq = vals ** 2
        se = sq.std(ddof=1) / math.sqrt(n)
        assert abs(sq.mean() - target) <= 4 * se


class TestProjectTime:
    def test_collapses_to_time_only(self):
        proj = it.project_time(H_GEN, WIN, TSTABLE)
        assert proj.is_time_only()
        # spot value: time slice s=0.3 of the brute nu/space integral
        s = 0.3
        def nu_slice(x):
            return TSTABLE.nu_integral(lambda z: float(H_GEN(s, x, z)), WIN.shell)
        want, _ = si.quad(nu_slice, -0.5, 0.5, epsabs=1e-12)
        got = proj(s, 0.0, 0.0)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)
