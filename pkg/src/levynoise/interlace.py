"""Threshold ladders for the approximation of small jumps and large space.

The ladders are defined by monotone root-finding on residual integrals: the
small-jump ladder shrinks the shell floor until the residual second moment
falls below a geometric target, the spatial ladders grow the box until the
outside contribution does.  Diagnostics couple every level to one underlying
realization (restriction, never resimulation) and compare empirical sup-norm
differences against the explicit Doob/Chebyshev bounds.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _si

from . import integrate as it
from .integrands import Const, Integrand, Node, Product
from .measure import LevyMeasure, Shell
from .prm import Window, replicate_seed, restrict, simulate

GEOMETRIC_BASE = 8.0  # targets are BASE^-n, kept literal from the construction


@dataclass(frozen=True)
class LadderLevel:
    n: int
    threshold: float
    i_value: float


@dataclass(frozen=True)
class Ladder:
    kind: str  # "small-jump" | "spatial-I" | "spatial-II"
    levels: tuple[LadderLevel, ...]
    truncated: bool = False
    truncation_point: float | None = None
    violation: str | None = None

    @property
    def thresholds(self):
        return [lv.threshold for lv in self.levels]


def _bisect_sup(fn, lo, hi, target, rel_tol):
    """sup{u in [lo, hi] : fn(u) <= target} for nondecreasing fn with
    fn(lo) <= target < fn(hi)."""
    while hi - lo > rel_tol * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if fn(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def _bisect_inf(fn, lo, hi, target, rel_tol):
    """inf{u in [lo, hi] : fn(u) <= target} for nonincreasing fn with
    fn(lo) > target >= fn(hi)."""
    while hi - lo > rel_tol * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if fn(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def eps_sequence(H: Integrand, box, T: float, measure: LevyMeasure,
                 n_max: int = 6, small_hi: float = 1.0,
                 rel_tol: float = 1e-10) -> Ladder:
    """Small-jump thresholds: the n-th level is the largest shell floor whose
    residual second moment I(eps) stays below 8^-n.

    The ladder truncates with a finite-activity flag as soon as I vanishes at
    a positive floor (the integrand is inactive below it).
    """
    Hsq = H.squared()

    def I(eps):
        if eps <= 0.0:
            return 0.0
        w = Window(T, tuple(box), Shell(0.0, eps))
        return it.compensator(Hsq, w, measure, T)

    top = I(small_hi)
    if top == 0.0:
        # integrand inactive on the whole small-jump set
        return Ladder("small-jump", (LadderLevel(1, small_hi, 0.0),),
                      truncated=True, truncation_point=small_hi)
    # activity floor: the largest eps with I(eps) = 0 (0 when I > 0 throughout)
    floor = _bisect_sup(lambda e: 0.0 if I(e) == 0.0 else 1.0, 0.0, small_hi,
                        0.5, rel_tol)
    floor_tol = max(1e-8 * small_hi, 1e-6 * floor)

    levels = []
    truncated = False
    point = None
    for n in range(1, n_max + 1):
        target = GEOMETRIC_BASE ** -n
        if top <= target:
            eps = small_hi
        else:
            eps = _bisect_sup(I, 0.0, small_hi, target, rel_tol)
        if floor > 1e-12 * small_hi and eps <= floor + floor_tol:
            levels.append(LadderLevel(n, floor, 0.0))
            truncated = True
            point = floor
            break
        levels.append(LadderLevel(n, eps, I(eps)))
    return Ladder("small-jump", tuple(levels), truncated, point)


def _abs_node_integral(node: Node, a: float, b: float) -> float:
    """Integral of |node| over (a, b); exact when the node cannot change
    sign, adaptive quadrature otherwise."""
    if isinstance(node, Const):
        return abs(node.value) * max(b - a, 0.0)
    if node.kind in ("exp", "exp_abs", "abs_pow", "indicator", "abs_indicator"):
        return node.integral(a, b)
    val, _ = _si.quad(lambda u: abs(float(node(u))), a, b, limit=300)
    return val


def _full_line_integral(node: Node, use_abs: bool):
    """Integral over the whole line, or None when it diverges.

    Exact antiderivative limits when they converge; otherwise strict
    quadrature where any convergence warning counts as divergence.
    """
    import warnings

    if not use_abs or node.kind in ("exp_abs", "abs_pow", "indicator", "abs_indicator"):
        with np.errstate(invalid="ignore", over="ignore"):
            F = node.antiderivative(np.array([-math.inf, math.inf]))
        if F is not None and np.all(np.isfinite(F)):
            return float(F[1] - F[0])
    fn = (lambda u: abs(float(node(u)))) if use_abs else (lambda u: float(node(u)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        try:
            val, err = _si.quad(fn, -math.inf, math.inf, limit=300)
        except Exception:
            return None
    if not math.isfinite(val) or err > 1e-6 * (1.0 + abs(val)):
        return None
    return val


def _space_tail(term, a: float, dim: int, use_abs: bool):
    """Integral of the term's space factors over the complement of [-a, a]^d.

    Product structure gives full-line product minus box product.  Returns
    None when a full-line factor diverges (decay assumption violated).
    """
    full, inside = 1.0, 1.0
    for k in range(dim):
        node = term.space[k] if k < len(term.space) else Const(1.0)
        if isinstance(node, Const):
            if node.value == 0.0:
                return 0.0
            return None  # constant factor never decays
        line = _full_line_integral(node, use_abs)
        if line is None:
            return None
        box = _abs_node_integral(node, -a, a) if use_abs else node.integral(-a, a)
        full *= line
        inside *= box
    return full - inside


def _abs_time_integral(term, T: float) -> float:
    return _abs_node_integral(term.time, 0.0, T)


def _nu_abs(measure, node, shell):
    """Integral of |node(z)| against nu; exact for sign-definite nodes."""
    from .integrands import AbsIndicator, AbsPow, SignPow

    if isinstance(node, SignPow):
        return measure.shell_moment(shell, node.power)
    if isinstance(node, (AbsPow, AbsIndicator)) or node.kind in ("exp_abs",):
        return it.nu_factor(measure, node, shell)
    if isinstance(node, Const):
        return abs(node.value) * (measure.shell_mass(shell) if node.value else 0.0)
    if isinstance(node, Product):
        scale, sub, core = 1.0, shell, []
        for f in node.factors:
            if isinstance(f, Const):
                scale *= abs(f.value)
            elif isinstance(f, AbsIndicator):
                sub = sub.clip(f.lo, f.hi) if sub else None
            else:
                core.append(f)
        if sub is None or scale == 0.0:
            return 0.0
        if not core:
            return scale * measure.shell_mass(sub)
        if len(core) == 1:
            return scale * _nu_abs(measure, core[0], sub)
        rest = Product(tuple(core))
        return scale * measure.nu_integral(lambda z: abs(float(rest(z))), sub)
    return measure.nu_integral(lambda z: abs(float(node(z))), shell)


def a_sequence(H: Integrand, K: Integrand | None, T: float,
               measure: LevyMeasure, n_max: int = 6, *,
               kind: str = "spatial-I", shell: Shell, dim: int = 1,
               small_hi: float = 1.0, rel_tol: float = 1e-10) -> Ladder:
    """Spatial thresholds: the n-th level is the smallest box half-width
    whose outside residual I(a) stays below 8^-n.

    kind "spatial-I" combines the small-jump second moment of H with the
    big-jump first absolute moment of K; kind "spatial-II" uses the second
    moment of H over the whole working shell.  For sums, the absolute big-
    jump part integrates term-by-term, an upper bound on |K| that keeps the
    ladder conservative.
    """
    if kind not in ("spatial-I", "spatial-II"):
        raise ValueError(f"unknown spatial ladder kind {kind!r}")
    Hsq = H.squared()
    small = shell.clip(0.0, small_hi) if kind == "spatial-I" else shell
    big = shell.clip(small_hi, math.inf) if kind == "spatial-I" else None

    h_parts = []
    for term in Hsq.terms:
        nu = it.nu_factor(measure, term.jump, small) if small else 0.0
        h_parts.append((term, term.time.integral(0.0, T) * nu))
    k_parts = []
    if kind == "spatial-I" and K is not None and big is not None:
        for term in K.terms:
            nu = _nu_abs(measure, term.jump, big)
            k_parts.append((term, _abs_time_integral(term, T) * nu))

    def I(a):
        total = 0.0
        for term, coef in h_parts:
            if coef == 0.0:
                continue
            tail = _space_tail(term, a, dim, use_abs=False)
            if tail is None:
                return None
            total += coef * tail
        for term, coef in k_parts:
            if coef == 0.0:
                continue
            tail = _space_tail(term, a, dim, use_abs=True)
            if tail is None:
                return None
            total += coef * tail
        return total

    probe = I(1.0)
    if probe is None:
        return Ladder(kind, (), violation="assumption violated: space factor does not decay")

    # support bound: the smallest a with I(a) = 0, if any within reach
    floor = None
    hi_probe = 1.0
    while hi_probe <= 2.0 ** 24:
        if I(hi_probe) == 0.0:
            floor = _bisect_inf(lambda a: 0.0 if I(a) == 0.0 else 1.0, 0.0,
                                hi_probe, 0.5, rel_tol)
            break
        hi_probe *= 2.0
    floor_tol = 1e-6 * floor if floor else 0.0

    levels = []
    truncated = False
    point = None
    for n in range(1, n_max + 1):
        target = GEOMETRIC_BASE ** -n
        start = I(0.0)
        if start is None:
            return Ladder(kind, tuple(levels),
                          violation="assumption violated: space factor does not decay")
        if start <= target:
            a_n, val = 0.0, start
        else:
            hi = 1.0
            while I(hi) > target:
                hi *= 2.0
                if hi > 2.0 ** 60:
                    return Ladder(kind, tuple(levels),
                                  violation="assumption violated: residual does not vanish")
            a_n = _bisect_inf(I, 0.0, hi, target, rel_tol)
            val = I(a_n)
        if floor is not None and a_n >= floor - floor_tol:
            levels.append(LadderLevel(n, floor, 0.0))
            truncated = True
            point = floor
            break
        levels.append(LadderLevel(n, a_n, val))
    return Ladder(kind, tuple(levels), truncated, point)


# ---------------------------------------------------------------------------
# coupled diagnostics


@dataclass(frozen=True)
class LadderProblem:
    """Everything the diagnostic needs to rebuild the processes."""

    H: Integrand
    measure: LevyMeasure
    T: float
    box: tuple[tuple[float, float], ...] | None = None  # small-jump kind
    K: Integrand | None = None
    shell: Shell | None = None  # working shell for spatial kinds
    small_hi: float = 1.0
    dim: int = 1
    scan: int = 0  # drift extremum grid; 0 is exact for monotone drifts


@dataclass
class DiagnosticRow:
    level: int
    threshold: float
    i_value: float
    empirical_sup2: float
    sup2_se: float
    bound: float
    exceed_freq: float
    exceed_se: float
    bound_freq: float
    flagged: bool


@dataclass
class DiagnosticReport:
    kind: str
    rows: list[DiagnosticRow]
    replicates: int
    master_seed: int

    @property
    def flagged(self) -> bool:
        return any(r.flagged for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("level,threshold,I,empirical_sup2,bound,exceed_freq,bound_freq\n")
        for r in self.rows:
            buf.write(f"{r.level},{r.threshold:.17g},{r.i_value:.17g},"
                      f"{r.empirical_sup2:.17g},{r.bound:.17g},"
                      f"{r.exceed_freq:.17g},{r.bound_freq:.17g}\n")
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"kind": self.kind, "replicates": self.replicates,
                "master_seed": self.master_seed,
                "levels": [vars(r) for r in self.rows]}


def _needs_scan(H: Integrand) -> bool:
    return not all(isinstance(t.time, Const) for t in H.terms)


def interlacing_diagnostic(ladder: Ladder, problem: LadderProblem,
                           replicates: int, master_seed: int) -> DiagnosticReport:
    """Empirical sup-norm differences between consecutive ladder levels
    against the Doob and Chebyshev bounds, on coupled realizations."""
    if ladder.violation:
        raise ValueError(f"cannot run diagnostics: {ladder.violation}")
    if len(ladder.levels) < 2:
        raise ValueError("need at least two ladder levels")
    if ladder.kind == "small-jump":
        return _small_jump_diagnostic(ladder, problem, replicates, master_seed)
    return _spatial_diagnostic(ladder, problem, replicates, master_seed)


def _small_jump_diagnostic(ladder, problem, replicates, master_seed):
    H, m, T = problem.H, problem.measure, problem.T
    box = tuple(problem.box)
    eps = ladder.thresholds
    deep = Window(T, box, Shell(eps[-1], problem.small_hi))
    scan = problem.scan if problem.scan else (1000 if _needs_scan(H) else 0)

    n_levels = len(eps) - 1
    sup2 = np.zeros((replicates, n_levels))
    exceed = np.zeros((replicates, n_levels), dtype=bool)
    for k in range(replicates):
        config = simulate(deep, m, replicate_seed(master_seed, k))
        for j in range(n_levels):
            lo, hi = eps[j + 1], eps[j]
            if not lo < hi:
                continue  # stagnant level: identical processes, sup diff 0
            ring = restrict(config, Window(T, box, Shell(lo, hi)))
            path = it.build_path(None, None, H, ring, m, split=math.inf)
            s = path.sup_abs(T, scan=scan)
            sup2[k, j] = s * s
            exceed[k, j] = s > 2.0 ** -(j + 1)
    return _assemble(ladder, sup2, exceed, replicates, master_seed,
                     exceed_bound=lambda n: 2.0 ** (-n + 2))


def _spatial_diagnostic(ladder, problem, replicates, master_seed):
    H, K, m, T = problem.H, problem.K, problem.measure, problem.T
    shell = problem.shell
    d = problem.dim
    a = ladder.thresholds
    big_box = tuple((-a[-1], a[-1]) for _ in range(d))
    deep = Window(T, big_box, shell)
    small = shell.clip(0.0, problem.small_hi) if ladder.kind == "spatial-I" else shell
    split = problem.small_hi if ladder.kind == "spatial-I" else math.inf
    scan = problem.scan if problem.scan else (1000 if _needs_scan(H) else 0)

    n_levels = len(a) - 1
    sup2 = np.zeros((replicates, n_levels))
    exceed = np.zeros((replicates, n_levels), dtype=bool)
    for k in range(replicates):
        config = simulate(deep, m, replicate_seed(master_seed, k))
        inside = np.max(np.abs(config.x), axis=1) if len(config) else np.empty(0)
        for j in range(n_levels):
            lo_a, hi_a = a[j], a[j + 1]
            if not lo_a < hi_a:
                continue
            mask = (inside > lo_a) & (inside <= hi_a)
            pts_t = config.t[mask]
            pts_x = config.x[mask]
            pts_z = config.z[mask]
            ring_space = [_space_ring(term, lo_a, hi_a, d) for term in H.terms]
            # compensated H-part over the box ring
            drift_pieces = []
            for term, ring_int in zip(H.terms, ring_space):
                if small is None:
                    continue
                nu = it.nu_factor(m, term.jump, small)
                if nu != 0.0:
                    drift_pieces.append((-nu * ring_int, term.time))
            small_mask = np.abs(pts_z) <= split
            h_jumps = np.asarray(H(pts_t[small_mask], pts_x[small_mask],
                                   pts_z[small_mask]), dtype=float) \
                if small_mask.any() else np.empty(0)
            h_path = _piece_path(pts_t[small_mask], h_jumps, drift_pieces, deep)
            s_h = h_path.sup_abs(T, scan=scan)
            sup2[k, j] = s_h * s_h
            if ladder.kind == "spatial-I" and K is not None:
                k_mask = ~small_mask
                k_jumps = np.asarray(K(pts_t[k_mask], pts_x[k_mask], pts_z[k_mask]),
                                     dtype=float) if k_mask.any() else np.empty(0)
                order = np.argsort(np.concatenate([pts_t[small_mask], pts_t[k_mask]]))
                all_t = np.concatenate([pts_t[small_mask], pts_t[k_mask]])[order]
                all_j = np.concatenate([h_jumps, k_jumps])[order]
                full = _piece_path(all_t, all_j, drift_pieces, deep)
                exceed[k, j] = full.sup_abs(T, scan=scan) > 2.0 ** -(j + 1)
            else:
                exceed[k, j] = s_h > 2.0 ** -(j + 1)

    if ladder.kind == "spatial-I":
        bound = lambda n: 2.0 ** (-n + 4) + 2.0 ** (-2 * n + 1)
    else:
        bound = lambda n: 2.0 ** (-n + 2)
    return _assemble(ladder, sup2, exceed, replicates, master_seed, exceed_bound=bound)


def _space_ring(term, lo_a, hi_a, dim):
    """Space integral of a term over the box ring K_hi \\ K_lo."""
    outer, inner = 1.0, 1.0
    for k in range(dim):
        node = term.space[k] if k < len(term.space) else Const(1.0)
        outer *= node.integral(-hi_a, hi_a)
        inner *= node.integral(-lo_a, lo_a)
    return outer - inner


def _piece_path(times, jumps, drift_pieces, window):
    order = np.argsort(times)
    times, jumps = times[order], jumps[order]

    def drift(ts, _pieces=tuple(drift_pieces)):
        ts = np.asarray(ts, dtype=float)
        out = np.zeros(ts.shape)
        for coef, node in _pieces:
            F = node.antiderivative(ts)
            if F is None:
                vals = np.array([node.integral(0.0, float(v)) for v in np.atleast_1d(ts)])
                out = out + coef * vals.reshape(ts.shape)
            else:
                out = out + coef * (F - node.antiderivative(np.zeros(())))
        return out

    return it.CadlagPath(times, jumps, drift, window)


def _assemble(ladder, sup2, exceed, replicates, master_seed, exceed_bound):
    rows = []
    for j in range(sup2.shape[1]):
        n = ladder.levels[j].n
        mean = float(sup2[:, j].mean())
        se = float(sup2[:, j].std(ddof=1) / math.sqrt(replicates))
        freq = float(exceed[:, j].mean())
        fse = math.sqrt(max(freq * (1 - freq), 1.0 / replicates) / replicates)
        bound = 4.0 * GEOMETRIC_BASE ** -n
        bfreq = exceed_bound(n)
        flagged = (mean > bound + 4 * se) or (freq > bfreq + 4 * fse)
        rows.append(DiagnosticRow(n, ladder.levels[j].threshold,
                                  ladder.levels[j].i_value, mean, se, bound,
                                  freq, fse, min(bfreq, 1.0), flagged))
    return DiagnosticReport(ladder.kind, rows, replicates, master_seed)
