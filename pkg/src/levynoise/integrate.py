"""Space-time integrals against the PRM, its compensator, and cadlag paths.

All stochastic analysis happens at a fixed truncation shell, where the model
is an exact finite-activity semimartingale: jump integrals are finite sums,
compensators factor into products of one-dimensional integrals, and every
pathwise identity can be demanded to quadrature precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize as _sopt

from .integrands import (
    AbsIndicator,
    AbsPow,
    Const,
    Indicator,
    Integrand,
    Node,
    Poly,
    Product,
    SignPow,
    Term,
    product_node,
    space_axes,
)
from .measure import InfiniteMassError, InfiniteMomentError, LevyMeasure, Shell
from .prm import PointConfiguration, Window


class InfiniteCompensatorError(ValueError):
    """The nu-factor of a compensator diverges on the requested region."""


# ---------------------------------------------------------------------------
# factor integrals


def nu_factor(measure: LevyMeasure, node: Node, shell: Shell) -> float:
    """Integral of a jump node against nu over a shell.

    Closed forms for constants, (signed) powers, polynomials, and indicator
    clips; generic adaptive quadrature otherwise.
    """
    try:
        return _nu_factor(measure, node, shell)
    except (InfiniteMassError, InfiniteMomentError) as exc:
        raise InfiniteCompensatorError(str(exc)) from exc


def _nu_factor(measure, node, shell):
    if isinstance(node, Const):
        if node.value == 0.0:
            return 0.0
        return node.value * measure.shell_mass(shell)
    if isinstance(node, SignPow):
        return measure.shell_moment(shell, node.power, signed=True)
    if isinstance(node, AbsPow):
        return measure.shell_moment(shell, node.power)
    if isinstance(node, Poly):
        total = 0.0
        for k, c in enumerate(node.coeffs):
            if c == 0.0:
                continue
            if k == 0:
                total += c * measure.shell_mass(shell)
            else:
                total += c * measure.shell_moment(shell, float(k), signed=(k % 2 == 1))
        return total
    if isinstance(node, AbsIndicator):
        sub = shell.clip(node.lo, node.hi)
        return measure.shell_mass(sub) if sub else 0.0
    if isinstance(node, Indicator):
        return _one_sided_mass(measure, shell, node.lo, node.hi)
    if isinstance(node, Product):
        scale, sub, core = 1.0, shell, []
        for f in node.factors:
            if isinstance(f, Const):
                scale *= f.value
            elif isinstance(f, AbsIndicator):
                sub = sub.clip(f.lo, f.hi) if sub else None
            else:
                core.append(f)
        if sub is None or scale == 0.0:
            return 0.0
        if not core:
            return scale * measure.shell_mass(sub)
        if len(core) == 1:
            return scale * _nu_factor(measure, core[0], sub)
        rest = product_node(*core)
        return scale * measure.nu_integral(lambda z: float(rest(z)), sub)
    return measure.nu_integral(lambda z: float(node(z)), shell)


def _one_sided_mass(measure, shell, lo, hi):
    """nu(shell intersect (lo, hi]) for a plain interval, either sign."""
    from .measure import DiscreteAtoms

    if isinstance(measure, DiscreteAtoms):
        return float(sum(w for z, w in measure.atoms
                         if lo < z <= hi and shell.lo < abs(z) <= shell.hi))
    if not measure.symmetric:
        return measure.nu_integral(lambda z: 1.0 if lo < z <= hi else 0.0, shell)
    total = 0.0
    pos = shell.clip(max(lo, 0.0), hi) if hi > 0 else None
    if pos:
        total += 0.5 * measure.shell_mass(pos)
    if lo < 0:
        neg = shell.clip(-min(hi, 0.0), -lo)
        if neg:
            total += 0.5 * measure.shell_mass(neg)
    return total


def space_factor(term: Term, box) -> float:
    """Integral of the space factors over the box; untouched axes contribute
    their side lengths."""
    val = 1.0
    for k, (lo, hi) in enumerate(box):
        if k < len(term.space):
            val *= term.space[k].integral(lo, hi)
        else:
            val *= hi - lo
    return val


def _jump_const(term: Term) -> float:
    if not isinstance(term.jump, Const):
        raise ValueError("integrand has a non-constant jump factor where a "
                         "time/space-only integrand is required")
    return term.jump.value


def _space_const(term: Term) -> float:
    val = 1.0
    for node in term.space:
        if not isinstance(node, Const):
            raise ValueError("integrand has a non-constant space factor where "
                             "a time-only integrand is required")
        val *= node.value
    return val


# ---------------------------------------------------------------------------
# the four integral operations


def int_time(G: Integrand, t: float, n: int = 64) -> float:
    """Integral of a time-only integrand over [0, t]."""
    total = 0.0
    for term in G.terms:
        scale = _jump_const(term) * _space_const(term)
        if scale != 0.0:
            total += scale * term.time.integral(0.0, t, n)
    return total


def time_cumulative(G: Integrand, ts) -> np.ndarray:
    """Vectorized t -> integral over [0, t] for a time-only integrand."""
    ts = np.asarray(ts, dtype=float)
    out = np.zeros(ts.shape)
    for term in G.terms:
        scale = _jump_const(term) * _space_const(term)
        if scale == 0.0:
            continue
        F = term.time.antiderivative(ts)
        if F is None:
            vals = np.array([term.time.integral(0.0, float(t)) for t in np.atleast_1d(ts)])
            out = out + scale * vals.reshape(ts.shape)
        else:
            F0 = term.time.antiderivative(np.zeros(()))
            out = out + scale * (F - F0)
    return out


def int_N(K: Integrand, config: PointConfiguration, t: float) -> float:
    """Finite jump sum of K over the points with t_i <= t."""
    if len(config) == 0:
        return 0.0
    mask = config.t <= t
    if not mask.any():
        return 0.0
    return float(np.sum(np.asarray(
        K(config.t[mask], config.x[mask], config.z[mask]), dtype=float)))


def compensator(H: Integrand, window: Window, measure: LevyMeasure, t: float) -> float:
    """The deterministic triple integral of H over [0,t] x box x shell."""
    total = 0.0
    for term in H.terms:
        nu = nu_factor(measure, term.jump, window.shell)
        if nu == 0.0:
            continue
        total += term.time.integral(0.0, t) * space_factor(term, window.box) * nu
    return total


def int_Nhat(H: Integrand, config: PointConfiguration, measure: LevyMeasure,
             t: float) -> float:
    """Compensated integral: jump sum minus compensator on the same window."""
    return int_N(H, config, t) - compensator(H, config.window, measure, t)


def l_integral(X: Integrand, config: PointConfiguration, measure: LevyMeasure,
               t: float) -> float:
    """Integral of X(s, x) against the finite-variance noise: the compensated
    integral of X(s, x) z."""
    if not X.is_space_time_only():
        raise ValueError("the noise integrand must depend on (s, x) only")
    return int_Nhat(X.with_jump(SignPow(1.0)), config, measure, t)


def z_of_set(a: float, box, interval, config: PointConfiguration,
             measure: LevyMeasure) -> float:
    """The noise charge of a space-time set (interval x box).

    Uses the standard form with drift term i*u*a in the exponent; big jumps
    enter raw, small jumps compensated.
    """
    t1, t2 = interval
    w = config.window
    if not (0.0 <= t1 < t2 <= w.horizon):
        raise ValueError(f"time interval {interval} outside the window")
    if len(box) != w.dim:
        raise ValueError("box dimension mismatch")
    for (lo, hi), (wlo, whi) in zip(box, w.box):
        if lo < wlo or hi > whi:
            raise ValueError("box not contained in the window")
    vol = t2 - t1
    for lo, hi in box:
        vol *= hi - lo
    total = a * vol
    if len(config):
        keep = (config.t > t1) & (config.t <= t2)
        for k, (lo, hi) in enumerate(box):
            keep &= (config.x[:, k] >= lo) & (config.x[:, k] <= hi)
        z = config.z[keep]
        total += float(np.sum(z[np.abs(z) > 1.0]))
        total += float(np.sum(z[np.abs(z) <= 1.0]))
    small = w.shell.clip(0.0, 1.0)
    if small:
        total -= vol * measure.shell_moment(small, 1.0, signed=True)
    return total


# ---------------------------------------------------------------------------
# cadlag paths


@dataclass(frozen=True)
class CadlagPath:
    """Drift evaluator plus a sorted jump list, with left-limit access."""

    times: np.ndarray
    jumps: np.ndarray
    drift: Callable[[np.ndarray], np.ndarray]
    window: Window

    def __post_init__(self):
        object.__setattr__(self, "_csum", np.concatenate([[0.0], np.cumsum(self.jumps)]))

    def eval(self, t):
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        out = self._csum[idx] + self.drift(t)
        return float(out) if np.ndim(t) == 0 else out

    def eval_left(self, t):
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="left")
        out = self._csum[idx] + self.drift(t)
        return float(out) if np.ndim(t) == 0 else out

    def jump_total(self, t) -> float:
        idx = int(np.searchsorted(self.times, t, side="right"))
        return float(self._csum[idx])

    def sup_abs(self, t: float, scan: int = 0) -> float:
        """sup over [0, t] of |path|.

        Candidates are 0, the terminal value, and left/right values at every
        jump time; exact when the drift is monotone between jumps.  `scan`
        adds a uniform grid plus a local refinement for wiggly drifts.
        """
        mask = self.times <= t
        cand = [0.0, abs(self.eval(t))]
        if mask.any():
            ts = self.times[mask]
            cand.append(float(np.max(np.abs(self.eval(ts)))))
            cand.append(float(np.max(np.abs(self.eval_left(ts)))))
        best = max(cand)
        if scan > 1:
            grid = np.linspace(0.0, t, scan)
            vals = np.abs(self.eval(grid))
            g = int(np.argmax(vals))
            best = max(best, float(vals[g]))
            lo = grid[max(g - 1, 0)]
            hi = grid[min(g + 1, scan - 1)]
            # keep the refinement bracket inside one inter-jump interval
            inner = self.times[(self.times > lo) & (self.times < hi)]
            if len(inner):
                hi = float(inner[0])
            if hi > lo:
                res = _sopt.minimize_scalar(
                    lambda s: -abs(self.eval(min(s, t))),
                    bounds=(lo, hi), method="bounded",
                    options={"xatol": 1e-12})
                best = max(best, float(-res.fun))
        return best


def build_path(G: Integrand, K: Integrand, H: Integrand,
               config: PointConfiguration, measure: LevyMeasure,
               split: float = 1.0) -> CadlagPath:
    """Realize the integral process: drift + big jumps via K + compensated
    small jumps via H, the split at |z| = `split`.

    split=0 sends every jump through K (no compensation); split=inf sends
    every jump through H with the compensator over the whole shell.
    """
    w = config.window
    if len(config):
        big = np.abs(config.z) > split
        sizes = np.where(
            big,
            np.asarray(K(config.t, config.x, config.z), dtype=float) if K is not None else 0.0,
            np.asarray(H(config.t, config.x, config.z), dtype=float) if H is not None else 0.0,
        )
        times = config.t
    else:
        times, sizes = np.empty(0), np.empty(0)

    # continuous part: time integral of G minus the small-jump compensator
    pieces = []  # (coefficient, time node)
    if G is not None:
        for term in G.terms:
            pieces.append((_jump_const(term) * _space_const(term), term.time))
    small = w.shell.clip(0.0, split)
    if H is not None and small is not None:
        for term in H.terms:
            c = nu_factor(measure, term.jump, small) * space_factor(term, w.box)
            if c != 0.0:
                pieces.append((-c, term.time))

    def drift(ts, _pieces=tuple(pieces)):
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

    return CadlagPath(times, sizes, drift, w)


def project_time(H: Integrand, window: Window, measure: LevyMeasure,
                 shell: Shell | None = None) -> Integrand:
    """Collapse the space and jump factors of H by integration, leaving a
    time-only integrand s -> integral of H(s, x, z) over box x shell."""
    shell = shell if shell is not None else window.shell
    terms = []
    for term in H.terms:
        c = nu_factor(measure, term.jump, shell) * space_factor(term, window.box)
        terms.append(Term(time=product_node(Const(c), term.time)))
    return Integrand(tuple(terms))


# ---------------------------------------------------------------------------
# quadrature rules shared by the pathwise evaluators


def _gl(n):
    if n not in _gl._store:
        _gl._store[n] = np.polynomial.legendre.leggauss(n)
    return _gl._store[n]


_gl._store = {}


def interval_rule(breaks, n_per_interval: int):
    """Concatenated Gauss-Legendre nodes/weights over consecutive intervals.

    Returns (s, w); nodes are strictly interior so cadlag left/right values
    agree at them.
    """
    t, w = _gl(n_per_interval)
    ss, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        ss.append(0.5 * (b - a) * t + 0.5 * (b + a))
        ws.append(0.5 * (b - a) * w)
    if not ss:
        return np.empty(0), np.empty(0)
    return np.concatenate(ss), np.concatenate(ws)


def box_rule(box, n_per_axis: int):
    """Tensor Gauss-Legendre rule over a box: points (m, d), weights (m,)."""
    t, w = _gl(n_per_axis)
    axes, wts = [], []
    for lo, hi in box:
        axes.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
        wts.append(0.5 * (hi - lo) * w)
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrid = np.meshgrid(*wts, indexing="ij")
    ww = np.ones(pts.shape[0])
    for g in wgrid:
        ww = ww * g.ravel()
    return pts, ww


def path_breaks(config: PointConfiguration, t: float, extra=()) -> np.ndarray:
    """Sorted break points: 0, the jump times up to t, integrand time
    discontinuities, and t itself."""
    pts = [0.0, float(t)]
    pts.extend(float(v) for v in config.t[config.t <= t])
    pts.extend(float(v) for v in extra if 0.0 < v < t)
    out = np.unique(np.array(pts))
    return out
