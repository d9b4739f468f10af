"""Named experiment suites binding simulation, analytics, and verdicts.

Each experiment consumes a validated Config, runs its Monte Carlo or
pathwise checks with counter-based seeding, and returns verdict rows plus
plot-ready CSV tables.  The CLI is a thin shell around this module; the
acceptance tests call the same entry points.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _stats

from . import apps
from . import integrate as it
from . import interlace as il
from . import ito
from .integrands import Integrand, integrand_from_json
from .mc import McEstimate, run_replicates, verdict
from .measure import LevyMeasure, measure_from_json
from .prm import Window, dump_csv, replicate_seed, simulate


class ConfigError(ValueError):
    """Configuration rejected before any computation; message carries the
    offending field path."""


@dataclass
class Config:
    experiment: str
    seed: int
    replicates: int
    workers: int
    k_sigma: float
    window: Window
    measures: dict[str, LevyMeasure]
    integrands: dict[str, Integrand]
    params: dict
    output_dir: str | None = None

    def measure(self, name: str | None = None) -> LevyMeasure:
        if name is None:
            return next(iter(self.measures.values()))
        try:
            return self.measures[name]
        except KeyError:
            raise ConfigError(f"measures.{name}: not defined") from None

    def integrand(self, name: str) -> Integrand:
        try:
            return self.integrands[name]
        except KeyError:
            raise ConfigError(f"integrands.{name}: not defined") from None


def parse_config(raw: dict) -> Config:
    def need(key, typ, path=""):
        if key not in raw:
            raise ConfigError(f"{path or key}: missing")
        return raw[key]

    name = need("experiment", str)
    if name not in REGISTRY:
        raise ConfigError(f"experiment: unknown name {name!r}; "
                          f"choose from {sorted(REGISTRY)}")
    try:
        wraw = need("window", dict)
        window = Window.from_json(wraw)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"window: {exc}") from exc

    measures = {}
    mraw = raw.get("measures")
    if mraw is None and "measure" in raw:
        mraw = {"default": raw["measure"]}
    if not mraw:
        raise ConfigError("measure: missing (give `measure` or `measures`)")
    for key, spec in mraw.items():
        try:
            measures[key] = measure_from_json(spec)
        except Exception as exc:
            raise ConfigError(f"measures.{key}: {exc}") from exc

    integrands = {}
    for key, spec in raw.get("integrands", {}).items():
        try:
            integrands[key] = integrand_from_json(spec)
        except Exception as exc:
            raise ConfigError(f"integrands.{key}: {exc}") from exc

    cfg = Config(
        experiment=name,
        seed=int(raw.get("seed", 0)),
        replicates=int(raw.get("replicates", 10000)),
        workers=int(raw.get("workers", 1)),
        k_sigma=float(raw.get("k_sigma", 4.0)),
        window=window,
        measures=measures,
        integrands=integrands,
        params=dict(raw.get("params", {})),
        output_dir=raw.get("output_dir"),
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg: Config) -> None:
    if cfg.replicates < 2:
        raise ConfigError("replicates: need at least 2")
    if cfg.workers < 1:
        raise ConfigError("workers: need at least 1")
    for key, m in cfg.measures.items():
        try:
            mass = m.shell_mass(cfg.window.shell)
        except Exception as exc:
            raise ConfigError(f"measures.{key}: shell mass: {exc}") from exc
        if not (mass < math.inf):
            raise ConfigError(f"measures.{key}: infinite intensity on the window shell")
        try:
            m.shell_moment(cfg.window.shell, 2.0)
        except Exception as exc:
            raise ConfigError(f"measures.{key}: second moment: {exc}") from exc


# ---------------------------------------------------------------------------
# results


@dataclass
class VerdictRow:
    name: str
    estimate: object
    target: object
    se: object
    z: float
    passed: bool


@dataclass
class ExperimentResult:
    experiment: str
    seed: int
    replicates: int
    verdicts: list[VerdictRow] = field(default_factory=list)
    tables: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def summary(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "replicates": self.replicates,
            "passed": bool(self.passed),
            "verdicts": [
                {"name": v.name, "estimate": _num(v.estimate),
                 "target": _num(v.target), "se": _num(v.se),
                 "z": _num(v.z), "pass": bool(v.passed)}
                for v in self.verdicts
            ],
        }


def _num(x):
    if isinstance(x, complex):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return [_num(v) for v in x.tolist()]
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return float(x)


def _mc_row(name, est: McEstimate, target, k_sigma, atol=0.0) -> VerdictRow:
    v = verdict(est, target, k_sigma, atol)
    return VerdictRow(name, est.mean, target, est.se, v.z, v.passed)


def _tol_row(name, value, tol) -> VerdictRow:
    z = value / tol if tol > 0 else (0.0 if value == 0 else math.inf)
    return VerdictRow(name, value, tol, 0.0, z, value <= tol)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, complex):
        return f"{v.real:.17g}{v.imag:+.17g}j"
    return str(v)


def _seed_for(cfg: Config, tag: int) -> int:
    return replicate_seed(cfg.seed, 10_000 + tag)


def _rng_seed(rng) -> int:
    return int(rng.integers(2 ** 63))


# ---------------------------------------------------------------------------
# experiments


def run_simulate(cfg: Config) -> ExperimentResult:
    """Point-process sanity: count mean, spatial uniformity, half-interval
    independence; writes one configuration as CSV."""
    w, m = cfg.window, cfg.measure()
    n = cfg.replicates
    lam = w.horizon * w.box_volume * m.shell_mass(w.shell)
    counts = np.empty(n)
    first = np.empty(n)
    second = np.empty(n)
    xs = [[] for _ in range(w.dim)]
    keep_x = min(n, int(cfg.params.get("spatial_sample", 300)))
    for k in range(n):
        c = simulate(w, m, replicate_seed(_seed_for(cfg, 0), k))
        counts[k] = len(c)
        half = w.horizon / 2.0
        first[k] = int(np.sum(c.t <= half))
        second[k] = len(c) - first[k]
        if k < keep_x:
            for ax in range(w.dim):
                xs[ax].append(c.x[:, ax])
    res = ExperimentResult(cfg.experiment, cfg.seed, n)
    se = counts.std(ddof=1) / math.sqrt(n)
    est = McEstimate(float(counts.mean()), float(se), n, cfg.seed)
    res.verdicts.append(_mc_row("count_mean", est, lam, cfg.k_sigma))
    level = float(cfg.params.get("test_level", 1e-3))
    for ax in range(w.dim):
        sample = np.concatenate(xs[ax])
        lo, hi = w.box[ax]
        p = float(_stats.kstest(sample, "uniform", args=(lo, hi - lo)).pvalue)
        res.verdicts.append(VerdictRow(f"spatial_uniform_ks_axis{ax + 1}", p,
                                       level, 0.0, 0.0, p > level))
    cap = 6
    table = np.zeros((cap + 1, cap + 1))
    for a, b in zip(np.minimum(first, cap).astype(int),
                    np.minimum(second, cap).astype(int)):
        table[a, b] += 1
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] > 1 and table.shape[1] > 1:
        p = float(_stats.chi2_contingency(table).pvalue)
        res.verdicts.append(VerdictRow("halves_independent_chi2", p, level,
                                       0.0, 0.0, p > level))
    res.tables["points.csv"] = dump_csv(simulate(w, m, _seed_for(cfg, 1)))
    return res


def run_isometry(cfg: Config) -> ExperimentResult:
    """Zero mean and second-moment identity of compensated integrals, plus
    the raw-integral mean identity, per (measure, integrand) cell."""
    w = cfg.window
    T = w.horizon
    cells = cfg.params.get("cells")
    if not cells:
        cells = [{"measure": mk, "integrand": hk}
                 for mk in cfg.measures for hk in cfg.integrands]
    res = ExperimentResult(cfg.experiment, cfg.seed, cfg.replicates)
    rows = []
    for i, cell in enumerate(cells):
        m = cfg.measure(cell["measure"])
        H = cfg.integrand(cell["integrand"])
        comp = it.compensator(H, w, m, T)
        comp2 = it.compensator(H.squared(), w, m, T)

        def one(rng, m=m, H=H, comp=comp):
            c = simulate(w, m, _rng_seed(rng))
            raw = it.int_N(H, c, T)
            nhat = raw - comp
            return np.array([nhat, nhat * nhat, raw])

        est = run_replicates(one, cfg.replicates, _seed_for(cfg, 100 + i),
                             cfg.workers)
        label = f"{cell['measure']}/{cell['integrand']}"
        parts = [
            (f"centered_mean[{label}]", 0, 0.0),
            (f"second_moment[{label}]", 1, comp2),
            (f"raw_mean[{label}]", 2, comp),
        ]
        for name, idx, target in parts:
            sub = McEstimate(float(est.mean[idx]), float(est.se[idx]),
                             est.n, est.master_seed)
            res.verdicts.append(_mc_row(name, sub, target, cfg.k_sigma))
            rows.append((cell["measure"], cell["integrand"], name.split("[")[0],
                         float(sub.mean), float(sub.se), float(target),
                         res.verdicts[-1].z))
    res.tables["isometry.csv"] = _csv(
        ("measure", "integrand", "statistic", "estimate", "se", "target", "z"), rows)
    return res


def run_charfn(cfg: Config) -> ExperimentResult:
    """Empirical characteristic function of the noise charge of a set
    against the shell-exact exponent."""
    w, m = cfg.window, cfg.measure()
    a = float(cfg.params.get("a", 0.4))
    us = np.asarray(cfg.params.get("u_values", [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]),
                    dtype=float)
    box = tuple(tuple(b) for b in cfg.params.get("box", w.box))
    interval = tuple(cfg.params.get("interval", (0.0, w.horizon)))
    n = cfg.replicates
    vol = (interval[1] - interval[0])
    for lo, hi in box:
        vol *= hi - lo
    big = w.shell.clip(1.0, math.inf)
    big_m1 = m.shell_moment(big, 1.0, signed=True) if big else 0.0
    targets = np.array([
        np.exp(vol * (1j * u * a + m.psi_shell(w.shell, u) + 1j * u * big_m1))
        for u in us])

    def one(rng):
        c = simulate(w, m, _rng_seed(rng))
        zval = it.z_of_set(a, box, interval, c, m)
        return np.exp(1j * us * zval)

    est = run_replicates(one, n, _seed_for(cfg, 200), cfg.workers)
    res = ExperimentResult(cfg.experiment, cfg.seed, n)
    tol = 4.0 / math.sqrt(n)
    rows = []
    for i, u in enumerate(us):
        emp = complex(est.mean[i])
        err = abs(emp - targets[i])
        res.verdicts.append(VerdictRow(f"charfn[u={u:g}]", emp,
                                       complex(targets[i]), 1.0 / math.sqrt(n),
                                       err * math.sqrt(n), err <= tol))
        rows.append((u, emp, complex(targets[i]), err, tol))
    res.tables["charfn.csv"] = _csv(("u", "empirical", "exact", "error", "tolerance"),
                                    rows)
    return res


def _matrix_from_params(cfg: Config, key: str, default: list[str]) -> list:
    names = cfg.params.get(key, default)
    return [(nm, cfg.integrand(nm)) for nm in names]


def _fns_from_params(cfg: Config):
    specs = cfg.params.get("functions", [
        {"kind": "poly", "coeffs": [0.0, 0.0, 1.0]},
        {"kind": "exp", "scale": 0.4},
        {"kind": "cos", "scale": 1.0},
    ])
    return [ito.smooth_fn_from_json(s) for s in specs]


ITO_CSV_HEADER = ("cell", "replicate", "t", "lhs", "term1", "term2", "term3",
                  "term4", "rhs", "residual")


def run_ito_lemma(cfg: Config) -> ExperimentResult:
    """Pathwise identity for the formula without compensation over the cell
    matrix; reports the max residual per cell."""
    w, m = cfg.window, cfg.measure()
    T = w.horizon
    paths = int(cfg.params.get("paths", 1000))
    tol = float(cfg.params.get("residual_tol", 1e-8))
    fns = _fns_from_params(cfg)
    Gs = _matrix_from_params(cfg, "g_names", ["G0", "G1", "G2"])
    Ks = _matrix_from_params(cfg, "k_names", ["K1", "K2", "K3"])
    res = ExperimentResult(cfg.experiment, cfg.seed, paths)
    rows = []
    cell_idx = 0
    for fn in fns:
        for gname, G in Gs:
            for kname, K in Ks:
                label = f"{fn.name}|{gname}|{kname}"
                worst = 0.0
                seed0 = _seed_for(cfg, 300 + cell_idx)
                for k in range(paths):
                    c = simulate(w, m, replicate_seed(seed0, k))
                    path = it.build_path(G, K, None, c, m, split=0.0)
                    lhs = ito.ito_lhs(fn, path, T)
                    rhs = ito.ito_rhs_raw(fn, G, K, c, m, T)
                    resid = abs(lhs - rhs)
                    worst = max(worst, resid)
                    if k < 25:
                        mask = c.t <= T
                        yl = path.eval_left(c.t[mask])
                        kv = np.asarray(K(c.t[mask], c.x[mask], c.z[mask]),
                                        dtype=float)
                        jump_term = float(np.sum(fn.f(yl + kv) - fn.f(yl)))
                        rows.append((label, k, T, lhs, rhs - jump_term,
                                     jump_term, 0.0, 0.0, rhs, lhs - rhs))
                res.verdicts.append(_tol_row(f"max_residual[{label}]", worst, tol))
                cell_idx += 1
    res.tables["ito_lemma_residuals.csv"] = _csv(ITO_CSV_HEADER, rows)
    return res


def run_ito1(cfg: Config) -> ExperimentResult:
    """Pathwise identity for the four-term split formula, the martingale
    mean of its compensated term, and agreement with the all-compensated
    form on shared cases."""
    w, m = cfg.window, cfg.measure()
    T = w.horizon
    paths = int(cfg.params.get("paths", 1000))
    tol = float(cfg.params.get("residual_tol", 1e-6))
    agree_tol = float(cfg.params.get("agreement_tol", 1e-10))
    agree_paths = int(cfg.params.get("agreement_paths", 100))
    fns = _fns_from_params(cfg)
    Gs = _matrix_from_params(cfg, "g_names", ["G0", "G1", "G2"])
    Ks = _matrix_from_params(cfg, "k_names", ["K1", "K2", "K3"])
    H = cfg.integrand(cfg.params.get("h_name", "H"))
    res = ExperimentResult(cfg.experiment, cfg.seed, paths)
    rows = []
    cell_idx = 0
    mart_samples = []
    for fn in fns:
        for gname, G in Gs:
            for kname, K in Ks:
                label = f"{fn.name}|{gname}|{kname}"
                worst = 0.0
                seed0 = _seed_for(cfg, 400 + cell_idx)
                for k in range(paths):
                    c = simulate(w, m, replicate_seed(seed0, k))
                    path = it.build_path(G, K, H, c, m, split=1.0)
                    lhs = ito.ito_lhs(fn, path, T)
                    r = ito.ito_rhs_big_small(fn, G, K, H, c, m, T)
                    resid = abs(lhs - r.total)
                    worst = max(worst, resid)
                    if cell_idx == 0:
                        mart_samples.append(r.compensated_term)
                    if k < 25:
                        rows.append((label, k, T, lhs, r.g_term, r.big_jump_term,
                                     r.compensated_term, r.nu_term, r.total,
                                     lhs - r.total))
                res.verdicts.append(_tol_row(f"max_residual[{label}]", worst, tol))
                cell_idx += 1
    mart = np.asarray(mart_samples)
    est = McEstimate(float(mart.mean()),
                     float(mart.std(ddof=1) / math.sqrt(len(mart))),
                     len(mart), cfg.seed)
    res.verdicts.append(_mc_row("compensated_term_mean", est, 0.0, cfg.k_sigma))
    # shared-case agreement: K = H on the big-jump side
    for i, fn in enumerate(fns):
        G = Gs[min(1, len(Gs) - 1)][1]
        g2 = ito.equivalent_time_drift(G, H, w, m, split=1.0)
        worst = 0.0
        seed0 = _seed_for(cfg, 450 + i)
        for k in range(agree_paths):
            c = simulate(w, m, replicate_seed(seed0, k))
            r1 = ito.ito_rhs_big_small(fn, G, H, H, c, m, T)
            r2 = ito.ito_rhs_all_compensated(fn, g2, H, c, m, T)
            worst = max(worst, abs(r1.total - r2.total))
        res.verdicts.append(_tol_row(f"form_agreement[{fn.name}]", worst, agree_tol))
    res.tables["ito1_residuals.csv"] = _csv(ITO_CSV_HEADER, rows)
    return res


def run_ito2(cfg: Config) -> ExperimentResult:
    """Pathwise identity for the all-compensated formula over its matrix."""
    w, m = cfg.window, cfg.measure()
    T = w.horizon
    paths = int(cfg.params.get("paths", 1000))
    tol = float(cfg.params.get("residual_tol", 1e-6))
    fns = [ito.smooth_fn_from_json(s) for s in cfg.params.get("functions", [
        {"kind": "poly", "coeffs": [0.0, 0.0, 1.0]},
        {"kind": "abs_pow", "power": 2.0},
        {"kind": "exp", "scale": 0.4},
    ])]
    Gs = _matrix_from_params(cfg, "g_names", ["G0", "G1", "G2"])
    Hs = _matrix_from_params(cfg, "h_names", ["H1", "H2", "H3"])
    res = ExperimentResult(cfg.experiment, cfg.seed, paths)
    rows = []
    cell_idx = 0
    for fn in fns:
        for gname, G in Gs:
            for hname, H in Hs:
                label = f"{fn.name}|{gname}|{hname}"
                worst = 0.0
                seed0 = _seed_for(cfg, 500 + cell_idx)
                for k in range(paths):
                    c = simulate(w, m, replicate_seed(seed0, k))
                    path = it.build_path(G, None, H, c, m, split=math.inf)
                    lhs = ito.ito_lhs(fn, path, T)
                    r = ito.ito_rhs_all_compensated(fn, G, H, c, m, T)
                    resid = abs(lhs - r.total)
                    worst = max(worst, resid)
                    if k < 25:
                        rows.append((label, k, T, lhs, r.g_term, 0.0,
                                     r.compensated_term, r.nu_term, r.total,
                                     lhs - r.total))
                res.verdicts.append(_tol_row(f"max_residual[{label}]", worst, tol))
                cell_idx += 1
    res.tables["ito2_residuals.csv"] = _csv(ITO_CSV_HEADER, rows)
    return res


def run_interlace(cfg: Config) -> ExperimentResult:
    """Threshold ladders plus coupled sup-norm diagnostics against the
    geometric bounds."""
    w, m = cfg.window, cfg.measure()
    T = w.horizon
    n_max = int(cfg.params.get("n_max", 6))
    reps = int(cfg.params.get("diag_replicates", 64))
    H = cfg.integrand(cfg.params.get("h_name", "H"))
    res = ExperimentResult(cfg.experiment, cfg.seed, reps)

    ladder = il.eps_sequence(H, w.box, T, m, n_max=n_max,
                             small_hi=float(cfg.params.get("small_hi", 1.0)))
    if cfg.params.get("worked_example", False):
        worst = max(abs(lv.threshold - 8.0 ** -lv.n / 2.0) / (8.0 ** -lv.n / 2.0)
                    for lv in ladder.levels)
        res.verdicts.append(_tol_row("threshold_closed_form_rel_err", worst, 1e-8))
    problem = il.LadderProblem(H=H, measure=m, T=T, box=w.box,
                               small_hi=float(cfg.params.get("small_hi", 1.0)))
    rep = il.interlacing_diagnostic(ladder, problem, reps, _seed_for(cfg, 600))
    for row in rep.rows:
        res.verdicts.append(VerdictRow(
            f"sup2_bound[n={row.level}]", row.empirical_sup2, row.bound,
            row.sup2_se, (row.empirical_sup2 - row.bound) / row.sup2_se
            if row.sup2_se > 0 else 0.0,
            row.empirical_sup2 <= row.bound + cfg.k_sigma * row.sup2_se))
        res.verdicts.append(VerdictRow(
            f"exceed_bound[n={row.level}]", row.exceed_freq, row.bound_freq,
            row.exceed_se, (row.exceed_freq - row.bound_freq) / row.exceed_se
            if row.exceed_se > 0 else 0.0,
            row.exceed_freq <= row.bound_freq + cfg.k_sigma * row.exceed_se))
    res.tables["eps_ladder.csv"] = rep.to_csv()

    if cfg.params.get("spatial", True):
        Hs = cfg.integrand(cfg.params.get("spatial_h_name", "HS"))
        Ks = cfg.integrand(cfg.params.get("spatial_k_name", "KS"))
        sm = cfg.measure(cfg.params.get("spatial_measure")) \
            if cfg.params.get("spatial_measure") else m
        s_nmax = int(cfg.params.get("spatial_n_max", 4))
        s_reps = int(cfg.params.get("spatial_replicates", 48))
        sladder = il.a_sequence(Hs, Ks, T, sm, n_max=s_nmax, kind="spatial-I",
                                shell=w.shell, dim=w.dim)
        sproblem = il.LadderProblem(H=Hs, K=Ks, measure=sm, T=T,
                                    shell=w.shell, dim=w.dim)
        srep = il.interlacing_diagnostic(sladder, sproblem, s_reps,
                                         _seed_for(cfg, 601))
        for row in srep.rows:
            res.verdicts.append(VerdictRow(
                f"spatial_sup2_bound[n={row.level}]", row.empirical_sup2,
                row.bound, row.sup2_se,
                (row.empirical_sup2 - row.bound) / row.sup2_se
                if row.sup2_se > 0 else 0.0,
                row.empirical_sup2 <= row.bound + cfg.k_sigma * row.sup2_se))
            res.verdicts.append(VerdictRow(
                f"spatial_exceed_bound[n={row.level}]", row.exceed_freq,
                row.bound_freq, row.exceed_se,
                (row.exceed_freq - row.bound_freq) / row.exceed_se
                if row.exceed_se > 0 else 0.0,
                row.exceed_freq <= row.bound_freq + cfg.k_sigma * row.exceed_se))
        res.tables["spatial_ladder.csv"] = srep.to_csv()
    return res


def run_kunita(cfg: Config) -> ExperimentResult:
    """Maximal p-th moment sweep with the exact second-moment verdict and a
    frozen regression guard on the observed ratios."""
    w = cfg.window
    T = w.horizon
    ps = [float(p) for p in cfg.params.get("ps", [2.0, 3.0, 4.0])]
    reps = int(cfg.params.get("cell_replicates", cfg.replicates))
    guard = float(cfg.params.get("ratio_guard_factor", 10.0))
    xnames = cfg.params.get("x_names", ["X1", "X2", "X3"])
    res = ExperimentResult(cfg.experiment, cfg.seed, reps)
    rows = []
    worst_guard = 0.0
    idx = 0
    for mk, m in cfg.measures.items():
        for xn in xnames:
            X = cfg.integrand(xn)
            for p in ps:
                cell = apps.moment_bound_cell(X, m, p, T, w, reps,
                                              _seed_for(cfg, 700 + idx))
                rows.append((mk, xn, p, cell.lhs_mean, cell.lhs_se,
                             cell.bracket, cell.ratio, cell.moment_scale))
                if cell.bracket > 0:
                    worst_guard = max(worst_guard,
                                      cell.ratio / (guard * cell.moment_scale))
                if p == 2.0:
                    v_shell = m.shell_moment(w.shell, 2.0)
                    target = v_shell * apps.space_time_norm_sq(X, w, T)
                    est = McEstimate(cell.isometry_mean, cell.isometry_se,
                                     reps, cfg.seed)
                    res.verdicts.append(_mc_row(
                        f"p2_isometry[{mk}/{xn}]", est, target, cfg.k_sigma))
                idx += 1
    res.verdicts.append(_tol_row("ratio_guard(max ratio / (10 max(v^p/2, m_p)))",
                                 worst_guard, 1.0))
    res.tables["kunita_sweep.csv"] = _csv(
        ("measure", "integrand", "p", "lhs_mean", "lhs_se", "bracket",
         "ratio", "moment_scale"), rows)
    return res


def run_martingale(cfg: Config) -> ExperimentResult:
    """Mean-one verdict, integral-representation residuals, modulus identity,
    and the characteristic functional at several frequencies."""
    w, m = cfg.window, cfg.measure()
    T = w.horizon
    h = cfg.integrand(cfg.params.get("h_name", "h"))
    us = [float(u) for u in cfg.params.get("u_values", [-1.0, -0.5, 0.5, 1.0, 2.0])]
    n = cfg.replicates
    psi_int = apps.psi_space_time_integral(h, w, m, T)
    psi_scaled = [apps.psi_space_time_integral(h * u, w, m, T) for u in us]

    def one(rng):
        c = simulate(w, m, _rng_seed(rng))
        L = it.l_integral(h, c, m, T)
        out = np.empty(1 + len(us), dtype=complex)
        out[0] = np.exp(1j * L - psi_int)
        out[1:] = np.exp(1j * np.asarray(us) * L)
        return out

    est = run_replicates(one, n, _seed_for(cfg, 800), cfg.workers)
    res = ExperimentResult(cfg.experiment, cfg.seed, n)
    m_est = McEstimate(complex(est.mean[0]), complex(est.se[0]), n, cfg.seed)
    res.verdicts.append(_mc_row("martingale_mean", m_est, 1.0 + 0.0j, cfg.k_sigma))
    tol = 4.0 / math.sqrt(n)
    rows = []
    for i, u in enumerate(us):
        emp = complex(est.mean[1 + i])
        target = complex(np.exp(psi_scaled[i]))
        err = abs(emp - target)
        res.verdicts.append(VerdictRow(f"charfn_noise[u={u:g}]", emp, target,
                                       1.0 / math.sqrt(n), err * math.sqrt(n),
                                       err <= tol))
        rows.append((u, emp, target, err, tol))

    rep_paths = int(cfg.params.get("representation_paths", 100))
    rep_tol = float(cfg.params.get("representation_tol", 1e-6))
    worst = 0.0
    worst_mod = 0.0
    seed0 = _seed_for(cfg, 801)
    for k in range(rep_paths):
        c = simulate(w, m, replicate_seed(seed0, k))
        worst = max(worst, apps.representation_residual(h, c, m, T))
        worst_mod = max(worst_mod, apps.modulus_gap(h, c, m, T, psi_int))
    res.verdicts.append(_tol_row("representation_residual_max", worst, rep_tol))
    res.verdicts.append(_tol_row("modulus_identity_max_gap", worst_mod, 1e-10))
    res.tables["martingale_charfn.csv"] = _csv(
        ("u", "empirical", "exact", "error", "tolerance"), rows)
    return res


def run_chaos(cfg: Config) -> ExperimentResult:
    """Multiple-integral isometry, cross-order orthogonality, the product
    identity for disjoint supports, and the explicit second-order expansion."""
    w, m = cfg.window, cfg.measure()
    T = w.horizon
    slot_a = cfg.integrand(cfg.params.get("slot_a", "A"))
    slot_b = cfg.integrand(cfg.params.get("slot_b", "B"))
    slot_c = cfg.integrand(cfg.params.get("slot_c", "C"))
    n = cfg.replicates
    f2 = apps.ChaosFunction((slot_a, slot_b))
    apps.check_disjoint(f2, w, m, T)
    norm2 = apps.chaos_norm_sq(f2, w, m, T)

    def one(rng):
        c = simulate(w, m, _rng_seed(rng))
        i1 = it.int_Nhat(slot_c, c, m, T)
        i2 = apps.multiple_integral(f2, c, m, T, validate=False)
        prod = it.int_Nhat(slot_a, c, m, T) * it.int_Nhat(slot_b, c, m, T)
        expansion = apps.second_chaos_expansion_residual(slot_a, c, m, T)
        return np.array([i1, i2 * i2, i1 * i2, expansion * expansion,
                         abs(i2 - prod)])

    est = run_replicates(one, n, _seed_for(cfg, 900), cfg.workers)
    res = ExperimentResult(cfg.experiment, cfg.seed, n)

    def sub(i):
        return McEstimate(float(est.mean[i]), float(est.se[i]), n, cfg.seed)

    res.verdicts.append(_mc_row("first_order_mean", sub(0), 0.0, cfg.k_sigma))
    res.verdicts.append(_mc_row("second_order_isometry", sub(1), 2.0 * norm2,
                                cfg.k_sigma))
    res.verdicts.append(_mc_row("cross_order_orthogonality", sub(2), 0.0,
                                cfg.k_sigma))
    res.verdicts.append(_mc_row("expansion_l2_residual", sub(3), 0.0,
                                cfg.k_sigma, atol=1e-16))
    prod_tol = float(cfg.params.get("product_tol", 1e-9))
    # the mean of |I2 - product| over replicates, plus its spread, bounds the max
    worst = 0.0
    seed0 = _seed_for(cfg, 901)
    for k in range(min(n, int(cfg.params.get("product_check_paths", 300)))):
        c = simulate(w, m, replicate_seed(seed0, k))
        i2 = apps.multiple_integral(f2, c, m, T, validate=False)
        prod = it.int_Nhat(slot_a, c, m, T) * it.int_Nhat(slot_b, c, m, T)
        worst = max(worst, abs(i2 - prod))
    res.verdicts.append(_tol_row("product_identity_max_gap", worst, prod_tol))
    res.tables["chaos.csv"] = _csv(
        ("statistic", "estimate", "se", "target"),
        [("first_order_mean", float(est.mean[0]), float(est.se[0]), 0.0),
         ("second_order_isometry", float(est.mean[1]), float(est.se[1]), 2.0 * norm2),
         ("cross_order_orthogonality", float(est.mean[2]), float(est.se[2]), 0.0),
         ("expansion_l2_residual", float(est.mean[3]), float(est.se[3]), 0.0)])
    return res


REGISTRY = {
    "simulate": run_simulate,
    "isometry": run_isometry,
    "charfn": run_charfn,
    "ito1": run_ito1,
    "ito2": run_ito2,
    "ito-lemma": run_ito_lemma,
    "interlace": run_interlace,
    "kunita": run_kunita,
    "martingale": run_martingale,
    "chaos": run_chaos,
}


def run_experiment(cfg: Config) -> ExperimentResult:
    return REGISTRY[cfg.experiment](cfg)
