"""Poisson random measure on a bounded window [0,T] x box x shell.

Simulation follows the classical compound-Poisson representation: the point
count is Poisson with intensity T |B| nu(shell), arrival times are sorted
uniforms, and the (x, z) marks are i.i.d. with the normalized product law.
Restriction keeps the same underlying realization, which is what makes the
interlacing ladders couplings rather than independent resimulations.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .measure import LevyMeasure, Shell


@dataclass(frozen=True)
class Window:
    """Simulation window: horizon x axis-aligned box x jump shell."""

    horizon: float
    box: tuple[tuple[float, float], ...]
    shell: Shell

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not 1 <= len(self.box) <= 3:
            raise ValueError(f"box dimension must be 1..3, got {len(self.box)}")
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(f"degenerate box axis ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def box_volume(self) -> float:
        vol = 1.0
        for lo, hi in self.box:
            vol *= hi - lo
        return vol

    def contains(self, other: "Window") -> bool:
        if other.horizon > self.horizon or other.dim != self.dim:
            return False
        for (lo, hi), (olo, ohi) in zip(self.box, other.box):
            if olo < lo or ohi > hi:
                return False
        return other.shell.lo >= self.shell.lo and other.shell.hi <= self.shell.hi

    def to_json(self) -> dict:
        return {"horizon": self.horizon,
                "box": [[lo, hi] for lo, hi in self.box],
                "shell": [self.shell.lo, self.shell.hi]}

    @staticmethod
    def from_json(d: dict) -> "Window":
        lo, hi = d["shell"]
        return Window(float(d["horizon"]),
                      tuple((float(a), float(b)) for a, b in d["box"]),
                      Shell(float(lo), math.inf if hi in ("inf", None) else float(hi)))


@dataclass(frozen=True)
class PointConfiguration:
    """One realization restricted to a window: sorted points (t_i, x_i, z_i)."""

    t: np.ndarray   # (n,)
    x: np.ndarray   # (n, d)
    z: np.ndarray   # (n,)
    window: Window
    seed: int

    def __post_init__(self):
        for arr in (self.t, self.x, self.z):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        return (isinstance(other, PointConfiguration)
                and self.window == other.window and self.seed == other.seed
                and np.array_equal(self.t, other.t)
                and np.array_equal(self.x, other.x)
                and np.array_equal(self.z, other.z))


def _sort_points(t, x, z):
    # primary key t; ties (probability zero) broken by (x, z) lexicographic
    keys = (z,) + tuple(x[:, k] for k in reversed(range(x.shape[1]))) + (t,)
    order = np.lexsort(keys)
    return t[order], x[order], z[order]


def simulate(window: Window, measure: LevyMeasure, seed: int) -> PointConfiguration:
    """Draw one configuration; deterministic given (window, measure, seed)."""
    mass = measure.shell_mass(window.shell)
    if not mass < math.inf:
        raise ValueError("shell intensity is infinite; truncate the shell away from 0")
    lam = window.horizon * window.box_volume * mass
    rng = np.random.default_rng(int(seed) % 2 ** 64)
    n = int(rng.poisson(lam)) if lam > 0 else 0
    d = window.dim
    if n == 0:
        return PointConfiguration(np.empty(0), np.empty((0, d)), np.empty(0),
                                  window, int(seed))
    t = rng.uniform(0.0, window.horizon, size=n)
    x = np.empty((n, d))
    for k, (lo, hi) in enumerate(window.box):
        x[:, k] = rng.uniform(lo, hi, size=n)
    z = np.asarray(measure.sample_shell(window.shell, rng, size=n), dtype=float)
    t, x, z = _sort_points(t, x, z)
    return PointConfiguration(t, x, z, window, int(seed))


def restrict(config: PointConfiguration, sub: Window) -> PointConfiguration:
    """Keep exactly the points inside `sub`; a coupling, not a resimulation."""
    if not config.window.contains(sub):
        raise ValueError(f"{sub} is not contained in the source window")
    keep = config.t <= sub.horizon
    for k, (lo, hi) in enumerate(sub.box):
        keep &= (config.x[:, k] >= lo) & (config.x[:, k] <= hi)
    keep &= np.asarray(sub.shell.contains(config.z))
    return PointConfiguration(config.t[keep].copy(), config.x[keep].copy(),
                              config.z[keep].copy(), sub, config.seed)


def replicate_seed(master_seed: int, k: int) -> int:
    """Counter-based derivation: replicate k's stream is independent of
    scheduling and of every other replicate."""
    ss = np.random.SeedSequence(int(master_seed) % 2 ** 64, spawn_key=(int(k),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# CSV round trip (JSON header line, then t,x1..xd,z rows)


def dump_csv(config: PointConfiguration) -> str:
    d = config.window.dim
    buf = io.StringIO()
    header = {"window": config.window.to_json(), "seed": config.seed}
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    buf.write("t," + ",".join(f"x{k + 1}" for k in range(d)) + ",z\n")
    for i in range(len(config)):
        row = [f"{config.t[i]:.17g}"]
        row += [f"{config.x[i, k]:.17g}" for k in range(d)]
        row.append(f"{config.z[i]:.17g}")
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def save_csv(config: PointConfiguration, path) -> None:
    with open(path, "w") as fh:
        fh.write(dump_csv(config))


def parse_csv(text: str) -> PointConfiguration:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing JSON header line")
    header = json.loads(lines[0][1:].strip())
    window = Window.from_json(header["window"])
    d = window.dim
    rows = [ln.split(",") for ln in lines[2:]]
    n = len(rows)
    t = np.array([float(r[0]) for r in rows])
    x = np.array([[float(r[1 + k]) for k in range(d)] for r in rows]).reshape(n, d)
    z = np.array([float(r[1 + d]) for r in rows])
    return PointConfiguration(t, x, z, window, int(header["seed"]))


def load_csv(path) -> PointConfiguration:
    with open(path) as fh:
        return parse_csv(fh.read())
