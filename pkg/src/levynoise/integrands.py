"""Deterministic integrands built from factorizable closed-form nodes.

An integrand is a finite sum of terms, each the product of a time factor
g(s), per-axis space factors b_a(x_a), and a jump factor j(z).  The algebra
is closed under sum, difference, and pointwise product, which keeps every
compensator a product of one-dimensional integrals.  Nodes carry exact
antiderivatives where they exist; Gauss-Legendre is the fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _si


def _gl(n):
    if n not in _gl._store:
        _gl._store[n] = np.polynomial.legendre.leggauss(n)
    return _gl._store[n]


_gl._store = {}


def gauss_legendre(fn, a, b, n=64):
    t, w = _gl(n)
    x = 0.5 * (b - a) * t + 0.5 * (b + a)
    return 0.5 * (b - a) * float(np.sum(w * fn(x)))


# ---------------------------------------------------------------------------
# factor nodes


class Node:
    """One-dimensional factor; subclasses are immutable dataclasses."""

    kind = "?"

    def __call__(self, u):
        raise NotImplementedError

    def antiderivative(self, u):
        """F with F' = self and F(0) = 0, vectorized; None when unavailable."""
        return None

    def integral(self, a, b, n=64):
        """Exact via the antiderivative when possible, else Gauss-Legendre
        (adaptive quadrature for infinite ranges)."""
        F = self.antiderivative(np.array([a, b]))
        if F is not None and np.all(np.isfinite(F)):
            return float(F[1] - F[0])
        if math.isinf(a) or math.isinf(b):
            val, _ = _si.quad(lambda u: float(self(u)), a, b, limit=200)
            return val
        return gauss_legendre(self, a, b, n)

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Node):
    value: float
    kind = "const"

    def __call__(self, u):
        return np.full(np.shape(u), self.value) if np.ndim(u) else self.value

    def antiderivative(self, u):
        return self.value * np.asarray(u, dtype=float)

    def to_json(self):
        return {"kind": "const", "value": self.value}


ONE_NODE = Const(1.0)


@dataclass(frozen=True)
class Poly(Node):
    """c0 + c1 u + c2 u^2 + ..."""

    coeffs: tuple[float, ...]
    kind = "poly"

    def __call__(self, u):
        return np.polynomial.polynomial.polyval(np.asarray(u, dtype=float), self.coeffs)

    def antiderivative(self, u):
        ac = [0.0] + [c / (k + 1) for k, c in enumerate(self.coeffs)]
        return np.polynomial.polynomial.polyval(np.asarray(u, dtype=float), ac)

    def to_json(self):
        return {"kind": "poly", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Exp(Node):
    """e^(rate * u)"""

    rate: float
    kind = "exp"

    def __call__(self, u):
        return np.exp(self.rate * np.asarray(u, dtype=float))

    def antiderivative(self, u):
        return (np.exp(self.rate * np.asarray(u, dtype=float)) - 1.0) / self.rate

    def to_json(self):
        return {"kind": "exp", "rate": self.rate}


@dataclass(frozen=True)
class ExpAbs(Node):
    """e^(rate * |u|); rate < 0 gives an integrable two-sided bump."""

    rate: float
    kind = "exp_abs"

    def __call__(self, u):
        return np.exp(self.rate * np.abs(np.asarray(u, dtype=float)))

    def antiderivative(self, u):
        u = np.asarray(u, dtype=float)
        return np.sign(u) * (np.exp(self.rate * np.abs(u)) - 1.0) / self.rate

    def to_json(self):
        return {"kind": "exp_abs", "rate": self.rate}


@dataclass(frozen=True)
class Cos(Node):
    freq: float
    kind = "cos"

    def __call__(self, u):
        return np.cos(self.freq * np.asarray(u, dtype=float))

    def antiderivative(self, u):
        return np.sin(self.freq * np.asarray(u, dtype=float)) / self.freq

    def to_json(self):
        return {"kind": "cos", "freq": self.freq}


@dataclass(frozen=True)
class Sin(Node):
    freq: float
    kind = "sin"

    def __call__(self, u):
        return np.sin(self.freq * np.asarray(u, dtype=float))

    def antiderivative(self, u):
        return (1.0 - np.cos(self.freq * np.asarray(u, dtype=float))) / self.freq

    def to_json(self):
        return {"kind": "sin", "freq": self.freq}


@dataclass(frozen=True)
class Indicator(Node):
    """1 on (lo, hi]; Lebesgue antiderivative ignores the endpoints."""

    lo: float
    hi: float
    kind = "indicator"

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = ((u > self.lo) & (u <= self.hi)).astype(float)
        return out if out.ndim else float(out)

    def antiderivative(self, u):
        u = np.asarray(u, dtype=float)
        return np.clip(u, self.lo, self.hi) - np.clip(0.0, self.lo, self.hi)

    def to_json(self):
        return {"kind": "indicator", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class AbsIndicator(Node):
    """1 on {lo < |u| <= hi}."""

    lo: float
    hi: float
    kind = "abs_indicator"

    def __call__(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        out = ((a > self.lo) & (a <= self.hi)).astype(float)
        return out if out.ndim else float(out)

    def antiderivative(self, u):
        u = np.asarray(u, dtype=float)
        return np.sign(u) * np.maximum(0.0, np.minimum(np.abs(u), self.hi) - self.lo)

    def to_json(self):
        return {"kind": "abs_indicator", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class AbsPow(Node):
    """|u|^power, power >= 0."""

    power: float
    kind = "abs_pow"

    def __call__(self, u):
        return np.abs(np.asarray(u, dtype=float)) ** self.power

    def antiderivative(self, u):
        u = np.asarray(u, dtype=float)
        return np.sign(u) * np.abs(u) ** (self.power + 1.0) / (self.power + 1.0)

    def to_json(self):
        return {"kind": "abs_pow", "power": self.power}


@dataclass(frozen=True)
class SignPow(Node):
    """sign(u)|u|^power; SignPow(1) is the identity u."""

    power: float
    kind = "sign_pow"

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.sign(u) * np.abs(u) ** self.power

    def antiderivative(self, u):
        u = np.asarray(u, dtype=float)
        return np.abs(u) ** (self.power + 1.0) / (self.power + 1.0)

    def to_json(self):
        return {"kind": "sign_pow", "power": self.power}


@dataclass(frozen=True)
class Product(Node):
    factors: tuple[Node, ...]
    kind = "product"

    def __call__(self, u):
        out = self.factors[0](u)
        for f in self.factors[1:]:
            out = out * f(u)
        return out

    def antiderivative(self, u):
        scale, core = 1.0, []
        for f in self.factors:
            if isinstance(f, Const):
                scale *= f.value
            else:
                core.append(f)
        if len(core) == 1:
            F = core[0].antiderivative(u)
            if F is not None:
                return scale * F
        return None

    def integral(self, a, b, n=64):
        # peel off constants and clip through indicator factors, then
        # integrate whatever single core node remains exactly
        scale = 1.0
        core = []
        for f in self.factors:
            if isinstance(f, Const):
                scale *= f.value
            elif isinstance(f, Indicator):
                a, b = max(a, f.lo), min(b, f.hi)
            else:
                core.append(f)
        if b <= a or scale == 0.0:
            return 0.0
        if not core:
            return scale * (b - a)
        if len(core) == 1:
            return scale * core[0].integral(a, b, n)
        if math.isinf(a) or math.isinf(b):
            prod = Product(tuple(core))
            val, _ = _si.quad(lambda u: float(prod(u)), a, b, limit=200)
            return scale * val
        return scale * gauss_legendre(Product(tuple(core)), a, b, n)

    def to_json(self):
        return {"kind": "product", "factors": [f.to_json() for f in self.factors]}


def _fuse(a: Node, b: Node) -> Node | None:
    """Closed-form product of two nodes, or None when no fusion applies."""
    if isinstance(a, Poly) and isinstance(b, Poly):
        return Poly(tuple(np.polynomial.polynomial.polymul(a.coeffs, b.coeffs)))
    if isinstance(a, Exp) and isinstance(b, Exp):
        return Exp(a.rate + b.rate)
    if isinstance(a, ExpAbs) and isinstance(b, ExpAbs):
        return ExpAbs(a.rate + b.rate)
    if isinstance(a, Indicator) and isinstance(b, Indicator):
        lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
        return Indicator(lo, hi) if lo < hi else Const(0.0)
    if isinstance(a, AbsIndicator) and isinstance(b, AbsIndicator):
        lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
        return AbsIndicator(lo, hi) if lo < hi else Const(0.0)
    # sign(u)|u|^p and |u|^q combine by adding powers, tracking the sign
    powers = {AbsPow: 0, SignPow: 1}
    if type(a) in powers and type(b) in powers:
        signed = (powers[type(a)] + powers[type(b)]) % 2
        p = a.power + b.power
        return SignPow(p) if signed else AbsPow(p)
    return None


def product_node(*factors: Node) -> Node:
    """Flatten nested products, fold constants, and fuse compatible nodes."""
    flat = []
    scale = 1.0
    stack = list(factors)
    while stack:
        f = stack.pop(0)
        if isinstance(f, Product):
            stack = list(f.factors) + stack
        elif isinstance(f, Const):
            scale *= f.value
        else:
            for i, g in enumerate(flat):
                fused = _fuse(g, f)
                if fused is not None:
                    if isinstance(fused, Const):
                        scale *= fused.value
                        flat.pop(i)
                    else:
                        flat[i] = fused
                    break
            else:
                flat.append(f)
    if scale == 0.0:
        return Const(0.0)
    if not flat:
        return Const(scale)
    if scale != 1.0:
        flat.insert(0, Const(scale))
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


_NODE_KINDS = {
    "const": lambda d: Const(float(d["value"])),
    "poly": lambda d: Poly(tuple(float(c) for c in d["coeffs"])),
    "exp": lambda d: Exp(float(d["rate"])),
    "exp_abs": lambda d: ExpAbs(float(d["rate"])),
    "cos": lambda d: Cos(float(d["freq"])),
    "sin": lambda d: Sin(float(d["freq"])),
    "indicator": lambda d: Indicator(float(d["lo"]), float(d["hi"])),
    "abs_indicator": lambda d: AbsIndicator(float(d["lo"]), float(d["hi"])),
    "abs_pow": lambda d: AbsPow(float(d["power"])),
    "sign_pow": lambda d: SignPow(float(d["power"])),
}


def node_from_json(d: dict) -> Node:
    kind = d.get("kind")
    if kind == "product":
        return product_node(*(node_from_json(f) for f in d["factors"]))
    if kind not in _NODE_KINDS:
        raise ValueError(f"unknown node kind: {kind!r}")
    return _NODE_KINDS[kind](d)


# ---------------------------------------------------------------------------
# terms and integrands


def space_axes(x) -> tuple:
    """Normalize a space argument to per-axis arrays.

    Accepts a tuple/list of axis arrays, an array with last axis = dimension,
    or (for d = 1) a bare scalar/1-d array of coordinate values.
    """
    if isinstance(x, (tuple, list)):
        return tuple(np.asarray(a, dtype=float) for a in x)
    x = np.asarray(x, dtype=float)
    if x.ndim >= 2:
        return tuple(x[..., k] for k in range(x.shape[-1]))
    return (x,)


@dataclass(frozen=True)
class Term:
    time: Node = ONE_NODE
    space: tuple[Node, ...] = ()
    jump: Node = ONE_NODE

    def space_value(self, x):
        """Product of the axis factors; axes beyond len(space) contribute 1."""
        if not self.space:
            return 1.0
        axes = space_axes(x)
        if len(axes) < len(self.space):
            raise ValueError(
                f"integrand touches {len(self.space)} space axes, got {len(axes)}")
        out = self.space[0](axes[0])
        for a, node in enumerate(self.space[1:], start=1):
            out = out * node(axes[a])
        return out


@dataclass(frozen=True)
class Integrand:
    """Finite sum of factorized terms; evaluable at any (s, x, z)."""

    terms: tuple[Term, ...]

    def __call__(self, s, x, z):
        total = 0.0
        for t in self.terms:
            total = total + t.time(s) * t.space_value(x) * t.jump(z)
        return total

    # -- algebra ------------------------------------------------------------

    def __add__(self, other):
        other = as_integrand(other)
        return Integrand(self.terms + other.terms)

    def __neg__(self):
        return Integrand(tuple(
            Term(product_node(Const(-1.0), t.time), t.space, t.jump) for t in self.terms))

    def __sub__(self, other):
        return self + (-as_integrand(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Integrand(tuple(
                Term(product_node(Const(float(other)), t.time), t.space, t.jump)
                for t in self.terms))
        other = as_integrand(other)
        out = []
        for a in self.terms:
            for b in other.terms:
                d = max(len(a.space), len(b.space))
                space = tuple(
                    product_node(
                        a.space[k] if k < len(a.space) else ONE_NODE,
                        b.space[k] if k < len(b.space) else ONE_NODE)
                    for k in range(d))
                out.append(Term(product_node(a.time, b.time), space,
                                product_node(a.jump, b.jump)))
        return Integrand(tuple(out))

    __rmul__ = __mul__

    def squared(self):
        return self * self

    # -- structure helpers ---------------------------------------------------

    def with_jump(self, node: Node) -> "Integrand":
        """Multiply every term's jump factor by `node`."""
        return Integrand(tuple(
            Term(t.time, t.space, product_node(t.jump, node)) for t in self.terms))

    def restrict_jump_abs(self, lo: float, hi: float) -> "Integrand":
        """Multiply by the indicator of {lo < |z| <= hi}."""
        return self.with_jump(AbsIndicator(lo, hi))

    def is_time_only(self) -> bool:
        return all(not t.space and isinstance(t.jump, Const) for t in self.terms)

    def is_space_time_only(self) -> bool:
        return all(isinstance(t.jump, Const) for t in self.terms)

    def time_breakpoints(self) -> list[float]:
        """Discontinuity points contributed by indicator time factors."""
        pts = []
        for t in self.terms:
            nodes = t.time.factors if isinstance(t.time, Product) else (t.time,)
            for nd in nodes:
                if isinstance(nd, Indicator):
                    pts.extend([nd.lo, nd.hi])
        return pts


ZERO = Integrand((Term(Const(0.0)),))
ONE = Integrand((Term(),))


def as_integrand(x) -> Integrand:
    if isinstance(x, Integrand):
        return x
    if isinstance(x, (int, float)):
        return Integrand((Term(Const(float(x))),))
    raise TypeError(f"cannot interpret {x!r} as an integrand")


def from_time(node: Node) -> Integrand:
    return Integrand((Term(time=node),))


def from_space(*axis_nodes: Node) -> Integrand:
    return Integrand((Term(space=tuple(axis_nodes)),))


def from_jump(node: Node) -> Integrand:
    return Integrand((Term(jump=node),))


def jump_identity() -> Integrand:
    """The integrand H(s, x, z) = z."""
    return from_jump(SignPow(1.0))


def term(time: Node = ONE_NODE, space: tuple[Node, ...] | Node = (),
         jump: Node = ONE_NODE) -> Integrand:
    if isinstance(space, Node):
        space = (space,)
    return Integrand((Term(time, tuple(space), jump),))


def integrand_to_json(h: Integrand) -> dict:
    return {"terms": [
        {"time": t.time.to_json(),
         "space": [n.to_json() for n in t.space],
         "jump": t.jump.to_json()}
        for t in h.terms]}


def integrand_from_json(d: dict) -> Integrand:
    terms = []
    for t in d["terms"]:
        terms.append(Term(
            node_from_json(t.get("time", {"kind": "const", "value": 1.0})),
            tuple(node_from_json(n) for n in t.get("space", [])),
            node_from_json(t.get("jump", {"kind": "const", "value": 1.0}))))
    return Integrand(tuple(terms))
