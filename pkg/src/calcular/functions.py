"""Holomorphic functions on a polydisk or ball, and their scalar evaluation.

Four kinds of function are representable: constants, coordinate functions,
polynomials and transfer functions of a realization.  Polynomials are stored
as a sorted map from exponent tuples to coefficients so that Horner evaluation
always runs in the same order.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import OutsideDomain, UnsupportedVariant

MAX_DEGREE = 64


@dataclass(frozen=True)
class Domain:
    kind: str = "polydisk"  # "polydisk" or "ball"
    d: int = 1
    margin: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("polydisk", "ball"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("d must be a positive integer")
        if not 0.0 < self.margin < 1.0:
            raise ValueError("margin must lie in (0, 1)")

    def contains(self, z, strict=False):
        z = np.asarray(z, dtype=np.complex128).reshape(-1)
        if z.size != self.d:
            raise ValueError(f"point has {z.size} coordinates, domain has d={self.d}")
        bound = 1.0 - self.margin if strict else 1.0
        if self.kind == "polydisk":
            return bool(np.max(np.abs(z)) < bound)
        return bool(np.sum(np.abs(z) ** 2) < bound)


def domain_contains(domain, z, strict=False):
    return domain.contains(z, strict=strict)


class HoloFunction:
    """Base class; subclasses are immutable value objects."""

    def __call__(self, z):
        return eval_point(self, z)


@dataclass(frozen=True)
class Constant(HoloFunction):
    c: complex = 0j


@dataclass(frozen=True)
class Coordinate(HoloFunction):
    r: int = 1  # 1-based

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("coordinate index is 1-based")

    def to_polynomial(self):
        alpha = tuple(1 if i == self.r - 1 else 0 for i in range(self.r))
        return Polynomial({alpha: 1.0})


@dataclass(frozen=True, init=False)
class Polynomial(HoloFunction):
    """Finite sum of c_alpha z^alpha; ``terms`` is sorted by exponent."""

    d: int
    terms: tuple

    def __init__(self, coeffs, d=None):
        items = {}
        for alpha, c in dict(coeffs).items():
            alpha = tuple(int(a) for a in alpha)
            if any(a < 0 for a in alpha):
                raise ValueError("negative exponent")
            if any(a > MAX_DEGREE for a in alpha):
                raise ValueError(f"degree exceeds {MAX_DEGREE} in some variable")
            items[alpha] = complex(c)
        width = max([len(a) for a in items] + [1 if d is None else d])
        if d is not None and width > d:
            raise ValueError("exponent longer than d")
        merged = {}
        for alpha, c in items.items():
            key = alpha + (0,) * (width - len(alpha))
            merged[key] = merged.get(key, 0j) + c
        object.__setattr__(self, "d", width)
        object.__setattr__(self, "terms", tuple(sorted((a, c) for a, c in merged.items() if c != 0)))

    @property
    def coeffs(self):
        return dict(self.terms)

    def __mul__(self, other):
        other = as_polynomial(other)
        d = max(self.d, other.d)
        out = {}
        for a, c in self.terms:
            a = a + (0,) * (d - len(a))
            for b, e in other.terms:
                b = b + (0,) * (d - len(b))
                key = tuple(x + y for x, y in zip(a, b))
                out[key] = out.get(key, 0j) + c * e
        return Polynomial(out, d)

    __rmul__ = __mul__

    def __add__(self, other):
        other = as_polynomial(other)
        d = max(self.d, other.d)
        out = {}
        for a, c in self.terms + other.terms:
            key = a + (0,) * (d - len(a))
            out[key] = out.get(key, 0j) + c
        return Polynomial(out, d)

    __radd__ = __add__

    def derivative_bound(self):
        """sum |c_alpha| |alpha|: a Lipschitz constant in the angles on the torus."""
        return float(sum(abs(c) * sum(a) for a, c in self.terms))


@dataclass(frozen=True)
class Transfer(HoloFunction):
    realization: object = field(repr=False)


@dataclass(frozen=True)
class MatrixFunction:
    entries: tuple  # tuple of rows, each a tuple of HoloFunction

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("matrix function must be square and non-empty")
        object.__setattr__(self, "entries", rows)

    @property
    def n(self):
        return len(self.entries)


def as_polynomial(f):
    if isinstance(f, Polynomial):
        return f
    if isinstance(f, Coordinate):
        return f.to_polynomial()
    if isinstance(f, Constant):
        return Polynomial({(0,): f.c})
    if isinstance(f, (int, float, complex, np.number)):
        return Polynomial({(0,): complex(f)})
    raise UnsupportedVariant(f"{type(f).__name__} has no polynomial form")


def horner(terms, xs, one, mul):
    """Multivariate Horner: outermost in the last variable, exponents descending.

    ``xs`` holds the variables (scalars, arrays of samples, or commuting
    matrices), ``one`` the unit and ``mul`` the product.
    """
    if not xs:
        return sum((c for _, c in terms), 0j) * one
    by_last = {}
    for alpha, c in terms:
        by_last.setdefault(alpha[-1], []).append((alpha[:-1], c))
    top = max(by_last) if by_last else 0
    acc = horner(by_last.get(top, []), xs[:-1], one, mul)
    for k in range(top - 1, -1, -1):
        acc = mul(acc, xs[-1]) + horner(by_last.get(k, []), xs[:-1], one, mul)
    return acc


def _check_point(z, domain, strict):
    if domain is not None and not domain.contains(z, strict=strict):
        raise OutsideDomain(f"point {np.round(z, 12).tolist()} is outside the {domain.kind}")


def eval_point(f, z, domain=None):
    """Value of ``f`` at the point ``z`` (a length-d sequence)."""
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    if isinstance(f, Constant):
        _check_point(z, domain, False)
        return complex(f.c)
    if isinstance(f, Coordinate):
        _check_point(z, domain, False)
        return complex(z[f.r - 1])
    if isinstance(f, Polynomial):
        _check_point(z, domain, False)
        if f.d > z.size:
            raise ValueError(f"polynomial in {f.d} variables evaluated at a point of length {z.size}")
        return complex(horner(f.terms, list(z[: f.d]), 1.0 + 0j, lambda a, b: a * b))
    if isinstance(f, Transfer):
        _check_point(z, domain, True)
        from .realization import transfer_eval_point

        return transfer_eval_point(f.realization, z)
    raise UnsupportedVariant(f"cannot evaluate {type(f).__name__}")


def eval_many(f, Z):
    """Vectorised evaluation at the rows of ``Z`` (N x d); no domain checks."""
    Z = np.asarray(Z, dtype=np.complex128)
    if isinstance(f, Constant):
        return np.full(Z.shape[0], complex(f.c))
    if isinstance(f, Coordinate):
        return Z[:, f.r - 1].copy()
    if isinstance(f, Polynomial):
        xs = [Z[:, i] for i in range(f.d)]
        out = horner(f.terms, xs, np.ones(Z.shape[0], dtype=np.complex128), lambda a, b: a * b)
        return np.broadcast_to(out, (Z.shape[0],)).astype(np.complex128)
    return np.array([eval_point(f, z) for z in Z], dtype=np.complex128)


def scale_argument(f, r):
    """The function z -> f(r z)."""
    if not 0.0 < r <= 1.0:
        raise ValueError("scale must lie in (0, 1]")
    if isinstance(f, Constant):
        return f
    if isinstance(f, (Coordinate, Polynomial)):
        p = as_polynomial(f)
        return Polynomial({a: c * r ** sum(a) for a, c in p.terms}, p.d)
    raise UnsupportedVariant("argument scaling is defined for constants, coordinates and polynomials")


def _van_der_corput(n):
    out = np.empty(n)
    for k in range(n):
        x, denom, q = 0.0, 1.0, k
        while q:
            denom *= 2
            q, bit = divmod(q, 2)
            x += bit / denom
        out[k] = x
    return out


def boundary_grid(domain, resolution):
    """Deterministic nested sample of the distinguished boundary (polydisk) or sphere (ball).

    Returns ``(points, gap)`` where ``gap`` is the largest angular gap between
    neighbouring grid angles on one circle (polydisk and d=1 ball only; NaN
    otherwise).  The sample at resolution n is contained in the sample at any
    larger resolution, which makes sup estimates monotone.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if domain.kind == "polydisk" or domain.d == 1:
        theta = 2 * np.pi * _van_der_corput(resolution)
        s = np.sort(theta)
        gap = float(np.max(np.diff(np.concatenate([s, [s[0] + 2 * np.pi]]))))
        circle = np.exp(1j * theta)
        grids = np.meshgrid(*([circle] * domain.d), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1), gap
    n = resolution ** domain.d
    g = np.random.default_rng(0).standard_normal((n, 2 * domain.d))
    Z = g[:, : domain.d] + 1j * g[:, domain.d:]
    return Z / np.linalg.norm(Z, axis=1, keepdims=True), float("nan")


def grid_sup_norm(f, domain, resolution):
    """max |f| over :func:`boundary_grid` points; a lower estimate of the sup norm."""
    if isinstance(f, Constant):
        return abs(complex(f.c))
    Z, _ = boundary_grid(domain, resolution)
    return float(np.max(np.abs(eval_many(f, Z))))


# -- job-file literals -------------------------------------------------------

def function_from_literal(lit):
    kind = lit["kind"]
    if kind == "const":
        return Constant(complex(lit.get("re", 0.0), lit.get("im", 0.0)))
    if kind == "coord":
        return Coordinate(int(lit["r"]))
    if kind == "poly":
        coeffs = {}
        for term in lit["coeffs"]:
            alpha = tuple(term["alpha"])
            coeffs[alpha] = coeffs.get(alpha, 0j) + complex(term.get("re", 0.0), term.get("im", 0.0))
        return Polynomial(coeffs, lit.get("d"))
    if kind == "transfer":
        from .realization import realization_from_dict

        return Transfer(realization_from_dict(lit["realization"]))
    raise ValueError(f"unknown function kind {kind!r}")


def function_to_literal(f):
    if isinstance(f, Constant):
        return {"kind": "const", "re": f.c.real, "im": f.c.imag}
    if isinstance(f, Coordinate):
        return {"kind": "coord", "r": f.r}
    if isinstance(f, Polynomial):
        return {"kind": "poly", "d": f.d,
                "coeffs": [{"alpha": list(a), "re": c.real, "im": c.imag} for a, c in f.terms]}
    if isinstance(f, Transfer):
        from .realization import realization_to_dict

        return {"kind": "transfer", "realization": realization_to_dict(f.realization)}
    raise UnsupportedVariant(f"no literal form for {type(f).__name__}")
