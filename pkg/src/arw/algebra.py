"""Exact algebraization of trigonometric polynomials.

A trigonometric polynomial in d variables becomes an ordinary polynomial
in 2d variables (c_1, s_1, ..., c_d, s_d) via c_j = cos(2 pi x_j),
s_j = sin(2 pi x_j), together with the circle relations c_j^2 + s_j^2 = 1.
All coefficient arithmetic here is exact rational; floating point appears
only at evaluation boundaries.

The cosine/sine pair of a single frequency D in one variable algebraizes
to the classical degree-D homogeneous pair (C_D, S_D) with
C_D^2 + S_D^2 = (c^2 + s^2)^D, and C_D + i S_D = (c + i s)^D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import DegreeTooSmall, ExpansionBudgetExceeded, IdentityFailure

Coeff = Union[Fraction, int, float]


class AlgPoly:
    """Sparse polynomial: map from exponent tuples to nonzero coefficients."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Optional[Mapping[tuple[int, ...], Coeff]] = None):
        self.nvars = nvars
        clean: dict[tuple[int, ...], Coeff] = {}
        if terms:
            for exp, coef in terms.items():
                if len(exp) != nvars:
                    raise ValueError("exponent arity mismatch")
                if coef != 0:
                    clean[tuple(exp)] = coef
        self.terms = clean

    # -- constructors -------------------------------------------------
    @staticmethod
    def constant(nvars: int, value: Coeff) -> "AlgPoly":
        return AlgPoly(nvars, {(0,) * nvars: value})

    @staticmethod
    def variable(nvars: int, index: int) -> "AlgPoly":
        exp = [0] * nvars
        exp[index] = 1
        return AlgPoly(nvars, {tuple(exp): Fraction(1)})

    # -- structure ----------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def is_homogeneous(self) -> bool:
        degrees = {sum(e) for e in self.terms}
        return len(degrees) <= 1

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AlgPoly)
            and self.nvars == other.nvars
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return "AlgPoly(0)"
        bits = []
        for exp in sorted(self.terms, reverse=True):
            mono = "*".join(f"x{i}^{e}" for i, e in enumerate(exp) if e)
            coef = self.terms[exp]
            bits.append(f"{coef}" + (f"*{mono}" if mono else ""))
        return "AlgPoly(" + " + ".join(bits) + ")"

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other: "AlgPoly") -> "AlgPoly":
        if self.nvars != other.nvars:
            raise ValueError("variable count mismatch")
        out = dict(self.terms)
        for exp, coef in other.terms.items():
            out[exp] = out.get(exp, 0) + coef
        return AlgPoly(self.nvars, out)

    def __neg__(self) -> "AlgPoly":
        return AlgPoly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "AlgPoly") -> "AlgPoly":
        return self + (-other)

    def scale(self, value: Coeff) -> "AlgPoly":
        if value == 0:
            return AlgPoly(self.nvars)
        return AlgPoly(self.nvars, {e: c * value for e, c in self.terms.items()})

    def __mul__(self, other: "AlgPoly") -> "AlgPoly":
        return self.mul(other)

    def mul(self, other: "AlgPoly", budget: Optional[list[int]] = None) -> "AlgPoly":
        """Product; `budget` is a one-element countdown of monomial merges,
        raising ExpansionBudgetExceeded when exhausted."""
        if self.nvars != other.nvars:
            raise ValueError("variable count mismatch")
        out: dict[tuple[int, ...], Coeff] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                if budget is not None:
                    budget[0] -= 1
                    if budget[0] < 0:
                        raise ExpansionBudgetExceeded("monomial budget exhausted")
                exp = tuple(a + b for a, b in zip(e1, e2))
                out[exp] = out.get(exp, 0) + c1 * c2
        return AlgPoly(self.nvars, out)

    def __pow__(self, power: int) -> "AlgPoly":
        if power < 0:
            raise ValueError("negative power")
        result = AlgPoly.constant(self.nvars, Fraction(1))
        for _ in range(power):
            result = result * self
        return result

    def diff(self, var: int) -> "AlgPoly":
        out: dict[tuple[int, ...], Coeff] = {}
        for exp, coef in self.terms.items():
            e = exp[var]
            if e == 0:
                continue
            new = list(exp)
            new[var] = e - 1
            key = tuple(new)
            out[key] = out.get(key, 0) + coef * e
        return AlgPoly(self.nvars, out)

    # -- variable plumbing ---------------------------------------------
    def embed(self, nvars: int, var_map: Sequence[int]) -> "AlgPoly":
        """Rename variables: old index i becomes var_map[i]."""
        out: dict[tuple[int, ...], Coeff] = {}
        for exp, coef in self.terms.items():
            new = [0] * nvars
            for i, e in enumerate(exp):
                new[var_map[i]] += e
            out[tuple(new)] = out.get(tuple(new), 0) + coef
        return AlgPoly(nvars, out)

    def substitute_one(self, var: int) -> "AlgPoly":
        """Set one variable to 1 and drop it."""
        out: dict[tuple[int, ...], Coeff] = {}
        for exp, coef in self.terms.items():
            new = exp[:var] + exp[var + 1 :]
            out[new] = out.get(new, 0) + coef
        return AlgPoly(self.nvars - 1, out)

    # -- evaluation -----------------------------------------------------
    def eval(self, values: Sequence[Coeff]):
        total: Coeff = 0
        for exp, coef in self.terms.items():
            term = coef
            for v, e in zip(values, exp):
                if e:
                    term = term * v**e
            total = total + term
        return total


def chebyshev_pair(D: int) -> tuple[AlgPoly, AlgPoly]:
    """(C_D, S_D): algebraizations of cos(2 pi D x) and sin(2 pi D x) in the
    two variables (c, s), by the angle-addition recurrence."""
    if D < 0:
        raise ValueError("D must be >= 0")
    c = AlgPoly.variable(2, 0)
    s = AlgPoly.variable(2, 1)
    C = AlgPoly.constant(2, Fraction(1))
    S = AlgPoly(2)
    for _ in range(D):
        C, S = c * C - s * S, s * C + c * S
    return C, S


@dataclass(frozen=True)
class TrigPoly:
    """Trigonometric polynomial with rational (or real) coefficients.

    `terms` maps a canonical frequency (first nonzero coordinate positive,
    or the zero vector for the constant term) to its (cos, sin) coefficient
    pair.  Degree is the max l1 norm of active frequencies.
    """

    d: int
    terms: dict[tuple[int, ...], tuple[Coeff, Coeff]] = field(default_factory=dict)

    @staticmethod
    def build(d: int, raw: Mapping[tuple[int, ...], tuple[Coeff, Coeff]]) -> "TrigPoly":
        out: dict[tuple[int, ...], list[Coeff]] = {}
        for lam, (cc, sc) in raw.items():
            lam = tuple(int(v) for v in lam)
            if len(lam) != d:
                raise ValueError("frequency arity mismatch")
            if any(lam):
                first = next(v for v in lam if v)
                if first < 0:
                    lam = tuple(-v for v in lam)
                    sc = -sc
            else:
                if sc != 0:
                    raise ValueError("sin coefficient of the zero frequency must vanish")
            acc = out.setdefault(lam, [0, 0])
            acc[0] = acc[0] + cc
            acc[1] = acc[1] + sc
        clean = {
            lam: (cc, sc) for lam, (cc, sc) in out.items() if cc != 0 or sc != 0
        }
        return TrigPoly(d=d, terms=clean)

    @staticmethod
    def constant(d: int, value: Coeff) -> "TrigPoly":
        return TrigPoly.build(d, {(0,) * d: (value, 0)})

    @staticmethod
    def from_sample(sample) -> "TrigPoly":
        """Lossless embedding of a wave sample (real coefficients)."""
        norm = sample.normalization
        raw = {}
        for lam, a, b in zip(sample.shell.half_points, sample.a, sample.b):
            raw[tuple(int(v) for v in lam)] = (norm * float(a), norm * float(b))
        return TrigPoly.build(sample.shell.d, raw)

    def degree(self) -> int:
        return max((sum(abs(v) for v in lam) for lam in self.terms), default=0)

    def add(self, other: "TrigPoly") -> "TrigPoly":
        raw: dict[tuple[int, ...], tuple[Coeff, Coeff]] = dict(self.terms)
        merged = {lam: list(cs) for lam, cs in raw.items()}
        for lam, (cc, sc) in other.terms.items():
            acc = merged.setdefault(lam, [0, 0])
            acc[0] = acc[0] + cc
            acc[1] = acc[1] + sc
        return TrigPoly.build(self.d, {lam: (cs[0], cs[1]) for lam, cs in merged.items()})

    def scale(self, value: Coeff) -> "TrigPoly":
        return TrigPoly.build(
            self.d, {lam: (cc * value, sc * value) for lam, (cc, sc) in self.terms.items()}
        )

    def derivative_scaled(self, axis: int) -> "TrigPoly":
        """U with dT/dx_axis = 2 pi U; keeps coefficients rational."""
        raw: dict[tuple[int, ...], tuple[Coeff, Coeff]] = {}
        for lam, (cc, sc) in self.terms.items():
            m = lam[axis]
            if m == 0:
                continue
            # d/dx [cc cos + sc sin] = 2 pi m (-cc sin + sc cos)
            raw[lam] = (sc * m, -(cc * m))
        return TrigPoly.build(self.d, raw)

    def eval(self, x: Sequence[float]) -> float:
        total = 0.0
        for lam, (cc, sc) in self.terms.items():
            phase = 2.0 * math.pi * sum(l * xi for l, xi in zip(lam, x))
            total += float(cc) * math.cos(phase) + float(sc) * math.sin(phase)
        return total


def _complex_circle_power(d: int, axis: int, power: int, sign: int) -> tuple[AlgPoly, AlgPoly]:
    """(re, im) of (c_axis + i * sign * s_axis)^power in 2d variables."""
    re = AlgPoly.constant(2 * d, Fraction(1))
    im = AlgPoly(2 * d)
    c = AlgPoly.variable(2 * d, 2 * axis)
    s = AlgPoly.variable(2 * d, 2 * axis + 1).scale(Fraction(sign))
    for _ in range(power):
        re, im = re * c - im * s, re * s + im * c
    return re, im


def algebraize(T: TrigPoly) -> AlgPoly:
    """The polynomial P with T(x) = P(cos 2 pi x_1, sin 2 pi x_1, ...).

    Variable order: (c_1, s_1, c_2, s_2, ..., c_d, s_d).  Linear in T, and
    degree-preserving; homogeneous T yields homogeneous P.
    """
    n = 2 * T.d
    out = AlgPoly(n)
    for lam, (cc, sc) in T.terms.items():
        re = AlgPoly.constant(n, Fraction(1))
        im = AlgPoly(n)
        for axis, m in enumerate(lam):
            if m == 0:
                continue
            pre, pim = _complex_circle_power(T.d, axis, abs(m), 1 if m > 0 else -1)
            re, im = re * pre - im * pim, re * pim + im * pre
        out = out + re.scale(cc) + im.scale(sc)
    return out


def circle_relations(d: int) -> list[AlgPoly]:
    """c_j^2 + s_j^2 - 1 for each coordinate, in 2d variables."""
    out = []
    for j in range(d):
        c = AlgPoly.variable(2 * d, 2 * j)
        s = AlgPoly.variable(2 * d, 2 * j + 1)
        out.append(c * c + s * s - AlgPoly.constant(2 * d, Fraction(1)))
    return out


def algebraize_system(polys: Union[TrigPoly, Iterable[TrigPoly]]) -> list[AlgPoly]:
    """Algebraizations of the given polynomials followed by the d circle
    relations."""
    if isinstance(polys, TrigPoly):
        polys = [polys]
    polys = list(polys)
    if not polys:
        raise ValueError("need at least one polynomial")
    d = polys[0].d
    if any(p.d != d for p in polys):
        raise ValueError("dimension mismatch")
    return [algebraize(p) for p in polys] + circle_relations(d)


def homogenize(P: AlgPoly, formal_degree: int) -> AlgPoly:
    """Pad every monomial with the new first variable z0 up to
    formal_degree; substituting z0 = 1 recovers P."""
    if formal_degree < P.degree():
        raise DegreeTooSmall(f"formal degree {formal_degree} < deg = {P.degree()}")
    out: dict[tuple[int, ...], Coeff] = {}
    for exp, coef in P.terms.items():
        pad = formal_degree - sum(exp)
        out[(pad,) + exp] = coef
    return AlgPoly(P.nvars + 1, out)


def determinant(matrix: Sequence[Sequence[AlgPoly]], budget: int = 10**6) -> AlgPoly:
    """Exact determinant by cofactor expansion with zero pruning and a
    monomial budget."""
    size = len(matrix)
    if size == 0:
        raise ValueError("empty matrix")
    nvars = matrix[0][0].nvars
    counter = [budget]

    def minor(rows: tuple[int, ...], cols: tuple[int, ...]) -> AlgPoly:
        if len(rows) == 1:
            return matrix[rows[0]][cols[0]]
        # expand along the row with the most zero entries
        best_row = max(
            range(len(rows)),
            key=lambda ri: sum(matrix[rows[ri]][c].is_zero() for c in cols),
        )
        row = rows[best_row]
        rest_rows = rows[:best_row] + rows[best_row + 1 :]
        total = AlgPoly(nvars)
        for ci, col in enumerate(cols):
            entry = matrix[row][col]
            if entry.is_zero():
                continue
            sub = minor(rest_rows, cols[:ci] + cols[ci + 1 :])
            term = entry.mul(sub, counter)
            if (best_row + ci) % 2:
                term = -term
            total = total + term
        return total

    return minor(tuple(range(size)), tuple(range(size)))


def gradient_system_jacobian(T: TrigPoly, budget: int = 10**6) -> tuple[AlgPoly, int]:
    """Jacobian of the algebraized gradient system of T.

    The system interleaves, per coordinate, the algebraization of dT/dx_j
    and the j-th circle relation; the Jacobian is taken with respect to
    (c_1, s_1, ..., c_d, s_d).  Each gradient row carries one factor 2 pi,
    which is tracked symbolically: the return value is (P, k) meaning
    (2 pi)^k * P with P exact rational.
    """
    d = T.d
    rows: list[AlgPoly] = []
    for j in range(d):
        rows.append(algebraize(T.derivative_scaled(j)))
        rows.append(circle_relations(d)[j])
    matrix = [[row.diff(v) for v in range(2 * d)] for row in rows]
    return determinant(matrix, budget=budget), d


def example_trig_poly(d: int, D: int, A: Coeff) -> TrigPoly:
    """sum_j sin(2 pi D x_j) + A: the fully regular workhorse example."""
    raw: dict[tuple[int, ...], tuple[Coeff, Coeff]] = {(0,) * d: (A, 0)}
    for j in range(d):
        lam = [0] * d
        lam[j] = D
        raw[tuple(lam)] = (0, Fraction(1))
    return TrigPoly.build(d, raw)


def _binomial_pair(D: int) -> tuple[AlgPoly, AlgPoly]:
    """(Re, Im) of (c + i s)^D by direct binomial expansion; independent of
    the recurrence used in chebyshev_pair."""
    re_terms: dict[tuple[int, int], Coeff] = {}
    im_terms: dict[tuple[int, int], Coeff] = {}
    for k in range(D + 1):
        coef = Fraction(math.comb(D, k))
        if k % 4 == 1:
            im_terms[(D - k, k)] = coef
        elif k % 4 == 2:
            re_terms[(D - k, k)] = -coef
        elif k % 4 == 3:
            im_terms[(D - k, k)] = -coef
        else:
            re_terms[(D - k, k)] = coef
    return AlgPoly(2, re_terms), AlgPoly(2, im_terms)


@dataclass(frozen=True)
class CsdReport:
    """Outcome of the exact identity suite for the (C_D, S_D) family."""

    d_max: int
    pythagoras: dict[int, bool]  # C^2 + S^2 = (c^2 + s^2)^D
    determinant: dict[int, bool]  # det([[dC/dc, dC/ds], [c, s]]) = D * S
    factorization: dict[int, bool]  # C + i S = (c + i s)^D

    @property
    def passed(self) -> bool:
        return all(self.pythagoras.values()) and all(self.determinant.values()) and all(
            self.factorization.values()
        )


def verify_csd_identities(D_max: int) -> CsdReport:
    """Exact checks of the three structural identities for 1 <= D <= D_max.

    The factorization identity implies that the only common complex zero of
    (C_D, S_D) is the origin: C +- i S = (c +- i s)^D vanishing forces
    c = +- i s, and with the Pythagorean identity, c = s = 0.
    Raises IdentityFailure on any mismatch (which would be a bug).
    """
    if D_max < 1:
        raise ValueError("D_max must be >= 1")
    c = AlgPoly.variable(2, 0)
    s = AlgPoly.variable(2, 1)
    circle = c * c + s * s
    pyth: dict[int, bool] = {}
    det: dict[int, bool] = {}
    fact: dict[int, bool] = {}
    for D in range(1, D_max + 1):
        C, S = chebyshev_pair(D)
        pyth[D] = (C * C + S * S) == circle**D
        jac = determinant([[C.diff(0), C.diff(1)], [c, s]])
        det[D] = jac == S.scale(Fraction(D))
        bre, bim = _binomial_pair(D)
        fact[D] = C == bre and S == bim
        if not (pyth[D] and det[D] and fact[D]):
            raise IdentityFailure(f"identity failure at D={D}")
    return CsdReport(d_max=D_max, pythagoras=pyth, determinant=det, factorization=fact)
