"""Sparse polynomials in six canonical variables.

Variables are ordered ``(q1, q2, q3, p1, p2, p3)``; in the original chart this
is ``(x, y, z, px, py, pz)``.  A polynomial is stored degree by degree: each
homogeneous part is a complex coefficient vector over the graded-lexicographic
monomial basis of that degree, and only the nonzero entries are treated as
stored terms.  Products index the result basis through packed integer keys,
which keeps the Poisson brackets of the Lie triangle vectorised.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping

import numpy as np

NVARS = 6
NDOF = 3
_BITS = 5
MAX_EXPONENT = (1 << _BITS) - 1
_SHIFTS = np.array([_BITS * (NVARS - 1 - i) for i in range(NVARS)], dtype=np.int64)
_UNITS = np.left_shift(np.int64(1), _SHIFTS)

CHARTS = ("original", "diagonal", "normalized")
DEFAULT_PRUNE = 1e-16


class ChartMismatchError(ValueError):
    """Raised when combining polynomials expressed in different charts."""


@dataclass(frozen=True)
class MonomialBasis:
    """All monomials of one total degree, sorted by packed key."""

    degree: int
    exps: np.ndarray
    keys: np.ndarray

    def __len__(self) -> int:
        return len(self.keys)

    def index(self, keys: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.keys, keys)


def pack(exps) -> np.ndarray:
    """Pack exponent vectors (..., 6) into integer keys."""
    exps = np.asarray(exps, dtype=np.int64)
    return np.sum(np.left_shift(exps, _SHIFTS), axis=-1)


@lru_cache(maxsize=None)
def basis(degree: int) -> MonomialBasis:
    if degree < 0:
        raise ValueError("negative degree")
    if degree > MAX_EXPONENT:
        raise ValueError(f"degree {degree} exceeds the packed-key limit {MAX_EXPONENT}")
    rows = []
    for combo in itertools.combinations_with_replacement(range(NVARS), degree):
        e = [0] * NVARS
        for v in combo:
            e[v] += 1
        rows.append(e)
    exps = np.array(rows, dtype=np.int64).reshape(-1, NVARS)
    keys = pack(exps)
    order = np.argsort(keys)
    exps, keys = exps[order], keys[order]
    exps.setflags(write=False)
    keys.setflags(write=False)
    return MonomialBasis(degree, exps, keys)


def _mul_homogeneous(a: np.ndarray, da: int, b: np.ndarray, db: int) -> np.ndarray | None:
    ia = np.flatnonzero(a)
    ib = np.flatnonzero(b)
    if ia.size == 0 or ib.size == 0:
        return None
    target = basis(da + db)
    keys = (basis(da).keys[ia][:, None] + basis(db).keys[ib][None, :]).ravel()
    idx = target.index(keys)
    vals = (a[ia][:, None] * b[ib][None, :]).ravel()
    n = len(target)
    out = np.bincount(idx, weights=vals.real, minlength=n).astype(complex)
    out.imag = np.bincount(idx, weights=vals.imag, minlength=n)
    return out


def _diff_homogeneous(a: np.ndarray, degree: int, var: int) -> np.ndarray | None:
    if degree == 0:
        return None
    b = basis(degree)
    e = b.exps[:, var]
    mask = (e > 0) & (a != 0)
    if not mask.any():
        return None
    lower = basis(degree - 1)
    out = np.zeros(len(lower), dtype=complex)
    out[lower.index(b.keys[mask] - _UNITS[var])] = a[mask] * e[mask]
    return out


class Polynomial:
    """Immutable complex polynomial in six variables, graded by degree.

    Parameters
    ----------
    parts : mapping of int to ndarray
        Homogeneous coefficient vectors keyed by degree, each laid out over
        :func:`basis` of that degree.
    chart : str
        Coordinate chart tag; brackets between different charts are refused.
    """

    __slots__ = ("_parts", "chart")

    def __init__(self, parts: Mapping[int, np.ndarray] | None = None, chart: str = "original"):
        if chart not in CHARTS:
            raise ValueError(f"unknown chart {chart!r}")
        clean = {}
        for n, arr in (parts or {}).items():
            arr = np.asarray(arr, dtype=complex)
            if arr.shape != (len(basis(n)),):
                raise ValueError(f"degree-{n} part has shape {arr.shape}")
            if np.any(arr):
                arr = arr.copy()
                arr.setflags(write=False)
                clean[int(n)] = arr
        self._parts = dict(sorted(clean.items()))
        self.chart = chart

    # -- construction -------------------------------------------------
    @classmethod
    def zero(cls, chart: str = "original") -> "Polynomial":
        return cls({}, chart)

    @classmethod
    def from_terms(cls, terms: Mapping[tuple, complex] | Iterable[tuple[tuple, complex]],
                   chart: str = "original") -> "Polynomial":
        items = terms.items() if isinstance(terms, Mapping) else terms
        parts: dict[int, np.ndarray] = {}
        for exps, c in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != NVARS or min(exps) < 0:
                raise ValueError(f"bad exponent vector {exps}")
            n = sum(exps)
            arr = parts.setdefault(n, np.zeros(len(basis(n)), dtype=complex))
            arr[basis(n).index(pack(exps))] += c
        return cls(parts, chart)

    @classmethod
    def constant(cls, c: complex, chart: str = "original") -> "Polynomial":
        return cls.from_terms({(0,) * NVARS: c}, chart)

    @classmethod
    def variable(cls, i: int, chart: str = "original") -> "Polynomial":
        e = [0] * NVARS
        e[i] = 1
        return cls.from_terms({tuple(e): 1.0}, chart)

    @classmethod
    def linear_form(cls, coeffs, chart: str = "original") -> "Polynomial":
        """Polynomial ``sum_j coeffs[j] * v_j``."""
        coeffs = np.asarray(coeffs, dtype=complex)
        b = basis(1)
        arr = np.zeros(len(b), dtype=complex)
        arr[b.index(pack(np.eye(NVARS, dtype=np.int64)))] = coeffs
        return cls({1: arr}, chart)

    def _new(self, parts) -> "Polynomial":
        return Polynomial(parts, self.chart)

    def with_chart(self, chart: str) -> "Polynomial":
        return Polynomial(self._parts, chart)

    # -- access -------------------------------------------------------
    @property
    def degrees(self) -> list[int]:
        return list(self._parts)

    @property
    def max_degree(self) -> int:
        return max(self._parts, default=-1)

    def is_zero(self) -> bool:
        return not self._parts

    def part(self, n: int) -> np.ndarray:
        """Coefficient vector of the degree-``n`` part (zeros if absent)."""
        arr = self._parts.get(n)
        if arr is None:
            return np.zeros(len(basis(n)), dtype=complex)
        return arr

    def homogeneous(self, n: int) -> "Polynomial":
        return self._new({n: self._parts[n]} if n in self._parts else {})

    def truncate(self, max_degree: int) -> "Polynomial":
        return self._new({n: a for n, a in self._parts.items() if n <= max_degree})

    def terms(self) -> Iterator[tuple[tuple[int, ...], complex]]:
        """Stored monomials in graded-lexicographic order."""
        for n, arr in self._parts.items():
            exps = basis(n).exps
            for i in np.flatnonzero(arr):
                yield tuple(int(e) for e in exps[i]), complex(arr[i])

    def coefficient(self, exps) -> complex:
        exps = tuple(exps)
        n = sum(exps)
        if n not in self._parts:
            return 0j
        b = basis(n)
        i = b.index(pack(exps))
        return complex(self._parts[n][i])

    def __len__(self) -> int:
        return sum(int(np.count_nonzero(a)) for a in self._parts.values())

    # -- arithmetic ---------------------------------------------------
    def _check(self, other: "Polynomial") -> None:
        if other.chart != self.chart:
            raise ChartMismatchError(f"{self.chart!r} vs {other.chart!r}")

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            return self + Polynomial.constant(other, self.chart)
        self._check(other)
        parts = dict(self._parts)
        for n, a in other._parts.items():
            parts[n] = parts[n] + a if n in parts else a
        return self._new(parts)

    __radd__ = __add__

    def __neg__(self):
        return self._new({n: -a for n, a in self._parts.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            self._check(other)
            parts: dict[int, np.ndarray] = {}
            for da, a in self._parts.items():
                for db, b in other._parts.items():
                    prod = _mul_homogeneous(a, da, b, db)
                    if prod is not None:
                        n = da + db
                        parts[n] = parts[n] + prod if n in parts else prod
            return self._new(parts)
        c = complex(other)
        return self._new({n: c * a for n, a in self._parts.items()})

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / complex(c))

    def __pow__(self, k: int):
        out = Polynomial.constant(1.0, self.chart)
        for _ in range(k):
            out = out * self
        return out

    def diff(self, var: int) -> "Polynomial":
        parts = {}
        for n, a in self._parts.items():
            d = _diff_homogeneous(a, n, var)
            if d is not None:
                parts[n - 1] = d
        return self._new(parts)

    def conj_coefficients(self) -> "Polynomial":
        return self._new({n: np.conj(a) for n, a in self._parts.items()})

    def map_parts(self, fn) -> "Polynomial":
        """Apply ``fn(degree, exps, coeffs) -> coeffs`` to each homogeneous part."""
        return self._new({n: fn(n, basis(n).exps, a) for n, a in self._parts.items()})

    def select(self, predicate) -> "Polynomial":
        """Keep monomials where ``predicate(exps)`` (vectorised over rows) is true."""
        return self.map_parts(lambda n, e, a: np.where(predicate(e), a, 0))

    def prune(self, rel: float = DEFAULT_PRUNE) -> "Polynomial":
        """Drop coefficients below ``rel`` times the largest one of their degree."""
        if rel <= 0:
            return self

        def cut(n, e, a):
            mag = np.abs(a)
            return np.where(mag < rel * mag.max(), 0, a)

        return self.map_parts(cut)

    # -- evaluation ---------------------------------------------------
    def __call__(self, point) -> complex:
        point = np.asarray(point, dtype=complex)
        total = 0j
        for n, a in self._parts.items():
            idx = np.flatnonzero(a)
            exps = basis(n).exps[idx]
            total += np.sum(a[idx] * np.prod(point[None, :] ** exps, axis=1))
        return total

    def evaluate_many(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=complex)
        total = np.zeros(points.shape[0], dtype=complex)
        for n, a in self._parts.items():
            idx = np.flatnonzero(a)
            exps = basis(n).exps[idx]
            mons = np.prod(points[:, None, :] ** exps[None, :, :], axis=2)
            total += mons @ a[idx]
        return total

    # -- comparison & output --------------------------------------------
    def norm(self) -> float:
        return polynomial_norm(self)

    def max_abs(self) -> float:
        return max((float(np.abs(a).max()) for a in self._parts.values()), default=0.0)

    def allclose(self, other: "Polynomial", atol: float = 1e-12) -> bool:
        return (self - other).max_abs() <= atol

    def to_text(self) -> str:
        """Debug dump, one ``exponents : re,im`` line per stored monomial."""
        lines = []
        for exps, c in self.terms():
            lines.append(f"{' '.join(map(str, exps))} : {c.real:.17g},{c.imag:.17g}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, chart: str = "original") -> "Polynomial":
        terms = []
        for line in text.splitlines():
            if not line.strip():
                continue
            lhs, rhs = line.split(":")
            re, im = rhs.split(",")
            terms.append((tuple(int(t) for t in lhs.split()), complex(float(re), float(im))))
        return cls.from_terms(terms, chart)

    def __repr__(self) -> str:
        return f"Polynomial(chart={self.chart!r}, degrees={self.degrees}, terms={len(self)})"


def polynomial_norm(p: Polynomial) -> float:
    """Sum of absolute values of all stored coefficients."""
    return float(sum(np.abs(a).sum() for a in p._parts.values()))


# -- Poisson structure --------------------------------------------------------

def _gradient(parts: Mapping[int, np.ndarray]) -> list[dict[int, np.ndarray]]:
    grads: list[dict[int, np.ndarray]] = [dict() for _ in range(NVARS)]
    for n, a in parts.items():
        for v in range(NVARS):
            d = _diff_homogeneous(a, n, v)
            if d is not None:
                grads[v][n - 1] = d
    return grads


def _bracket_grads(gf, gg, max_degree: int | None) -> dict[int, np.ndarray]:
    out: dict[int, np.ndarray] = {}

    def acc(fa, gb, sign):
        for da, a in fa.items():
            for db, b in gb.items():
                n = da + db
                if max_degree is not None and n > max_degree:
                    continue
                prod = _mul_homogeneous(a, da, b, db)
                if prod is None:
                    continue
                if sign < 0:
                    prod = -prod
                out[n] = out[n] + prod if n in out else prod

    for i in range(NDOF):
        acc(gf[i], gg[i + NDOF], +1)
        acc(gf[i + NDOF], gg[i], -1)
    return out


def poisson_bracket(f: Polynomial, g: Polynomial, max_degree: int | None = None) -> Polynomial:
    """``{f, g} = sum_i df/dq_i dg/dp_i - df/dp_i dg/dq_i``."""
    if f.chart != g.chart:
        raise ChartMismatchError(f"{f.chart!r} vs {g.chart!r}")
    return Polynomial(_bracket_grads(_gradient(f._parts), _gradient(g._parts), max_degree), f.chart)


def lie_transform(H: Polynomial, chi: Polynomial, max_degree: int,
                  tol: float = 1e-17, max_terms: int = 200) -> Polynomial:
    """Return ``exp(L_chi) H`` truncated at ``max_degree``, with ``L_chi f = {f, chi}``.

    For a generator whose lowest degree is at least 3 every application of
    ``L_chi`` raises the degree, so the series terminates on its own.  A
    quadratic generator preserves degree and the series is summed until the
    added term falls below ``tol`` relative to the running total.
    """
    if H.chart != chi.chart:
        raise ChartMismatchError(f"{H.chart!r} vs {chi.chart!r}")
    if chi.is_zero():
        return H.truncate(max_degree)
    if min(chi.degrees) < 2:
        raise ValueError("generator must have degree >= 2")
    gchi = _gradient(chi._parts)
    out = {n: a.copy() for n, a in H._parts.items() if n <= max_degree}
    term = dict(out)
    for k in range(1, max_terms + 1):
        term = _bracket_grads(_gradient(term), gchi, max_degree)
        if not term:
            break
        for n in term:
            term[n] = term[n] / k
            out[n] = out[n] + term[n] if n in out else term[n]
        if min(chi.degrees) == 2:
            size = max(float(np.abs(a).max()) for a in out.values())
            if max(float(np.abs(a).max()) for a in term.values()) <= tol * size:
                break
    else:
        if min(chi.degrees) == 2:
            raise RuntimeError("Lie series for quadratic generator did not converge")
    return Polynomial(out, H.chart)


def substitute_linear(P: Polynomial, M, chart: str | None = None) -> Polynomial:
    """Compose ``P`` with the linear map ``v -> M v``: returns ``Y -> P(M Y)``."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (NVARS, NVARS):
        raise ValueError("M must be 6x6")
    out_chart = chart or P.chart
    forms = [Polynomial.linear_form(M[i], out_chart) for i in range(NVARS)]
    cache: dict[tuple[int, int], Polynomial] = {}

    def power(i: int, e: int) -> Polynomial:
        if (i, e) not in cache:
            cache[(i, e)] = Polynomial.constant(1.0, out_chart) if e == 0 else power(i, e - 1) * forms[i]
        return cache[(i, e)]

    result = Polynomial.zero(out_chart)
    for exps, c in P.terms():
        term = Polynomial.constant(c, out_chart)
        for i, e in enumerate(exps):
            if e:
                term = term * power(i, e)
        result = result + term
    return result


def symplectic_form() -> np.ndarray:
    J = np.zeros((NVARS, NVARS))
    J[:NDOF, NDOF:] = np.eye(NDOF)
    J[NDOF:, :NDOF] = -np.eye(NDOF)
    return J


def hamiltonian_vector_field(H: Polynomial) -> list[Polynomial]:
    """Components of ``J grad H`` as polynomials."""
    grad = [H.diff(i) for i in range(NVARS)]
    return [grad[i + NDOF] for i in range(NDOF)] + [-grad[i] for i in range(NDOF)]


def n_monomials(degree: int) -> int:
    return math.comb(degree + NVARS - 1, NVARS - 1)
