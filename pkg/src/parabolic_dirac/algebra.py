"""Complexified Clifford algebra Cl_m extended by a Witt pair.

Basis words are kept in the normal form ``e_A (f+)^p f^q`` with
``A`` an ascending index set and ``p, q`` in {0, 1}.  The generators obey

    e_i e_j + e_j e_i = -2 delta_ij
    f f = f+ f+ = 0,    f f+ + f+ f = 1
    f e_j + e_j f = f+ e_j + e_j f+ = 0

and the complex unit commutes with everything.  A multivector over a fixed
``m`` is stored as a dense vector of ``4 * 2**m`` complex coefficients; the
blade with spatial bitmask ``mask`` and Witt word ``w`` lives at index
``w * 2**m + mask`` where ``w`` is 0 for 1, 1 for f+, 2 for f and 3 for f+ f.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

# Witt word codes in canonical order.
WITT_ONE, WITT_DAG, WITT_PLAIN, WITT_DAG_PLAIN = 0, 1, 2, 3
_WITT_NAMES = {0: "", 1: "f+", 2: "f", 3: "f+ f"}

# Products of Witt words (f+)^p f^q in normal form, as (coef, word) lists.
# Only f * f+ = 1 - f+ f branches.
_WITT_TABLE = {
    (0, 0): [(1, 0)], (0, 1): [(1, 1)], (0, 2): [(1, 2)], (0, 3): [(1, 3)],
    (1, 0): [(1, 1)], (1, 1): [], (1, 2): [(1, 3)], (1, 3): [],
    (2, 0): [(1, 2)], (2, 1): [(1, 0), (-1, 3)], (2, 2): [], (2, 3): [(1, 2)],
    (3, 0): [(1, 3)], (3, 1): [(1, 1)], (3, 2): [], (3, 3): [(1, 3)],
}
_WITT_DEGREE = (0, 1, 1, 2)


class AlgebraError(ValueError):
    """Raised for dimension mismatches and undefined algebra operations."""


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _clifford_sign(a: int, b: int) -> int:
    """Sign of e_A e_B -> +-e_{A xor B} for bitmasks a, b in Cl_{0,m}."""
    swaps = 0
    bb = b
    while bb:
        low = bb & -bb
        # generators of a with a larger index than this generator of b
        swaps += _popcount(a & ~((low << 1) - 1))
        bb ^= low
    sign = -1 if swaps % 2 else 1
    if _popcount(a & b) % 2:
        sign = -sign
    return sign


@dataclass(frozen=True, order=True)
class BladeIndex:
    """A canonical basis word ``e_A (f+)^p f^q``."""

    spatial_mask: tuple[int, ...] = ()
    has_dagger: bool = False
    has_plain: bool = False

    def __post_init__(self):
        mask = tuple(self.spatial_mask)
        if any(j < 1 for j in mask) or list(mask) != sorted(set(mask)):
            raise AlgebraError(f"spatial indices must be ascending and >= 1, got {mask}")
        object.__setattr__(self, "spatial_mask", mask)

    @property
    def witt(self) -> int:
        return int(self.has_dagger) + 2 * int(self.has_plain)

    @property
    def bits(self) -> int:
        return sum(1 << (j - 1) for j in self.spatial_mask)

    def index(self, m: int) -> int:
        if self.spatial_mask and self.spatial_mask[-1] > m:
            raise AlgebraError(f"blade {self} does not belong to m={m}")
        return self.witt * (1 << m) + self.bits

    @classmethod
    def from_index(cls, m: int, idx: int) -> "BladeIndex":
        witt, bits = divmod(idx, 1 << m)
        if not 0 <= witt < 4:
            raise AlgebraError(f"index {idx} out of range for m={m}")
        mask = tuple(j + 1 for j in range(m) if bits >> j & 1)
        return cls(mask, bool(witt & 1), bool(witt & 2))

    def __str__(self) -> str:
        return render_blade(self)


def render_blade(blade: BladeIndex) -> str:
    """Render as e.g. ``e1e3 f+ f``; the empty word renders as ``1``."""
    parts = []
    if blade.spatial_mask:
        parts.append("".join(f"e{j}" for j in blade.spatial_mask))
    if blade.witt:
        parts.append(_WITT_NAMES[blade.witt])
    return " ".join(parts) if parts else "1"


def parse_blade(text: str) -> BladeIndex:
    """Inverse of :func:`render_blade`."""
    tokens = text.split()
    if tokens == ["1"]:
        return BladeIndex()
    mask: tuple[int, ...] = ()
    dag = plain = False
    for tok in tokens:
        if tok == "f+":
            if dag or plain:
                raise AlgebraError(f"non-canonical Witt word in {text!r}")
            dag = True
        elif tok == "f":
            if plain:
                raise AlgebraError(f"non-canonical Witt word in {text!r}")
            plain = True
        elif tok.startswith("e"):
            if mask or dag or plain:
                raise AlgebraError(f"non-canonical blade {text!r}")
            try:
                mask = tuple(int(p) for p in tok.split("e")[1:])
            except ValueError:
                raise AlgebraError(f"cannot parse blade {text!r}") from None
        else:
            raise AlgebraError(f"cannot parse blade {text!r}")
    return BladeIndex(mask, dag, plain)


def dimension(m: int) -> int:
    """Number of canonical basis words for the Witt-extended Cl_m."""
    if m < 1:
        raise AlgebraError(f"m must be a positive integer, got {m}")
    return 4 << m


@functools.lru_cache(maxsize=None)
def product_table(m: int) -> tuple[tuple[tuple[tuple[int, int], ...], ...], ...]:
    """``table[a][b]`` lists ``(sign, c)`` with ``blade_a * blade_b = sum sign*blade_c``."""
    size = 1 << m
    dim = dimension(m)
    rows = []
    for a in range(dim):
        wa, ma = divmod(a, size)
        row = []
        for b in range(dim):
            wb, mb = divmod(b, size)
            # move e_B left across the Witt part of a
            sign = -1 if (_WITT_DEGREE[wa] * _popcount(mb)) % 2 else 1
            sign *= _clifford_sign(ma, mb)
            mask = ma ^ mb
            row.append(tuple((sign * c, w * size + mask) for c, w in _WITT_TABLE[wa, wb]))
        rows.append(tuple(row))
    return tuple(rows)


@functools.lru_cache(maxsize=None)
def structure_tensor(m: int) -> np.ndarray:
    """Dense ``C[a, b, c]`` with ``(x y)_c = sum_ab x_a y_b C[a, b, c]``."""
    dim = dimension(m)
    c = np.zeros((dim, dim, dim))
    for a, row in enumerate(product_table(m)):
        for b, terms in enumerate(row):
            for s, k in terms:
                c[a, b, k] += s
    c.setflags(write=False)
    return c


class Multivector:
    """Immutable element of the Witt-extended complex Clifford algebra.

    Args:
        m: number of spatial generators.
        coefficients: dense vector of length ``dimension(m)`` or a mapping
            from :class:`BladeIndex` (or its rendering) to complex scalars.
    """

    __slots__ = ("m", "_c")

    def __init__(self, m: int, coefficients=None):
        dim = dimension(m)
        if coefficients is None:
            c = np.zeros(dim, dtype=complex)
        elif isinstance(coefficients, Mapping):
            c = np.zeros(dim, dtype=complex)
            for key, val in coefficients.items():
                blade = parse_blade(key) if isinstance(key, str) else key
                c[blade.index(m)] += val
        else:
            c = np.array(coefficients, dtype=complex)
            if c.shape != (dim,):
                raise AlgebraError(f"expected {dim} coefficients for m={m}, got shape {c.shape}")
        c.setflags(write=False)
        self.m = m
        self._c = c

    # construction helpers

    @classmethod
    def scalar(cls, m: int, value: complex = 1.0) -> "Multivector":
        c = np.zeros(dimension(m), dtype=complex)
        c[0] = value
        return cls(m, c)

    @classmethod
    def blade(cls, m: int, blade: BladeIndex | str, value: complex = 1.0) -> "Multivector":
        if isinstance(blade, str):
            blade = parse_blade(blade)
        c = np.zeros(dimension(m), dtype=complex)
        c[blade.index(m)] = value
        return cls(m, c)

    @classmethod
    def vector(cls, m: int, components: Iterable[complex]) -> "Multivector":
        """``sum_j x_j e_j``."""
        c = np.zeros(dimension(m), dtype=complex)
        comps = list(components)
        if len(comps) != m:
            raise AlgebraError(f"expected {m} vector components, got {len(comps)}")
        for j, x in enumerate(comps):
            c[1 << j] = x
        return cls(m, c)

    @property
    def coefficients(self) -> np.ndarray:
        return self._c

    def terms(self) -> dict[BladeIndex, complex]:
        """Nonzero coefficients keyed by blade."""
        return {BladeIndex.from_index(self.m, int(i)): complex(self._c[i])
                for i in np.flatnonzero(self._c)}

    def __getitem__(self, blade: BladeIndex | str) -> complex:
        if isinstance(blade, str):
            blade = parse_blade(blade)
        return complex(self._c[blade.index(self.m)])

    # arithmetic

    def _check(self, other: "Multivector"):
        if other.m != self.m:
            raise AlgebraError(f"dimension mismatch: m={self.m} vs m={other.m}")

    def __add__(self, other):
        if isinstance(other, Multivector):
            self._check(other)
            return Multivector(self.m, self._c + other._c)
        if np.isscalar(other):
            return self + Multivector.scalar(self.m, other)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Multivector(self.m, -self._c)

    def __sub__(self, other):
        if isinstance(other, Multivector) or np.isscalar(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return mul(self, other)
        if np.isscalar(other):
            return Multivector(self.m, self._c * other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return Multivector(self.m, self._c * other)
        return NotImplemented

    def __truediv__(self, other):
        if np.isscalar(other):
            return Multivector(self.m, self._c / other)
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, Multivector):
            return self.m == other.m and np.array_equal(self._c, other._c)
        if np.isscalar(other):
            return self == Multivector.scalar(self.m, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.m, self._c.tobytes()))

    def allclose(self, other: "Multivector", atol: float = 1e-14, rtol: float = 0.0) -> bool:
        self._check(other)
        return bool(np.allclose(self._c, other._c, atol=atol, rtol=rtol))

    def __repr__(self):
        return f"Multivector(m={self.m}, {render(self)!r})"

    def __str__(self):
        return render(self)


def render(a: Multivector) -> str:
    """Text form such as ``(1+0j) e1 + (-2+0.5j) e1e3 f+ f``; zero renders as ``0``."""
    terms = a.terms()
    if not terms:
        return "0"
    return " + ".join(f"{c!r} {render_blade(b)}" for b, c in sorted(terms.items(),
                      key=lambda kv: kv[0].index(a.m)))


def parse(m: int, text: str) -> Multivector:
    """Inverse of :func:`render`."""
    text = text.strip()
    if text == "0":
        return Multivector(m)
    coeffs: dict[BladeIndex, complex] = {}
    for term in text.split(" + "):
        head, _, rest = term.strip().partition(" ")
        try:
            value = complex(head)
        except ValueError:
            raise AlgebraError(f"cannot parse coefficient in {term!r}") from None
        blade = parse_blade(rest)
        coeffs[blade] = coeffs.get(blade, 0) + value
    return Multivector(m, coeffs)


def blade_product(a: BladeIndex, b: BladeIndex, m: int) -> Multivector:
    """Normal-form expansion of the word ``a b`` (at most two terms)."""
    table = product_table(m)
    out = np.zeros(dimension(m), dtype=complex)
    for s, c in table[a.index(m)][b.index(m)]:
        out[c] += s
    return Multivector(m, out)


def mul(a: Multivector, b: Multivector) -> Multivector:
    """Bilinear product of two multivectors."""
    a._check(b)
    out = np.einsum("a,b,abc->c", a.coefficients, b.coefficients, structure_tensor(a.m))
    return Multivector(a.m, out)


def is_witt_free(a: Multivector) -> bool:
    size = 1 << a.m
    return not np.any(a.coefficients[size:])


def conj(a: Multivector) -> Multivector:
    """Clifford conjugation combined with complex conjugation of coefficients.

    Only defined on Cl_m; inputs with any Witt-bearing component are rejected.
    """
    if not is_witt_free(a):
        raise AlgebraError("conjugation undefined on Witt part")
    size = 1 << a.m
    out = np.conj(a.coefficients).copy()
    for bits in range(size):
        k = _popcount(bits)
        # reversal sign times (-1)^k from e_j -> -e_j
        if (k + k * (k - 1) // 2) % 2:
            out[bits] = -out[bits]
    return Multivector(a.m, out)


def scalar_part(a: Multivector) -> complex:
    return complex(a.coefficients[0])


def component_norm_sq(a: Multivector) -> float:
    """``sum_A |a_A|^2`` over the canonical basis."""
    c = a.coefficients
    return float(np.vdot(c, c).real)


def left_matrix(a: Multivector) -> np.ndarray:
    """Matrix ``L`` with ``(a x)_c = sum_b L[c, b] x_b``."""
    return np.einsum("a,abc->cb", a.coefficients, structure_tensor(a.m))


def right_matrix(a: Multivector) -> np.ndarray:
    """Matrix ``R`` with ``(x a)_c = sum_b R[c, b] x_b``."""
    return np.einsum("b,abc->ca", a.coefficients, structure_tensor(a.m))


def all_blades(m: int) -> list[BladeIndex]:
    return [BladeIndex.from_index(m, i) for i in range(dimension(m))]


def generators(m: int) -> dict[str, Multivector]:
    """``e1..em``, ``f`` and ``f+`` keyed by their rendering."""
    gens = {f"e{j}": Multivector.blade(m, BladeIndex((j,))) for j in range(1, m + 1)}
    gens["f"] = Multivector.blade(m, BladeIndex(has_plain=True))
    gens["f+"] = Multivector.blade(m, BladeIndex(has_dagger=True))
    return gens


def relation_defects(m: int) -> dict[str, float]:
    """Largest absolute coefficient error of each defining relation."""
    g = generators(m)
    one = Multivector.scalar(m)
    zero = Multivector(m)
    e = [g[f"e{j}"] for j in range(1, m + 1)]
    f, fd = g["f"], g["f+"]

    def err(x, y):
        return float(np.max(np.abs(x.coefficients - y.coefficients)))

    out = {
        "clifford": max(err(ei * ej + ej * ei, -2.0 * one if i == j else zero)
                        for (i, ei), (j, ej) in itertools.product(enumerate(e), repeat=2)),
        "f^2": err(f * f, zero),
        "f+^2": err(fd * fd, zero),
        "f f+ + f+ f": err(f * fd + fd * f, one),
        "f e_j + e_j f": max(err(f * ej + ej * f, zero) for ej in e),
        "f+ e_j + e_j f+": max(err(fd * ej + ej * fd, zero) for ej in e),
    }
    return out


def random_multivector(m: int, rng: np.random.Generator, witt: bool = True) -> Multivector:
    dim = dimension(m) if witt else 1 << m
    c = np.zeros(dimension(m), dtype=complex)
    c[:dim] = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return Multivector(m, c)
