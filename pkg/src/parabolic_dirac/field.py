"""Space-time grids, multivector-valued fields and finite-difference operators.

A field over an ``m``-dimensional box and ``n_t`` time levels stores its
coefficients in an array of shape ``(D, n, ..., n, n_t)`` where ``D`` is the
algebra dimension.  All derivatives are second order: centered in the
interior and one-sided (three-point) on the first and last node of an axis,
exactly as :func:`numpy.gradient` with ``edge_order=2``.

Quadrature uses node-centred dual cells clipped to the box, so a node on a
face carries half the cell measure in the clipped direction.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .algebra import (
    BladeIndex, Multivector, dimension, generators, left_matrix, right_matrix,
)

PLUS, MINUS = "+", "-"


def _check_sign(sign: str):
    if sign not in (PLUS, MINUS):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return 1.0 if sign == PLUS else -1.0


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform node grid on the cylinder ``[origin, origin + (n-1) h]^m x [0, T]``."""

    m: int
    n: int
    h: float
    n_t: int
    tau: float
    origin: tuple[float, ...] = dc_field(default=None)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.n < 5 or self.n_t < 5:
            raise ValueError("need n >= 5 and n_t >= 5 for one-sided second-order stencils")
        if not (self.h > 0 and self.tau > 0):
            raise ValueError("h and tau must be positive")
        origin = (0.0,) * self.m if self.origin is None else tuple(float(o) for o in self.origin)
        if len(origin) != self.m:
            raise ValueError(f"origin must have {self.m} entries")
        object.__setattr__(self, "origin", origin)

    @classmethod
    def box(cls, m: int, n: int, n_t: int, lower: float, upper: float, T: float) -> "SpaceTimeGrid":
        """Grid on ``[lower, upper]^m x [0, T]``."""
        return cls(m, n, (upper - lower) / (n - 1), n_t, T / (n_t - 1), (lower,) * m)

    def refined(self) -> "SpaceTimeGrid":
        """Same cylinder with both steps halved."""
        return SpaceTimeGrid(self.m, 2 * self.n - 1, self.h / 2, 2 * self.n_t - 1, self.tau / 2, self.origin)

    @property
    def T(self) -> float:
        return (self.n_t - 1) * self.tau

    @property
    def dim(self) -> int:
        return dimension(self.m)

    @property
    def node_shape(self) -> tuple[int, ...]:
        return (self.n,) * self.m + (self.n_t,)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.dim,) + self.node_shape

    @property
    def n_space(self) -> int:
        return self.n ** self.m

    def axis(self, j: int) -> np.ndarray:
        """Coordinates along spatial axis ``j`` (0-based)."""
        return self.origin[j] + self.h * np.arange(self.n)

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.n_t)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates ``X`` of shape ``(m, n, .., n, n_t)`` and ``t`` of shape node_shape."""
        axes = [self.axis(j) for j in range(self.m)] + [self.times]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids[:-1]), grids[-1]

    def space_points(self) -> np.ndarray:
        """Spatial node coordinates, shape ``(n**m, m)`` in C order."""
        axes = [self.axis(j) for j in range(self.m)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.m)

    def cell_weights(self) -> np.ndarray:
        """Dual-cell measure of every node, shape node_shape (sums to box volume x T)."""
        w = np.ones(self.node_shape)
        for ax in range(self.m + 1):
            sl = [slice(None)] * (self.m + 1)
            for end in (0, -1):
                sl[ax] = end
                w[tuple(sl)] *= 0.5
        return w * self.h ** self.m * self.tau

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.node_shape, dtype=bool)
        for ax in range(self.m + 1):
            sl = [slice(None)] * (self.m + 1)
            for end in (0, -1):
                sl[ax] = end
                mask[tuple(sl)] = True
        return mask

    def interior_mask(self, margin: int = 1) -> np.ndarray:
        """Nodes at least ``margin`` cells away from every face."""
        mask = np.zeros(self.node_shape, dtype=bool)
        sl = tuple(slice(margin, k - margin) for k in self.node_shape)
        mask[sl] = True
        return mask


class AlgebraField:
    """Multivector-valued grid function.  Treated as immutable."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: SpaceTimeGrid, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        if values.shape != grid.shape:
            raise ValueError(f"field values must have shape {grid.shape}, got {values.shape}")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "AlgebraField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def from_scalar(cls, grid: SpaceTimeGrid, scalar: np.ndarray,
                    blade: BladeIndex | str = BladeIndex()) -> "AlgebraField":
        """Field with ``scalar`` (shape node_shape) on a single blade."""
        vals = np.zeros(grid.shape, dtype=complex)
        idx = Multivector.blade(grid.m, blade).coefficients.nonzero()[0][0]
        vals[idx] = scalar
        return cls(grid, vals)

    def _wrap(self, values) -> "AlgebraField":
        return AlgebraField(self.grid, values)

    def _same(self, other: "AlgebraField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, AlgebraField):
            self._same(other)
            return self._wrap(self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, AlgebraField):
            self._same(other)
            return self._wrap(self.values - other.values)
        return NotImplemented

    def __neg__(self):
        return self._wrap(-self.values)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return self._wrap(self.values * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def left_mul(self, a: Multivector) -> "AlgebraField":
        """Pointwise ``a * u``."""
        return self._wrap(np.tensordot(left_matrix(a), self.values, axes=(1, 0)))

    def right_mul(self, a: Multivector) -> "AlgebraField":
        """Pointwise ``u * a``."""
        return self._wrap(np.tensordot(right_matrix(a), self.values, axes=(1, 0)))

    def mask(self, where: np.ndarray) -> "AlgebraField":
        """Zero every node where ``where`` is False."""
        return self._wrap(self.values * where)

    def at(self, node: Sequence[int]) -> Multivector:
        return Multivector(self.grid.m, self.values[(slice(None),) + tuple(node)])

    def component(self, blade: BladeIndex | str) -> np.ndarray:
        idx = Multivector.blade(self.grid.m, blade).coefficients.nonzero()[0][0]
        return self.values[idx]

    def norm_sq_pointwise(self) -> np.ndarray:
        """``sum_A |u_A|^2`` at every node."""
        return np.sum(np.abs(self.values) ** 2, axis=0)


def sample(grid: SpaceTimeGrid, generator: Callable[[np.ndarray, float], Multivector]) -> AlgebraField:
    """Evaluate ``generator(x, t)`` at every node."""
    vals = np.zeros(grid.shape, dtype=complex)
    X, t = grid.mesh()
    for node in np.ndindex(*grid.node_shape):
        mv = generator(X[(slice(None),) + node], float(t[node]))
        if mv.m != grid.m:
            raise ValueError("generator returned a multivector of the wrong dimension")
        vals[(slice(None),) + node] = mv.coefficients
    return AlgebraField(grid, vals)


def sample_array(grid: SpaceTimeGrid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 blade: BladeIndex | str = BladeIndex()) -> AlgebraField:
    """Vectorised sampling: ``fn(X, t)`` returns either a node_shape array placed on
    ``blade`` or a full ``(D, ...)`` coefficient array."""
    X, t = grid.mesh()
    out = np.asarray(fn(X, t), dtype=complex)
    if out.shape == grid.shape:
        return AlgebraField(grid, out)
    return AlgebraField.from_scalar(grid, np.broadcast_to(out, grid.node_shape), blade)


# finite differences

def partial(u: AlgebraField, axis: int) -> AlgebraField:
    """Derivative along spatial axis ``axis`` (0-based) or time (``axis == m``)."""
    g = u.grid
    step = g.tau if axis == g.m else g.h
    return u._wrap(np.gradient(u.values, step, axis=axis + 1, edge_order=2))


def apply_dt(u: AlgebraField) -> AlgebraField:
    return partial(u, u.grid.m)


def apply_spatial_dirac(u: AlgebraField) -> AlgebraField:
    """``sum_j e_j d_j u`` with left multiplication."""
    g = u.grid
    gens = generators(g.m)
    out = np.zeros(g.shape, dtype=complex)
    for j in range(g.m):
        out += partial(u, j).left_mul(gens[f"e{j + 1}"]).values
    return u._wrap(out)


def apply_parabolic_dirac(u: AlgebraField, sign: str) -> AlgebraField:
    """``(D + f d_t +- i f+) u``."""
    s = _check_sign(sign)
    gens = generators(u.grid.m)
    return (apply_spatial_dirac(u) + apply_dt(u).left_mul(gens["f"])
            + u.left_mul(gens["f+"]) * (1j * s))


def apply_right_parabolic_dirac(v: AlgebraField, sign: str) -> AlgebraField:
    """Right action ``v D_{x,+-it} = sum_j (d_j v) e_j + (d_t v) f +- i v f+``."""
    s = _check_sign(sign)
    g = v.grid
    gens = generators(g.m)
    out = v.right_mul(gens["f+"]) * (1j * s) + apply_dt(v).right_mul(gens["f"])
    for j in range(g.m):
        out = out + partial(v, j).right_mul(gens[f"e{j + 1}"])
    return out


def _second_difference(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Three-point second difference, four-point one-sided on the end nodes."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = v[2:] - 2 * v[1:-1] + v[:-2]
    out[0] = 2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]
    out[-1] = 2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]
    return np.moveaxis(out, 0, axis) / h ** 2


def gradient_matrix(n: int, step: float) -> np.ndarray:
    """Dense ``n x n`` matrix of the first-derivative stencil used by :func:`partial`."""
    G = np.zeros((n, n))
    for i in range(1, n - 1):
        G[i, i - 1], G[i, i + 1] = -0.5, 0.5
    G[0, :3] = (-1.5, 2.0, -0.5)
    G[-1, -3:] = (0.5, -2.0, 1.5)
    return G / step


def second_difference_matrix(n: int, step: float) -> np.ndarray:
    """Dense ``n x n`` matrix of the stencil used by :func:`apply_laplacian`."""
    S = np.zeros((n, n))
    for i in range(1, n - 1):
        S[i, i - 1:i + 2] = (1.0, -2.0, 1.0)
    S[0, :4] = (2.0, -5.0, 4.0, -1.0)
    S[-1, -4:] = (-1.0, 4.0, -5.0, 2.0)
    return S / step ** 2


def axis_weights(grid: SpaceTimeGrid, axis: int) -> np.ndarray:
    """One-dimensional dual-cell widths along ``axis`` (time when ``axis == m``)."""
    size = grid.node_shape[axis]
    w = np.full(size, grid.tau if axis == grid.m else grid.h)
    w[[0, -1]] *= 0.5
    return w


def apply_along(values: np.ndarray, M: np.ndarray, axis: int) -> np.ndarray:
    """Apply the matrix ``M`` along node axis ``axis`` of a ``(D, ...)`` array."""
    return np.moveaxis(np.tensordot(M, values, axes=(1, axis + 1)), 0, axis + 1)


def _adjoint_along(values: np.ndarray, M: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    """Apply ``diag(w)^-1 M^T diag(w)``, the adjoint of ``M`` for weights ``w``."""
    shape = [1] * values.ndim
    shape[axis + 1] = len(w)
    w = w.reshape(shape)
    return apply_along(values * w, M.T, axis) / w


def partial_adjoint(v: AlgebraField, axis: int) -> AlgebraField:
    """Adjoint of :func:`partial` for the :func:`inner_product` pairing."""
    g = v.grid
    step = g.tau if axis == g.m else g.h
    G = gradient_matrix(g.node_shape[axis], step)
    return v._wrap(_adjoint_along(v.values, G, axis_weights(g, axis), axis))


def laplacian_adjoint(v: AlgebraField) -> AlgebraField:
    """Adjoint of :func:`apply_laplacian` for the :func:`inner_product` pairing."""
    g = v.grid
    out = np.zeros(g.shape, dtype=complex)
    for j in range(g.m):
        out += _adjoint_along(v.values, second_difference_matrix(g.n, g.h), axis_weights(g, j), j)
    return v._wrap(out)


def left_mul_adjoint(v: AlgebraField, a: Multivector) -> AlgebraField:
    """Adjoint of ``u -> a u`` (coefficient-wise Hermitian transpose)."""
    return v._wrap(np.tensordot(left_matrix(a).conj().T, v.values, axes=1))


def spatial_dirac_adjoint(v: AlgebraField) -> AlgebraField:
    gens = generators(v.grid.m)
    out = AlgebraField.zeros(v.grid)
    for j in range(v.grid.m):
        out = out + partial_adjoint(left_mul_adjoint(v, gens[f"e{j + 1}"]), j)
    return out


def parabolic_dirac_adjoint(v: AlgebraField, sign: str) -> AlgebraField:
    """Adjoint of :func:`apply_parabolic_dirac` for the :func:`inner_product` pairing."""
    s = _check_sign(sign)
    g = v.grid
    gens = generators(g.m)
    return (spatial_dirac_adjoint(v) + partial_adjoint(left_mul_adjoint(v, gens["f"]), g.m)
            + left_mul_adjoint(v, gens["f+"]) * (-1j * s))


def apply_laplacian(u: AlgebraField) -> AlgebraField:
    """Standard (2m+1)-point Laplacian."""
    g = u.grid
    out = np.zeros(g.shape, dtype=complex)
    for j in range(g.m):
        out += _second_difference(u.values, g.h, j + 1)
    return u._wrap(out)


COMPOSED, COMPACT = "composed", "compact"


def apply_schrodinger(u: AlgebraField, sign: str, mode: str = COMPOSED) -> AlgebraField:
    """``(+-i d_t - Delta) u``, either as the square of the discrete parabolic
    Dirac operator or with the compact Laplacian stencil."""
    s = _check_sign(sign)
    if mode == COMPOSED:
        return apply_parabolic_dirac(apply_parabolic_dirac(u, sign), sign)
    if mode == COMPACT:
        return apply_dt(u) * (1j * s) - apply_laplacian(u)
    raise ValueError(f"unknown mode {mode!r}")


def factorization_residual(u: AlgebraField, sign: str, margin: int = 2) -> float:
    """l2 distance between composed and compact Schrodinger operators on
    nodes at least ``margin`` cells from the boundary."""
    diff = apply_schrodinger(u, sign, COMPOSED) - apply_schrodinger(u, sign, COMPACT)
    return l2_norm(diff, u.grid.interior_mask(margin))


# norms

def l2_norm(u: AlgebraField, where: np.ndarray | None = None) -> float:
    """Discrete ``(int |u|^2 dx dt)^(1/2)`` with ``|u|^2 = sum_A |u_A|^2``."""
    w = u.grid.cell_weights()
    if where is not None:
        w = w * where
    return float(np.sqrt(np.sum(u.norm_sq_pointwise() * w)))


def inner_product(u: AlgebraField, v: AlgebraField, where: np.ndarray | None = None) -> complex:
    """Coefficient-wise Hermitian pairing ``int sum_A conj(u_A) v_A dx dt``."""
    u._same(v)
    w = u.grid.cell_weights()
    if where is not None:
        w = w * where
    return complex(np.sum(np.conj(u.values) * v.values * w))


# serialization
#
# Layout (little endian):
#   8 bytes   magic b"PDFIELD1"
#   uint32    m
#   uint32    n
#   float64   h
#   uint32    n_t
#   float64   tau
#   m float64 origin
#   uint32    blade count D
#   complex128 coefficients, node-major: nodes in C order over (x_1..x_m, t),
#             for each node the D coefficients in canonical blade order.

MAGIC = b"PDFIELD1"


def dumps(u: AlgebraField) -> bytes:
    g = u.grid
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IIdId", g.m, g.n, g.h, g.n_t, g.tau))
    buf.write(struct.pack(f"<{g.m}d", *g.origin))
    buf.write(struct.pack("<I", g.dim))
    data = np.moveaxis(u.values, 0, -1).astype("<c16")
    buf.write(np.ascontiguousarray(data).tobytes())
    return buf.getvalue()


def loads(raw: bytes) -> AlgebraField:
    if raw[:8] != MAGIC:
        raise ValueError("not a field container")
    off = 8
    m, n, h, n_t, tau = struct.unpack_from("<IIdId", raw, off)
    off += struct.calcsize("<IIdId")
    origin = struct.unpack_from(f"<{m}d", raw, off)
    off += 8 * m
    (dim,) = struct.unpack_from("<I", raw, off)
    off += 4
    grid = SpaceTimeGrid(m, n, h, n_t, tau, origin)
    if dim != grid.dim:
        raise ValueError(f"blade count {dim} does not match m={m}")
    data = np.frombuffer(raw, dtype="<c16", offset=off)
    if data.size != dim * int(np.prod(grid.node_shape)):
        raise ValueError("truncated field container")
    values = np.moveaxis(data.reshape(grid.node_shape + (dim,)), -1, 0)
    return AlgebraField(grid, values.astype(complex))


def save(u: AlgebraField, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(u))


def load(path) -> AlgebraField:
    with open(path, "rb") as fh:
        return loads(fh.read())
