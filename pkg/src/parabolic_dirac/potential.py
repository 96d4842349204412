"""Volume and boundary potentials of the backward parabolic Dirac operator.

Conventions used throughout (``z = (x, t)``, ``D_- = D + f d_t - i f+``)::

    T u(z0)  =  int_Omega  E(z0 - z) u(z) dz                    (causal)
    F u(z0)  = -int_dOmega E(z0 - z) dsigma(z) u(z)
    S v(z0)  = 2 * PV of the F quadrature at a boundary node z0

``E`` is :func:`kernel.E_minus`, which vanishes for ``z0`` earlier than
``z``.  With these signs ``D_- T = I``, ``F u + T D_- u = u`` and ``F``
reproduces null solutions of ``D_-``.

The kernel ``E = e D_-`` also carries a point mass ``i f delta(x) delta(t)``
produced by the time derivative hitting the step at ``t = 0``.  The discrete
``T`` adds it explicitly together with the leading near-field term of the
first half time step:

    T_h u = sum_{lag >= 1} E u w  +  i f u  +  (tau/2)(i D_h u - f Delta_h u + f+ u)

which makes ``D_h T_h u - u`` second order for smooth data.  A
point-sampled chirp kernel aliases on the lattice, so ``4 pi tau / h`` should
exceed the width of the box (see :func:`aliasing_margin`).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .algebra import Multivector, generators, left_matrix, structure_tensor
from .field import (
    MINUS, PLUS, AlgebraField, SpaceTimeGrid, apply_laplacian, apply_parabolic_dirac,
    apply_right_parabolic_dirac, apply_spatial_dirac, l2_norm, laplacian_adjoint,
    left_mul_adjoint, spatial_dirac_adjoint,
)
from .kernel import E_minus_components, kernel_blades

PROBE_MARGIN = 2
_CHUNK = 1 << 22  # kernel entries evaluated per block


class PotentialError(ValueError):
    """Invalid target or face selection."""


# faces and surface elements

@dataclass(frozen=True)
class Face:
    """Face of the space-time box: ``axis < m`` lateral, ``axis == m`` time; ``side`` is -1 or +1."""

    axis: int
    side: int

    def label(self, m: int) -> str:
        if self.axis == m:
            return "bottom" if self.side < 0 else "top"
        return f"{'-' if self.side < 0 else '+'}x{self.axis + 1}"


def faces(m: int) -> list[Face]:
    """All ``2m + 2`` faces: lateral faces first, then bottom and top."""
    out = [Face(j, s) for j in range(m) for s in (-1, 1)]
    return out + [Face(m, -1), Face(m, 1)]


def parse_face(label: str, m: int) -> Face:
    for fc in faces(m):
        if fc.label(m) == label:
            return fc
    raise PotentialError(f"unknown face {label!r}")


@dataclass(frozen=True)
class SurfaceElement:
    face: Face
    weight: Multivector
    measure: float


def _on_face(grid: SpaceTimeGrid, face: Face, node: Sequence[int]) -> bool:
    last = grid.node_shape[face.axis] - 1
    return node[face.axis] == (0 if face.side < 0 else last)


def surface_element(grid: SpaceTimeGrid, face: Face, node: Sequence[int]) -> SurfaceElement:
    """Outward algebra weight and dual-cell area of ``node`` on ``face``.

    Lateral faces carry ``+-e_j`` with nominal area ``h^(m-1) tau``; the bottom
    and top carry ``-f`` and ``+f`` with area ``h^m``.  Nodes on an edge of the
    face get the clipped (halved per direction) area.
    """
    node = tuple(int(k) for k in node)
    if len(node) != grid.m + 1 or any(not 0 <= k < s for k, s in zip(node, grid.node_shape)):
        raise PotentialError(f"node {node} outside grid")
    if not _on_face(grid, face, node):
        raise PotentialError(f"node {node} is not on face {face.label(grid.m)}")
    gens = generators(grid.m)
    key = "f" if face.axis == grid.m else f"e{face.axis + 1}"
    measure = 1.0
    for ax, (k, size) in enumerate(zip(node, grid.node_shape)):
        if ax == face.axis:
            continue
        step = grid.tau if ax == grid.m else grid.h
        measure *= step * (0.5 if k in (0, size - 1) else 1.0)
    return SurfaceElement(face, gens[key] * float(face.side), measure)


def _face_weights(grid: SpaceTimeGrid) -> np.ndarray:
    """Per node: sum over incident faces of ``measure * weight``, shape ``(D,) + node_shape``."""
    m = grid.m
    gens = generators(m)
    out = np.zeros(grid.shape, dtype=complex)
    for fc in faces(m):
        key = "f" if fc.axis == m else f"e{fc.axis + 1}"
        area = np.ones(grid.node_shape)
        for ax, size in enumerate(grid.node_shape):
            if ax == fc.axis:
                continue
            step = grid.tau if ax == m else grid.h
            scale = np.full(size, step)
            scale[[0, -1]] *= 0.5
            shape = [1] * (m + 1)
            shape[ax] = size
            area = area * scale.reshape(shape)
        sl = [slice(None)] * (m + 1)
        sl[fc.axis] = 0 if fc.side < 0 else -1
        coeff = gens[key].coefficients * fc.side
        out[(slice(None),) + tuple(sl)] += np.multiply.outer(coeff, area[tuple(sl)])
    return out


# boundary data

class BoundaryTrace:
    """Multivector values on the boundary nodes of a grid.

    Stored once per node, so values on shared edges agree by construction.
    """

    def __init__(self, grid: SpaceTimeGrid, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        mask = grid.boundary_mask()
        if values.shape == grid.shape:
            values = values[:, mask]
        if values.shape != (grid.dim, int(mask.sum())):
            raise ValueError(f"trace values have shape {values.shape}")
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def from_field(cls, u: AlgebraField) -> "BoundaryTrace":
        return cls(u.grid, u.values)

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "BoundaryTrace":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    def nodes(self) -> np.ndarray:
        """Boundary node indices, shape ``(B, m + 1)``."""
        return np.argwhere(self.grid.boundary_mask())

    def face(self, face: Face) -> np.ndarray:
        """Values on one face, shape ``(D,) + face node shape``."""
        return self.to_field().values[(slice(None),) + _face_slice(self.grid, face)]

    def to_field(self) -> AlgebraField:
        """Extension by zero to the whole grid."""
        vals = np.zeros(self.grid.shape, dtype=complex)
        vals[:, self.grid.boundary_mask()] = self.values
        return AlgebraField(self.grid, vals)

    def __add__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.values + other.values)

    def __sub__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def norm(self) -> float:
        """Discrete ``L2(dOmega)`` norm with the dual face areas."""
        area = np.abs(_face_weights(self.grid)).sum(axis=0)[self.grid.boundary_mask()]
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2 * area)))


def _face_slice(grid: SpaceTimeGrid, face: Face) -> tuple:
    sl = [slice(None)] * (grid.m + 1)
    sl[face.axis] = 0 if face.side < 0 else -1
    return tuple(sl)


# targets

ALL_INTERIOR, PROBE_SET, EXPLICIT = "all-interior", "probe-set", "explicit"


def select_targets(grid: SpaceTimeGrid, kind: str = PROBE_SET,
                   nodes: Iterable[Sequence[int]] | None = None) -> np.ndarray:
    """Boolean node mask for a target selector.

    ``all-interior`` is every non-boundary node, ``probe-set`` keeps nodes at
    least two cells from the boundary, ``explicit`` uses ``nodes``.
    """
    if kind == ALL_INTERIOR:
        return grid.interior_mask(1)
    if kind == PROBE_SET:
        return grid.interior_mask(PROBE_MARGIN)
    if kind == EXPLICIT:
        mask = np.zeros(grid.node_shape, dtype=bool)
        for node in nodes or ():
            node = tuple(int(k) for k in node)
            if len(node) != grid.m + 1 or any(not 0 <= k < s for k, s in zip(node, grid.node_shape)):
                raise PotentialError(f"target {node} outside grid")
            mask[node] = True
        return mask
    raise PotentialError(f"unknown target selector {kind!r}")


# kernel sums

def _kernel_mats(m: int) -> list[np.ndarray]:
    return [left_matrix(Multivector.blade(m, b)) for b in kernel_blades(m)]


def _kernel_sum(grid: SpaceTimeGrid, tgt: np.ndarray, src: np.ndarray, src_vals: np.ndarray,
                skip_self: bool = False) -> np.ndarray:
    """``sum_s E(z_t - z_s) v_s`` for node index arrays ``tgt (M, m+1)``, ``src (B, m+1)``.

    ``src_vals`` has shape ``(D, B)``; returns ``(D, M)``.
    """
    m = grid.m
    mats = _kernel_mats(m)
    scale = np.array([grid.h] * m + [grid.tau])
    origin = np.array(list(grid.origin) + [0.0])
    zt = origin + tgt * scale
    zs = origin + src * scale
    out = np.zeros((grid.dim, len(tgt)), dtype=complex)
    rows = max(1, _CHUNK // max(1, len(src)))
    for a in range(0, len(tgt), rows):
        dz = zt[a:a + rows, None, :] - zs[None, :, :]
        K = E_minus_components(dz[..., :m], dz[..., m], m)
        if skip_self:
            same = np.all(tgt[a:a + rows, None, :] == src[None, :, :], axis=-1)
            K[:, same] = 0.0
        for Mk, Kk in zip(mats, K):
            out[:, a:a + rows] += Mk @ (src_vals @ Kk.T)
    return out


def _causal_volume_sum(u: AlgebraField) -> np.ndarray:
    """``sum_{t_s < t_0} E(z_0 - z_s) u_s w_s`` at every node, by time lag."""
    g = u.grid
    m, N, D, nt = g.m, g.n_space, g.dim, g.n_t
    pts = g.space_points()
    diff = pts[:, None, :] - pts[None, :, :]
    uw = (u.values * g.cell_weights()).reshape(D, N, nt)
    # left-multiply by each kernel blade once; the lag loop then only mixes nodes
    src = [np.einsum("cd,dxt->xct", Mk, uw) for Mk in _kernel_mats(m)]
    out = np.zeros((N, D, nt), dtype=complex)
    for lag in range(1, nt):
        K = E_minus_components(diff, lag * g.tau, m)
        for Kk, s in zip(K, src):
            out[:, :, lag:] += (Kk @ s[:, :, :nt - lag].reshape(N, -1)).reshape(N, D, nt - lag)
    return np.moveaxis(out, 1, 0).reshape(g.shape)


def singular_cell_term(u: AlgebraField) -> AlgebraField:
    """Point mass ``i f u`` plus the half-step near field ``(tau/2) psi``.

    ``psi = i D_h u - f Delta_h u + f+ u`` is the limit of the kernel action
    as the time lag goes to zero.  On the first time level the half step lies
    outside the cylinder and only the point mass remains.
    """
    g = u.grid
    gens = generators(g.m)
    psi = (apply_spatial_dirac(u) * 1j - apply_laplacian(u).left_mul(gens["f"])
           + u.left_mul(gens["f+"]))
    vals = psi.values * (g.tau / 2)
    vals[..., 0] = 0.0
    return u.left_mul(gens["f"]) * 1j + AlgebraField(g, vals)


def teodorescu(u: AlgebraField, targets: np.ndarray | None = None) -> AlgebraField:
    """Discrete Teodorescu transform, a right inverse of ``D_{x,-it}``.

    Args:
        u: Source field.
        targets: Optional node mask; values off the mask are set to zero.

    Returns:
        The volume potential at every node (or only at ``targets``).
    """
    out = AlgebraField(u.grid, _causal_volume_sum(u)) + singular_cell_term(u)
    return out if targets is None else out.mask(targets)


def _anticausal_volume_sum(v: AlgebraField) -> np.ndarray:
    """Adjoint of :func:`_causal_volume_sum` for the weighted pairing."""
    g = v.grid
    m, N, D, nt = g.m, g.n_space, g.dim, g.n_t
    pts = g.space_points()
    diff = pts[:, None, :] - pts[None, :, :]
    vw = (v.values * g.cell_weights()).reshape(D, N, nt)
    src = [np.einsum("cd,dxt->xct", Mk.conj().T, vw) for Mk in _kernel_mats(m)]
    out = np.zeros((N, D, nt), dtype=complex)
    for lag in range(1, nt):
        K = E_minus_components(diff, lag * g.tau, m)
        for Kk, s in zip(K, src):
            out[:, :, :nt - lag] += (Kk.conj().T @ s[:, :, lag:].reshape(N, -1)).reshape(N, D, nt - lag)
    return np.moveaxis(out, 1, 0).reshape(g.shape)


def teodorescu_adjoint(v: AlgebraField) -> AlgebraField:
    """Adjoint of :func:`teodorescu` for the :func:`field.inner_product` pairing."""
    g = v.grid
    gens = generators(g.m)
    vals = v.values * (g.tau / 2)
    vals[..., 0] = 0.0
    w = AlgebraField(g, vals)
    psi_adj = (spatial_dirac_adjoint(w) * -1j
               - left_mul_adjoint(laplacian_adjoint(w), gens["f"])
               + left_mul_adjoint(w, gens["f+"]))
    return (AlgebraField(g, _anticausal_volume_sum(v)) + left_mul_adjoint(v, gens["f"]) * -1j
            + psi_adj)


def aliasing_margin(grid: SpaceTimeGrid) -> float:
    """``4 pi tau / h`` minus the box width.

    The lattice-sampled kernel at lag ``tau`` repeats with period
    ``4 pi tau / h`` in space; a negative margin means the first time lags
    see spurious images of distant sources.
    """
    return 4 * np.pi * grid.tau / grid.h - (grid.n - 1) * grid.h


def cauchy_bitsadze(trace: BoundaryTrace, targets: np.ndarray | None = None) -> AlgebraField:
    """Boundary potential ``-sum E(z0 - z) dsigma u`` at interior targets.

    Raises:
        PotentialError: if a target lies on the boundary.
    """
    g = trace.grid
    bmask = g.boundary_mask()
    if targets is None:
        targets = g.interior_mask(1)
    targets = np.asarray(targets, dtype=bool)
    if np.any(targets & bmask):
        raise PotentialError("Cauchy-Bitsadze targets must be strictly interior")
    fw = _face_weights(g)[:, bmask]
    dsu = np.einsum("abc,ai,bi->ci", structure_tensor(g.m), fw, trace.values)
    vals = np.zeros(g.shape, dtype=complex)
    vals[:, targets] = -_kernel_sum(g, np.argwhere(targets), np.argwhere(bmask), dsu)
    return AlgebraField(g, vals)


def hilbert_S(trace: BoundaryTrace) -> BoundaryTrace:
    """Twice the principal-value surrogate of the boundary potential at boundary nodes."""
    g = trace.grid
    bmask = g.boundary_mask()
    nodes = np.argwhere(bmask)
    fw = _face_weights(g)[:, bmask]
    dsu = np.einsum("abc,ai,bi->ci", structure_tensor(g.m), fw, trace.values)
    return BoundaryTrace(g, -2.0 * _kernel_sum(g, nodes, nodes, dsu, skip_self=True))


def hardy_projections(trace: BoundaryTrace) -> tuple[BoundaryTrace, BoundaryTrace]:
    """``(P v, Q v)`` with ``P = (I + S)/2`` and ``Q = v - P v``."""
    p = (trace + hilbert_S(trace)) * 0.5
    return p, trace - p


# identity residuals

def borel_pompeiu_field(u: AlgebraField, targets: np.ndarray | None = None) -> AlgebraField:
    """``F(tr u) + T(D_- u) - u`` on ``targets`` (probe set by default)."""
    if targets is None:
        targets = select_targets(u.grid, PROBE_SET)
    F = cauchy_bitsadze(BoundaryTrace.from_field(u), targets)
    Tdu = teodorescu(apply_parabolic_dirac(u, MINUS))
    return (F + Tdu - u).mask(targets)


def borel_pompeiu_residual(u: AlgebraField, targets: np.ndarray | None = None) -> float:
    """l2 norm over the targets of ``F(tr u) + T(D_- u) - u``."""
    return l2_norm(borel_pompeiu_field(u, targets))


def right_inverse_residual(u: AlgebraField, margin: int = PROBE_MARGIN) -> float:
    """``||D_- T u - u|| / ||u||`` over nodes at least ``margin`` cells inside."""
    where = u.grid.interior_mask(margin)
    r = apply_parabolic_dirac(teodorescu(u), MINUS) - u
    return l2_norm(r, where) / l2_norm(u, where)


def stokes_terms(u: AlgebraField, v: AlgebraField) -> tuple[Multivector, Multivector]:
    """Boundary ``sum v dsigma u`` and volume ``sum (v D_-) u + v (D_+ u)``."""
    g = u.grid
    u._same(v)
    C = structure_tensor(g.m)
    bmask = g.boundary_mask()
    fw = _face_weights(g)[:, bmask]
    vs = np.einsum("abc,ai,bi->ci", C, v.values[:, bmask], fw)
    boundary = np.einsum("abc,ai,bi->c", C, vs, u.values[:, bmask])
    w = g.cell_weights()
    vd = apply_right_parabolic_dirac(v, MINUS)
    du = apply_parabolic_dirac(u, PLUS)
    flat = lambda a: a.values.reshape(g.dim, -1)
    wf = w.reshape(-1)
    volume = (np.einsum("abc,ai,bi,i->c", C, flat(vd), flat(u), wf)
              + np.einsum("abc,ai,bi,i->c", C, flat(v), flat(du), wf))
    return Multivector(g.m, boundary), Multivector(g.m, volume)


def stokes_residual(u: AlgebraField, v: AlgebraField) -> float:
    """``|boundary - volume|`` of the Stokes identity (coefficient 2-norm)."""
    b, vol = stokes_terms(u, v)
    return float(np.linalg.norm((b - vol).coefficients))


# refinement tables

@dataclass(frozen=True)
class ResidualRow:
    resolution: int
    residual: float
    ratio: float | None


def refinement_rows(resolutions: Sequence[int], residuals: Sequence[float]) -> list[ResidualRow]:
    """Rows with ``ratio = previous / current`` (None on the first row)."""
    rows = []
    for k, (n, r) in enumerate(zip(resolutions, residuals)):
        ratio = residuals[k - 1] / r if k and r else None
        rows.append(ResidualRow(int(n), float(r), ratio))
    return rows


def rows_to_csv(rows: Sequence[ResidualRow]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["resolution", "residual", "ratio"])
    for r in rows:
        wr.writerow([r.resolution, f"{r.residual:.10e}", "" if r.ratio is None else f"{r.ratio:.6f}"])
    return buf.getvalue()
