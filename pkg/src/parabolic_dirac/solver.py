"""Dirichlet solves, the L2 decomposition projectors and the nonlinear iteration.

``L_h`` is the square of the discrete backward parabolic Dirac operator
restricted to interior nodes.  Because the difference operators along
different axes commute, that square is the scalar operator
``-sum_j G_j^2 - i G_t`` acting on each coefficient separately, so one sparse
factorization serves all ``D`` components and

    Q = D_h E L_h^-1 R D_h

(``R`` restricts to interior nodes, ``E`` extends by zero) is exactly
idempotent.  ``P = I - Q``.

The nonlinear problem ``(-Delta - i d_t) u + |u|^2 u = f`` with zero
boundary values is solved by the iteration ``u_n = -T Q T (|u_{n-1}|^2 u_{n-1} - f)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field as dc_field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .field import (
    MINUS, AlgebraField, SpaceTimeGrid, apply_parabolic_dirac, apply_schrodinger,
    gradient_matrix, inner_product, l2_norm, parabolic_dirac_adjoint,
)
from .potential import teodorescu, teodorescu_adjoint

DEFAULT_TOL = 1e-10
MAX_CONDITION = 1e12


class SolverError(RuntimeError):
    """Base class for solver failures."""


class SingularSystemError(SolverError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class ConvergenceError(SolverError):
    pass


# Dirichlet operator

def _kron_axis(sizes: tuple[int, ...], M, axis: int) -> sp.csr_matrix:
    out = None
    for a, size in enumerate(sizes):
        factor = sp.csr_matrix(M) if a == axis else sp.identity(size, format="csr")
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out


def schrodinger_matrix(grid: SpaceTimeGrid) -> sp.csr_matrix:
    """Full-grid sparse matrix of the composed operator ``D_h^2`` for one coefficient."""
    sizes = grid.node_shape
    G = gradient_matrix(grid.n, grid.h)
    A = -1j * _kron_axis(sizes, gradient_matrix(grid.n_t, grid.tau), grid.m)
    for j in range(grid.m):
        A = A - _kron_axis(sizes, G @ G, j)
    return A.tocsr()


class DirichletOperator:
    """Factorized interior restriction of ``D_h^2`` on one grid."""

    def __init__(self, grid: SpaceTimeGrid, max_condition: float = MAX_CONDITION):
        self.grid = grid
        self.interior = grid.interior_mask(1)
        idx = np.flatnonzero(self.interior.reshape(-1))
        self.matrix = schrodinger_matrix(grid)[idx][:, idx].tocsc()
        try:
            self.lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise SingularSystemError(f"interior operator is singular: {exc}", math.inf) from exc
        self.condition = self._condition()
        if not self.condition < max_condition:
            raise SingularSystemError("interior operator is ill-conditioned", self.condition)

    def _condition(self) -> float:
        n = self.matrix.shape[0]
        inv = spla.LinearOperator(
            (n, n), dtype=complex,
            matvec=lambda b: self.lu.solve(np.asarray(b, dtype=complex).reshape(-1)),
            rmatvec=lambda b: self.lu.solve(np.asarray(b, dtype=complex).reshape(-1), trans="H"),
        )
        return float(spla.onenormest(self.matrix) * spla.onenormest(inv))

    def solve(self, rhs: np.ndarray, trans: str = "N", tol: float = DEFAULT_TOL) -> np.ndarray:
        """Solve for the columns of ``rhs`` (interior unknowns x components)."""
        A = self.matrix if trans == "N" else self.matrix.conj().T
        x = self.lu.solve(rhs, trans=trans)
        norm_b = np.linalg.norm(rhs)
        if norm_b == 0:
            return x
        res = np.linalg.norm(A @ x - rhs) / norm_b
        if res <= tol:
            return x
        # iterative refinement with GMRES from the direct solution
        for k in range(rhs.shape[1]):
            xk, info = spla.gmres(A, rhs[:, k], x0=x[:, k], rtol=tol * 0.1, atol=0.0, maxiter=200)
            x[:, k] = xk
        res = np.linalg.norm(A @ x - rhs) / norm_b
        if res > tol:
            raise ConvergenceError(f"linear residual {res:.3e} exceeds tolerance {tol:.1e}")
        return x


@lru_cache(maxsize=8)
def dirichlet_operator(grid: SpaceTimeGrid) -> DirichletOperator:
    return DirichletOperator(grid)


def dirichlet_solve(rhs: AlgebraField, tol: float = DEFAULT_TOL) -> AlgebraField:
    """Solve ``L_h u = rhs`` on interior nodes with ``u = 0`` on the boundary.

    Raises:
        SingularSystemError: if the interior operator is singular or its
            condition estimate exceeds ``MAX_CONDITION``.
        ConvergenceError: if the linear residual cannot be brought below ``tol``.
    """
    op = dirichlet_operator(rhs.grid)
    b = rhs.values[:, op.interior].T
    vals = np.zeros(rhs.grid.shape, dtype=complex)
    vals[:, op.interior] = op.solve(np.ascontiguousarray(b), tol=tol).T
    return AlgebraField(rhs.grid, vals)


def dirichlet_residual(u: AlgebraField, rhs: AlgebraField) -> float:
    """``||L_h u - rhs|| / ||rhs||`` over interior nodes (plain Euclidean norm)."""
    op = dirichlet_operator(u.grid)
    x = u.values[:, op.interior].T
    b = rhs.values[:, op.interior].T
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(op.matrix @ x - b) / nb) if nb else float(np.linalg.norm(x))


def _dirichlet_solve_adjoint(v: AlgebraField) -> AlgebraField:
    """Weighted adjoint of ``E L_h^-1 R``."""
    g = v.grid
    op = dirichlet_operator(g)
    w = g.cell_weights()[op.interior]
    b = (v.values[:, op.interior] * w).T
    vals = np.zeros(g.shape, dtype=complex)
    vals[:, op.interior] = op.solve(np.ascontiguousarray(b), trans="H").T / w
    return AlgebraField(g, vals)


# projectors

def projector_Q(u: AlgebraField, tol: float = DEFAULT_TOL) -> AlgebraField:
    """``D_- (Dirichlet solve) D_- u``, the projection onto ``D_-`` of zero-trace fields."""
    return apply_parabolic_dirac(dirichlet_solve(apply_parabolic_dirac(u, MINUS), tol), MINUS)


def projector_P(u: AlgebraField, tol: float = DEFAULT_TOL) -> AlgebraField:
    """``u - Q u``, the projection onto discrete null solutions of ``D_-``."""
    return u - projector_Q(u, tol)


def projector_Q_adjoint(v: AlgebraField) -> AlgebraField:
    inner = _dirichlet_solve_adjoint(parabolic_dirac_adjoint(v, MINUS))
    return parabolic_dirac_adjoint(inner, MINUS)


def orthogonality_defect(u: AlgebraField, v: AlgebraField) -> float:
    """``|<P u, Q v>| / (||P u|| ||Q v||)``."""
    pu, qv = projector_P(u), projector_Q(v)
    den = l2_norm(pu) * l2_norm(qv)
    return abs(inner_product(pu, qv)) / den if den else 0.0


# linear problem

def solution_operator(f: AlgebraField, tol: float = DEFAULT_TOL) -> AlgebraField:
    """``T Q T f``."""
    return teodorescu(projector_Q(teodorescu(f), tol))


def solution_operator_adjoint(v: AlgebraField) -> AlgebraField:
    return teodorescu_adjoint(projector_Q_adjoint(teodorescu_adjoint(v)))


@dataclass
class LinearReport:
    pde_residual: float
    boundary_norm: float
    dirichlet_discrepancy: float | None = None


def solve_linear(f: AlgebraField, margin: int = 2, cross_check: bool = False,
                 mode: str = "compact", tol: float = DEFAULT_TOL) -> tuple[AlgebraField, LinearReport]:
    """Solve ``(-Delta - i d_t) u = f`` with zero boundary values as ``u = T Q T f``.

    Args:
        f: Right-hand side.
        margin: Nodes closer than this to the boundary are left out of the
            PDE residual.
        cross_check: Also compare with :func:`dirichlet_solve` applied to ``f``.
        mode: Stencil for the PDE residual, ``"compact"`` or ``"composed"``.
        tol: Relative residual required of every sparse Dirichlet solve.

    Returns:
        The solution and a report with the relative PDE residual (on
        probe nodes), the boundary norm of ``u`` and optionally the
        relative discrepancy from the direct solve.
    """
    u = solution_operator(f, tol)
    where = f.grid.interior_mask(margin)
    nf = l2_norm(f, where)
    res = l2_norm(apply_schrodinger(u, MINUS, mode) - f, where)
    report = LinearReport(res / nf if nf else res, l2_norm(u, f.grid.boundary_mask()))
    if cross_check:
        ref = dirichlet_solve(f, tol)
        nref = l2_norm(ref)
        report.dirichlet_discrepancy = l2_norm(u - ref) / nref if nref else l2_norm(u)
    return u, report


# operator norms

@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    converged: bool


def operator_norm(apply: Callable[[AlgebraField], AlgebraField],
                  adjoint: Callable[[AlgebraField], AlgebraField],
                  grid: SpaceTimeGrid, rng: np.random.Generator,
                  tol: float = 1e-5, max_iter: int = 300) -> NormEstimate:
    """Power iteration on ``A* A`` in the :func:`field.l2_norm` metric.

    Raises:
        ConvergenceError: if the estimate has not settled after ``max_iter`` steps.
    """
    x = AlgebraField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    x = x * (1 / l2_norm(x))
    est = 0.0
    for k in range(1, max_iter + 1):
        y = apply(x)
        new = l2_norm(y)
        if new == 0.0:
            return NormEstimate(0.0, k, True)
        z = adjoint(y)
        nz = l2_norm(z)
        if nz == 0.0:
            return NormEstimate(new, k, True)
        x = z * (1 / nz)
        if abs(new - est) <= tol * new:
            return NormEstimate(new, k, True)
        est = new
    raise ConvergenceError(f"power iteration did not settle in {max_iter} steps (last {est:.6e})")


@dataclass(frozen=True)
class C1Estimate:
    c1: float
    t_norm_sq: float
    exceeds_three: bool


def estimate_C1(grid: SpaceTimeGrid, seed: int = 0, tol: float = 1e-5,
                max_iter: int = 300) -> C1Estimate:
    """Norm of ``T Q T`` and the square of the norm of ``T`` on ``grid``."""
    rng = np.random.default_rng(seed)
    c1 = operator_norm(solution_operator, solution_operator_adjoint, grid, rng, tol, max_iter)
    t = operator_norm(teodorescu, teodorescu_adjoint, grid, rng, tol, max_iter)
    return C1Estimate(c1.value, t.value ** 2, c1.value > 3.0)


# nonlinear problem

def nonlinearity_M(u: AlgebraField, f: AlgebraField) -> AlgebraField:
    """``|u|^2 u - f`` with ``|u|^2 = sum_A |u_A|^2``."""
    return u._wrap(u.norm_sq_pointwise() * u.values) - f


def fixed_point_map(u: AlgebraField, f: AlgebraField) -> AlgebraField:
    """``-T Q T M(u)``."""
    return solution_operator(nonlinearity_M(u, f)) * -1.0


def lipschitz_constant(u: AlgebraField, v: AlgebraField) -> float:
    """Measured ``||M(u) - M(v)|| / (||u - v|| (||u||^2 + ||v|| ||u - v||))``."""
    zero = AlgebraField.zeros(u.grid)
    d = l2_norm(u - v)
    den = d * (l2_norm(u) ** 2 + l2_norm(v) * d)
    return l2_norm(nonlinearity_M(u, zero) - nonlinearity_M(v, zero)) / den if den else 0.0


@dataclass(frozen=True)
class Gate:
    passes: bool
    bound: float
    W: float | None
    R: float


def smallness_gate(f: AlgebraField, m: int | None = None) -> Gate:
    """Check ``||f|| <= 1 / (36 2^(m+1))`` and compute ``W`` and ``R``."""
    m = f.grid.m if m is None else m
    scale = 2.0 ** (m + 1)
    bound = 1.0 / (36 * scale)
    nf = l2_norm(f)
    passes = nf <= bound
    W = math.sqrt(max(0.0, 1.0 / (36 * scale ** 2) - nf / scale)) if passes else None
    return Gate(passes, bound, W, 1.0 / (3 * scale))


def ball_radius(m: int, W: float) -> float:
    """``1 / (6 2^(m+1)) + W``."""
    return 1.0 / (6 * 2.0 ** (m + 1)) + W


def contraction_K(u_prev: AlgebraField, u_prev2: AlgebraField, m: int | None = None) -> float:
    """``2^(m+1) (||u_{n-1}||^2 + ||u_{n-2}|| ||u_{n-1} - u_{n-2}||)``."""
    m = u_prev.grid.m if m is None else m
    a, b = l2_norm(u_prev), l2_norm(u_prev2)
    return 2.0 ** (m + 1) * (a * a + b * l2_norm(u_prev - u_prev2))


CONVERGED, MAX_ITER, GATE_FAILED = "converged", "max-iter", "gate-failed"


@dataclass
class IterationRow:
    n: int
    norm: float
    diff: float
    ratio: float | None
    K: float | None
    growth_bound: float | None = None


@dataclass
class IterationReport:
    m: int
    C1: float | None
    bound: float
    W: float | None
    R: float
    f_norm: float
    gate_passed: bool
    rows: list[IterationRow] = dc_field(default_factory=list)
    outcome: str = MAX_ITER
    converged: bool = False
    fixed_point_residual: float | None = None
    anomalies: list[str] = dc_field(default_factory=list)

    @property
    def guarantees_void(self) -> bool:
        return not self.gate_passed

    @property
    def ratios(self) -> list[float]:
        return [r.ratio for r in self.rows if r.ratio is not None]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["guarantees_void"] = self.guarantees_void
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "norm", "diff", "ratio", "K_n"])
        fmt = lambda x: "" if x is None else f"{x:.12e}"
        for r in self.rows:
            wr.writerow([r.n, fmt(r.norm), fmt(r.diff), fmt(r.ratio), fmt(r.K)])
        return buf.getvalue()


def nonlinear_solve(f: AlgebraField, u0: AlgebraField | None = None, tol: float = 1e-8,
                    max_iter: int = 25, C1: float | None = None) -> tuple[AlgebraField, IterationReport]:
    """Fixed-point iteration ``u_n = -T Q T M(u_{n-1})``.

    Runs whether or not the smallness gate passes; a failing gate marks the
    report's guarantees void.

    Args:
        f: Right-hand side.
        u0: Starting field (zero by default).
        tol: Stop when ``||u_n - u_{n-1}|| <= tol ||u_n||`` (relative step).
        max_iter: Iteration cap.
        C1: Optional norm of ``T Q T``; when given each row also logs the
            growth bound ``2^(m+1) C1 ||u_{n-1}||^3 + C1 ||f||``.

    Returns:
        The last iterate and the :class:`IterationReport`.
    """
    g = f.grid
    m = g.m
    gate = smallness_gate(f)
    report = IterationReport(m, C1, gate.bound, gate.W, gate.R, l2_norm(f), gate.passes)
    radius = ball_radius(m, gate.W) if gate.passes else None
    u_prev2 = None
    u_prev = AlgebraField.zeros(g) if u0 is None else u0
    u = u_prev
    for n in range(1, max_iter + 1):
        u = fixed_point_map(u_prev, f)
        norm = l2_norm(u)
        diff = l2_norm(u - u_prev)
        ratio = K = None
        if u_prev2 is not None:
            prev_diff = report.rows[-1].diff
            ratio = diff / prev_diff if prev_diff > 0 else 0.0
            K = contraction_K(u_prev, u_prev2, m)
        growth = None
        if C1 is not None:
            growth = 2.0 ** (m + 1) * C1 * l2_norm(u_prev) ** 3 + C1 * report.f_norm
        report.rows.append(IterationRow(n, norm, diff, ratio, K, growth))
        if not np.isfinite(norm):
            report.anomalies.append(f"non-finite iterate at n={n}")
            break
        if gate.passes:
            if ratio is not None and ratio >= 0.5:
                report.anomalies.append(f"ratio {ratio:.3e} >= 1/2 at n={n} with gate passed")
            if norm > 10 * radius:
                report.anomalies.append(f"divergence: ||u_{n}|| = {norm:.3e} exceeds 10x ball radius")
                break
        u_prev2, u_prev = u_prev, u
        if diff <= tol * norm or diff == 0.0:
            report.converged = True
            break
    report.fixed_point_residual = l2_norm(u - fixed_point_map(u, f))
    if not gate.passes:
        report.outcome = GATE_FAILED
    else:
        report.outcome = CONVERGED if report.converged else MAX_ITER
    return u, report
