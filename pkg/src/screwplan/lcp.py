"""Per-step contact LCP: assembly, Lemke pivoting solver, diagnostics.

A step couples compensating speeds v_c (one per virtual contact) to the
linearized clearances. Eliminating the joint update leaves the standard
complementarity form 0 <= z  ⊥  q + M z >= 0 with

    q_i  = psi_i + h * N_i^T J_ci B dgamma - eps
    M_ij = h^2  * N_i^T J_ci T_j,   T_j = J_cj^+ N_j  (default)

where N_i stacks the contact normal over three zero angular components: the
compensating velocity is purely linear. Passing explicit compensating
directions T_j supports the null-space projected update.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import ContactInfo
from .kinematics import pseudoinverse

logger = logging.getLogger("screwplan.lcp")

SOLVED = "solved"
RAY_TERMINATION = "ray-termination"
ITERATION_LIMIT = "iteration-limit"

_PIVOT_TOL = 1e-11
_LEX_TOL = 1e-12


@dataclass
class LcpProblem:
    """The (M, q) pair of one step plus the contacts its rows represent."""

    m: np.ndarray
    q: np.ndarray
    contacts: Tuple[ContactInfo, ...] = ()

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        n = self.q.shape[0]
        if self.m.shape != (n, n):
            raise ValueError(f"M must be {n}x{n} to match q, got {self.m.shape}")
        if self.contacts and len(self.contacts) != n:
            raise ValueError("contact metadata must align with the LCP rows")

    @property
    def size(self) -> int:
        return self.q.shape[0]


@dataclass
class LcpSolution:
    """Solver output; on ``solved`` the complementarity invariants hold."""

    z: np.ndarray
    w: np.ndarray
    status: str
    pivots: int = 0


@dataclass
class SolutionReport:
    min_z: float
    min_w: float
    max_complementarity: float
    passed: bool
    violations: List[str] = field(default_factory=list)


@dataclass
class UniquenessReport:
    unique: bool
    reason: str


def contact_normal_6(contact: ContactInfo) -> np.ndarray:
    """The padded 6-vector [n, 0, 0, 0]: compensation acts on linear velocity only."""
    return np.concatenate((contact.normal, np.zeros(3)))


def assemble_step_lcp(
    b: np.ndarray,
    dgamma: np.ndarray,
    contacts: Sequence[ContactInfo],
    contact_jacobians: Sequence[np.ndarray],
    h: float,
    eps: float,
    compensating: Optional[Sequence[np.ndarray]] = None,
    lam: float = 1e-6,
) -> LcpProblem:
    """Build the step LCP from the resolved-rate update and the contact set.

    ``compensating`` overrides the joint-space directions the compensating
    speeds act through (default: damped pseudoinverse of each contact
    Jacobian applied to its padded normal).
    """
    if h <= 0.0:
        raise ValueError("step length h must be positive")
    if not contacts:
        raise ValueError("assemble_step_lcp expects at least one contact")
    b = np.asarray(b, dtype=float)
    dgamma = np.asarray(dgamma, dtype=float).reshape(-1)
    if b.shape[1] != dgamma.shape[0]:
        raise ValueError(f"B is {b.shape} but dgamma has {dgamma.shape[0]} entries")
    n_c = len(contacts)
    if len(contact_jacobians) != n_c:
        raise ValueError("one contact Jacobian per contact required")
    n = b.shape[0]
    rows = []
    for contact, jac in zip(contacts, contact_jacobians):
        jac = np.asarray(jac, dtype=float)
        if jac.shape != (6, n):
            raise ValueError(f"contact Jacobian must be 6x{n}, got {jac.shape}")
        rows.append(contact_normal_6(contact) @ jac)
    if compensating is None:
        compensating = [
            pseudoinverse(jac, lam) @ contact_normal_6(contact)
            for contact, jac in zip(contacts, contact_jacobians)
        ]
    else:
        compensating = [np.asarray(t, dtype=float).reshape(-1) for t in compensating]
        if len(compensating) != n_c or any(t.shape != (n,) for t in compensating):
            raise ValueError("compensating directions must be n-vectors, one per contact")
    dtheta = b @ dgamma
    q = np.array([c.psi + h * float(row @ dtheta) - eps for c, row in zip(contacts, rows)])
    m = np.empty((n_c, n_c))
    for i, row in enumerate(rows):
        for j, t_dir in enumerate(compensating):
            m[i, j] = h * h * float(row @ t_dir)
    return LcpProblem(m, q, tuple(contacts))


def _lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    for x, y in zip(a, b):
        if x < y - _LEX_TOL:
            return True
        if x > y + _LEX_TOL:
            return False
    return False


def solve_lcp(problem: LcpProblem, max_pivots: Optional[int] = None) -> LcpSolution:
    """Lemke's complementary pivoting with lexicographic degeneracy handling.

    The covering vector is all ones. A non-negative q short-circuits to
    z = 0. Ray termination and pivot-limit overruns are reported in the
    status, never raised.
    """
    m = problem.m
    q = problem.q
    n = problem.size
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(q))):
        raise ValueError("LCP data must be finite")
    if max_pivots is None:
        max_pivots = 50 * max(n, 1)
    if np.all(q >= 0.0):
        return LcpSolution(np.zeros(n), q.copy(), SOLVED, pivots=0)

    # Tableau columns: w block | z block | z0 | rhs. Initial basis: w = q.
    z0 = 2 * n
    rhs = 2 * n + 1
    tableau = np.zeros((n, 2 * n + 2))
    tableau[:, :n] = np.eye(n)
    tableau[:, n:2 * n] = -m
    tableau[:, z0] = -1.0
    tableau[:, rhs] = q
    basis = list(range(n))
    # Lexicographic ratio vectors use the rhs first, then the w block (B^-1).
    lex_cols = [rhs] + list(range(n))

    def pivot(row: int, col: int) -> None:
        tableau[row] /= tableau[row, col]
        for i in range(n):
            if i != row and abs(tableau[i, col]) > 0.0:
                tableau[i] -= tableau[i, col] * tableau[row]

    # Drive z0 in at the most negative rhs (lexicographic tie-break).
    start = 0
    best = None
    for i in range(n):
        vec = np.concatenate(([tableau[i, rhs]], tableau[i, :n]))
        if best is None or _lex_less(vec, best):
            best = vec
            start = i
    pivot(start, z0)
    leaving = basis[start]
    basis[start] = z0
    driving = leaving + n  # complement of the w that just left

    pivots = 1
    status = ITERATION_LIMIT
    while pivots <= max_pivots:
        col = tableau[:, driving]
        candidates = [i for i in range(n) if col[i] > _PIVOT_TOL]
        if not candidates:
            status = RAY_TERMINATION
            break
        best_row = candidates[0]
        best_vec = np.concatenate(([tableau[best_row, rhs]], tableau[best_row, :n])) / col[best_row]
        for i in candidates[1:]:
            vec = np.concatenate(([tableau[i, rhs]], tableau[i, :n])) / col[i]
            if _lex_less(vec, best_vec):
                best_row, best_vec = i, vec
        pivot(best_row, driving)
        leaving = basis[best_row]
        basis[best_row] = driving
        pivots += 1
        if leaving == z0:
            status = SOLVED
            break
        driving = leaving + n if leaving < n else leaving - n

    z = np.zeros(n)
    if status == SOLVED:
        for i, var in enumerate(basis):
            if n <= var < 2 * n:
                z[var - n] = tableau[i, rhs]
        z = np.where(np.abs(z) < 1e-15, 0.0, z)
    w = m @ z + q
    solution = LcpSolution(z, w, status, pivots=pivots)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(
            "lcp n=%d status=%s pivots=%d\nM=%s\nq=%s\nz=%s\nw=%s",
            n, status, pivots,
            np.array2string(m, precision=6),
            np.array2string(q, precision=6),
            np.array2string(z, precision=6),
            np.array2string(w, precision=6),
        )
    return solution


def verify_solution(problem: LcpProblem, solution: LcpSolution) -> SolutionReport:
    """Residual audit: non-negativity of z and w, componentwise z_i w_i."""
    z = np.asarray(solution.z, dtype=float)
    w = problem.m @ z + problem.q
    comp = np.abs(z * w)
    min_z = float(z.min()) if z.size else 0.0
    min_w = float(w.min()) if w.size else 0.0
    max_comp = float(comp.max()) if comp.size else 0.0
    violations = []
    for i in range(problem.size):
        if z[i] < -1e-9:
            violations.append(f"z[{i}] = {z[i]:.3e} < 0")
        if w[i] < -1e-9:
            violations.append(f"w[{i}] = {w[i]:.3e} < 0")
        if comp[i] > 1e-8:
            violations.append(f"z[{i}]*w[{i}] = {comp[i]:.3e} > 1e-8")
    return SolutionReport(min_z, min_w, max_comp, passed=not violations, violations=violations)


def uniqueness_diagnostic(problem: LcpProblem) -> UniquenessReport:
    """Cheap sufficient conditions for a unique solution of the step LCP.

    One contact is always positive definite; two contacts are whenever the
    normals are not parallel; otherwise fall back to the symmetric-part
    eigenvalues.
    """
    n = problem.size
    if n == 1:
        return UniquenessReport(True, "single contact: M = [[h^2]] is positive definite")
    if n == 2 and len(problem.contacts) == 2:
        n1, n2 = problem.contacts[0].normal, problem.contacts[1].normal
        cos = abs(float(np.dot(n1, n2)))
        if cos < 1.0 - 1e-9:
            return UniquenessReport(True, f"two contacts with non-parallel normals (|cos| = {cos:.6f})")
    sym = 0.5 * (problem.m + problem.m.T)
    eigs = np.linalg.eigvalsh(sym)
    if np.all(eigs > 0.0):
        return UniquenessReport(True, f"symmetric part positive definite (min eig {eigs[0]:.3e})")
    return UniquenessReport(False, f"symmetric part has eigenvalue {eigs[0]:.3e} <= 0")
