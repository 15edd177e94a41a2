"""Convex quadratic programs: closed-form equality-constrained solves,
first-order perturbation formulas, and a dual active-set solver for
inequality constraints.

The perturbation formulas report deltas per unit of the perturbation size
``epsilon``; callers scale by the epsilon they intend to apply.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatch,
    HasConstraints,
    Infeasible,
    IterationLimit,
    NotAtZero,
    NotPositiveDefinite,
    RankDeficientConstraints,
)
from .validation import (
    as_matrix,
    as_vector,
    check_full_row_rank,
    cho_solve,
    cholesky_pd,
    symmetrized,
)

KKT_REL_TOL = 1e-9
AT_ZERO_TOL = 1e-9


class QuadraticProgram:
    """minimize 0.5 z'Hz + e'z  subject to  A z = b.

    H must be symmetric positive definite; A (possibly empty) must have full
    row rank. The Cholesky factor of H is computed once and reused by every
    solve and perturbation formula.
    """

    def __init__(self, H, e, A=None, b=None):
        self.H = symmetrized(H)
        self.e = as_vector(e, name="e")
        p = self.e.shape[0]
        if self.H.shape != (p, p):
            raise DimensionMismatch(f"H must be {p}x{p}, got {self.H.shape}")
        if A is None:
            A = np.zeros((0, p))
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A.reshape(1, -1)
        self.A = as_matrix(A, name="A")
        if self.A.shape[1] != p:
            raise DimensionMismatch(f"A must have {p} columns, got {self.A.shape}")
        s = self.A.shape[0]
        if b is None:
            b = np.zeros(s)
        self.b = as_vector(np.atleast_1d(np.asarray(b, dtype=float)), length=s, name="b")
        check_full_row_rank(self.A)
        self._chol = cholesky_pd(self.H)

    @property
    def num_variables(self):
        return self.e.shape[0]

    @property
    def num_constraints(self):
        return self.A.shape[0]

    def solve_h(self, rhs):
        """H^{-1} rhs using the cached Cholesky factor."""
        return cho_solve(self._chol, rhs)

    def objective(self, z):
        z = as_vector(z, length=self.num_variables, name="z")
        return float(0.5 * z @ self.H @ z + self.e @ z)


@dataclass(frozen=True)
class QpSolution:
    """Optimizer, equality multiplier, and optimal value of a QuadraticProgram."""

    z_star: np.ndarray
    kappa_star: np.ndarray
    v_star: float

    def kkt_residuals(self, qp: QuadraticProgram):
        """(stationarity, feasibility) infinity norms."""
        stat = qp.H @ self.z_star + qp.e + qp.A.T @ self.kappa_star
        feas = qp.A @ self.z_star - qp.b
        return (
            float(np.abs(stat).max(initial=0.0)),
            float(np.abs(feas).max(initial=0.0)),
        )

    def verify(self, qp: QuadraticProgram, rel_tol=KKT_REL_TOL):
        stat, feas = self.kkt_residuals(qp)
        if stat > rel_tol * (1.0 + np.abs(qp.e).max(initial=0.0)):
            raise DimensionMismatch(f"KKT stationarity residual {stat:.3e} too large")
        if feas > rel_tol * (1.0 + np.abs(qp.b).max(initial=0.0)):
            raise DimensionMismatch(f"primal feasibility residual {feas:.3e} too large")
        return self


@dataclass(frozen=True)
class QpPerturbation:
    """Perturbation (H~, e~, b~) applied with magnitude epsilon.

    The perturbed program is:
        minimize 0.5 z'(H + eps H~)z + (e + eps e~)'z  s.t.  A z = b + eps b~.
    """

    H_tilde: np.ndarray
    e_tilde: np.ndarray
    b_tilde: np.ndarray
    epsilon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "H_tilde", symmetrized(self.H_tilde, name="H_tilde"))
        object.__setattr__(self, "e_tilde", as_vector(self.e_tilde, name="e_tilde"))
        object.__setattr__(
            self, "b_tilde", as_vector(np.atleast_1d(np.asarray(self.b_tilde, dtype=float)), name="b_tilde")
        )
        if self.epsilon < 0:
            raise DimensionMismatch(f"epsilon must be >= 0, got {self.epsilon}")

    @classmethod
    def zero(cls, p, s, epsilon=0.0):
        return cls(np.zeros((p, p)), np.zeros(p), np.zeros(s), epsilon)

    def validate_against(self, qp: QuadraticProgram):
        p, s = qp.num_variables, qp.num_constraints
        if self.H_tilde.shape != (p, p):
            raise DimensionMismatch(f"H_tilde must be {p}x{p}, got {self.H_tilde.shape}")
        if self.e_tilde.shape != (p,):
            raise DimensionMismatch(f"e_tilde must have length {p}")
        if self.b_tilde.shape != (s,):
            raise DimensionMismatch(f"b_tilde must have length {s}")
        # The perturbed Hessian must stay positive definite for the expansion
        # to be meaningful.
        cholesky_pd(qp.H + self.epsilon * self.H_tilde, name="H + eps*H_tilde")

    def gradient_at(self, z):
        return self.H_tilde @ z + self.e_tilde

    def objective_at(self, z):
        return float(0.5 * z @ self.H_tilde @ z + self.e_tilde @ z)


@dataclass(frozen=True)
class FirstOrderQpDelta:
    """First-order response of (z*, kappa*, v*) per unit epsilon.

    M, M_tilde, m_tilde are the intermediate quantities of the multiplier
    expansion, retained for diagnostics.
    """

    d: np.ndarray
    k_tilde: np.ndarray
    value_delta: float
    M: np.ndarray = field(repr=False, default=None)
    M_tilde: np.ndarray = field(repr=False, default=None)
    m_tilde: np.ndarray = field(repr=False, default=None)


def _constraint_gram(qp: QuadraticProgram, Hi_At):
    """Cholesky factor of A H^-1 A^T, raising RankDeficientConstraints if singular."""
    S = qp.A @ Hi_At
    S = 0.5 * (S + S.T)
    try:
        return cholesky_pd(S, name="A H^-1 A^T")
    except NotPositiveDefinite as exc:
        raise RankDeficientConstraints(str(exc)) from exc


def solve_equality_qp(qp: QuadraticProgram) -> QpSolution:
    """Closed-form KKT solution of the equality-constrained QP.

    kappa* = -(A H^-1 A^T)^-1 (A H^-1 e + b)
    z*     = -H^-1 (e + A^T kappa*)
    v*     = 0.5 (kappa*' (A H^-1 A^T) kappa* - e' H^-1 e)
    """
    s = qp.num_constraints
    Hi_e = qp.solve_h(qp.e)
    if s == 0:
        z = -Hi_e
        kappa = np.zeros(0)
        v = float(-0.5 * qp.e @ Hi_e)
        return QpSolution(z, kappa, v).verify(qp)
    Hi_At = qp.solve_h(qp.A.T)
    Ls = _constraint_gram(qp, Hi_At)
    kappa = -cho_solve(Ls, qp.A @ Hi_e + qp.b)
    z = -qp.solve_h(qp.e + qp.A.T @ kappa)
    S = qp.A @ Hi_At
    v = float(0.5 * (kappa @ S @ kappa - qp.e @ Hi_e))
    return QpSolution(z, kappa, v).verify(qp)


def perturbed_inverse_first_order(H, H_tilde, epsilon):
    """First-order expansion of (H + eps H~)^-1: H^-1 - eps H^-1 H~ H^-1."""
    H = symmetrized(H)
    H_tilde = as_matrix(H_tilde, shape=H.shape, name="H_tilde")
    L = cholesky_pd(H)
    Hi = cho_solve(L, np.eye(H.shape[0]))
    return Hi - epsilon * Hi @ H_tilde @ Hi


def perturb_qp(qp: QuadraticProgram, sol: QpSolution, pert: QpPerturbation) -> FirstOrderQpDelta:
    """First-order deltas of the optimizer, multiplier, and value per unit epsilon.

    Uses the multiplier expansion
        M  = (A H^-1 A^T)^-1
        M~ = A H^-1 H~ H^-1 A^T
        m~ = A H^-1 e~ + b~ - A H^-1 H~ H^-1 e
        k~ = M (M~ kappa* - m~)
    and d = -H^-1 (A^T k~ + grad_gtilde(z*)); the value delta is
    gtilde(z*) + grad_g(z*)' d.
    """
    pert.validate_against(qp)
    s = qp.num_constraints
    grad_gt = pert.gradient_at(sol.z_star)
    if s == 0:
        d = -qp.solve_h(grad_gt)
        k_tilde = np.zeros(0)
        M = np.zeros((0, 0))
        M_tilde = np.zeros((0, 0))
        m_tilde = np.zeros(0)
    else:
        Hi_At = qp.solve_h(qp.A.T)
        Hi_e = qp.solve_h(qp.e)
        Hi_et = qp.solve_h(pert.e_tilde)
        Ls = _constraint_gram(qp, Hi_At)
        M = cho_solve(Ls, np.eye(s))
        M_tilde = Hi_At.T @ pert.H_tilde @ Hi_At
        m_tilde = qp.A @ Hi_et + pert.b_tilde - Hi_At.T @ (pert.H_tilde @ Hi_e)
        k_tilde = M @ (M_tilde @ sol.kappa_star - m_tilde)
        d = -qp.solve_h(qp.A.T @ k_tilde + grad_gt)
    grad_g = qp.H @ sol.z_star + qp.e
    value_delta = pert.objective_at(sol.z_star) + float(grad_g @ d)
    return FirstOrderQpDelta(d, k_tilde, value_delta, M, M_tilde, m_tilde)


def perturb_at_zero(qp: QuadraticProgram, sol: QpSolution, pert: QpPerturbation) -> FirstOrderQpDelta:
    """Specialized first-order delta for optima at the origin.

    With z* = 0 the delta depends on the perturbation only through (e~, b~):
        B = H^-1 [ A^T M A H^-1 - I  |  A^T M ],   w = [e~; b~],   d = B w,
        k~ = -M (A H^-1 e~ + b~).
    """
    if np.abs(sol.z_star).max(initial=0.0) > AT_ZERO_TOL:
        raise NotAtZero(
            f"perturb_at_zero requires |z*|_inf <= {AT_ZERO_TOL:.0e}, got {np.abs(sol.z_star).max():.3e}"
        )
    pert.validate_against(qp)
    s = qp.num_constraints
    Hi_et = qp.solve_h(pert.e_tilde)
    if s == 0:
        d = -Hi_et
        k_tilde = np.zeros(0)
        M = np.zeros((0, 0))
        M_tilde = np.zeros((0, 0))
        m_tilde = np.zeros(0)
    else:
        Hi_At = qp.solve_h(qp.A.T)
        Ls = _constraint_gram(qp, Hi_At)
        M = cho_solve(Ls, np.eye(s))
        k_tilde = -M @ (qp.A @ Hi_et + pert.b_tilde)
        d = -qp.solve_h(qp.A.T @ k_tilde + pert.e_tilde)
        Hi_e = qp.solve_h(qp.e)
        M_tilde = Hi_At.T @ pert.H_tilde @ Hi_At
        m_tilde = qp.A @ Hi_et + pert.b_tilde - Hi_At.T @ (pert.H_tilde @ Hi_e)
    # gtilde(0) = 0, so only the grad_g term of the value formula survives.
    value_delta = float((qp.H @ sol.z_star + qp.e) @ d)
    return FirstOrderQpDelta(d, k_tilde, value_delta, M, M_tilde, m_tilde)


def perturb_unconstrained(qp: QuadraticProgram, sol: QpSolution, pert: QpPerturbation) -> FirstOrderQpDelta:
    """First-order delta when the program has no equality constraints.

    d = -H^-1 grad_gtilde(z*); the value delta is
    gtilde(z*) - grad_g(z*)' H^-1 grad_gtilde(z*), and for z* = 0 it reduces
    to -e~' H^-1 e~ (the quadratic bookkeeping kept by the closed form).
    """
    if qp.num_constraints > 0:
        raise HasConstraints("perturb_unconstrained requires a program with no equality constraints")
    pert.validate_against(qp)
    grad_gt = pert.gradient_at(sol.z_star)
    d = -qp.solve_h(grad_gt)
    if np.abs(sol.z_star).max(initial=0.0) <= AT_ZERO_TOL:
        value_delta = -float(pert.e_tilde @ qp.solve_h(pert.e_tilde))
        d = -qp.solve_h(pert.e_tilde)
    else:
        grad_g = qp.H @ sol.z_star + qp.e
        value_delta = pert.objective_at(sol.z_star) - float(grad_g @ qp.solve_h(grad_gt))
    return FirstOrderQpDelta(d, np.zeros(0), value_delta, np.zeros((0, 0)), np.zeros((0, 0)), np.zeros(0))


@dataclass(frozen=True)
class InequalityQpSolution:
    d: np.ndarray
    active_set: np.ndarray
    multipliers: np.ndarray
    iterations: int


def solve_inequality_qp(H, e, A_hat, b_hat, max_iter=None) -> InequalityQpSolution:
    """minimize 0.5 d'Hd + e'd  subject to  A_hat d <= b_hat.

    Dual active-set iteration: start at the unconstrained minimizer with an
    empty working set; repeatedly add the most violated row, taking dual
    blocking steps (ratio u_j / r_j, ties broken on the lowest row index)
    that drop the constraint whose multiplier would turn negative first.
    Strict convexity of H guarantees termination.
    """
    H = symmetrized(H)
    e = as_vector(e, length=H.shape[0], name="e")
    p = e.shape[0]
    A_hat = np.asarray(A_hat, dtype=float)
    if A_hat.size == 0:
        A_hat = np.zeros((0, p))
    if A_hat.ndim == 1:
        A_hat = A_hat.reshape(1, -1)
    A_hat = as_matrix(A_hat, name="A_hat")
    if A_hat.shape[1] != p:
        raise DimensionMismatch(f"A_hat must have {p} columns, got {A_hat.shape}")
    r = A_hat.shape[0]
    b_hat = as_vector(np.atleast_1d(np.asarray(b_hat, dtype=float)), length=r, name="b_hat")
    if not np.all(np.isfinite(A_hat)) or not np.all(np.isfinite(b_hat)):
        raise DimensionMismatch("constraint rows must be finite")
    L = cholesky_pd(H)
    if max_iter is None:
        max_iter = 100 * max(r, 1)

    x = -cho_solve(L, e)
    if r == 0:
        return InequalityQpSolution(x, np.zeros(0, dtype=int), np.zeros(0), 0)

    # Work in the ">= " convention: n_i' x >= beta_i with n_i = -A_hat_i.
    normals = -A_hat
    beta = -b_hat
    scale = 1.0 + float(np.abs(b_hat).max(initial=0.0))
    feas_tol = 1e-10 * scale

    working: list[int] = []
    u = np.zeros(0)
    iterations = 0
    while True:
        slack = normals @ x - beta
        violated = [i for i in np.where(slack < -feas_tol)[0] if i not in working]
        if not violated:
            break
        # most violated row, ties broken on the lowest row index
        p_row = int(min(violated, key=lambda i: (slack[i], i)))
        n_plus = normals[p_row]
        u_plus = 0.0  # running multiplier of the entering row
        while True:
            iterations += 1
            if iterations > max_iter:
                raise IterationLimit(f"active-set QP exceeded {max_iter} iterations")
            if working:
                N = normals[working].T  # p x k
                Gi_N = cho_solve(L, N)
                S = N.T @ Gi_N
                Gi_np = cho_solve(L, n_plus)
                try:
                    rvec = np.linalg.solve(S, N.T @ Gi_np)
                except np.linalg.LinAlgError as exc:
                    raise RankDeficientConstraints(
                        "working-set normals became linearly dependent"
                    ) from exc
                z = Gi_np - Gi_N @ rvec
            else:
                rvec = np.zeros(0)
                z = cho_solve(L, n_plus)
            # dual blocking step ratio: first working multiplier driven to
            # zero; ties broken on the lowest row index
            t1 = np.inf
            block = -1
            for j, row in enumerate(working):
                if rvec[j] > 1e-14:
                    ratio = u[j] / rvec[j]
                    if ratio < t1 - 1e-15 or (
                        abs(ratio - t1) <= 1e-15 and (block < 0 or row < working[block])
                    ):
                        t1 = ratio
                        block = j
            # full step length that makes the entering row tight
            denom = float(n_plus @ z)
            viol = float(n_plus @ x - beta[p_row])
            z_zero = denom <= 1e-14
            t2 = np.inf if z_zero else -viol / denom
            t = min(t1, t2)
            if not np.isfinite(t):
                raise Infeasible("inequality constraints are inconsistent")
            if z_zero:
                # dual-only step: shift multipliers, drop the blocker, retry
                u = np.delete(u - t * rvec, block)
                u_plus += t
                working.pop(block)
                continue
            x = x + t * z
            if working:
                u = u - t * rvec
            u_plus += t
            if t2 <= t1:
                u = np.append(u, u_plus)
                working.append(p_row)
                break
            # partial primal step: drop the blocking row and keep going
            working.pop(block)
            u = np.delete(u, block)

    active = np.array(sorted(working), dtype=int)
    multipliers = np.zeros(r)
    # Clean final solve on the working set for a crisp KKT point.
    if active.size:
        Aw = A_hat[active]
        try:
            check_full_row_rank(Aw, name="active rows")
        except RankDeficientConstraints:
            raise
        qp = QuadraticProgram(H, e, Aw, b_hat[active])
        sol = solve_equality_qp(qp)
        x = sol.z_star
        lam = sol.kappa_star  # for A d = b with sign matching <= multipliers
        multipliers[active] = np.maximum(lam, 0.0)
        if np.any(lam < -1e-8 * scale):
            # a dropped-sign multiplier signals the working set is stale
            raise IterationLimit("active-set terminated with a negative multiplier")
    # final verification
    resid = H @ x + e + A_hat.T @ multipliers
    feas = A_hat @ x - b_hat
    if np.abs(resid).max(initial=0.0) > 1e-8 * (1.0 + np.abs(e).max(initial=0.0)):
        raise IterationLimit(f"KKT stationarity residual {np.abs(resid).max():.3e} exceeds 1e-8")
    if feas.max(initial=0.0) > 1e-8 * scale:
        raise Infeasible(f"solution violates constraints by {feas.max():.3e}")
    return InequalityQpSolution(x, active, multipliers, iterations)
