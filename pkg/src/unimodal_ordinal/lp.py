"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Problems are taken in the form::

    min  c @ x
    s.t. A_eq @ x == b_eq
         A_ub @ x <= b_ub
         x >= 0

Inequalities get slack columns. Rows that cannot start with their slack in
the basis start with an implicit artificial variable, and phase 1 minimises
the sum of artificials. Artificial columns are never stored: once an
artificial leaves the basis it can not come back, so its column is dead
weight.

The pivoting kernel is compiled with numba; :func:`solve_batch` runs many
programs that share ``A`` and ``c`` but differ in the right-hand side, which
is what the transport projections inside a training step look like.
"""

import enum
from dataclasses import dataclass, field

import numba
import numpy as np

PIVOT_FLOOR = 1e-11
RATIO_TIE_TOL = 1e-12

_OPTIMAL, _INFEASIBLE, _UNBOUNDED, _ITER_LIMIT = 0, 1, 2, 3


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


_STATUS = {_OPTIMAL: LpStatus.OPTIMAL, _INFEASIBLE: LpStatus.INFEASIBLE,
           _UNBOUNDED: LpStatus.UNBOUNDED}


class IterationLimitError(RuntimeError):
    """Raised when the simplex exceeds its pivot budget (numerical trouble)."""


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64).ravel()
        n = c.size
        object.__setattr__(self, "c", c)
        for a_name, b_name in (("A_eq", "b_eq"), ("A_ub", "b_ub")):
            A, b = getattr(self, a_name), getattr(self, b_name)
            if A is None or b is None:
                if (A is None) != (b is None):
                    raise ValueError(f"{a_name} and {b_name} must be given together")
                A, b = np.zeros((0, n)), np.zeros(0)
            A = np.asarray(A, dtype=np.float64)
            A = A.reshape(0, n) if A.size == 0 else np.atleast_2d(A)
            b = np.asarray(b, dtype=np.float64).ravel()
            if A.shape[1] != n:
                raise ValueError(f"{a_name} has {A.shape[1]} columns, expected {n}")
            if A.shape[0] != b.size:
                raise ValueError(f"{a_name} has {A.shape[0]} rows but {b_name} has {b.size}")
            if not (np.all(np.isfinite(b)) and np.all(np.isfinite(A))):
                raise ValueError(f"{a_name}/{b_name} must be finite")
            object.__setattr__(self, a_name, A)
            object.__setattr__(self, b_name, b)
        if not np.all(np.isfinite(c)):
            raise ValueError("objective must be finite")

    @property
    def n(self):
        return self.c.size

    @property
    def m_eq(self):
        return self.A_eq.shape[0]

    @property
    def m_ub(self):
        return self.A_ub.shape[0]

    def standard_form(self):
        """Return ``(A, b, c)`` of the slack-augmented equality system."""
        A = _stack_standard(self.A_eq, self.A_ub)
        b = np.concatenate([self.b_eq, self.b_ub])
        c = np.concatenate([self.c, np.zeros(self.m_ub)])
        return A, b, c


@dataclass
class LpSolution:
    x: np.ndarray
    objective_value: float
    status: LpStatus
    # standard-form column per constraint row at termination; -1 marks a
    # redundant row whose artificial stayed basic at zero
    basis: np.ndarray = field(default=None, repr=False)
    iterations: int = 0


def _stack_standard(A_eq, A_ub):
    m_eq, n = A_eq.shape
    m_ub = A_ub.shape[0]
    A = np.zeros((m_eq + m_ub, n + m_ub))
    A[:m_eq, :n] = A_eq
    A[m_eq:, :n] = A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    return A


@numba.njit(cache=True)
def _pivot(T, basis, r, j):
    m1, W = T.shape
    piv = T[r, j]
    for col in range(W):
        T[r, col] /= piv
    for row in range(m1):
        if row == r:
            continue
        f = T[row, j]
        if f != 0.0:
            for col in range(W):
                T[row, col] -= f * T[r, col]
            T[row, j] = 0.0
    T[r, j] = 1.0
    basis[r] = j


@numba.njit(cache=True)
def _iterate(T, basis, opt_tol, max_iters, iters):
    """Bland iterations on tableau ``T`` (last row = reduced costs)."""
    m = T.shape[0] - 1
    N = T.shape[1] - 1
    while True:
        enter = -1
        for j in range(N):
            if T[m, j] < -opt_tol:
                enter = j
                break
        if enter < 0:
            return _OPTIMAL, iters
        if iters >= max_iters:
            return _ITER_LIMIT, iters
        best = np.inf
        for r in range(m):
            a = T[r, enter]
            if a > PIVOT_FLOOR:
                ratio = max(T[r, N], 0.0) / a
                if ratio < best:
                    best = ratio
        if best == np.inf:
            return _UNBOUNDED, iters
        # among rows tied at the minimum ratio, the lowest basic index leaves;
        # artificials (marked -1) leave first
        tie = best + RATIO_TIE_TOL * max(1.0, best)
        leave = -1
        leave_var = 1 << 62
        for r in range(m):
            a = T[r, enter]
            if a > PIVOT_FLOOR:
                ratio = max(T[r, N], 0.0) / a
                if ratio <= tie and basis[r] < leave_var:
                    leave_var = basis[r]
                    leave = r
        _pivot(T, basis, leave, enter)
        iters += 1


@numba.njit(cache=True)
def _solve_one(A, b, c, feas_tol, opt_tol, max_iters, n_struct, x_out, basis_out):
    m, N = A.shape
    T = np.zeros((m + 1, N + 1))
    basis = np.full(m, -1, dtype=np.int64)
    n_slack = N - n_struct
    m_eq = m - n_slack
    for r in range(m):
        s = -1.0 if b[r] < 0 else 1.0
        for j in range(N):
            T[r, j] = s * A[r, j]
        T[r, N] = s * b[r]
        if r >= m_eq and s > 0:
            basis[r] = n_struct + (r - m_eq)
    # phase 1: minimise the sum of artificials (rows whose basis is -1)
    scale = 1.0
    for r in range(m):
        scale = max(scale, abs(b[r]))
    for r in range(m):
        if basis[r] < 0:
            for j in range(N + 1):
                T[m, j] -= T[r, j]
    iters = 0
    status, iters = _iterate(T, basis, opt_tol, max_iters, iters)
    if status == _ITER_LIMIT:
        return status, iters, 0.0
    infeas = 0.0
    for r in range(m):
        if basis[r] < 0:
            infeas += T[r, N]
    if infeas > feas_tol * scale:
        basis_out[:] = basis
        return _INFEASIBLE, iters, 0.0
    # drive zero-level artificials out where the row has a usable entry;
    # rows without one are redundant and stay inert
    for r in range(m):
        if basis[r] < 0:
            for j in range(N):
                if abs(T[r, j]) > PIVOT_FLOOR:
                    _pivot(T, basis, r, j)
                    iters += 1
                    break
    # phase 2 reduced costs
    for j in range(N):
        T[m, j] = c[j]
    T[m, N] = 0.0
    for r in range(m):
        if basis[r] >= 0:
            cb = c[basis[r]]
            if cb != 0.0:
                for j in range(N + 1):
                    T[m, j] -= cb * T[r, j]
    status, iters = _iterate(T, basis, opt_tol, max_iters, iters)
    basis_out[:] = basis
    if status != _OPTIMAL:
        return status, iters, 0.0
    for r in range(m):
        if basis[r] >= 0 and basis[r] < n_struct:
            x_out[basis[r]] = T[r, N]
    return _OPTIMAL, iters, -T[m, N]


@numba.njit(cache=True)
def _solve_many(A, B, c, feas_tol, opt_tol, max_iters, n_struct):
    batch = B.shape[0]
    m = A.shape[0]
    X = np.zeros((batch, n_struct))
    status = np.zeros(batch, dtype=np.int64)
    iters = np.zeros(batch, dtype=np.int64)
    bases = np.full((batch, m), -1, dtype=np.int64)
    for i in range(batch):
        st, it, _ = _solve_one(A, B[i], c, feas_tol, opt_tol, max_iters, n_struct,
                               X[i], bases[i])
        status[i] = st
        iters[i] = it
        if st == _ITER_LIMIT:
            break
    return X, status, iters, bases


class BatchProgram:
    """Standard form of ``c``, ``A_eq``, ``A_ub`` built once and reused for
    many right-hand sides."""

    def __init__(self, c, A_eq=None, A_ub=None):
        c = np.asarray(c, dtype=np.float64).ravel()
        n = c.size
        A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=np.float64)
        A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=np.float64)
        self.c = c
        self.A_eq = A_eq.reshape(-1, n)
        self.A_ub = A_ub.reshape(-1, n)
        self.A = _stack_standard(self.A_eq, self.A_ub)
        self.c_std = np.concatenate([c, np.zeros(self.A_ub.shape[0])])

    @property
    def n(self):
        return self.c.size

    def solve(self, B_eq, B_ub=None, feas_tol=1e-9, opt_tol=1e-9, max_iters=None):
        """Returns ``(X, objective, status_codes, iterations, bases)``.

        ``status_codes`` holds 0 for optimal, 1 for infeasible, 2 for unbounded.
        """
        m_eq, m_ub = self.A_eq.shape[0], self.A_ub.shape[0]
        B_eq = np.asarray(B_eq, dtype=np.float64)
        batch = B_eq.shape[0]
        B_eq = B_eq.reshape(batch, m_eq)
        B_ub = np.zeros((batch, m_ub)) if B_ub is None else \
            np.asarray(B_ub, dtype=np.float64).reshape(batch, m_ub)
        B = np.ascontiguousarray(np.concatenate([B_eq, B_ub], axis=1))
        if not np.all(np.isfinite(B)):
            raise ValueError("right-hand sides must be finite")
        if max_iters is None:
            max_iters = 50 * (self.n + self.A.shape[0])
        X, status, iters, bases = _solve_many(self.A, B, self.c_std, float(feas_tol),
                                              float(opt_tol), int(max_iters), self.n)
        if np.any(status == _ITER_LIMIT):
            raise IterationLimitError(
                f"simplex exceeded {max_iters} pivots; the problem is likely ill-conditioned"
            )
        return X, X @ self.c, status, iters, bases


def solve_batch_arrays(c, A_eq, B_eq, A_ub=None, B_ub=None, feas_tol=1e-9, opt_tol=1e-9,
                       max_iters=None):
    """Array-level :func:`solve_batch`; see :meth:`BatchProgram.solve`."""
    return BatchProgram(c, A_eq, A_ub).solve(B_eq, B_ub, feas_tol, opt_tol, max_iters)


def solve_batch(c, A_eq, B_eq, A_ub=None, B_ub=None, feas_tol=1e-9, opt_tol=1e-9,
                max_iters=None):
    """Solve ``len(B_eq)`` programs sharing ``c``, ``A_eq`` and ``A_ub``.

    ``B_eq`` has shape ``(batch, m_eq)`` and ``B_ub`` ``(batch, m_ub)``.
    Returns a list of :class:`LpSolution`.
    """
    X, obj, status, iters, bases = solve_batch_arrays(
        c, A_eq, B_eq, A_ub, B_ub, feas_tol=feas_tol, opt_tol=opt_tol, max_iters=max_iters)
    n = X.shape[1]
    out = []
    for i in range(X.shape[0]):
        st = _STATUS[int(status[i])]
        if st is LpStatus.OPTIMAL:
            out.append(LpSolution(X[i].copy(), float(obj[i]), st, bases[i].copy(),
                                  int(iters[i])))
        else:
            value = np.nan if st is LpStatus.INFEASIBLE else -np.inf
            out.append(LpSolution(np.full(n, np.nan), value, st, bases[i].copy(),
                                  int(iters[i])))
    return out


def solve(lp, feas_tol=1e-9, opt_tol=1e-9, max_iters=None):
    """Solve a single :class:`LinearProgram`."""
    return solve_batch(lp.c, lp.A_eq, lp.b_eq[None, :], lp.A_ub, lp.b_ub[None, :],
                       feas_tol=feas_tol, opt_tol=opt_tol, max_iters=max_iters)[0]


def verify_solution(lp, sol, tol=1e-8):
    """Check primal feasibility of ``sol.x`` and dual optimality of ``sol.basis``.

    The certificate is recomputed from ``lp`` alone: ``x`` must be the basic
    solution of the given basis and every reduced cost ``c - A.T @ y`` with
    ``B.T @ y = c_B`` must be non-negative.
    """
    if sol.status is not LpStatus.OPTIMAL or sol.basis is None:
        return False
    x = np.asarray(sol.x, dtype=np.float64)
    if x.shape != (lp.n,) or not np.all(np.isfinite(x)):
        return False
    if x.min(initial=0.0) < -tol:
        return False
    if lp.m_eq and np.abs(lp.A_eq @ x - lp.b_eq).max() > tol:
        return False
    if lp.m_ub and (lp.A_ub @ x - lp.b_ub).max() > tol:
        return False
    if abs(lp.c @ x - sol.objective_value) > tol * max(1.0, abs(sol.objective_value)):
        return False
    A, _, c = lp.standard_form()
    N = A.shape[1]
    cols = np.array([j for j in np.asarray(sol.basis) if 0 <= j < N], dtype=np.int64)
    x_std = np.concatenate([x, lp.b_ub - lp.A_ub @ x])
    nonbasic = np.setdiff1d(np.arange(N), cols)
    if nonbasic.size and np.abs(x_std[nonbasic]).max() > tol:
        return False
    if cols.size == 0:
        return bool(np.all(c >= -tol))
    Bm = A[:, cols]
    y, *_ = np.linalg.lstsq(Bm.T, c[cols], rcond=None)
    if np.abs(Bm.T @ y - c[cols]).max() > 1e-7:
        return False
    reduced = c - A.T @ y
    return bool(reduced.min() >= -tol)


LP_TEXT_FORMAT = """\
Plain-text LP format (whitespace separated, '#' starts a comment):

    n m_eq m_ub
    c_1 ... c_n
    a_1 ... a_n b      (m_eq equality rows)
    a_1 ... a_n b      (m_ub '<=' rows)
"""


def read_lp_text(text):
    """Parse the plain-text LP format used by ``lp solve --file``."""
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([float(t) for t in line.split()])
    if not rows or len(rows[0]) != 3:
        raise ValueError("first line must be 'n m_eq m_ub'")
    n, m_eq, m_ub = (int(v) for v in rows[0])
    if len(rows) != 2 + m_eq + m_ub:
        raise ValueError(f"expected {2 + m_eq + m_ub} non-empty lines, got {len(rows)}")
    c = rows[1]
    if len(c) != n:
        raise ValueError(f"objective line needs {n} numbers")
    body = rows[2:]
    for i, r in enumerate(body):
        if len(r) != n + 1:
            raise ValueError(f"constraint row {i + 1} needs {n + 1} numbers")
    eq = np.array(body[:m_eq]).reshape(m_eq, n + 1)
    ub = np.array(body[m_eq:]).reshape(m_ub, n + 1)
    return LinearProgram(c, eq[:, :n], eq[:, n], ub[:, :n], ub[:, n])
