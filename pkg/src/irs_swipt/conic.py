"""A small conic modeling layer that compiles straight to Clarabel.

Programs are built from real affine expressions over a growing list of
scalar variables.  Complex vectors are carried as (real, imag) pairs and
Hermitian matrices through their real 2m x 2m embedding, so every program
ends up in the standard form

    minimize    q^T x
    subject to  b - A x in K

with K a product of zero, nonnegative, second-order, exponential and
PSD-triangle cones.  The layer exists because rebuilding a general purpose
modeling tool's canonicalization on every alternating-optimization step
costs two orders of magnitude more than the actual interior-point solve.
"""

from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse

LN2 = np.log(2.0)
SQRT2 = np.sqrt(2.0)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"

_STATUS_MAP = {
    "Solved": OPTIMAL,
    "AlmostSolved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
}


class Expr:
    """Real affine vector expression ``coef @ x + const``.

    ``coef`` only spans the variables that existed when the expression was
    formed; later variables have implicit zero coefficients.
    """

    __slots__ = ("prog", "coef", "const")
    __array_ufunc__ = None

    def __init__(self, prog, coef, const):
        self.prog = prog
        self.coef = coef
        self.const = const

    @property
    def size(self):
        return self.const.shape[0]

    def _width(self, n):
        if self.coef.shape[1] == n:
            return self.coef
        out = np.zeros((self.coef.shape[0], n))
        out[:, : self.coef.shape[1]] = self.coef
        return out

    def _lift(self, other):
        if isinstance(other, Expr):
            if other.prog is not self.prog:
                raise ValueError("expressions belong to different programs")
            return other
        const = np.broadcast_to(np.asarray(other, dtype=float), (self.size,)).copy()
        return Expr(self.prog, np.zeros((self.size, 0)), const)

    def __add__(self, other):
        other = self._lift(other)
        if other.size != self.size:
            if self.size == 1:
                return self.broadcast(other.size) + other
            if other.size == 1:
                other = other.broadcast(self.size)
            else:
                raise ValueError(f"size mismatch {self.size} vs {other.size}")
        n = max(self.coef.shape[1], other.coef.shape[1])
        return Expr(self.prog, self._width(n) + other._width(n), self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Expr(self.prog, -self.coef, -self.const)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if isinstance(c, Expr):
            raise TypeError("product of two expressions is not affine")
        c = np.asarray(c, dtype=float)
        if c.ndim == 0:
            return Expr(self.prog, self.coef * c, self.const * c)
        return Expr(self.prog, self.coef * c[:, None], self.const * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / np.asarray(c, dtype=float))

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            idx = slice(idx, idx + 1 if idx != -1 else None)
        return Expr(self.prog, self.coef[idx], self.const[idx])

    def __rmatmul__(self, C):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        return Expr(self.prog, C @ self.coef, C @ self.const)

    def broadcast(self, n):
        if self.size != 1:
            raise ValueError("only scalar expressions broadcast")
        return Expr(self.prog, np.repeat(self.coef, n, axis=0), np.repeat(self.const, n))

    def sum(self):
        return Expr(self.prog, self.coef.sum(axis=0, keepdims=True), self.const.sum(keepdims=True))

    def dot(self, c):
        """Scalar expression ``c . self`` for a real constant vector ``c``."""
        c = np.asarray(c, dtype=float)
        return Expr(self.prog, c[None, :] @ self.coef, np.atleast_1d(c @ self.const))

    def value(self, x):
        return self.coef @ x[: self.coef.shape[1]] + self.const


def vstack(parts):
    """Concatenate expressions (or constants) into one vector expression."""
    prog = next(p.prog for p in parts if isinstance(p, Expr))
    lifted = [p if isinstance(p, Expr) else Expr(prog, np.zeros((np.size(p), 0)), np.atleast_1d(np.asarray(p, float)))
              for p in parts]
    for p in lifted:
        if p.prog is not prog:
            raise ValueError("expressions belong to different programs")
    n = max(p.coef.shape[1] for p in lifted)
    return Expr(prog, np.vstack([p._width(n) for p in lifted]), np.concatenate([p.const for p in lifted]))


class ComplexExpr:
    """Complex affine vector expression stored as a pair of real expressions."""

    __slots__ = ("re", "im")

    def __init__(self, re, im):
        self.re = re
        self.im = im

    @property
    def size(self):
        return self.re.size

    def matmul(self, C):
        """``C @ z`` for a complex constant matrix ``C``."""
        C = np.atleast_2d(C)
        Cr, Ci = C.real, C.imag
        return ComplexExpr(Cr @ self.re - Ci @ self.im, Cr @ self.im + Ci @ self.re)

    def real_inner(self, c):
        """``Re(c^H z)`` as a real scalar expression."""
        c = np.asarray(c)
        return self.re.dot(c.real) + self.im.dot(c.imag)

    def stacked(self):
        return vstack([self.re, self.im])

    def value(self, x):
        return self.re.value(x) + 1j * self.im.value(x)


class HermitianVar:
    """Hermitian m x m matrix variable ``X + jY`` stored as m^2 reals."""

    def __init__(self, prog, m, start):
        self.prog = prog
        self.m = m
        self.start = start
        iu = np.triu_indices(m, 1)
        self._iu = iu
        self.n_off = len(iu[0])

    @property
    def diag_idx(self):
        return self.start + np.arange(self.m)

    def inner(self, A):
        """Scalar expression ``tr(A W)`` for a Hermitian constant ``A``."""
        A = np.asarray(A)
        row = np.zeros(self.start + self.m * self.m)
        row[self.start:self.start + self.m] = np.real(np.diag(A))
        off = A[self._iu]
        s = self.start + self.m
        row[s:s + self.n_off] = 2.0 * off.real
        row[s + self.n_off:s + 2 * self.n_off] = 2.0 * off.imag
        return Expr(self.prog, row[None, :], np.zeros(1))

    def trace(self):
        return self.inner(np.eye(self.m))

    def value(self, x):
        m, s = self.m, self.start
        W = np.zeros((m, m), dtype=complex)
        W[np.diag_indices(m)] = x[s:s + m]
        vals = x[s + m:s + m + self.n_off] + 1j * x[s + m + self.n_off:s + m * m]
        W[self._iu] = vals
        W[self._iu[1], self._iu[0]] = np.conj(vals)
        return W

    def psd_rows(self):
        """svec of the real embedding, in Clarabel's column-major upper order."""
        m, s = self.m, self.start
        pos = {}
        for t, (a, b) in enumerate(zip(*self._iu)):
            pos[(a, b)] = t

        def entry(r, c):
            # (index, sign) of the real embedding entry Z[r, c], or None for zero
            br, bc = r // m, c // m
            a, b = r % m, c % m
            if br == bc:
                if a == b:
                    return s + a, 1.0
                lo, hi = min(a, b), max(a, b)
                return s + m + pos[(lo, hi)], 1.0
            if a == b:
                return None
            lo, hi = min(a, b), max(a, b)
            sign = 1.0 if a < b else -1.0
            if br == 0:
                sign = -sign
            return s + m + self.n_off + pos[(lo, hi)], sign

        size = 2 * m
        nrow = size * (size + 1) // 2
        coef = np.zeros((nrow, s + m * m))
        t = 0
        for c in range(size):
            for r in range(c + 1):
                e = entry(r, c)
                if e is not None:
                    coef[t, e[0]] = e[1] * (1.0 if r == c else SQRT2)
                t += 1
        return Expr(self.prog, coef, np.zeros(nrow))


@dataclass
class SolveResult:
    status: str
    objective: float = float("nan")
    x: np.ndarray = None
    iterations: int = 0
    solve_time: float = 0.0
    raw_status: str = ""
    values: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == OPTIMAL

    def value(self, item):
        """Primal value of a variable name, expression or Hermitian variable."""
        if isinstance(item, str):
            return self.values[item]
        return item.value(self.x)

    def __getitem__(self, name):
        return self.values[name]


class ConicProgram:
    """Convex program over real, complex and Hermitian-PSD variables."""

    def __init__(self):
        self.nvar = 0
        self._named = {}
        self._blocks = []
        self._objective = None
        self._sense = None

    def _alloc(self, n):
        start = self.nvar
        self.nvar += n
        return start

    def _register(self, name, handle):
        if name is None:
            return
        if name in self._named:
            raise ValueError(f"variable {name!r} declared twice")
        self._named[name] = handle

    def constant(self, value, n=1):
        return Expr(self, np.zeros((n, 0)), np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy())

    # variables ---------------------------------------------------------
    def real(self, n=1, name=None, nonneg=False):
        start = self._alloc(n)
        coef = np.zeros((n, self.nvar))
        coef[np.arange(n), start + np.arange(n)] = 1.0
        e = Expr(self, coef, np.zeros(n))
        if nonneg:
            self.add_nonneg(e)
        self._register(name, e)
        return e

    def complex(self, n, name=None):
        z = ComplexExpr(self.real(n), self.real(n))
        self._register(name, z)
        return z

    def hermitian(self, m, name=None, psd=True):
        start = self._alloc(m * m)
        W = HermitianVar(self, m, start)
        if psd:
            self._blocks.append(("psd", W.psd_rows(), 2 * m))
        self._register(name, W)
        return W

    # constraints -------------------------------------------------------
    def _check(self, e):
        if not isinstance(e, Expr) or e.prog is not self:
            raise ValueError("constraint does not reference this program")
        if not (np.all(np.isfinite(e.coef)) and np.all(np.isfinite(e.const))):
            raise ValueError("non-finite data in constraint")
        return e

    def add_nonneg(self, e):
        """``e >= 0`` elementwise."""
        self._blocks.append(("nonneg", self._check(e), e.size))

    def add_le(self, lhs, rhs):
        e = rhs - lhs if isinstance(rhs, Expr) else -(lhs - rhs)
        self.add_nonneg(e)

    def add_eq(self, e):
        self._blocks.append(("zero", self._check(e), e.size))

    def add_soc(self, t, x):
        """``||x||_2 <= t``."""
        e = vstack([t, x])
        self._blocks.append(("soc", self._check(e), e.size))

    def add_exp(self, x, y, z):
        """``y exp(x / y) <= z`` with ``y > 0`` (closure at ``y = 0``)."""
        e = vstack([x, y, z])
        self._blocks.append(("exp", self._check(e), 3))

    def add_sq_le(self, y, t):
        """``||y||^2 <= t``."""
        self.add_soc(t + 1.0, vstack([2.0 * y, t - 1.0]))

    def add_sq_le_prod(self, y, s, t):
        """``||y||^2 <= s t`` with ``s, t >= 0``."""
        self.add_soc(s + t, vstack([2.0 * y, s - t]))

    # objective ---------------------------------------------------------
    def maximize(self, e):
        self._objective, self._sense = self._check(e), -1.0

    def minimize(self, e):
        self._objective, self._sense = self._check(e), 1.0

    # compile / solve ---------------------------------------------------
    def compile(self):
        if self._objective is None:
            raise ValueError("program has no objective")
        if self._objective.size != 1:
            raise ValueError("objective must be scalar")
        n = self.nvar
        rows, b, cones = [], [], []
        for kind, e, dim in self._blocks:
            rows.append(-e._width(n))
            b.append(e.const)
            if kind == "zero":
                cones.append(clarabel.ZeroConeT(dim))
            elif kind == "nonneg":
                cones.append(clarabel.NonnegativeConeT(dim))
            elif kind == "soc":
                cones.append(clarabel.SecondOrderConeT(dim))
            elif kind == "exp":
                cones.append(clarabel.ExponentialConeT())
            else:
                cones.append(clarabel.PSDTriangleConeT(dim))
        A = sparse.csc_matrix(np.vstack(rows)) if rows else sparse.csc_matrix((0, n))
        b = np.concatenate(b) if b else np.zeros(0)
        q = self._sense * self._objective._width(n)[0]
        return q, A, b, cones

    def solve(self, tol=1e-8, max_iter=200):
        return solve(self, tol=tol, max_iter=max_iter)


def _clarabel_settings(tol, max_iter, equilibrate):
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.max_iter = max_iter
    settings.max_threads = 1
    settings.equilibrate_enable = equilibrate
    return settings


def _solve_once(program, q, A, b, cones, settings):
    n = program.nvar
    try:
        sol = clarabel.DefaultSolver(sparse.csc_matrix((n, n)), q, A, b, cones, settings).solve()
    except Exception as exc:  # backend raised; keep Monte Carlo runs alive
        return SolveResult(NUMERICAL_FAILURE, raw_status=repr(exc))
    raw = str(sol.status)
    status = _STATUS_MAP.get(raw, NUMERICAL_FAILURE)
    res = SolveResult(status, iterations=sol.iterations, solve_time=sol.solve_time, raw_status=raw)
    if status == OPTIMAL:
        x = np.asarray(sol.x)
        if not np.all(np.isfinite(x)):
            res.status = NUMERICAL_FAILURE
            return res
        res.x = x
        res.objective = float(program._objective.value(x)[0])
        res.values = {k: v.value(x) for k, v in program._named.items()}
    return res


def solve(program, tol=1e-8, max_iter=200):
    """Solve ``program``; backend trouble maps to ``numerical_failure``.

    Clarabel's Ruiz equilibration occasionally stalls on the SCA programs,
    whose rows mix unit-modulus bounds with large first-order
    coefficients, so a numerical failure is retried once with
    equilibration switched off.
    """
    q, A, b, cones = program.compile()
    res = _solve_once(program, q, A, b, cones, _clarabel_settings(tol, max_iter, True))
    if res.status == NUMERICAL_FAILURE:
        retry = _solve_once(program, q, A, b, cones, _clarabel_settings(tol, max_iter, False))
        retry.solve_time += res.solve_time
        retry.iterations += res.iterations
        res = retry
    return res


def perspective_entropy_encode(prog, tau, x):
    """Hypograph variable ``t`` with ``t <= tau log2(x / tau)``.

    Uses the exponential cone ``(t ln2, tau, x)``; at ``tau = 0`` the set
    closes to ``t <= 0``.
    """
    t = prog.real(1)
    tau = tau if isinstance(tau, Expr) else prog.constant(tau)
    prog.add_exp(t * LN2, tau, x)
    return t


def log2_1p(prog, mu):
    """Hypograph variable ``t`` with ``t <= log2(1 + mu)``."""
    return perspective_entropy_encode(prog, 1.0, mu + 1.0)


def hermitian_embed(Mc):
    """Real symmetric embedding ``[[Re, -Im], [Im, Re]]`` of a complex matrix."""
    Mc = np.asarray(Mc)
    return np.block([[Mc.real, -Mc.imag], [Mc.imag, Mc.real]])


def hermitian_unembed(Z):
    m = Z.shape[0] // 2
    return Z[:m, :m] + 1j * Z[m:, :m]
