"""Bounded revised simplex for ``min c.x  s.t.  lo <= A x <= hi,  l <= x <= u``.

Each row gets a slack ``s = A x`` carrying the row bounds, so the working
system is ``[A  -I] (x, s) = 0`` with every column bounded. The basis
inverse is kept as an explicit dense matrix with rank-one pivot updates
and a periodic refactorization; ``A`` itself stays sparse.

Cold starts run a two-phase primal simplex (artificials on the rows the
starting point violates). After bound changes the previous basis is
reused: nonbasic boxed columns are moved to the bound their reduced cost
prefers, which keeps the basis dual feasible, and the dual simplex
restores primal feasibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from . import tol
from .model import Model

BASIC, AT_LOWER, AT_UPPER = 0, 1, 2
_REFACTOR_EVERY = 64
_BLAND_AFTER = 40  # consecutive degenerate pivots before switching to Bland's rule


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    value: float
    point: np.ndarray | None
    iterations: int = 0


class SimplexEngine:
    """Reusable LP solver for one model; ``solve`` accepts new column bounds."""

    def __init__(self, model: Model):
        c, A, lo, hi = model.arrays()
        self.n, self.m = A.shape[1], A.shape[0]
        n, m = self.n, self.m
        self.K = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
        self.KT = self.K.T.tocsr()
        self.total = n + 2 * m  # structurals, slacks, artificials
        self.art_sign = np.ones(m)
        self.lb = np.concatenate([np.zeros(n), lo, np.zeros(m)])
        self.ub = np.concatenate([np.ones(n), hi, np.zeros(m)])
        self.cost = np.concatenate([c, np.zeros(2 * m)])
        self.x = np.zeros(self.total)
        self.state = np.full(self.total, AT_LOWER, dtype=np.int8)
        self.basis = np.zeros(m, dtype=np.int64)
        self.Binv = np.zeros((m, m))
        self.has_basis = False
        self.iterations = 0
        self._since_refactor = 0

    # -- linear algebra helpers ---------------------------------------
    def _column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        if j < self.n + self.m:
            a, b = self.K.indptr[j], self.K.indptr[j + 1]
            return self.K.indices[a:b], self.K.data[a:b]
        r = j - self.n - self.m
        return np.array([r]), np.array([self.art_sign[r]])

    def _ftran(self, j: int) -> np.ndarray:
        idx, vals = self._column(j)
        return self.Binv[:, idx] @ vals

    def _row_times_columns(self, v: np.ndarray) -> np.ndarray:
        """``v^T K_j`` for every column ``j`` (artificials included)."""
        return np.concatenate([self.KT @ v, self.art_sign * v])

    def _apply(self, v: np.ndarray) -> np.ndarray:
        """``K x`` restricted to the columns with nonzero values in ``v``."""
        n, m = self.n, self.m
        return self.K @ v[: n + m] + self.art_sign * v[n + m:]

    def _refactor(self):
        m = self.m
        B = np.zeros((m, m))
        for r, j in enumerate(self.basis):
            idx, vals = self._column(int(j))
            B[idx, r] = vals
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise NumericalError(f"singular basis matrix (cond = {np.linalg.cond(B):.3e})")
        if not np.all(np.isfinite(self.Binv)):
            raise NumericalError(f"basis inverse not finite (cond = {np.linalg.cond(B):.3e})")
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = -self.Binv @ self._apply(xn)
        self._since_refactor = 0

    def _pivot(self, r: int, alpha: np.ndarray):
        piv = self.Binv[r] / alpha[r]
        self.Binv -= np.outer(alpha, piv)
        self.Binv[r] = piv
        self._since_refactor += 1
        if self._since_refactor >= _REFACTOR_EVERY:
            self._refactor()

    def _reduced_costs(self, cost):
        y = cost[self.basis] @ self.Binv
        return cost - self._row_times_columns(y)

    # -- primal simplex -------------------------------------------------
    def _primal(self, cost, max_iter) -> LpStatus:
        degenerate = 0
        for _ in range(max_iter):
            d = self._reduced_costs(cost)
            movable = self.ub > self.lb
            up = (self.state == AT_LOWER) & movable & (d < -tol.DUAL)
            down = (self.state == AT_UPPER) & movable & (d > tol.DUAL)
            eligible = np.flatnonzero(up | down)
            if eligible.size == 0:
                return LpStatus.OPTIMAL
            if degenerate > _BLAND_AFTER:
                q = int(eligible[0])
            else:
                q = int(eligible[np.argmax(np.abs(d[eligible]))])
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self._ftran(q)
            dxb = -direction * alpha
            xb = self.x[self.basis]
            lbB, ubB = self.lb[self.basis], self.ub[self.basis]
            ratios = np.full(self.m, np.inf)
            dec = dxb < -tol.PIVOT
            inc = dxb > tol.PIVOT
            ratios[dec] = (xb[dec] - lbB[dec]) / -dxb[dec]
            ratios[inc] = (ubB[inc] - xb[inc]) / dxb[inc]
            np.maximum(ratios, 0.0, out=ratios)
            t = ratios.min(initial=np.inf)
            flip = self.ub[q] - self.lb[q]
            if not np.isfinite(t) and not np.isfinite(flip):
                return LpStatus.UNBOUNDED
            self.iterations += 1
            if flip <= t:
                self.x[q] += direction * flip
                self.x[self.basis] = xb + dxb * flip
                self.state[q] = AT_UPPER if direction > 0 else AT_LOWER
                degenerate = 0
                continue
            ties = np.flatnonzero(ratios <= t + 1e-12)
            if degenerate > _BLAND_AFTER:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            degenerate = degenerate + 1 if t < 1e-12 else 0
            leaving = int(self.basis[r])
            self.x[self.basis] = xb + dxb * t
            self.x[q] += direction * t
            if dxb[r] < 0:
                self.x[leaving], self.state[leaving] = self.lb[leaving], AT_LOWER
            else:
                self.x[leaving], self.state[leaving] = self.ub[leaving], AT_UPPER
            self.basis[r] = q
            self.state[q] = BASIC
            self._pivot(r, alpha)
        raise NumericalError(f"primal simplex hit the iteration cap ({max_iter})")

    # -- dual simplex ---------------------------------------------------
    def _dual(self, cost, max_iter) -> LpStatus | None:
        """Returns None when it gives up (caller falls back to a cold start)."""
        stall = 0
        for _ in range(max_iter):
            xb = self.x[self.basis]
            lbB, ubB = self.lb[self.basis], self.ub[self.basis]
            below = lbB - xb
            above = xb - ubB
            infeas = np.maximum(below, above)
            r = int(np.argmax(infeas))
            if infeas[r] <= tol.FEAS:
                return LpStatus.OPTIMAL
            if stall > _BLAND_AFTER:
                # dual Bland: leaving row with the smallest basic index
                rows = np.flatnonzero(infeas > tol.FEAS)
                r = int(rows[np.argmin(self.basis[rows])])
            raise_it = below[r] > above[r]
            rho = self.Binv[r]
            alpha_r = self._row_times_columns(rho)
            d = self._reduced_costs(cost)
            movable = self.ub > self.lb
            at_lo = (self.state == AT_LOWER) & movable
            at_hi = (self.state == AT_UPPER) & movable
            if raise_it:
                ok = (at_lo & (alpha_r < -tol.PIVOT)) | (at_hi & (alpha_r > tol.PIVOT))
            else:
                ok = (at_lo & (alpha_r > tol.PIVOT)) | (at_hi & (alpha_r < -tol.PIVOT))
            cand = np.flatnonzero(ok)
            if cand.size == 0:
                return LpStatus.INFEASIBLE
            ratios = np.abs(d[cand]) / np.abs(alpha_r[cand])
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12]
            if stall > _BLAND_AFTER:
                q = int(ties[0])
            else:
                q = int(ties[np.argmax(np.abs(alpha_r[ties]))])
            stall = stall + 1 if best < 1e-12 else 0
            alpha = self._ftran(q)
            if abs(alpha[r]) < tol.PIVOT:
                return None
            target = lbB[r] if raise_it else ubB[r]
            dxq = (xb[r] - target) / alpha[r]
            leaving = int(self.basis[r])
            self.x[self.basis] = xb - alpha * dxq
            self.x[q] += dxq
            self.x[leaving] = target
            self.state[leaving] = AT_LOWER if raise_it else AT_UPPER
            self.basis[r] = q
            self.state[q] = BASIC
            self.iterations += 1
            self._pivot(r, alpha)
        return None

    # -- drivers --------------------------------------------------------
    def _cold_start(self, max_iter) -> LpStatus:
        n, m = self.n, self.m
        self.iterations = 0
        xs = np.where(np.isfinite(self.lb[:n]), self.lb[:n], np.where(np.isfinite(self.ub[:n]), self.ub[:n], 0.0))
        self.x[:] = 0.0
        self.x[:n] = xs
        self.state[:] = AT_LOWER
        self.state[:n] = np.where(np.isfinite(self.lb[:n]), AT_LOWER, AT_UPPER)
        v = self.K[:, :n] @ xs
        lo, hi = self.lb[n:n + m], self.ub[n:n + m]
        art_lo, art_hi = self.lb[n + m:], self.ub[n + m:]
        art_lo[:] = 0.0
        art_hi[:] = 0.0
        for r in range(m):
            s, a = n + r, n + m + r
            if lo[r] - tol.FEAS <= v[r] <= hi[r] + tol.FEAS:
                self.basis[r] = s
                self.state[s] = BASIC
                self.x[s] = v[r]
            else:
                bound = lo[r] if v[r] < lo[r] else hi[r]
                self.x[s] = bound
                self.state[s] = AT_LOWER if v[r] < lo[r] else AT_UPPER
                self.art_sign[r] = 1.0 if bound > v[r] else -1.0
                art_hi[r] = np.inf
                self.basis[r] = a
                self.state[a] = BASIC
                self.x[a] = abs(bound - v[r])
        self.has_basis = True
        self._refactor()
        arts = self.basis >= n + m
        if arts.any():
            phase1 = np.zeros(self.total)
            phase1[n + m:] = 1.0
            self._primal(phase1, max_iter)
            infeas = float(self.x[n + m:].sum())
            art_hi[:] = 0.0
            if infeas > tol.FEAS * max(1.0, math.sqrt(m)):
                return LpStatus.INFEASIBLE
            self._drive_out_artificials()
        return self._primal(self.cost, max_iter)

    def _drive_out_artificials(self):
        n, m = self.n, self.m
        for r in range(m):
            a = int(self.basis[r])
            if a < n + m:
                continue
            self.x[a] = 0.0
            alpha_r = self._row_times_columns(self.Binv[r])[: n + m]
            nonbasic = self.state[: n + m] != BASIC
            cand = np.flatnonzero(nonbasic & (np.abs(alpha_r) > 1e-7))
            if cand.size == 0:
                continue  # redundant row, the artificial stays basic at zero
            q = int(cand[np.argmax(np.abs(alpha_r[cand]))])
            alpha = self._ftran(q)
            self.basis[r] = q
            self.state[q] = BASIC
            self.state[a] = AT_LOWER
            self._pivot(r, alpha)
        self._refactor()

    def _warm_start(self, max_iter) -> LpStatus | None:
        n = self.n
        d = self._reduced_costs(self.cost)
        non = self.state != BASIC
        fixed = self.lb == self.ub
        for j in np.flatnonzero(non[:n]):
            if fixed[j] or d[j] >= 0:
                self.state[j], self.x[j] = AT_LOWER, self.lb[j]
            else:
                self.state[j], self.x[j] = AT_UPPER, self.ub[j]
        # rows with a single finite bound are dual feasible only if the sign fits
        slack = np.arange(n, n + self.m)
        bad_lo = (self.state[slack] == AT_LOWER) & (d[slack] < -1e-7) & (self.ub[slack] > self.lb[slack])
        bad_hi = (self.state[slack] == AT_UPPER) & (d[slack] > 1e-7) & (self.ub[slack] > self.lb[slack])
        if bad_lo.any() or bad_hi.any():
            return None
        self._refactor()
        # a warm start that needs many pivots is cheaper to redo from scratch
        status = self._dual(self.cost, min(max_iter, 5 * (self.n + self.m)))
        if status is LpStatus.OPTIMAL:
            return self._primal(self.cost, max_iter)
        return status

    def solve(self, lower=None, upper=None) -> LpResult:
        n = self.n
        if lower is not None:
            self.lb[:n] = lower
        if upper is not None:
            self.ub[:n] = upper
        if np.any(self.lb[:n] > self.ub[:n] + tol.FEAS):
            return LpResult(LpStatus.INFEASIBLE, math.inf, None, 0)
        max_iter = 50_000 + 50 * (self.n + self.m)
        start = self.iterations
        status = None
        if self.has_basis:
            try:
                status = self._warm_start(max_iter)
            except NumericalError:
                status = None
        if status is None:
            status = self._cold_start(max_iter)
        if status is not LpStatus.OPTIMAL:
            return LpResult(status, math.inf if status is LpStatus.INFEASIBLE else -math.inf,
                            None, self.iterations - start)
        self._refactor()
        point = np.clip(self.x[:n], self.lb[:n], self.ub[:n])
        viol = self._row_violation(point)
        if viol > tol.FEAS:
            status = self._cold_start(max_iter)
            self._refactor()
            point = np.clip(self.x[:n], self.lb[:n], self.ub[:n])
            viol = self._row_violation(point)
            if status is not LpStatus.OPTIMAL or viol > tol.FEAS:
                raise NumericalError(f"LP solution violates rows by {viol:.3e} after refactorization")
        return LpResult(LpStatus.OPTIMAL, float(self.cost[:n] @ point), point, self.iterations - start)

    def _row_violation(self, point) -> float:
        n, m = self.n, self.m
        ax = self.K[:, :n] @ point
        lo, hi = self.lb[n:n + m], self.ub[n:n + m]
        return float(np.maximum(np.maximum(lo - ax, ax - hi), 0.0).max(initial=0.0))


class HighsEngine:
    """Same interface as :class:`SimplexEngine`, backed by the HiGHS dual simplex."""

    def __init__(self, model: Model):
        import highspy

        c, A, lo, hi = model.arrays()
        self.n = A.shape[1]
        self._h = highspy.Highs()
        self._h.setOptionValue("output_flag", False)
        self._h.setOptionValue("threads", 1)
        self._h.setOptionValue("primal_feasibility_tolerance", tol.FEAS / 10)
        self._h.setOptionValue("dual_feasibility_tolerance", tol.DUAL * 10)
        lp = highspy.HighsLp()
        lp.num_col_ = self.n
        lp.num_row_ = A.shape[0]
        lp.col_cost_ = c
        lp.col_lower_ = np.zeros(self.n)
        lp.col_upper_ = np.ones(self.n)
        inf = highspy.kHighsInf
        lp.row_lower_ = np.where(np.isfinite(lo), lo, -inf)
        lp.row_upper_ = np.where(np.isfinite(hi), hi, inf)
        csc = A.tocsc()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = csc.indptr
        lp.a_matrix_.index_ = csc.indices
        lp.a_matrix_.value_ = csc.data
        self._h.passModel(lp)
        self._cols = np.arange(self.n, dtype=np.int32)
        self._c = c
        self._A = A
        self._lo, self._hi = lo, hi
        self._highspy = highspy

    def solve(self, lower=None, upper=None) -> LpResult:
        hs = self._highspy
        lower = np.zeros(self.n) if lower is None else np.asarray(lower, dtype=float)
        upper = np.ones(self.n) if upper is None else np.asarray(upper, dtype=float)
        if np.any(lower > upper + tol.FEAS):
            return LpResult(LpStatus.INFEASIBLE, math.inf, None, 0)
        self._h.changeColsBounds(self.n, self._cols, lower, upper)
        self._h.run()
        ms = self._h.getModelStatus()
        iters = int(self._h.getInfo().simplex_iteration_count)
        if ms == hs.HighsModelStatus.kInfeasible:
            return LpResult(LpStatus.INFEASIBLE, math.inf, None, iters)
        if ms in (hs.HighsModelStatus.kUnbounded, hs.HighsModelStatus.kUnboundedOrInfeasible):
            # bounded columns make this impossible unless the model is infeasible
            return LpResult(LpStatus.INFEASIBLE, math.inf, None, iters)
        if ms != hs.HighsModelStatus.kOptimal:
            raise NumericalError(f"HiGHS returned model status {self._h.modelStatusToString(ms)}")
        point = np.clip(np.asarray(self._h.getSolution().col_value), lower, upper)
        ax = self._A @ point
        viol = float(np.maximum(np.maximum(self._lo - ax, ax - self._hi), 0.0).max(initial=0.0))
        if viol > tol.FEAS:
            raise NumericalError(f"HiGHS solution violates rows by {viol:.3e}")
        return LpResult(LpStatus.OPTIMAL, float(self._c @ point), point, iters)


def make_engine(model: Model, engine: str = "auto"):
    if engine == "auto":
        engine = "simplex" if model.num_rows <= 100 and model.num_vars <= 400 else "highs"
    if engine == "simplex":
        return SimplexEngine(model)
    if engine == "highs":
        return HighsEngine(model)
    raise ValueError(f"unknown LP engine {engine!r}")


def solve_lp_relaxation(model: Model, engine: str = "simplex") -> LpResult:
    """LP relaxation with every variable in ``[0, 1]``."""
    return make_engine(model, engine).solve()
