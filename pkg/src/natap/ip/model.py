"""Binary linear program container and a plain-text dump format.

Dump grammar (one item per line, ``#`` starts a comment)::

    minimize: <term> (+|- <term>)*
    <name>: <term> (+|- <term>)* (<=|=|>=) <number>
    binary: <var> <var> ...

where ``<term>`` is ``<coef> <var>`` and variables are named ``v<index>``
unless the builder supplied names.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

SENSES = ("<=", "=", ">=")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Constraint:
    coeffs: dict
    sense: str
    rhs: float
    name: str = ""


class Model:
    """Minimization over binary variables with sparse linear rows."""

    def __init__(self):
        self.objective: list[float] = []
        self.var_names: list[str] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._starts: list[int] = [0]
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_names: list[str] = []
        self._frozen = None

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    @property
    def num_rows(self) -> int:
        return len(self.senses)

    def add_var(self, cost: float = 0.0, name: str = "") -> int:
        self._frozen = None
        self.objective.append(float(cost))
        self.var_names.append(name or f"v{len(self.objective) - 1}")
        return len(self.objective) - 1

    def add_cost(self, var: int, cost: float) -> None:
        self._frozen = None
        self.objective[var] += float(cost)

    def add_constraint(self, cols, vals, sense: str, rhs: float, name: str = "") -> int:
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        cols = [int(c) for c in cols]
        vals = [float(v) for v in vals]
        if len(cols) != len(vals):
            raise ModelError("coefficient and column lists differ in length")
        if len(set(cols)) != len(cols):
            raise ModelError(f"row {name or self.num_rows} references a variable twice")
        if any(not 0 <= c < self.num_vars for c in cols):
            raise ModelError(f"row {name or self.num_rows} references an unknown variable")
        if not all(np.isfinite(vals)) or not np.isfinite(rhs):
            raise ModelError(f"row {name or self.num_rows} has a non-finite coefficient")
        self._frozen = None
        self._cols += cols
        self._vals += vals
        self._starts.append(len(self._cols))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"r{self.num_rows}")
        return self.num_rows - 1

    @property
    def constraints(self) -> list[Constraint]:
        out = []
        for r in range(self.num_rows):
            a, b = self._starts[r], self._starts[r + 1]
            out.append(Constraint(dict(zip(self._cols[a:b], self._vals[a:b])),
                                  self.senses[r], self.rhs[r], self.row_names[r]))
        return out

    def row(self, r: int) -> tuple[list[int], list[float]]:
        a, b = self._starts[r], self._starts[r + 1]
        return self._cols[a:b], self._vals[a:b]

    def arrays(self):
        """``(c, A, row_lo, row_hi)`` with ``A`` in CSR form; cached until the next edit."""
        if self._frozen is None:
            A = sp.csr_matrix((np.array(self._vals, dtype=float), np.array(self._cols, dtype=np.int64),
                               np.array(self._starts, dtype=np.int64)),
                              shape=(self.num_rows, self.num_vars))
            rhs = np.array(self.rhs, dtype=float)
            senses = np.array(self.senses)
            lo = np.where(senses == "<=", -np.inf, rhs)
            hi = np.where(senses == ">=", np.inf, rhs)
            self._frozen = (np.array(self.objective, dtype=float), A, lo, hi)
        return self._frozen

    def objective_value(self, x) -> float:
        return float(np.dot(self.arrays()[0], x))

    def max_violation(self, x) -> float:
        _, A, lo, hi = self.arrays()
        ax = A @ np.asarray(x, dtype=float)
        viol = np.maximum(lo - ax, ax - hi)
        return float(max(viol.max(initial=0.0), 0.0))

    def is_feasible(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_vars,) or np.any(x < -tol) or np.any(x > 1 + tol):
            return False
        return self.max_violation(x) <= tol

    def dump_lp(self) -> str:
        def expr(pairs):
            parts = []
            for c, v in pairs:
                if v == 0:
                    continue
                sign = "-" if v < 0 else "+"
                parts.append(f"{sign} {abs(v):.12g} {self.var_names[c]}")
            if not parts:
                return "0"
            s = " ".join(parts)
            return s[2:] if s.startswith("+ ") else s
        lines = ["minimize: " + expr(enumerate(self.objective))]
        for r in range(self.num_rows):
            cols, vals = self.row(r)
            lines.append(f"{self.row_names[r]}: {expr(zip(cols, vals))} {self.senses[r]} {self.rhs[r]:.12g}")
        lines.append("binary: " + " ".join(self.var_names))
        return "\n".join(lines) + "\n"
