"""Model container shared by the LP, MIP and export code paths.

Minimization only.  Variables carry bounds and a binary flag; rows carry
a sense from {LE, GE, EQ}.  The container assembles dense numpy arrays
once and caches them, so branch and bound can re-solve with changed
bounds without rebuilding the matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LE = "<="
GE = ">="
EQ = "="

INF = math.inf


class LinearModel:
    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.obj: list[float] = []
        self.binary: list[bool] = []
        self.row_names: list[str] = []
        self.row_coeffs: list[dict[int, float]] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self._by_name: dict[str, int] = {}
        self._cache: tuple | None = None

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    def add_var(
        self,
        name: str,
        lb: float = 0.0,
        ub: float = INF,
        obj: float = 0.0,
        binary: bool = False,
    ) -> int:
        if name in self._by_name:
            raise ValueError(f"duplicate variable {name}")
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ValueError(f"variable {name}: lb {lb} > ub {ub}")
        idx = len(self.var_names)
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.binary.append(binary)
        self._by_name[name] = idx
        self._cache = None
        return idx

    def add_row(self, name: str, coeffs: dict[int, float], sense: str, rhs: float) -> int:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"bad sense {sense!r}")
        for j in coeffs:
            if not 0 <= j < self.n_vars:
                raise ValueError(f"row {name}: unknown variable index {j}")
        idx = len(self.row_names)
        self.row_names.append(name)
        self.row_coeffs.append({j: float(v) for j, v in coeffs.items() if v != 0.0})
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self._cache = None
        return idx

    def var_index(self, name: str) -> int:
        return self._by_name[name]

    def arrays(self):
        """Dense (A, b, senses, c, lb, ub), cached until the model changes."""
        if self._cache is None:
            m, n = self.n_rows, self.n_vars
            A = np.zeros((m, n))
            for i, coeffs in enumerate(self.row_coeffs):
                for j, v in coeffs.items():
                    A[i, j] = v
            self._cache = (
                A,
                np.array(self.rhs, dtype=float),
                list(self.senses),
                np.array(self.obj, dtype=float),
                np.array(self.lb, dtype=float),
                np.array(self.ub, dtype=float),
            )
        return self._cache

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        A = self.arrays()[0]
        return A @ x

    def check_feasible(self, x: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Names of rows and bounds the point violates beyond tol."""
        bad = []
        for j in range(self.n_vars):
            if x[j] < self.lb[j] - tol or x[j] > self.ub[j] + tol:
                bad.append(f"bound {self.var_names[j]}")
            if self.binary[j] and abs(x[j] - round(x[j])) > tol:
                bad.append(f"integrality {self.var_names[j]}")
        act = self.row_activity(x)
        for i in range(self.n_rows):
            a, r, s = act[i], self.rhs[i], self.senses[i]
            if s == LE and a > r + tol:
                bad.append(f"row {self.row_names[i]}")
            elif s == GE and a < r - tol:
                bad.append(f"row {self.row_names[i]}")
            elif s == EQ and abs(a - r) > tol:
                bad.append(f"row {self.row_names[i]}")
        return bad

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.dot(self.arrays()[3], x))


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | time_limit
    objective: float = math.nan
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    # Final basis snapshot (internal column space), reusable to
    # warm-start a re-solve after bound changes.
    basis: np.ndarray | None = None
    at_upper: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class MipSolution:
    status: str  # optimal | infeasible | unbounded | time_limit | imported
    objective: float = math.inf
    x: np.ndarray | None = None
    bound: float = -math.inf
    gap: float = math.inf
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def dual_objective(model: LinearModel, sol: LpSolution) -> float:
    """Objective of the dual solution carried by an optimal LpSolution.

    Row duals contribute rhs terms; nonbasic variables at a bound
    contribute their reduced cost times that bound.  At optimality this
    equals the primal objective (strong duality).
    """
    total = float(np.dot(sol.duals, model.rhs))
    for j in range(model.n_vars):
        rc = sol.reduced_costs[j]
        if abs(rc) <= 1e-9:
            continue
        if rc > 0:
            total += rc * model.lb[j]
        elif math.isfinite(model.ub[j]):
            total += rc * model.ub[j]
    return total
