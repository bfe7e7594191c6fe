# solvers/vertex_enumeration.py
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from solvers.dof_lp import LinearProgram

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VertexOptimum:
    objective: Fraction
    point: Tuple[Fraction, ...]
    candidates: int


def _solve_exact(A: List[List[Fraction]], b: List[Fraction]) -> Optional[List[Fraction]]:
    """Fraction 高斯消元，奇异时返回 None"""
    n = len(A)
    M = [list(row) + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col] != 0), None)
        if pivot is None:
            return None
        M[col], M[pivot] = M[pivot], M[col]
        p = M[col][col]
        M[col] = [v / p for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def enumerate_vertices(lp: LinearProgram, screen_tolerance: float = 1e-9,
                       chunk_size: int = 20000) -> VertexOptimum:
    """枚举约束系统所有基，浮点筛选可行顶点后用有理数重新求解，返回精确最优值

    只适合小规模问题（组合数随行数爆炸），作为单纯形的对照。
    """
    n = len(lp.variables)
    if n == 0:
        return VertexOptimum(objective=Fraction(0), point=(), candidates=0)

    constraints = [(tuple(row), rhs) for row, rhs in zip(lp.rows, lp.rhs)]
    for p in range(n):
        unit = [Fraction(0)] * n
        unit[p] = Fraction(-1)
        constraints.append((tuple(unit), Fraction(0)))
    constraints = list(dict.fromkeys(constraints))

    A = np.array([[float(v) for v in row] for row, _ in constraints])
    b = np.array([float(rhs) for _, rhs in constraints])
    w = np.array([float(v) for v in lp.objective])

    screened = []
    seen = set()
    combos = itertools.combinations(range(len(constraints)), n)
    while True:
        chunk = np.array(list(itertools.islice(combos, chunk_size)), dtype=int)
        if chunk.size == 0:
            break
        subs = A[chunk]
        # 0/±1 整数矩阵，非奇异时 |det| ≥ 1
        regular = np.abs(np.linalg.det(subs)) >= 0.5
        if not regular.any():
            continue
        chunk, subs = chunk[regular], subs[regular]
        xs = np.linalg.solve(subs, b[chunk][..., None])[..., 0]
        feasible = np.all(xs @ A.T <= b + screen_tolerance, axis=1)
        for x, combo in zip(xs[feasible], chunk[feasible]):
            key = tuple(np.round(x, 9))
            if key in seen:
                continue
            seen.add(key)
            screened.append((float(w @ x), tuple(int(r) for r in combo)))

    if not screened:
        raise ValueError("未找到可行顶点")
    best_float = max(value for value, _ in screened)

    best: Optional[Tuple[Fraction, Tuple[Fraction, ...]]] = None
    exact_checked = 0
    for value, combo in screened:
        if value < best_float - 1e-6:
            continue
        exact_checked += 1
        x = _solve_exact([list(constraints[r][0]) for r in combo], [constraints[r][1] for r in combo])
        if x is None:
            continue
        feasible = all(sum((a * v for a, v in zip(row, x)), Fraction(0)) <= rhs for row, rhs in constraints)
        if not feasible:
            continue
        objective = sum((c * v for c, v in zip(lp.objective, x)), Fraction(0))
        if best is None or objective > best[0]:
            best = (objective, tuple(x))

    if best is None:
        raise ValueError("浮点筛选出的顶点均未通过精确校验")
    logger.debug(f"顶点枚举: {len(screened)} 个浮点可行顶点, {exact_checked} 个精确复核")
    return VertexOptimum(objective=best[0], point=best[1], candidates=len(screened))
