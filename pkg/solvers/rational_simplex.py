# solvers/rational_simplex.py
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

_FLIP = {'<=': '>=', '>=': '<=', '=': '='}


class SolverError(RuntimeError):
    """单纯形求解失败（换基次数或分母位数超限）"""


@dataclass(frozen=True)
class SimplexResult:
    """求解结果

    duals 为原约束行的对偶乘子（与 maximize/minimize 方向一致），
    只有 status == 'optimal' 时 x / objective / duals 有意义。
    """
    status: str
    x: Tuple[Fraction, ...]
    objective: Fraction
    duals: Tuple[Fraction, ...]
    pivots: int

    @property
    def optimal(self) -> bool:
        return self.status == 'optimal'


class RationalSimplex:
    """稠密表格两阶段单纯形，Fraction 精确运算，Bland 规则防止循环

    构造时完成第一阶段；之后可以对同一可行域多次调用 maximize/minimize。
    """

    def __init__(self, rows: Sequence[Sequence], rhs: Sequence,
                 senses: Optional[Sequence[str]] = None,
                 max_pivots: int = 5000,
                 max_denominator_bits: Optional[int] = None):
        self.m = len(rows)
        self.n = len(rows[0]) if rows else 0
        self.max_pivots = max_pivots
        self.max_denominator_bits = max_denominator_bits
        self.pivots = 0
        self._budget_start = 0

        senses = list(senses) if senses is not None else ['<='] * self.m
        if len(senses) != self.m or len(rhs) != self.m:
            raise ValueError(f"约束行数不一致: rows={self.m}, rhs={len(rhs)}, senses={len(senses)}")

        A = []
        b = []
        self._flipped = []
        for i in range(self.m):
            if senses[i] not in _FLIP:
                raise ValueError(f"未知约束类型: {senses[i]}")
            row = [Fraction(v) for v in rows[i]]
            if len(row) != self.n:
                raise ValueError(f"第 {i} 行长度 {len(row)} 与变量数 {self.n} 不一致")
            value = Fraction(rhs[i])
            flipped = value < 0
            if flipped:
                row = [-v for v in row]
                value = -value
                senses[i] = _FLIP[senses[i]]
            A.append(row)
            b.append(value)
            self._flipped.append(flipped)

        # 追加松弛/剩余/人工列，每行记录初始单位列
        extra = []
        self._unit_cols = [0] * self.m
        self._artificial = set()
        n_cols = self.n
        for i, sense in enumerate(senses):
            if sense == '<=':
                extra.append((i, n_cols, Fraction(1)))
                self._unit_cols[i] = n_cols
                n_cols += 1
            else:
                if sense == '>=':
                    extra.append((i, n_cols, Fraction(-1)))
                    n_cols += 1
                extra.append((i, n_cols, Fraction(1)))
                self._unit_cols[i] = n_cols
                self._artificial.add(n_cols)
                n_cols += 1
        self.n_cols = n_cols

        self._T = [row + [Fraction(0)] * (n_cols - self.n) for row in A]
        for i, col, value in extra:
            self._T[i][col] = value
        self._b = b
        self._basis = list(self._unit_cols)

        self.feasible = True
        if self._artificial:
            self._phase_one()

    # ------------------------------------------------------------------
    def _pivot(self, T, b, basis, r: int, col: int) -> None:
        self.pivots += 1
        if self.pivots - self._budget_start > self.max_pivots:
            raise SolverError(f"换基次数超过上限 {self.max_pivots}")

        p = T[r][col]
        pivot_row = [v / p for v in T[r]]
        T[r] = pivot_row
        b[r] = b[r] / p
        nonzero = [j for j, v in enumerate(pivot_row) if v != 0]
        for i in range(len(T)):
            if i == r:
                continue
            f = T[i][col]
            if f == 0:
                continue
            row = T[i]
            for j in nonzero:
                row[j] -= f * pivot_row[j]
            b[i] -= f * b[r]
        basis[r] = col

        if self.max_denominator_bits:
            for v in b:
                if v.denominator.bit_length() > self.max_denominator_bits:
                    raise SolverError(f"有理数分母超过 {self.max_denominator_bits} 位")

    def _run(self, T, b, basis, cost: List[Fraction], allowed: Sequence[int]) -> str:
        while True:
            in_basis = set(basis)
            cb = [cost[basis[i]] for i in range(len(basis))]
            entering = None
            for j in allowed:
                if j in in_basis:
                    continue
                reduced = cost[j] - sum(cb[i] * T[i][j] for i in range(len(T)) if cb[i] != 0)
                if reduced > 0:
                    entering = j
                    break
            if entering is None:
                return 'optimal'

            leaving = None
            best = None
            for i in range(len(T)):
                a = T[i][entering]
                if a > 0:
                    ratio = b[i] / a
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leaving]):
                        best = ratio
                        leaving = i
            if leaving is None:
                return 'unbounded'
            self._pivot(T, b, basis, leaving, entering)

    def _phase_one(self) -> None:
        cost = [Fraction(0)] * self.n_cols
        for j in self._artificial:
            cost[j] = Fraction(-1)
        self._run(self._T, self._b, self._basis, cost, range(self.n_cols))
        infeasibility = sum(self._b[i] for i in range(self.m) if self._basis[i] in self._artificial)
        if infeasibility > 0:
            self.feasible = False
            logger.debug(f"第一阶段结束，人工变量残量 {infeasibility}，问题不可行")
            return

        # 值为零的人工基变量尽量换出；换不出说明该行冗余
        for i in range(self.m):
            if self._basis[i] not in self._artificial:
                continue
            for j in range(self.n_cols):
                if j in self._artificial or j in self._basis:
                    continue
                if self._T[i][j] != 0:
                    self._pivot(self._T, self._b, self._basis, i, j)
                    break

    # ------------------------------------------------------------------
    def maximize(self, objective: Sequence) -> SimplexResult:
        c = [Fraction(v) for v in objective]
        if len(c) != self.n:
            raise ValueError(f"目标系数个数 {len(c)} 与变量数 {self.n} 不一致")
        zero = tuple(Fraction(0) for _ in range(self.n))
        if not self.feasible:
            return SimplexResult('infeasible', zero, Fraction(0), tuple(Fraction(0) for _ in range(self.m)),
                                 self.pivots)

        self._budget_start = self.pivots
        T = [list(row) for row in self._T]
        b = list(self._b)
        basis = list(self._basis)
        cost = c + [Fraction(0)] * (self.n_cols - self.n)
        allowed = [j for j in range(self.n_cols) if j not in self._artificial]
        status = self._run(T, b, basis, cost, allowed)
        if status != 'optimal':
            return SimplexResult(status, zero, Fraction(0), tuple(Fraction(0) for _ in range(self.m)),
                                 self.pivots)

        x = [Fraction(0)] * self.n
        for i, col in enumerate(basis):
            if col < self.n:
                x[col] = b[i]
        cb = [cost[col] for col in basis]
        duals = []
        for r in range(self.m):
            unit = self._unit_cols[r]
            y = sum(cb[i] * T[i][unit] for i in range(self.m) if cb[i] != 0)
            duals.append(-y if self._flipped[r] else y)
        value = sum(ci * xi for ci, xi in zip(c, x))
        return SimplexResult('optimal', tuple(x), value, tuple(duals), self.pivots)

    def minimize(self, objective: Sequence) -> SimplexResult:
        result = self.maximize([-Fraction(v) for v in objective])
        if not result.optimal:
            return result
        return SimplexResult(result.status, result.x, -result.objective,
                             tuple(-y for y in result.duals), result.pivots)


def solve_lp(objective: Sequence, rows: Sequence[Sequence], rhs: Sequence,
             senses: Optional[Sequence[str]] = None, maximize: bool = True,
             **options) -> SimplexResult:
    simplex = RationalSimplex(rows, rhs, senses, **options)
    return simplex.maximize(objective) if maximize else simplex.minimize(objective)
