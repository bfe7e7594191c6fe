# solvers/dof_lp.py
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from network.demand_network import (
    DemandNetwork, demand_profile, interference_set, prime_receivers
)
from solvers.rational_simplex import RationalSimplex, SolverError

logger = logging.getLogger(__name__)

RowLabel = Tuple[int, Optional[int]]


@dataclass(frozen=True)
class LinearProgram:
    """max wᵀd  s.t.  A d ⪯ 1, d ⪰ 0

    变量只包含活跃发射机（variables 给出每一列对应的发射机编号），
    每一行对应 (主接收机 j, 干扰发射机 i)，S̄_j 为空时 i 为 None。
    """
    K: int
    variables: Tuple[int, ...]
    objective: Tuple[Fraction, ...]
    rows: Tuple[Tuple[Fraction, ...], ...]
    rhs: Tuple[Fraction, ...]
    row_labels: Tuple[RowLabel, ...]

    def scaled(self, factor) -> 'LinearProgram':
        factor = Fraction(factor)
        if factor <= 0:
            raise ValueError(f"目标缩放系数必须为正: {factor}")
        return replace(self, objective=tuple(w * factor for w in self.objective))

    def row_value(self, r: int, x: Sequence[Fraction]) -> Fraction:
        return sum((a * v for a, v in zip(self.rows[r], x)), Fraction(0))


@dataclass(frozen=True)
class DoFAssignment:
    """每个发射机的自由度（长度 K，非活跃发射机为 0）"""
    d: Tuple[Fraction, ...]

    @property
    def total(self) -> Fraction:
        return sum(self.d, Fraction(0))

    def __getitem__(self, transmitter: int) -> Fraction:
        return self.d[transmitter - 1]

    def format(self) -> str:
        return ' '.join(str(v) for v in self.d)


@dataclass(frozen=True)
class DualCertificate:
    """对偶证书：行乘子 y、按主接收机聚合的 λ、非负约束乘子 γ 以及对偶目标值"""
    row_multipliers: Tuple[Fraction, ...]
    lam: Dict[int, Fraction]
    gamma: Tuple[Fraction, ...]
    value: Fraction


@dataclass(frozen=True)
class RegionViolation:
    receiver: Optional[int]
    interferer: Optional[int]
    lhs: Fraction


@dataclass
class RegionCheck:
    inside: bool
    violations: List[RegionViolation] = field(default_factory=list)


@dataclass
class FaceProbe:
    """最优面探测结果，lower/upper 为每个 LP 变量在最优面上的取值范围"""
    top_two_equal: bool
    max_component: Fraction
    unique: bool
    lower: Tuple[Fraction, ...]
    upper: Tuple[Fraction, ...]


@dataclass
class KKTReport:
    primal_feasible: bool
    dual_feasible: bool
    complementary_slackness: bool
    stationarity: bool
    details: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.primal_feasible and self.dual_feasible
                and self.complementary_slackness and self.stationarity)


class NetworkClass(str, Enum):
    REGULAR = 'Regular'
    IRREGULAR = 'Irregular'
    MULTIPLE_ACCESS = 'MultipleAccess'


def _region_rows(network: DemandNetwork) -> List[Tuple[RowLabel, Tuple[int, ...]]]:
    """每个主接收机 j 生成 Σ_{S_j} d + d_i ≤ 1（i ∈ S̄_j）"""
    rows = []
    for j in prime_receivers(network).indices:
        members = network.demand(j)
        interferers = sorted(interference_set(network, j))
        if not interferers:
            rows.append(((j, None), tuple(members)))
            continue
        for i in interferers:
            rows.append(((j, i), tuple(members) + (i,)))
    return rows


class DoFSolver:
    """自由度线性规划求解器
    功能：构造 LP、精确求解、对偶证书、KKT 校验、最优面探测与网络分类
    """

    def __init__(self, config):
        self.config = config.lp_config
        self.logger = logging.getLogger(__name__)

    def _simplex(self, rows, rhs, senses=None) -> RationalSimplex:
        return RationalSimplex(rows, rhs, senses,
                               max_pivots=self.config['max_pivots'],
                               max_denominator_bits=self.config['max_denominator_bits'])

    # ------------------------------------------------------------------
    def build_lp(self, network: DemandNetwork, weights: Optional[Sequence] = None) -> LinearProgram:
        variables = network.active
        index = {k: p for p, k in enumerate(variables)}
        labels = []
        rows = []
        for label, members in _region_rows(network):
            row = [Fraction(0)] * len(variables)
            for k in members:
                row[index[k]] = Fraction(1)
            labels.append(label)
            rows.append(tuple(row))

        if weights is None:
            objective = tuple(Fraction(1) for _ in variables)
        else:
            if len(weights) != network.K:
                raise ValueError(f"权重个数 {len(weights)} 与 K={network.K} 不一致")
            objective = tuple(Fraction(weights[k - 1]) for k in variables)
        lp = LinearProgram(K=network.K, variables=variables, objective=objective,
                           rows=tuple(rows), rhs=tuple(Fraction(1) for _ in rows),
                           row_labels=tuple(labels))
        self.logger.debug(f"构造 LP: {len(variables)} 个变量, {len(rows)} 行")
        return lp

    def _expand(self, lp: LinearProgram, x: Sequence[Fraction]) -> DoFAssignment:
        d = [Fraction(0)] * lp.K
        for k, v in zip(lp.variables, x):
            d[k - 1] = v
        return DoFAssignment(d=tuple(d))

    def _restrict(self, lp: LinearProgram, d: Union[DoFAssignment, Sequence]) -> Tuple[Fraction, ...]:
        if isinstance(d, DoFAssignment):
            d = d.d
        if len(d) != lp.K:
            raise ValueError(f"自由度向量长度 {len(d)} 与 K={lp.K} 不一致")
        return tuple(Fraction(d[k - 1]) for k in lp.variables)

    def make_certificate(self, lp: LinearProgram, y: Sequence[Fraction]) -> DualCertificate:
        y = tuple(Fraction(v) for v in y)
        lam: Dict[int, Fraction] = {}
        for (j, _), value in zip(lp.row_labels, y):
            lam[j] = lam.get(j, Fraction(0)) + value
        gamma = []
        for p, w in enumerate(lp.objective):
            column = sum((y[r] * lp.rows[r][p] for r in range(len(y))), Fraction(0))
            gamma.append(column - w)
        value = sum((yr * br for yr, br in zip(y, lp.rhs)), Fraction(0))
        return DualCertificate(row_multipliers=y, lam=lam, gamma=tuple(gamma), value=value)

    def solve_optimal_dof(self, lp: LinearProgram) -> Tuple[DoFAssignment, DualCertificate]:
        self.logger.info(f"求解自由度 LP: {len(lp.variables)} 个变量, {len(lp.rows)} 行")
        try:
            if not lp.variables:
                return DoFAssignment(d=tuple(Fraction(0) for _ in range(lp.K))), \
                    DualCertificate(row_multipliers=(), lam={}, gamma=(), value=Fraction(0))
            result = self._simplex(lp.rows, lp.rhs).maximize(lp.objective)
        except SolverError as e:
            self.logger.error(f"[dof-lp] 单纯形求解失败: {str(e)}")
            raise
        if not result.optimal:
            raise SolverError(f"[dof-lp] LP 状态异常: {result.status}")

        primal = self._expand(lp, result.x)
        dual = self.make_certificate(lp, result.duals)
        if dual.value != result.objective:
            raise SolverError(f"[dof-lp] 强对偶不成立: 原始 {result.objective}, 对偶 {dual.value}")
        self.logger.info(f"最优自由度 d = {primal.format()}, 总和 = {primal.total}（{result.pivots} 次换基）")
        return primal, dual

    # ------------------------------------------------------------------
    def check_region(self, network: DemandNetwork, d: Union[DoFAssignment, Sequence]) -> RegionCheck:
        values = d.d if isinstance(d, DoFAssignment) else tuple(Fraction(v) for v in d)
        if len(values) != network.K:
            raise ValueError(f"自由度向量长度 {len(values)} 与 K={network.K} 不一致")
        violations = []
        for k, v in enumerate(values, 1):
            if v < 0:
                violations.append(RegionViolation(receiver=None, interferer=k, lhs=v))
        for (j, i), members in _region_rows(network):
            lhs = sum((values[k - 1] for k in members), Fraction(0))
            if lhs > 1:
                violations.append(RegionViolation(receiver=j, interferer=i, lhs=lhs))
        return RegionCheck(inside=not violations, violations=violations)

    def verify_kkt(self, lp: LinearProgram, primal: Union[DoFAssignment, Sequence],
                   dual: DualCertificate) -> KKTReport:
        x = self._restrict(lp, primal)
        y = dual.row_multipliers
        gamma = dual.gamma
        details = []
        if len(y) != len(lp.rows) or len(gamma) != len(lp.variables):
            raise ValueError("对偶证书维度与 LP 不一致")

        slacks = [lp.rhs[r] - lp.row_value(r, x) for r in range(len(lp.rows))]
        primal_ok = True
        for r, s in enumerate(slacks):
            if s < 0:
                primal_ok = False
                details.append(f"原始约束 {lp.row_labels[r]} 违反: 松弛 {s}")
        for k, v in zip(lp.variables, x):
            if v < 0:
                primal_ok = False
                details.append(f"d_{k} = {v} < 0")

        dual_ok = True
        for r, v in enumerate(y):
            if v < 0:
                dual_ok = False
                details.append(f"行乘子 {lp.row_labels[r]} = {v} < 0")
        for k, g in zip(lp.variables, gamma):
            if g < 0:
                dual_ok = False
                details.append(f"γ_{k} = {g} < 0")

        cs_ok = True
        for r, (v, s) in enumerate(zip(y, slacks)):
            if v * s != 0:
                cs_ok = False
                details.append(f"互补松弛失败: 行 {lp.row_labels[r]} 乘子 {v}, 松弛 {s}")
        for k, g, v in zip(lp.variables, gamma, x):
            if g * v != 0:
                cs_ok = False
                details.append(f"互补松弛失败: γ_{k} = {g}, d_{k} = {v}")

        stationary_ok = True
        for p, (k, w) in enumerate(zip(lp.variables, lp.objective)):
            aty = sum((y[r] * lp.rows[r][p] for r in range(len(y))), Fraction(0))
            if w - aty + gamma[p] != 0:
                stationary_ok = False
                details.append(f"驻点条件失败: 变量 d_{k}, 残差 {w - aty + gamma[p]}")

        return KKTReport(primal_ok, dual_ok, cs_ok, stationary_ok, details)

    # ------------------------------------------------------------------
    def _face_system(self, lp: LinearProgram, dual: DualCertificate):
        """最优面 = 可行域 ∩ {y_r > 0 的行取等} ∩ {γ_k > 0 的变量为 0}"""
        free = [p for p in range(len(lp.variables)) if dual.gamma[p] == 0]
        rows, senses = [], []
        for r, row in enumerate(lp.rows):
            rows.append([row[p] for p in free])
            senses.append('=' if dual.row_multipliers[r] > 0 else '<=')
        return free, rows, list(lp.rhs), senses

    def optimal_face_probe(self, lp: LinearProgram, primal: DoFAssignment,
                           dual: Optional[DualCertificate] = None) -> FaceProbe:
        if dual is None:
            primal, dual = self.solve_optimal_dof(lp)
        n = len(lp.variables)
        lower = [Fraction(0)] * n
        upper = [Fraction(0)] * n
        free, rows, rhs, senses = self._face_system(lp, dual)

        if free:
            face = self._simplex(rows, rhs, senses)
            if not face.feasible:
                raise SolverError("[dof-lp] 最优面为空，对偶证书与 LP 不一致")
            for q, p in enumerate(free):
                unit = [Fraction(0)] * len(free)
                unit[q] = Fraction(1)
                hi = face.maximize(unit)
                lo = face.minimize(unit)
                if not (hi.optimal and lo.optimal):
                    raise SolverError(f"[dof-lp] 最优面探测失败: 变量 d_{lp.variables[p]}")
                upper[p] = hi.objective
                lower[p] = lo.objective

        unique = all(a == b for a, b in zip(lower, upper))
        max_component = max(upper, default=Fraction(0))

        if len(free) < 2:
            # 只有一个自由变量时第二大分量恒为 0
            top_two_equal = n >= 2 and max_component == 0
        else:
            top_two_equal = self._top_two_equal(free, rows, rhs, senses, upper)

        probe = FaceProbe(top_two_equal=top_two_equal, max_component=max_component,
                          unique=unique, lower=tuple(lower), upper=tuple(upper))
        self.logger.debug(f"最优面探测: unique={unique}, top_two_equal={top_two_equal}")
        return probe

    def _top_two_equal(self, free, rows, rhs, senses, upper) -> bool:
        """逐对检查：是否存在最优点使 d_a = d_b 且二者不小于其它分量"""
        order = sorted(range(len(free)), key=lambda q: (-upper[free[q]], q))
        m = len(free)
        for x in range(m):
            for z in range(x + 1, m):
                a, b = order[x], order[z]
                extra_rows, extra_rhs, extra_senses = [], [], []
                row = [Fraction(0)] * m
                row[a], row[b] = Fraction(1), Fraction(-1)
                extra_rows.append(row)
                extra_rhs.append(Fraction(0))
                extra_senses.append('=')
                for c in range(m):
                    if c in (a, b):
                        continue
                    row = [Fraction(0)] * m
                    row[c], row[a] = Fraction(1), Fraction(-1)
                    extra_rows.append(row)
                    extra_rhs.append(Fraction(0))
                    extra_senses.append('<=')
                probe = self._simplex(rows + extra_rows, rhs + extra_rhs, senses + extra_senses)
                if probe.feasible:
                    return True
        return False

    # ------------------------------------------------------------------
    def classify(self, network: DemandNetwork) -> NetworkClass:
        active = len(network.active)
        for j in prime_receivers(network).indices:
            if len(network.demand(j)) >= active - 1:
                self.logger.info(f"接收机 {j} 请求 {len(network.demand(j))} 条消息，属于多址接入类")
                return NetworkClass.MULTIPLE_ACCESS
        lp = self.build_lp(network)
        primal, dual = self.solve_optimal_dof(lp)
        probe = self.optimal_face_probe(lp, primal, dual)
        positive = {v for v in primal.d if v > 0}
        if probe.unique and len(positive) == 1:
            return NetworkClass.REGULAR
        return NetworkClass.IRREGULAR

    def predicted_uniform_optimum(self, network: DemandNetwork) -> Optional[DoFAssignment]:
        """需求对称时的闭式最优解 d_k = 1/(β+1)"""
        profile = demand_profile(network)
        if not profile.symmetric or profile.beta is None:
            return None
        value = Fraction(1, profile.beta + 1)
        return DoFAssignment(d=tuple(value if k in network.active else Fraction(0)
                                     for k in range(1, network.K + 1)))
