# processors/ia_designer.py
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional

import numpy as np

from channels.alignment_graph import AidingCondition, build_alignment_graph, cycle_conditions
from channels.extended_channel import ExtendedChannel
from network.demand_network import DemandNetwork, interference_set, restrict
from processors.channel_aiding import (
    ChannelAidingVerifier, InfeasibleStructureError, JointPartition
)
from solvers.dof_lp import DoFAssignment

logger = logging.getLogger(__name__)


class DesignError(RuntimeError):
    """波束设计失败"""


@dataclass
class BeamformingSet:
    """每个发射机的 τ×d_k 预编码矩阵"""
    tau: int
    V: Dict[int, np.ndarray]

    def columns(self, k: int) -> int:
        return int(self.V[k].shape[1]) if k in self.V else 0

    def matrix(self, k: int) -> np.ndarray:
        return self.V.get(k, np.zeros((self.tau, 0), dtype=np.complex128))

    def dump_lines(self) -> List[str]:
        """每行 "V k col re_1 im_1 ... re_τ im_τ"，列号从 1 开始"""
        lines = []
        for k in sorted(self.V):
            for c in range(self.V[k].shape[1]):
                parts = ['V', str(k), str(c + 1)]
                for v in self.V[k][:, c]:
                    parts.append(repr(float(v.real)))
                    parts.append(repr(float(v.imag)))
                lines.append(' '.join(parts))
        return lines

    @classmethod
    def parse_lines(cls, lines: Iterable[str]) -> 'BeamformingSet':
        columns: Dict[int, Dict[int, np.ndarray]] = {}
        tau = None
        for lineno, raw in enumerate(lines, 1):
            line = raw.strip()
            if not line or line.startswith('#'):
                continue
            parts = line.split()
            if parts[0] != 'V' or len(parts) < 5 or (len(parts) - 3) % 2:
                raise ValueError(f"第 {lineno} 行格式错误: {line[:40]}")
            values = np.array([float(v) for v in parts[3:]])
            column = values[0::2] + 1j * values[1::2]
            if tau is None:
                tau = len(column)
            elif len(column) != tau:
                raise ValueError(f"第 {lineno} 行长度与 τ={tau} 不一致")
            columns.setdefault(int(parts[1]), {})[int(parts[2])] = column
        if tau is None:
            raise ValueError("波束文件为空")
        V = {k: np.stack([cols[c] for c in sorted(cols)], axis=1) for k, cols in columns.items()}
        return cls(tau=tau, V=V)


@dataclass
class PeelingRound:
    index: int
    network: DemandNetwork
    columns: Dict[int, int]
    conditions: List[AidingCondition] = field(default_factory=list)


@dataclass
class PeelingPlan:
    """不规则网络的逐轮剥离计划，τ = n·N_e"""
    N_e: int
    n: int
    d0: Dict[int, int]
    rounds: List[PeelingRound]
    warnings: List[str] = field(default_factory=list)

    @property
    def tau(self) -> int:
        return self.n * self.N_e

    @property
    def condition_count(self) -> int:
        return sum(len(r.conditions) for r in self.rounds)


@dataclass
class ReceiverDimensions:
    receiver: int
    desired_dim: int
    interference_dim: int
    joint_dim: int
    expected_desired: int
    decodable: bool


@dataclass
class AlignmentReport:
    tau: int
    receivers: List[ReceiverDimensions]

    @property
    def decodable(self) -> bool:
        return all(r.decodable for r in self.receivers)


def numeric_rank(M: np.ndarray, tol: float) -> int:
    """奇异值大于 σ_max·τ·tol 的个数"""
    if M.size == 0 or M.shape[1] == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > s[0] * M.shape[0] * tol))


def _unit_modulus(rng: np.random.Generator, shape) -> np.ndarray:
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=shape))


class IADesigner:
    """干扰对齐波束设计器
    功能：剥离计划、按对齐图传播波束、数值秩验证
    """

    def __init__(self, config):
        self.config = config.design_config
        self.rank_tolerance = self.config['rank_tolerance']
        self.eq_tolerance = config.channel_config['eq_tolerance']
        self.verifier = ChannelAidingVerifier(config)
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------
    def plan_irregular(self, network: DemandNetwork, d: DoFAssignment, n: int = 1,
                       channel: Optional[ExtendedChannel] = None,
                       N_e: Optional[int] = None) -> PeelingPlan:
        """把有理自由度放大为整数，每轮剥离当前最小剩余自由度"""
        if n < 1:
            raise DesignError(f"n 必须为正整数: {n}")
        values = {k: Fraction(d[k]) for k in range(1, network.K + 1)}
        if any(v < 0 for v in values.values()):
            raise DesignError(f"自由度不能为负: {d.format()}")
        active = [k for k, v in values.items() if v > 0]
        if not active:
            raise DesignError("所有自由度为 0，无需设计")

        lcm = 1
        for k in active:
            lcm = lcm * values[k].denominator // math.gcd(lcm, values[k].denominator)
        if N_e is None:
            N_e = lcm
        elif N_e % lcm:
            raise DesignError(f"N_e={N_e} 不是自由度分母最小公倍数 {lcm} 的倍数")
        tau = n * N_e

        d0 = {k: int(values[k] * tau) for k in active}
        remaining = dict(d0)
        plan = PeelingPlan(N_e=N_e, n=n, d0=d0, rounds=[])
        while any(v > 0 for v in remaining.values()):
            current = sorted(k for k, v in remaining.items() if v > 0)
            step = min(remaining[k] for k in current)
            if 2 * step > tau:
                message = f"第 {len(plan.rounds) + 1} 轮剥离量 {step} 超过 τ/2={Fraction(tau, 2)}"
                plan.warnings.append(message)
                self.logger.warning(message)
            sub = restrict(network, current)
            conditions = []
            if channel is not None:
                conditions = cycle_conditions(build_alignment_graph(sub, channel))
            plan.rounds.append(PeelingRound(index=len(plan.rounds) + 1, network=sub,
                                            columns={k: step for k in current}, conditions=conditions))
            for k in current:
                remaining[k] -= step

        self.logger.info(f"剥离计划: N_e={N_e}, τ={tau}, {len(plan.rounds)} 轮, d0={d0}")
        return plan

    # ------------------------------------------------------------------
    def span_violations(self, V: np.ndarray) -> List[str]:
        """V 的列空间不能包含任何 e_i，且不能有零行"""
        problems = []
        tau = V.shape[0]
        base = numeric_rank(V, self.rank_tolerance)
        for i in range(tau):
            if np.linalg.norm(V[i]) <= self.rank_tolerance * max(np.linalg.norm(V), 1.0):
                problems.append(f"第 {i + 1} 行为零")
                continue
            unit = np.zeros((tau, 1), dtype=np.complex128)
            unit[i, 0] = 1.0
            if numeric_rank(np.hstack([V, unit]), self.rank_tolerance) == base:
                problems.append(f"e_{i + 1} 属于列空间")
        return problems

    def _root_columns(self, partition: JointPartition, columns: int, rng: np.random.Generator,
                      force: bool) -> np.ndarray:
        tau = partition.tau
        order = sorted(range(len(partition.blocks)), key=lambda b: (-len(partition.blocks[b]), b))
        capacity = {b: len(partition.blocks[b]) - (0 if force else 1) for b in order}
        total = sum(capacity.values())
        if columns > total:
            raise DesignError(f"自由度 {columns} 超过联合划分容量 {total}")
        if not force and columns < len(order):
            raise DesignError(f"自由度 {columns} 少于联合划分块数 {len(order)}，无法覆盖每一块")

        counts = {b: 0 for b in order}
        remaining = columns
        while remaining:
            for b in order:
                if remaining and counts[b] < capacity[b]:
                    counts[b] += 1
                    remaining -= 1

        V = np.zeros((tau, columns), dtype=np.complex128)
        col = 0
        for b in order:
            block = list(partition.blocks[b])
            m = counts[b]
            if not m:
                continue
            if force and len(block) == 1:
                V[block[0], col] = 1.0
            else:
                V[np.ix_(block, range(col, col + m))] = _unit_modulus(rng, (len(block), m))
            col += m
        return V

    def design_round(self, channel: ExtendedChannel, network: DemandNetwork, columns: Dict[int, int],
                     rng: np.random.Generator, force: bool = False) -> Dict[int, np.ndarray]:
        """单轮设计：根节点按联合划分取列，沿生成树传播；不在图中的发射机取一般位置"""
        graph = build_alignment_graph(network, channel)
        conditions = cycle_conditions(graph)
        V: Dict[int, np.ndarray] = {}
        for root in graph.roots:
            c = columns[root]
            component = [v for v in graph.order if graph.root_of(v) == root]
            # 分量外的环与本分量无关
            relevant = [cond for cond in conditions if cond.root == root]
            if not relevant:
                # 树形分量没有约束，根取一般位置
                V[root] = _unit_modulus(rng, (channel.tau, c))
            else:
                verification = self.verifier.verify_conditions(relevant, c, tau=channel.tau)
                if not verification.feasible and not force:
                    raise InfeasibleStructureError(f"[ia-design] 发射机 {root} 所在分量: {verification.reason}")
                V[root] = self._root_columns(verification.partition, c, rng, force)
            if relevant and not force:
                problems = self.span_violations(V[root])
                if problems:
                    raise DesignError(f"[ia-design] 根发射机 {root} 的波束不满足条件: {problems}")
            for node in component:
                if node == root:
                    continue
                key, parent = graph.parent[node]
                edge = graph.edges[key]
                label = edge.label if edge.source == parent else edge.label.inverse()
                V[node] = label @ V[parent]

        for k, c in columns.items():
            if k not in V:
                V[k] = _unit_modulus(rng, (channel.tau, c))
        return V

    def design_beamformers(self, channel: ExtendedChannel, network: DemandNetwork, plan: PeelingPlan,
                           seed, force: bool = False) -> BeamformingSet:
        if channel.tau != plan.tau:
            raise DesignError(f"信道扩展长度 {channel.tau} 与计划 τ={plan.tau} 不一致")
        rng = np.random.default_rng(seed)
        blocks: Dict[int, List[np.ndarray]] = {}
        for rnd in plan.rounds:
            self.logger.info(f"设计第 {rnd.index} 轮: 发射机 {sorted(rnd.columns)}, 每个 {next(iter(rnd.columns.values()))} 列")
            try:
                V = self.design_round(channel, rnd.network, rnd.columns, rng, force)
            except (InfeasibleStructureError, DesignError) as e:
                self.logger.error(f"第 {rnd.index} 轮设计失败: {str(e)}")
                raise
            for k, m in V.items():
                blocks.setdefault(k, []).append(m)

        V = {k: np.hstack(ms) for k, ms in blocks.items()}
        for k, m in V.items():
            if numeric_rank(m, self.rank_tolerance) != m.shape[1]:
                if not force:
                    raise DesignError(f"[ia-design] 发射机 {k} 的波束矩阵列不满秩")
                self.logger.warning(f"强制设计: 发射机 {k} 的波束矩阵列不满秩")
        return BeamformingSet(tau=channel.tau, V=V)

    # ------------------------------------------------------------------
    def verify_alignment(self, channel: ExtendedChannel, network: DemandNetwork,
                         beamformers: BeamformingSet) -> AlignmentReport:
        """逐接收机比较期望信号、干扰与联合空间的数值秩"""
        tau = channel.tau
        receivers = []
        for j in range(1, network.N + 1):
            desired = [channel.H(j, k) @ beamformers.matrix(k) for k in network.demand(j)]
            interference = [channel.H(j, k) @ beamformers.matrix(k)
                            for k in sorted(interference_set(network, j))]
            D = np.hstack(desired) if desired else np.zeros((tau, 0))
            I = np.hstack(interference) if interference else np.zeros((tau, 0))
            expected = sum(beamformers.columns(k) for k in network.demand(j))
            d_dim = numeric_rank(D, self.rank_tolerance)
            i_dim = numeric_rank(I, self.rank_tolerance)
            joint = numeric_rank(np.hstack([D, I]), self.rank_tolerance)
            decodable = joint == d_dim + i_dim and d_dim == expected and i_dim <= tau - expected
            receivers.append(ReceiverDimensions(j, d_dim, i_dim, joint, expected, decodable))
            self.logger.debug(f"接收机 {j}: 期望 {d_dim}/{expected}, 干扰 {i_dim}, 联合 {joint}")
        report = AlignmentReport(tau=tau, receivers=receivers)
        self.logger.info(f"对齐验证{'通过' if report.decodable else '失败'}: τ={tau}")
        return report

    def edge_consistency(self, channel: ExtendedChannel, network: DemandNetwork,
                         beamformers: BeamformingSet) -> Dict[int, bool]:
        """每条非树边两端的列空间是否满足 span(V^[target]) = span(label·V^[source])"""
        graph = build_alignment_graph(network, channel)
        out = {}
        for edge in graph.edges:
            if edge.index in graph.tree_edges:
                continue
            A = beamformers.matrix(edge.target)
            B = edge.label @ beamformers.matrix(edge.source)
            rank = numeric_rank(A, self.rank_tolerance)
            out[edge.index] = numeric_rank(np.hstack([A, B]), self.rank_tolerance) == rank
        return out
