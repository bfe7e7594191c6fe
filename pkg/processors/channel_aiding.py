# processors/channel_aiding.py
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from channels.alignment_graph import AidingCondition, build_alignment_graph, cycle_conditions
from channels.diagonal import ChannelShapeError, DiagonalMatrix
from channels.extended_channel import (
    ChannelBounds, ExtendedChannel, draw_narrow, random_channel
)
from network.demand_network import DemandNetwork

logger = logging.getLogger(__name__)

ConditionLike = Union[AidingCondition, DiagonalMatrix]


class InfeasibleStructureError(RuntimeError):
    """无法构造满足辅助条件的信道结构"""


def _entries(condition: ConditionLike) -> np.ndarray:
    return condition.T.entries if isinstance(condition, AidingCondition) else condition.entries


def _close(a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    """逐元素相对比较，最后一维全部满足才算相等"""
    scale = np.maximum(np.abs(a), np.abs(b))
    return np.all(np.abs(a - b) <= tol * scale, axis=-1)


@dataclass(frozen=True)
class JointPartition:
    """所有条件矩阵对角元同时相等的位置划分（位置 0 起编号）"""
    tau: int
    blocks: Tuple[Tuple[int, ...], ...]

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def labels(self) -> Tuple[int, ...]:
        out = [0] * self.tau
        for label, block in enumerate(self.blocks):
            for p in block:
                out[p] = label
        return tuple(out)


@dataclass
class VerificationResult:
    feasible: bool
    partition: JointPartition
    reason: str


def joint_partition(conditions: Sequence[ConditionLike], tol: float,
                    tau: Optional[int] = None) -> JointPartition:
    """按位置顺序贪心聚类：每个位置加入第一个代表元（块首位置）与之相近的块"""
    if conditions:
        sizes = {_entries(c).shape[0] for c in conditions}
        if len(sizes) != 1:
            raise ChannelShapeError(f"条件矩阵尺寸不一致: {sorted(sizes)}")
        size = sizes.pop()
        if tau is not None and tau != size:
            raise ChannelShapeError(f"条件矩阵尺寸 {size} 与 τ={tau} 不一致")
        tau = size
        values = np.stack([_entries(c) for c in conditions], axis=1)
    else:
        if tau is None:
            raise ValueError("没有条件时必须给出 τ")
        values = np.zeros((tau, 0), dtype=np.complex128)

    blocks: List[List[int]] = []
    reps: List[np.ndarray] = []
    for p in range(tau):
        if reps:
            hits = np.flatnonzero(_close(np.stack(reps), values[p], tol))
            if hits.size:
                blocks[int(hits[0])].append(p)
                continue
        blocks.append([p])
        reps.append(values[p])
    return JointPartition(tau=tau, blocks=tuple(tuple(b) for b in blocks))


@dataclass(frozen=True)
class AidingStructure:
    """对角结构 (T̃, T̃, f(T̃)) 经置换后的形式

    前 2·n1 个槽位是两份 n1 个不同值，其余槽位由 mapping 指向 T̃ 中的某个值；
    permutation[p] 给出最终位置 p 取用的槽位。
    """
    n: int
    tau: int
    n1: int
    mapping: Tuple[int, ...]
    permutation: Tuple[int, ...]
    values: Optional[Tuple[complex, ...]] = None

    def __post_init__(self):
        if not 1 <= self.n1 <= self.n:
            raise InfeasibleStructureError(f"不同值个数 n1={self.n1} 必须在 [1, n={self.n}] 内")
        if 2 * self.n1 > self.tau:
            raise InfeasibleStructureError(f"τ={self.tau} 容纳不下 2·n1={2 * self.n1} 个成对位置")
        if len(self.mapping) != self.tau - 2 * self.n1:
            raise InfeasibleStructureError(f"映射长度 {len(self.mapping)} 应为 {self.tau - 2 * self.n1}")
        if any(not 0 <= m < self.n1 for m in self.mapping):
            raise InfeasibleStructureError(f"映射取值越界: {self.mapping}")
        if sorted(self.permutation) != list(range(self.tau)):
            raise InfeasibleStructureError(f"非法置换: {self.permutation}")
        if self.values is not None and len(self.values) != self.n1:
            raise InfeasibleStructureError(f"给定 {len(self.values)} 个值，需要 n1={self.n1} 个")

    def labels(self) -> Tuple[int, ...]:
        slots = list(range(self.n1)) * 2 + list(self.mapping)
        return tuple(slots[self.permutation[p]] for p in range(self.tau))

    def assemble(self, values: Optional[Sequence[complex]] = None) -> DiagonalMatrix:
        values = values if values is not None else self.values
        if values is None or len(values) != self.n1:
            raise InfeasibleStructureError(f"组装需要 n1={self.n1} 个值")
        values = np.asarray(values, dtype=np.complex128)
        return DiagonalMatrix(values[list(self.labels())])

    @classmethod
    def uniform(cls, n: int, tau: int, value: Optional[complex] = None) -> 'AidingStructure':
        """T = κ·I"""
        return cls(n=n, tau=tau, n1=1, mapping=(0,) * max(tau - 2, 0), permutation=tuple(range(tau)),
                   values=None if value is None else (complex(value),))

    @classmethod
    def from_labels(cls, labels: Sequence[int], n: int,
                    values: Optional[Sequence[complex]] = None) -> 'AidingStructure':
        """按位置标签构造；每个标签至少出现两次，按首次出现顺序重新编号"""
        tau = len(labels)
        relabel: Dict[int, int] = {}
        for v in labels:
            relabel.setdefault(v, len(relabel))
        canon = [relabel[v] for v in labels]
        n1 = len(relabel)
        counts = np.bincount(canon, minlength=n1) if tau else np.zeros(0, dtype=int)
        if tau == 0 or np.any(counts < 2):
            raise InfeasibleStructureError(f"每个取值至少出现两次: 标签 {list(labels)}")

        first, second, rest = {}, {}, []
        for p, v in enumerate(canon):
            if v not in first:
                first[v] = p
            elif v not in second:
                second[v] = p
            else:
                rest.append(p)
        permutation = [0] * tau
        for v in range(n1):
            permutation[first[v]] = v
            permutation[second[v]] = n1 + v
        for slot, p in enumerate(rest):
            permutation[p] = 2 * n1 + slot
        mapping = tuple(canon[p] for p in rest)
        if values is not None:
            values = tuple(complex(v) for v in values)
        return cls(n=n, tau=tau, n1=n1, mapping=mapping, permutation=tuple(permutation), values=values)

    @classmethod
    def balanced(cls, n: int, tau: int, distinct_values: int = 1,
                 values: Optional[Sequence[complex]] = None) -> 'AidingStructure':
        """位置 p 取第 p mod n1 个值"""
        if distinct_values < 1 or 2 * distinct_values > tau:
            raise InfeasibleStructureError(f"τ={tau} 无法容纳 {distinct_values} 个各出现两次的取值")
        return cls.from_labels([p % distinct_values for p in range(tau)], n, values)


@dataclass
class SynthesisResult:
    channel: ExtendedChannel
    structure: AidingStructure
    conditions: List[AidingCondition]
    verification: VerificationResult
    attempts: int


@dataclass
class MatchReport:
    epsilon: float
    tau: int
    groups: List[Tuple[int, ...]] = field(default_factory=list)
    match_rate: float = 0.0
    worst_residual: float = 0.0
    consumed: int = 0

    @property
    def exhausted(self) -> bool:
        return not self.groups


class ChannelAidingVerifier:
    """信道辅助条件处理器
    功能：
    1. 校验条件集合能否由 n 维波束满足
    2. 合成满足条件的扩展信道
    3. 在时隙流中寻找近似满足条件的时隙组合
    """

    def __init__(self, config):
        self.config = config.aiding_config
        self.eq_tolerance = config.channel_config['eq_tolerance']
        self.bounds = ChannelBounds.from_config(config)
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------
    def verify_conditions(self, conditions: Sequence[ConditionLike], n: int,
                          eps: Optional[float] = None, tau: Optional[int] = None) -> VerificationResult:
        """可行当且仅当联合划分每块至少两个位置且块数不超过 n"""
        tol = self.eq_tolerance if eps is None else eps
        partition = joint_partition(conditions, tol, tau)
        singletons = [b[0] + 1 for b in partition.blocks if len(b) < 2]
        if not conditions:
            reason = "没有需要满足的条件"
            feasible = True
        elif singletons:
            reason = f"位置 {singletons} 的取值在所有条件中没有重复"
            feasible = False
        elif len(partition.blocks) > n:
            reason = f"联合划分有 {len(partition.blocks)} 块，超过 n={n}"
            feasible = False
        else:
            reason = f"联合划分 {list(partition.sizes)} 满足要求"
            feasible = True
        self.logger.debug(f"条件校验: {len(conditions)} 个条件, {reason}")
        return VerificationResult(feasible=feasible, partition=partition, reason=reason)

    # ------------------------------------------------------------------
    def _block_values(self, structure: AidingStructure, R: np.ndarray, exponent: int,
                      rng: np.random.Generator, bounds: ChannelBounds) -> np.ndarray:
        """为每块选 κ，使求出的信道幅度在块内几何平均等于 √(g_min·g_max)"""
        labels = np.array(structure.labels())
        log_c = np.log(bounds.center)
        values = np.empty(structure.n1, dtype=np.complex128)
        for b in range(structure.n1):
            mean_log = float(np.mean(np.log(np.abs(R[labels == b]))))
            magnitude = np.exp(mean_log + exponent * log_c)
            values[b] = magnitude * np.exp(1j * rng.uniform(0.0, 2 * np.pi))
        return values

    def synthesize_aided_channel(self, network: DemandNetwork, structure: AidingStructure,
                                 seed, bounds: Optional[ChannelBounds] = None) -> SynthesisResult:
        """每个基本环只改写其非树边上的 H^[i,target]，使环上 T 等于结构化目标矩阵"""
        bounds = bounds or self.bounds
        rng = np.random.default_rng(seed)
        tau = structure.tau
        budget = self.config['retry_budget']
        self.logger.info(f"开始合成辅助信道: τ={tau}, n={structure.n}, n1={structure.n1}")

        for attempt in range(1, budget + 1):
            base = random_channel(tau, network.K, network.N, rng, bounds)
            graph = build_alignment_graph(network, base)
            conditions = cycle_conditions(graph)
            if not conditions:
                verification = self.verify_conditions([], structure.n, tau=tau)
                return SynthesisResult(base, structure, [], verification, attempt)

            designated = {(c.receiver, c.target) for c in conditions}
            factor_count = max(sum(abs(e) for _, e in c.factors) for c in conditions)
            half_width = np.log(bounds.g_max / bounds.g_min) / (4 * factor_count)
            tensor = base.tensor()
            involved = set()
            for edge in graph.edges:
                involved.add((edge.receiver, edge.source))
                involved.add((edge.receiver, edge.target))
            for j, k in sorted(involved - designated):
                tensor[j - 1, k - 1] = draw_narrow(rng, tau, bounds, half_width)

            channel = ExtendedChannel.from_tensor(tensor)
            for condition in cycle_conditions(build_alignment_graph(network, channel)):
                link = (condition.receiver, condition.target)
                exponent = condition.factor_map[link]
                h = channel.H(*link).entries
                rest = condition.T.entries / h ** exponent
                if structure.values is not None:
                    values = np.asarray(structure.values, dtype=np.complex128)
                else:
                    values = self._block_values(structure, rest, exponent, rng, bounds)
                target = structure.assemble(values).entries
                tensor[link[0] - 1, link[1] - 1] = (target / rest) ** exponent

            if not bounds.contains(tensor):
                self.logger.debug(f"第 {attempt} 次合成幅度越界，重新抽取")
                continue

            channel = ExtendedChannel.from_tensor(tensor, bounds)
            conditions = cycle_conditions(build_alignment_graph(network, channel))
            verification = self.verify_conditions(conditions, structure.n, tau=tau)
            if not verification.feasible:
                self.logger.error(f"[channel-aiding] 合成后条件仍不满足: {verification.reason}")
                raise InfeasibleStructureError(f"[channel-aiding] 合成后条件仍不满足: {verification.reason}")
            self.logger.info(f"合成完成: {len(conditions)} 个条件, 第 {attempt} 次尝试, {verification.reason}")
            return SynthesisResult(channel, structure, conditions, verification, attempt)

        self.logger.error(f"[channel-aiding] {budget} 次尝试后合成信道仍超出幅度范围")
        raise InfeasibleStructureError(f"[channel-aiding] {budget} 次尝试后合成信道仍超出幅度范围")

    # ------------------------------------------------------------------
    def match_slots(self, stream: ExtendedChannel, network: DemandNetwork, n: int, tau: int,
                    eps: Optional[float] = None, budget: Optional[int] = None,
                    progress: bool = False) -> MatchReport:
        """在自然时隙流中组装 τ 个时隙，使条件在 ε 相对容差内满足

        每个时隙按条件取值贪心聚类（块首为代表元）；一旦不超过 n 个、每个至少两个时隙的簇
        能凑满 τ 个时隙就输出一组，已用簇剩余的时隙重新聚类。
        """
        eps = self.config['match_epsilon'] if eps is None else eps
        budget = self.config['match_budget'] if budget is None else budget
        if stream.tau == 0:
            raise ValueError("时隙流为空")
        if tau < 2:
            raise InfeasibleStructureError(f"τ={tau} 时无法构成至少两个时隙的块")

        conditions = cycle_conditions(build_alignment_graph(network, stream))
        if conditions:
            values = np.stack([c.T.entries for c in conditions], axis=1)
        else:
            values = np.zeros((stream.tau, 0), dtype=np.complex128)
        limit = min(stream.tau, budget)
        self.logger.info(f"开始时隙匹配: {limit} 个时隙, {len(conditions)} 个条件, τ={tau}, ε={eps}")

        clusters: List[List[int]] = []
        report = MatchReport(epsilon=eps, tau=tau)

        def place(slot: int) -> None:
            if clusters:
                reps = np.stack([values[c[0]] for c in clusters])
                hits = np.flatnonzero(_close(reps, values[slot], eps))
                if hits.size:
                    clusters[int(hits[0])].append(slot)
                    return
            clusters.append([slot])

        for t in tqdm(range(limit), desc="匹配时隙", disable=not progress):
            place(t)
            plan = self._fill(clusters, n, tau)
            if plan is None:
                continue
            group: List[int] = []
            leftovers: List[int] = []
            for index in sorted(plan):
                members = clusters[index]
                group.extend(members[:plan[index]])
                leftovers.extend(members[plan[index]:])
            for index in sorted(plan, reverse=True):
                del clusters[index]
            for slot in sorted(leftovers):
                place(slot)

            residual = 0.0
            if values.shape[1]:
                pos = 0
                for index in sorted(plan):
                    block = group[pos:pos + plan[index]]
                    rep = values[block[0]]
                    dev = np.abs(values[block] - rep) / np.maximum(np.abs(rep), np.finfo(float).tiny)
                    residual = max(residual, float(dev.max()))
                    pos += plan[index]
            report.worst_residual = max(report.worst_residual, residual)
            report.groups.append(tuple(group))

        report.consumed = limit
        usable = (limit // tau) * tau
        matched = len(report.groups) * tau
        report.match_rate = matched / usable if usable else 0.0
        if report.exhausted:
            self.logger.warning(f"时隙预算 {limit} 用尽，ε={eps} 下未找到满足条件的组合")
        else:
            self.logger.info(f"时隙匹配完成: {len(report.groups)} 组, 匹配率 {report.match_rate:.4f}, "
                             f"最大残差 {report.worst_residual:.3e}")
        return report

    @staticmethod
    def _fill(clusters: List[List[int]], n: int, tau: int) -> Optional[Dict[int, int]]:
        """选不超过 n 个簇凑满 τ 个时隙，每簇至少取两个；返回 {簇下标: 取用数}"""
        eligible = sorted((i for i, c in enumerate(clusters) if len(c) >= 2),
                          key=lambda i: (-len(clusters[i]), i))[:n]
        if sum(len(clusters[i]) for i in eligible) < tau:
            return None
        plan: Dict[int, int] = {}
        remaining = tau
        for i in eligible:
            if remaining == 0:
                break
            take = min(len(clusters[i]), remaining)
            if remaining - take == 1:
                take -= 1
            if take < 2:
                continue
            plan[i] = take
            remaining -= take
        return plan if remaining == 0 else None
