# network/demand_network.py
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class NetworkValidationError(ValueError):
    """需求网络结构不合法"""


@dataclass(frozen=True)
class DemandNetwork:
    """单天线干扰网络的消息需求结构

    K 个发射机、N 个接收机，demands[j-1] 为接收机 j 请求的消息集合 S_j（1 起编号）。
    """
    K: int
    N: int
    demands: Tuple[Tuple[int, ...], ...]
    inactive: FrozenSet[int] = field(default_factory=frozenset)

    @property
    def active(self) -> Tuple[int, ...]:
        return tuple(k for k in range(1, self.K + 1) if k not in self.inactive)

    def demand(self, receiver: int) -> Tuple[int, ...]:
        if not 1 <= receiver <= self.N:
            raise NetworkValidationError(f"接收机编号越界: {receiver} (N={self.N})")
        return self.demands[receiver - 1]


@dataclass(frozen=True)
class PrimeReceiverSet:
    """主接收机集合：请求集合不被其它请求集合包含的接收机"""
    indices: Tuple[int, ...]

    @property
    def G(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class DemandProfile:
    """需求对称性统计"""
    beta: Optional[int]
    request_counts: Dict[int, int]
    symmetric: bool


def validate(network: DemandNetwork) -> DemandNetwork:
    """校验网络并规范化需求集合，标记未被任何接收机请求的发射机"""
    if network.K <= 0 or network.N <= 0:
        raise NetworkValidationError(f"K 和 N 必须为正整数: K={network.K}, N={network.N}")
    if len(network.demands) != network.N:
        raise NetworkValidationError(
            f"需求集合数量 {len(network.demands)} 与接收机数量 N={network.N} 不一致")

    canonical = []
    for j, demand in enumerate(network.demands, 1):
        members = sorted(set(int(k) for k in demand))
        if not members:
            raise NetworkValidationError(f"接收机 {j} 的需求集合为空")
        for k in members:
            if not 1 <= k <= network.K:
                raise NetworkValidationError(f"接收机 {j} 的需求包含越界编号 {k} (K={network.K})")
        canonical.append(tuple(members))

    requested = set().union(*canonical)
    inactive = frozenset(k for k in range(1, network.K + 1) if k not in requested)
    if inactive:
        logger.info(f"发射机 {sorted(inactive)} 未被任何接收机请求，标记为非活跃")
    return DemandNetwork(K=network.K, N=network.N, demands=tuple(canonical), inactive=inactive)


def make_network(K: int, demands: Iterable[Iterable[int]]) -> DemandNetwork:
    demands = [tuple(d) for d in demands]
    return validate(DemandNetwork(K=K, N=len(demands), demands=tuple(demands)))


def prime_receivers(network: DemandNetwork) -> PrimeReceiverSet:
    """返回需求集合极大的接收机；相同需求集合只保留编号最小的一个"""
    sets = [frozenset(d) for d in network.demands]
    primes = []
    for j, s_j in enumerate(sets):
        if not s_j:
            continue
        dominated = False
        for i, s_i in enumerate(sets):
            if i == j:
                continue
            if s_j < s_i or (s_j == s_i and i < j):
                dominated = True
                break
        if not dominated:
            primes.append(j + 1)
    return PrimeReceiverSet(indices=tuple(primes))


def interference_set(network: DemandNetwork, receiver: int) -> FrozenSet[int]:
    """S̄_j：活跃发射机中不被接收机 j 请求的部分"""
    return frozenset(network.active) - frozenset(network.demand(receiver))


def restrict(network: DemandNetwork, active_transmitters: Iterable[int]) -> DemandNetwork:
    """构造只保留指定发射机的子网络（剥离轮次使用），需求集合可以为空"""
    keep = frozenset(active_transmitters)
    demands = tuple(tuple(k for k in d if k in keep) for d in network.demands)
    inactive = frozenset(k for k in range(1, network.K + 1) if k not in keep)
    return DemandNetwork(K=network.K, N=network.N, demands=demands, inactive=inactive)


def demand_profile(network: DemandNetwork) -> DemandProfile:
    primes = prime_receivers(network)
    sizes = {len(network.demand(j)) for j in primes.indices}
    counts = {k: 0 for k in network.active}
    for j in primes.indices:
        for k in network.demand(j):
            counts[k] += 1
    symmetric = len(sizes) == 1 and len(set(counts.values())) == 1
    beta = next(iter(sizes)) if len(sizes) == 1 else None
    return DemandProfile(beta=beta, request_counts=counts, symmetric=symmetric)


def random_network(K: int, N: int, rng: np.random.Generator,
                   min_demand: int = 1, max_demand: Optional[int] = None,
                   max_tries: int = 1000) -> DemandNetwork:
    """随机生成所有发射机都活跃的需求网络"""
    max_demand = max_demand or K
    if not 1 <= min_demand <= max_demand <= K:
        raise NetworkValidationError(f"需求规模范围不合法: [{min_demand}, {max_demand}], K={K}")
    for _ in range(max_tries):
        demands = []
        for _ in range(N):
            size = int(rng.integers(min_demand, max_demand + 1))
            demands.append(tuple(sorted(int(k) + 1 for k in rng.choice(K, size=size, replace=False))))
        if set().union(*demands) == set(range(1, K + 1)):
            return validate(DemandNetwork(K=K, N=N, demands=tuple(demands)))
    raise NetworkValidationError(f"{max_tries} 次尝试内未能生成全部活跃的网络 (K={K}, N={N})")
