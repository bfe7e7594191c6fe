# channels/alignment_graph.py
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

import networkx as nx

from channels.diagonal import DiagonalMatrix
from channels.extended_channel import ExtendedChannel, Link
from network.demand_network import DemandNetwork, interference_set

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlignmentEdge:
    """接收机 receiver 处的对齐关系 V^[target] = label · V^[source]

    label = (H^[receiver,target])⁻¹ H^[receiver,source]，source 为该接收机干扰集的锚点。
    """
    index: int
    receiver: int
    source: int
    target: int
    label: DiagonalMatrix

    @property
    def factors(self) -> Dict[Link, int]:
        return {(self.receiver, self.target): -1, (self.receiver, self.source): 1}


@dataclass(frozen=True)
class FundamentalCycle:
    """非树边加树上路径构成的环；steps 为 (边编号, +1 正向 / -1 反向)"""
    index: int
    closing_edge: int
    base: int
    steps: Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class AidingCondition:
    """环上传递矩阵 T 必须把 V^[root] 的列空间映射回自身"""
    index: int
    root: int
    receiver: int
    target: int
    T: DiagonalMatrix
    factors: Tuple[Tuple[Link, int], ...]

    @property
    def factor_map(self) -> Dict[Link, int]:
        return dict(self.factors)

    def describe(self) -> str:
        terms = []
        for (i, k), e in self.factors:
            terms.append(f"H[{i},{k}]" if e == 1 else f"H[{i},{k}]^{e}")
        return ' '.join(terms) if terms else 'I'


@dataclass
class AlignmentGraph:
    tau: int
    nodes: Tuple[int, ...]
    edges: Tuple[AlignmentEdge, ...]
    graph: nx.MultiGraph
    roots: Tuple[int, ...]
    order: Tuple[int, ...]
    parent: Dict[int, Optional[Tuple[int, int]]]
    tree_edges: FrozenSet[int]
    cycles: Tuple[FundamentalCycle, ...] = field(default_factory=tuple)

    @property
    def n_components(self) -> int:
        return nx.number_connected_components(self.graph) if self.nodes else 0

    def root_of(self, node: int) -> int:
        while self.parent[node] is not None:
            node = self.parent[node][1]
        return node

    def path_to_root(self, node: int) -> List[int]:
        path = [node]
        while self.parent[node] is not None:
            node = self.parent[node][1]
            path.append(node)
        return path


def build_alignment_graph(network: DemandNetwork, channel: ExtendedChannel,
                          root: Optional[int] = None) -> AlignmentGraph:
    """每个 |S̄_i| ≥ 2 的接收机以 min(S̄_i) 为锚点连星形边，再用 BFS 生成树确定基本环"""
    edges: List[AlignmentEdge] = []
    node_set = set()
    for i in range(1, network.N + 1):
        interferers = sorted(interference_set(network, i))
        node_set.update(interferers)
        if len(interferers) < 2:
            continue
        anchor = interferers[0]
        for k in interferers[1:]:
            label = channel.H(i, k).inverse() @ channel.H(i, anchor)
            edges.append(AlignmentEdge(index=len(edges), receiver=i, source=anchor, target=k, label=label))

    nodes = tuple(sorted(node_set))
    graph = nx.MultiGraph()
    graph.add_nodes_from(nodes)
    for e in edges:
        graph.add_edge(e.source, e.target, key=e.index)

    if root is None:
        preferred = [k for k in network.demand(1) if k in node_set] if network.N >= 1 else []
        root = min(preferred) if preferred else (nodes[0] if nodes else None)
    elif root not in node_set:
        raise ValueError(f"指定的根 {root} 不在对齐图中")

    parent: Dict[int, Optional[Tuple[int, int]]] = {}
    order: List[int] = []
    roots: List[int] = []
    tree_edges = set()
    candidates = ([root] if root is not None else []) + [v for v in nodes if v != root]
    for start in candidates:
        if start in parent:
            continue
        roots.append(start)
        parent[start] = None
        queue = deque([start])
        while queue:
            u = queue.popleft()
            order.append(u)
            incident = sorted(graph.edges(u, keys=True), key=lambda item: item[2])
            for _, v, key in incident:
                if v not in parent:
                    parent[v] = (key, u)
                    tree_edges.add(key)
                    queue.append(v)

    result = AlignmentGraph(tau=channel.tau, nodes=nodes, edges=tuple(edges), graph=graph,
                            roots=tuple(roots), order=tuple(order), parent=parent,
                            tree_edges=frozenset(tree_edges))
    result.cycles = tuple(_fundamental_cycles(result))
    logger.debug(f"对齐图: {len(nodes)} 个节点, {len(edges)} 条边, "
                 f"{result.n_components} 个连通分量, {len(result.cycles)} 个基本环")
    return result


def _step(edge: AlignmentEdge, frm: int, to: int) -> int:
    if edge.source == frm and edge.target == to:
        return 1
    return -1


def _fundamental_cycles(graph: AlignmentGraph) -> List[FundamentalCycle]:
    cycles = []
    for e in graph.edges:
        if e.index in graph.tree_edges:
            continue
        a, b = e.source, e.target
        up_b = graph.path_to_root(b)
        up_a = graph.path_to_root(a)
        on_a = set(up_a)
        lca = next(v for v in up_b if v in on_a)

        steps = [(e.index, 1)]
        for v in up_b[:up_b.index(lca)]:
            key, p = graph.parent[v]
            steps.append((key, _step(graph.edges[key], v, p)))
        down = up_a[:up_a.index(lca)]
        for v in reversed(down):
            key, p = graph.parent[v]
            steps.append((key, _step(graph.edges[key], p, v)))
        cycles.append(FundamentalCycle(index=len(cycles), closing_edge=e.index, base=a, steps=tuple(steps)))
    return cycles


def cycle_transfer(graph: AlignmentGraph, cycle: FundamentalCycle) -> DiagonalMatrix:
    T = DiagonalMatrix.identity(graph.tau)
    for key, direction in cycle.steps:
        label = graph.edges[key].label
        T = T @ (label if direction > 0 else label.inverse())
    return T


def cycle_factors(graph: AlignmentGraph, cycle: FundamentalCycle) -> Dict[Link, int]:
    net: Dict[Link, int] = {}
    for key, direction in cycle.steps:
        for link, e in graph.edges[key].factors.items():
            net[link] = net.get(link, 0) + direction * e
    return {link: e for link, e in net.items() if e != 0}


def cycle_conditions(graph: AlignmentGraph) -> List[AidingCondition]:
    """每个基本环产生一个条件：T 是环上各边标签（反向取逆）的乘积"""
    conditions = []
    for cycle in graph.cycles:
        closing = graph.edges[cycle.closing_edge]
        factors = cycle_factors(graph, cycle)
        conditions.append(AidingCondition(
            index=cycle.index,
            root=graph.root_of(cycle.base),
            receiver=closing.receiver,
            target=closing.target,
            T=cycle_transfer(graph, cycle),
            factors=tuple(sorted(factors.items())),
        ))
    return conditions
