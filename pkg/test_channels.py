import logging

import numpy as np
import pytest

from channels.alignment_graph import build_alignment_graph, cycle_conditions
from channels.diagonal import (
    ChannelShapeError, DiagonalMatrix, SingularChannelError, diag_equal, diag_inverse, diag_product
)
from channels.extended_channel import (
    ChannelBounds, ChannelBoundsError, ExtendedChannel, channel_product, draw_narrow,
    dump_channel, load_channel, quantized_stream, random_channel
)
from network.demand_network import DemandNetwork, make_network

# 设置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

BOUNDS = ChannelBounds(0.5, 2.0)
SIX_BY_THREE = make_network(6, [(1, 4), (2, 5), (3, 6)])
FIVE_BY_THREE = make_network(5, [(1, 5), (1, 2), (3, 4, 5)])


def k_user_ic(K):
    return make_network(K, [(i,) for i in range(1, K + 1)])


# ---------------------------------------------------------------------- 对角矩阵

def test_diag_product_and_inverse():
    a = DiagonalMatrix([2, 4])
    b = DiagonalMatrix([0.5, 0.25])
    assert diag_equal(diag_product(a, b), DiagonalMatrix.identity(2), 1e-15)
    assert diag_equal(diag_inverse(a), b, 1e-15)
    assert a.power(-2).isclose(DiagonalMatrix([0.25, 1 / 16]), 1e-15)


def test_diag_errors():
    with pytest.raises(SingularChannelError):
        DiagonalMatrix([1, 0]).inverse()
    with pytest.raises(ChannelShapeError):
        DiagonalMatrix([1, 2]) @ DiagonalMatrix([1, 2, 3])
    a = DiagonalMatrix([1, 2])
    with pytest.raises(AttributeError):
        a.entries = np.zeros(2)
    with pytest.raises(ValueError):
        a.entries[0] = 5


def test_diag_associativity_and_dense():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b, c = (DiagonalMatrix(rng.normal(size=4) + 1j * rng.normal(size=4)) for _ in range(3))
        assert ((a @ b) @ c).isclose(a @ (b @ c), 1e-12)
    dense = rng.normal(size=(4, 2))
    assert np.allclose(a @ dense, a.to_dense() @ dense)


def test_scalar_detection():
    assert DiagonalMatrix.scalar(3 - 1j, 5).is_scalar(1e-12)
    assert not DiagonalMatrix([1, 1, 1.01]).is_scalar(1e-3)


# ---------------------------------------------------------------------- 扩展信道

def test_bounds_validation():
    for g_min, g_max in [(0, 1), (2, 1), (-1, 1), (1, np.inf)]:
        with pytest.raises(ChannelBoundsError):
            ChannelBounds(g_min, g_max)


def test_random_channel_determinism_and_bounds():
    a = random_channel(3, 6, 3, seed=11, bounds=BOUNDS)
    b = random_channel(3, 6, 3, seed=11, bounds=BOUNDS)
    c = random_channel(3, 6, 3, seed=12, bounds=BOUNDS)
    assert np.array_equal(a.tensor(), b.tensor())
    assert BOUNDS.contains(a.tensor())
    assert not np.any(np.isclose(a.tensor(), c.tensor()))


def test_random_channel_draws_are_distinct():
    values = random_channel(1000, 1, 1, seed=3, bounds=BOUNDS).tensor().ravel()
    assert len(np.unique(values)) == values.size


def test_channel_rejects_out_of_bounds_and_missing_links():
    gains = {(1, 1): DiagonalMatrix([1.0]), (1, 2): DiagonalMatrix([5.0])}
    with pytest.raises(ChannelBoundsError):
        ExtendedChannel(1, 2, 1, gains, BOUNDS)
    with pytest.raises(ChannelShapeError):
        ExtendedChannel(1, 2, 1, {(1, 1): DiagonalMatrix([1.0])})


def test_draw_narrow_stays_inside_bounds():
    values = draw_narrow(np.random.default_rng(1), (500,), BOUNDS, half_width=10.0)
    assert BOUNDS.contains(values)


def test_quantized_stream_levels():
    stream = quantized_stream(400, 2, 2, seed=4, bounds=BOUNDS, levels=3)
    mags = np.unique(np.round(np.abs(stream.tensor()), 12))
    assert len(mags) <= 3
    with pytest.raises(ValueError):
        quantized_stream(10, 2, 2, seed=4, bounds=BOUNDS, levels=0)


def test_dump_load_is_lossless():
    channel = random_channel(4, 5, 3, seed=8, bounds=BOUNDS)
    restored = load_channel(dump_channel(channel), BOUNDS)
    assert np.array_equal(restored.tensor(), channel.tensor())


@pytest.mark.parametrize("lines", [
    [],
    ["X 1 1 1.0 0.0"],
    ["H 1 1 1.0"],
    ["H 1 1 1.0 0.0", "H 1 1 1.0 0.0"],
    ["H 1 1 1.0 0.0", "H 1 2 1.0 0.0 2.0 0.0"],
])
def test_load_channel_errors(lines):
    with pytest.raises(ChannelShapeError):
        load_channel(lines)


def test_select_slots():
    channel = random_channel(6, 2, 1, seed=9, bounds=BOUNDS)
    picked = channel.select_slots([4, 0])
    assert picked.tau == 2
    assert picked.H(1, 2).entries[0] == channel.H(1, 2).entries[4]


# ---------------------------------------------------------------------- 对齐图

def test_six_by_three_graph_counts():
    """6×3 网络：9 条边、6 个节点、1 个连通分量、4 个独立条件"""
    graph = build_alignment_graph(SIX_BY_THREE, random_channel(3, 6, 3, seed=1, bounds=BOUNDS))
    assert len(graph.edges) == 9
    assert graph.nodes == (1, 2, 3, 4, 5, 6)
    assert graph.n_components == 1
    assert len(graph.cycles) == 4
    assert graph.roots == (1,)


def test_single_receiver_tree():
    # 不经过 validate，发射机 2、3 保持活跃
    network = DemandNetwork(K=3, N=1, demands=((1,),))
    graph = build_alignment_graph(network, random_channel(2, 3, 1, seed=1, bounds=BOUNDS))
    assert len(graph.edges) == 1
    assert graph.cycles == ()


@pytest.mark.parametrize("K", [3, 4, 5, 6])
def test_k_user_ic_cycle_count(K):
    graph = build_alignment_graph(k_user_ic(K), random_channel(2, K, K, seed=K, bounds=BOUNDS))
    assert len(graph.edges) == K * (K - 2)
    assert len(graph.cycles) == len(graph.edges) - len(graph.nodes) + graph.n_components
    assert len(graph.cycles) == K * K - 3 * K + 1


def test_topology_is_channel_independent():
    a = build_alignment_graph(FIVE_BY_THREE, random_channel(5, 5, 3, seed=1, bounds=BOUNDS))
    b = build_alignment_graph(FIVE_BY_THREE, random_channel(5, 5, 3, seed=2, bounds=BOUNDS))
    assert [(e.receiver, e.source, e.target) for e in a.edges] == [(e.receiver, e.source, e.target) for e in b.edges]
    assert a.cycles == b.cycles


def test_identity_channel_gives_identity_conditions():
    channel = ExtendedChannel.from_tensor(np.ones((3, 6, 3), dtype=complex))
    for condition in cycle_conditions(build_alignment_graph(SIX_BY_THREE, channel)):
        assert condition.T.isclose(DiagonalMatrix.identity(3), 1e-15)


def test_condition_matches_raw_factor_product():
    channel = random_channel(6, 6, 3, seed=21, bounds=BOUNDS)
    for condition in cycle_conditions(build_alignment_graph(SIX_BY_THREE, channel)):
        logger.info(f"条件 {condition.index}: {condition.describe()}")
        assert condition.T.isclose(channel_product(channel, condition.factor_map), 1e-12)


def test_five_by_three_condition_is_inverse_of_closed_form():
    channel = random_channel(5, 5, 3, seed=5, bounds=BOUNDS)
    conditions = cycle_conditions(build_alignment_graph(FIVE_BY_THREE, channel))
    assert len(conditions) == 1
    H = channel.H
    closed_form = H(2, 3).inverse() @ H(2, 4) @ H(1, 4).inverse() @ H(1, 3)
    assert conditions[0].T.isclose(closed_form.inverse(), 1e-12)


def test_three_user_ic_condition_is_inverse_of_classical():
    channel = random_channel(2, 3, 3, seed=6, bounds=BOUNDS)
    conditions = cycle_conditions(build_alignment_graph(k_user_ic(3), channel))
    assert len(conditions) == 1
    H = channel.H
    classical = H(3, 1).inverse() @ H(3, 2) @ H(1, 2).inverse() @ H(1, 3) @ H(2, 3).inverse() @ H(2, 1)
    assert conditions[0].T.isclose(classical.inverse(), 1e-12)


def test_dependent_six_by_three_product_identity():
    """T_{5,4} = T_{2,4} · T_{2,1}⁻¹ · T_{5,1}：第五个条件不独立"""
    channel = random_channel(3, 6, 3, seed=13, bounds=BOUNDS)
    common = {(1, 3): 1, (2, 3): -1}
    t21 = channel_product(channel, {**common, (3, 1): -1, (3, 2): 1, (1, 2): -1, (2, 1): 1})
    t24 = channel_product(channel, {**common, (3, 4): -1, (3, 2): 1, (1, 2): -1, (2, 4): 1})
    t51 = channel_product(channel, {**common, (3, 1): -1, (3, 5): 1, (1, 5): -1, (2, 1): 1})
    t54 = channel_product(channel, {**common, (3, 4): -1, (3, 5): 1, (1, 5): -1, (2, 4): 1})
    assert t54.isclose(t24 @ t21.inverse() @ t51, 1e-12)
