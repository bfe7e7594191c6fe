import logging

import numpy as np
import pytest

from channels.alignment_graph import build_alignment_graph, cycle_conditions
from channels.diagonal import ChannelShapeError, DiagonalMatrix
from channels.extended_channel import (
    ChannelBounds, ExtendedChannel, constant_stream, continuous_stream, quantized_stream, random_channel
)
from config.config import Config
from network.demand_network import make_network
from processors.channel_aiding import (
    AidingStructure, ChannelAidingVerifier, InfeasibleStructureError, joint_partition
)

# 设置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

BOUNDS = ChannelBounds(0.5, 2.0)
SIX_BY_THREE = make_network(6, [(1, 4), (2, 5), (3, 6)])
FIVE_BY_THREE = make_network(5, [(1, 5), (1, 2), (3, 4, 5)])
THREE_USER_IC = make_network(3, [(1,), (2,), (3,)])


@pytest.fixture(scope="module")
def verifier():
    return ChannelAidingVerifier(Config())


def _conditions(network, channel):
    return cycle_conditions(build_alignment_graph(network, channel))


# ---------------------------------------------------------------------- 条件校验

def test_scalar_condition_is_feasible(verifier):
    result = verifier.verify_conditions([DiagonalMatrix.scalar(0.7 + 0.2j, 3)], n=1)
    assert result.feasible
    assert result.partition.sizes == (3,)


def test_distinct_entries_are_infeasible(verifier):
    result = verifier.verify_conditions([DiagonalMatrix([1, 2, 3])], n=1)
    assert not result.feasible
    assert result.partition.sizes == (1, 1, 1)


def test_two_value_pattern(verifier):
    a, b = 1.3 - 0.4j, -0.2 + 0.9j
    T = DiagonalMatrix([a, b, a, b, a, a])
    result = verifier.verify_conditions([T], n=2)
    assert result.feasible
    assert sorted(result.partition.sizes) == [2, 4]
    assert not verifier.verify_conditions([T], n=1).feasible


def test_joint_partition_intersects_conditions(verifier):
    """两个条件各自可行，但联合划分出现单元素块"""
    T1 = DiagonalMatrix([1, 1, 2, 2])
    T2 = DiagonalMatrix([5, 6, 6, 6])
    assert verifier.verify_conditions([T1], n=2).feasible
    assert not verifier.verify_conditions([T2], n=2).feasible
    partition = joint_partition([T1, T2], tol=1e-9)
    assert partition.blocks == ((0,), (1,), (2, 3))
    assert not verifier.verify_conditions([T1, T2], n=3).feasible


@pytest.mark.parametrize("tau, n", [(3, 1), (6, 2)])
def test_generic_channels_are_infeasible(verifier, tau, n):
    for seed in range(100):
        channel = random_channel(tau, 6, 3, seed=seed, bounds=BOUNDS)
        result = verifier.verify_conditions(_conditions(SIX_BY_THREE, channel), n=n)
        assert not result.feasible, seed


def test_verify_size_mismatch(verifier):
    with pytest.raises(ChannelShapeError):
        verifier.verify_conditions([DiagonalMatrix([1, 1]), DiagonalMatrix([1, 1, 1])], n=1)


def test_empty_condition_set(verifier):
    result = verifier.verify_conditions([], n=1, tau=2)
    assert result.feasible
    assert result.partition.tau == 2


# ---------------------------------------------------------------------- 结构

def test_structure_from_labels_and_assemble():
    structure = AidingStructure.from_labels([7, 3, 7, 3, 7, 7], n=2)
    assert structure.n1 == 2
    assert structure.labels() == (0, 1, 0, 1, 0, 0)
    assembled = structure.assemble([2, 5j])
    assert np.array_equal(assembled.entries, np.array([2, 5j, 2, 5j, 2, 2], dtype=complex))


def test_structure_constructors():
    assert AidingStructure.uniform(1, 3).labels() == (0, 0, 0)
    assert AidingStructure.balanced(2, 6, 2).labels() == (0, 1, 0, 1, 0, 1)
    assert AidingStructure.balanced(3, 6, 3).labels() == (0, 1, 2, 0, 1, 2)


@pytest.mark.parametrize("build", [
    lambda: AidingStructure.uniform(1, 1),
    lambda: AidingStructure.balanced(1, 1),
    lambda: AidingStructure.from_labels([0, 1, 0], n=2),
    lambda: AidingStructure.from_labels([0, 1, 0, 1], n=1),
    lambda: AidingStructure.balanced(2, 6, 4),
])
def test_structure_rejects_infeasible_shapes(build):
    with pytest.raises(InfeasibleStructureError):
        build()


# ---------------------------------------------------------------------- 合成

def test_synthesize_six_by_three(verifier):
    """6×3，n=1：四个条件都等于 κ·I₃"""
    result = verifier.synthesize_aided_channel(SIX_BY_THREE, AidingStructure.uniform(1, 3), seed=7)
    assert result.verification.feasible
    assert len(result.conditions) == 4
    assert BOUNDS.contains(result.channel.tensor())
    for condition in _conditions(SIX_BY_THREE, result.channel):
        assert condition.T.is_scalar(1e-12)


def test_synthesize_with_prescribed_value(verifier):
    structure = AidingStructure.uniform(1, 3, value=1.0)
    result = verifier.synthesize_aided_channel(SIX_BY_THREE, structure, seed=3, bounds=ChannelBounds(0.01, 100.0))
    for condition in result.conditions:
        assert condition.T.isclose(DiagonalMatrix.identity(3), 1e-12)


def test_synthesize_five_by_three(verifier):
    result = verifier.synthesize_aided_channel(FIVE_BY_THREE, AidingStructure.uniform(1, 5), seed=2)
    assert result.verification.feasible
    assert len(result.conditions) == 1
    H = result.channel.H
    closed_form = H(2, 3).inverse() @ H(2, 4) @ H(1, 4).inverse() @ H(1, 3)
    assert closed_form.is_scalar(1e-12)


def test_synthesize_two_values(verifier):
    structure = AidingStructure.balanced(2, 6, 2)
    result = verifier.synthesize_aided_channel(SIX_BY_THREE, structure, seed=11)
    assert result.verification.feasible
    assert result.verification.partition.blocks == ((0, 2, 4), (1, 3, 5))


def test_perturbed_synthesis_breaks_condition(verifier):
    result = verifier.synthesize_aided_channel(SIX_BY_THREE, AidingStructure.uniform(1, 3), seed=5)
    link = result.conditions[0].factors[0][0]
    tensor = result.channel.tensor()
    tensor[link[0] - 1, link[1] - 1, 1] *= 1.3
    perturbed = ExtendedChannel.from_tensor(tensor)
    assert not verifier.verify_conditions(_conditions(SIX_BY_THREE, perturbed), n=1).feasible


def test_synthesize_is_reproducible(verifier):
    a = verifier.synthesize_aided_channel(FIVE_BY_THREE, AidingStructure.uniform(1, 5), seed=9)
    b = verifier.synthesize_aided_channel(FIVE_BY_THREE, AidingStructure.uniform(1, 5), seed=9)
    assert np.array_equal(a.channel.tensor(), b.channel.tensor())


# ---------------------------------------------------------------------- 时隙匹配

def test_match_constant_stream(verifier):
    stream = constant_stream(99, 6, 3, seed=1, bounds=BOUNDS)
    for eps in [1e-1, 1e-2, 1e-3, 0.0]:
        report = verifier.match_slots(stream, SIX_BY_THREE, n=1, tau=3, eps=eps)
        assert report.match_rate == 1.0
        assert len(report.groups) == 33
        assert report.worst_residual == 0.0


def test_match_continuous_stream_exact(verifier):
    stream = continuous_stream(500, 3, 3, seed=2, bounds=BOUNDS)
    report = verifier.match_slots(stream, THREE_USER_IC, n=1, tau=2, eps=0.0)
    assert report.exhausted
    assert report.match_rate == 0.0


def test_match_rate_grows_with_tolerance(verifier):
    stream = quantized_stream(3000, 3, 3, seed=4, bounds=BOUNDS, levels=8)
    rates = {}
    for eps in [1e-1, 1e-2, 1e-3]:
        report = verifier.match_slots(stream, THREE_USER_IC, n=1, tau=2, eps=eps)
        rates[eps] = report.match_rate
        logger.info(f"ε={eps}: 匹配率 {report.match_rate:.4f}, 最大残差 {report.worst_residual:.3e}")
        assert report.worst_residual <= eps / (1 - eps)
    assert rates[1e-1] >= rates[1e-2] >= rates[1e-3]
    assert rates[1e-1] > rates[1e-3]


def test_matched_groups_pass_verification(verifier):
    stream = quantized_stream(2000, 3, 3, seed=6, bounds=BOUNDS, levels=4)
    eps = 1e-6
    report = verifier.match_slots(stream, THREE_USER_IC, n=1, tau=2, eps=eps)
    assert not report.exhausted
    for group in report.groups:
        extension = stream.select_slots(group)
        assert verifier.verify_conditions(_conditions(THREE_USER_IC, extension), n=1, eps=eps).feasible


def test_match_budget_limits_consumption(verifier):
    stream = constant_stream(100, 3, 3, seed=1, bounds=BOUNDS)
    report = verifier.match_slots(stream, THREE_USER_IC, n=1, tau=2, budget=10)
    assert report.consumed == 10
    assert len(report.groups) == 5


def test_match_rejects_short_extension(verifier):
    stream = constant_stream(10, 3, 3, seed=1, bounds=BOUNDS)
    with pytest.raises(InfeasibleStructureError):
        verifier.match_slots(stream, THREE_USER_IC, n=1, tau=1)
