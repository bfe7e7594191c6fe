import logging
from pathlib import Path

import numpy as np
import pytest

from config.scenario import ScenarioError, format_scenario, load_scenario, parse_scenario
from network.demand_network import (
    DemandNetwork, NetworkValidationError, demand_profile, interference_set, make_network,
    prime_receivers, random_network, restrict, validate
)

# 设置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

SCENARIOS = Path(__file__).parent / "scenarios"


def test_validate_marks_unrequested_transmitters_inactive():
    """测试未被请求的发射机标记为非活跃"""
    network = make_network(4, [(2, 1), (1, 2, 2)])
    assert network.demands == ((1, 2), (1, 2))
    assert network.inactive == frozenset({3, 4})
    assert network.active == (1, 2)


@pytest.mark.parametrize("K, demands", [
    (3, [()]),
    (3, [(1, 4)]),
    (3, [(0,)]),
    (0, [(1,)]),
])
def test_validate_rejects_bad_networks(K, demands):
    with pytest.raises(NetworkValidationError):
        make_network(K, demands)


def test_validate_rejects_count_mismatch():
    with pytest.raises(NetworkValidationError):
        validate(DemandNetwork(K=3, N=2, demands=((1,),)))


def test_validate_rejects_no_receivers():
    with pytest.raises(NetworkValidationError):
        validate(DemandNetwork(K=3, N=0, demands=()))
    with pytest.raises(NetworkValidationError):
        make_network(3, [])


def test_random_networks_structural_properties():
    """随机网络：重复校验不变、主接收机互不包含、S_j 与 S̄_j 划分活跃发射机"""
    rng = np.random.default_rng(11)
    for trial in range(200):
        K = int(rng.integers(2, 8))
        N = int(rng.integers(1, 6))
        network = random_network(K, N, rng)
        assert validate(network) == network, trial

        primes = prime_receivers(network)
        assert primes.G >= 1
        prime_sets = [frozenset(network.demand(j)) for j in primes.indices]
        for a, s_a in enumerate(prime_sets):
            for b, s_b in enumerate(prime_sets):
                if a != b:
                    assert not s_a <= s_b, (trial, primes.indices)
        for j in range(1, N + 1):
            assert any(frozenset(network.demand(j)) <= s for s in prime_sets), (trial, j)

        active = frozenset(network.active)
        for j in range(1, N + 1):
            requested = frozenset(network.demand(j))
            others = interference_set(network, j)
            assert requested | others == active, (trial, j)
            assert not requested & others, (trial, j)


def test_validate_is_idempotent_with_inactive_transmitters():
    network = make_network(5, [(3, 1), (1,)])
    assert validate(network) == network
    assert network.inactive == frozenset({2, 4, 5})


def test_prime_receivers():
    """测试主接收机：被包含的集合与重复集合只保留一个"""
    network = make_network(4, [(1, 2), (1,), (1, 2), (3, 4)])
    assert prime_receivers(network).indices == (1, 4)
    assert prime_receivers(network).G == 2


def test_prime_receivers_five_by_three():
    network = make_network(5, [(1, 5), (1, 2), (3, 4, 5)])
    assert prime_receivers(network).G == 3
    assert prime_receivers(network).indices == (1, 2, 3)


def test_interference_set_five_by_three():
    network = make_network(5, [(1, 5), (1, 2), (3, 4, 5)])
    assert interference_set(network, 2) == frozenset({3, 4, 5})
    with pytest.raises(NetworkValidationError):
        interference_set(network, 4)


def test_interference_sets_six_by_three():
    network = make_network(6, [(1, 4), (2, 5), (3, 6)])
    assert interference_set(network, 1) == frozenset({2, 3, 5, 6})
    assert interference_set(network, 3) == frozenset({1, 2, 4, 5})


def test_restrict_keeps_shape_and_allows_empty_demands():
    network = make_network(5, [(1, 5), (1, 2), (3, 4, 5)])
    sub = restrict(network, [1, 2])
    assert sub.K == 5 and sub.N == 3
    assert sub.demands == ((1,), (1, 2), ())
    assert interference_set(sub, 3) == frozenset({1, 2})
    assert interference_set(sub, 1) == frozenset({2})


def test_demand_profile_symmetric_and_not():
    symmetric = demand_profile(make_network(6, [(1, 4), (2, 5), (3, 6)]))
    assert symmetric.symmetric and symmetric.beta == 2
    irregular = demand_profile(make_network(5, [(1, 5), (1, 2), (3, 4, 5)]))
    assert not irregular.symmetric


def test_random_network_is_reproducible_and_fully_active():
    a = random_network(6, 4, np.random.default_rng(5), max_demand=4)
    b = random_network(6, 4, np.random.default_rng(5), max_demand=4)
    assert a == b
    assert not a.inactive
    assert all(1 <= len(d) <= 4 for d in a.demands)


def test_parse_scenario_round_trip():
    network = make_network(5, [(1, 5), (1, 2), (3, 4, 5)])
    scenario = parse_scenario(format_scenario(network, n=1, seed=4))
    assert scenario.network == network
    assert scenario.seed == 4 and scenario.n == 1


@pytest.mark.parametrize("text", [
    "K=2\nN=1\n",
    "K=2\nN=1\nS1=1,2\nS2=1\n",
    "K=2\nN=1\nS1=1,2\ncolor=blue\n",
    "K=2\nN=1\nS1=1,x\n",
    "K=2\nN=1\nS1=1,2\nn=0\n",
    "K=2\nN=1\nS1=1,2\nn=1\ndistinct_values=2\n",
    "K=2\nN=1\nS1=3\n",
])
def test_parse_scenario_errors(text):
    with pytest.raises(ScenarioError):
        parse_scenario(text)


def test_parse_scenario_complex_targets_and_paths(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("K=3\nN=3\nS1=1\nS2=2\nS3=3\nn=2\ndistinct_values=2\n"
                    "T_target=1+1j, 2-0.5j\nslot_stream=stream.txt  # 相对路径\n", encoding='utf-8')
    scenario = load_scenario(path)
    assert scenario.name == "s"
    assert scenario.T_target == (1 + 1j, 2 - 0.5j)
    assert scenario.slot_stream == tmp_path / "stream.txt"


def test_fixture_scenarios_load():
    for name in ["six_by_three", "six_by_three_n2", "five_by_three", "four_by_three", "mac", "three_user_ic"]:
        scenario = load_scenario(SCENARIOS / f"{name}.txt")
        logger.info(f"{name}: K={scenario.network.K}, N={scenario.network.N}")
        assert scenario.name == name
