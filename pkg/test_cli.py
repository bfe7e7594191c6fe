import logging
from pathlib import Path

import pandas as pd

from channels.extended_channel import ChannelBounds, constant_stream, dump_channel
from config.scenario import format_scenario
from main import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main
from network.demand_network import make_network

# 设置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

SCENARIOS = Path(__file__).parent / "scenarios"


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_dof_command(capsys):
    code, out = _run(capsys, "dof", "--scenario", str(SCENARIOS / "six_by_three.txt"))
    assert code == EXIT_OK
    assert "d = 1/3 1/3 1/3 1/3 1/3 1/3, total = 2, class = Regular" in out
    assert "dual_value = 2" in out
    assert "kkt = ok" in out


def test_dof_command_irregular(capsys):
    code, out = _run(capsys, "dof", "--scenario", str(SCENARIOS / "five_by_three.txt"))
    assert code == EXIT_OK
    assert "d = 2/5 2/5 1/5 1/5 1/5, total = 7/5, class = Irregular" in out


def test_classify_command(capsys):
    code, out = _run(capsys, "classify", "--scenario", str(SCENARIOS / "mac.txt"))
    assert code == EXIT_OK
    assert "class = MultipleAccess" in out


def test_missing_scenario(capsys, tmp_path):
    code, _ = _run(capsys, "dof", "--scenario", str(tmp_path / "missing.txt"))
    assert code == EXIT_INPUT


def test_malformed_scenario(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("K=2\nN=1\n", encoding='utf-8')
    code, _ = _run(capsys, "dof", "--scenario", str(path))
    assert code == EXIT_INPUT


def test_conditions_command(capsys, tmp_path):
    code, out = _run(capsys, "conditions", "--scenario", str(SCENARIOS / "six_by_three.txt"), "--out", str(tmp_path))
    assert code == EXIT_OK
    assert "tau = 3, rounds = 1, conditions = 4" in out


def test_pipeline_six_by_three(capsys, tmp_path):
    """完整流程：合成信道、设计、验证、速率，两次运行的 CSV 逐字节一致"""
    first, second = tmp_path / "a", tmp_path / "b"
    code, out = _run(capsys, "pipeline", "--scenario", str(SCENARIOS / "six_by_three.txt"), "--out", str(first))
    assert code == EXIT_OK
    assert "conditions=4" in out
    assert "decodable=true" in out
    for name in ["channel.txt", "beamformers.txt", "rates.csv", "report.txt"]:
        assert (first / name).is_file()

    code, _ = _run(capsys, "pipeline", "--scenario", str(SCENARIOS / "six_by_three.txt"), "--out", str(second))
    assert code == EXIT_OK
    assert (first / "rates.csv").read_bytes() == (second / "rates.csv").read_bytes()
    assert (first / "channel.txt").read_bytes() == (second / "channel.txt").read_bytes()

    lines = (first / "rates.csv").read_text(encoding='utf-8').splitlines()
    assert lines[0] == "snr_db,sum_rate_bits,msg_1,msg_2,msg_3,msg_4,msg_5,msg_6"
    assert lines[-1].startswith("dof_estimate=")
    assert abs(float(lines[-1].split('=')[1]) - 2.0) < 0.1


def test_pipeline_generic_channel_fails(capsys, tmp_path):
    code, out = _run(capsys, "pipeline", "--scenario", str(SCENARIOS / "six_by_three.txt"),
                     "--out", str(tmp_path), "--generic")
    assert code == EXIT_INFEASIBLE
    assert "channel=generic" in out
    assert "decodable=false" in out
    assert not (tmp_path / "rates.csv").exists()


def test_pipeline_reports_channel_source(capsys, tmp_path):
    """τ 不足以容纳辅助结构时退回随机信道，报告如实标注"""
    code, out = _run(capsys, "pipeline", "--scenario", str(SCENARIOS / "mac.txt"), "--out", str(tmp_path / "mac"))
    assert code == EXIT_OK
    assert "channel=generic" in out
    assert "channel=aided" not in out

    code, out = _run(capsys, "pipeline", "--scenario", str(SCENARIOS / "six_by_three.txt"),
                     "--out", str(tmp_path / "six"))
    assert code == EXIT_OK
    assert "channel=aided" in out

    channel_file = tmp_path / "six" / "channel.txt"
    scenario = tmp_path / "from_file.txt"
    scenario.write_text((SCENARIOS / "six_by_three.txt").read_text(encoding='utf-8')
                        + f"channel_file={channel_file}\n", encoding='utf-8')
    code, out = _run(capsys, "pipeline", "--scenario", str(scenario), "--out", str(tmp_path / "file"))
    assert code == EXIT_OK
    assert "channel=file" in out
    assert "decodable=true" in out


def test_pipeline_five_by_three(capsys, tmp_path):
    code, out = _run(capsys, "pipeline", "--scenario", str(SCENARIOS / "five_by_three.txt"), "--out", str(tmp_path))
    assert code == EXIT_OK
    assert "rounds=2" in out
    assert "conditions=1" in out
    assert "N_e=5" in out


def test_seed_override_changes_channel(capsys, tmp_path):
    _run(capsys, "synth", "--scenario", str(SCENARIOS / "three_user_ic.txt"), "--out", str(tmp_path / "a"))
    _run(capsys, "synth", "--scenario", str(SCENARIOS / "three_user_ic.txt"), "--out", str(tmp_path / "b"),
         "--seed", "99")
    assert (tmp_path / "a" / "channel.txt").read_text() != (tmp_path / "b" / "channel.txt").read_text()


def test_match_command(capsys, tmp_path):
    network = make_network(3, [(1,), (2,), (3,)])
    stream = constant_stream(40, 3, 3, seed=5, bounds=ChannelBounds(0.5, 2.0))
    (tmp_path / "stream.txt").write_text('\n'.join(dump_channel(stream)) + '\n', encoding='utf-8')
    scenario = tmp_path / "ic_match.txt"
    scenario.write_text(format_scenario(network, slot_stream="stream.txt", eps_list="0.1,0.001,0"),
                        encoding='utf-8')

    code, out = _run(capsys, "match", "--scenario", str(scenario), "--out", str(tmp_path / "out"))
    assert code == EXIT_OK
    assert out.count("match_rate = 1.000000") == 3
    frame = pd.read_csv(tmp_path / "out" / "match.csv")
    assert list(frame.columns) == ['epsilon', 'match_rate', 'worst_residual']
    assert len(frame) == 3


def test_match_requires_stream(capsys):
    code, _ = _run(capsys, "match", "--scenario", str(SCENARIOS / "three_user_ic.txt"))
    assert code == EXIT_INPUT
