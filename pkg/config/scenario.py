# config/scenario.py
import re
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from network.demand_network import DemandNetwork, NetworkValidationError, validate

logger = logging.getLogger(__name__)

_DEMAND_KEY = re.compile(r'^S(\d+)$')
_KNOWN_KEYS = {
    'name', 'K', 'N', 'n', 'N_e', 'seed', 'g_min', 'g_max', 'distinct_values',
    'T_target', 'snr_db', 'eps_list', 'slot_stream', 'channel_file', 'out_dir',
}


class ScenarioError(ValueError):
    """场景文件解析失败"""


@dataclass
class Scenario:
    """一次实验的全部输入：网络结构、扩展参数、随机种子与可选文件路径"""
    name: str
    network: DemandNetwork
    n: int = 1
    N_e: Optional[int] = None
    seed: int = 0
    g_min: Optional[float] = None
    g_max: Optional[float] = None
    distinct_values: int = 1
    T_target: Optional[Tuple[complex, ...]] = None
    snr_db: Optional[List[float]] = None
    eps_list: Optional[List[float]] = None
    slot_stream: Optional[Path] = None
    channel_file: Optional[Path] = None
    out_dir: Optional[Path] = None


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ScenarioError(f"{key} 需要整数，实际为 '{value}'")


def _floats(key: str, value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise ScenarioError(f"{key} 需要逗号分隔的浮点数，实际为 '{value}'")


def _complexes(key: str, value: str) -> Tuple[complex, ...]:
    try:
        return tuple(complex(v.strip().replace(' ', '')) for v in value.split(',') if v.strip())
    except ValueError:
        raise ScenarioError(f"{key} 需要逗号分隔的复数（如 1+2j），实际为 '{value}'")


def parse_scenario(text: str, base_dir: Optional[Path] = None, default_name: str = 'scenario') -> Scenario:
    """解析 key=value 行；# 开头为注释，空行忽略，未知键报错"""
    values: Dict[str, str] = {}
    demands: Dict[int, Tuple[int, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ScenarioError(f"第 {lineno} 行缺少 '=': {raw.strip()}")
        key, value = (part.strip() for part in line.split('=', 1))
        match = _DEMAND_KEY.match(key)
        if match:
            j = int(match.group(1))
            if j in demands:
                raise ScenarioError(f"第 {lineno} 行重复定义 S{j}")
            try:
                demands[j] = tuple(int(v) for v in value.split(',') if v.strip())
            except ValueError:
                raise ScenarioError(f"第 {lineno} 行 S{j} 需要逗号分隔的整数: '{value}'")
            continue
        if key not in _KNOWN_KEYS:
            raise ScenarioError(f"第 {lineno} 行未知键: {key}")
        if key in values:
            raise ScenarioError(f"第 {lineno} 行重复定义 {key}")
        values[key] = value

    for key in ('K', 'N'):
        if key not in values:
            raise ScenarioError(f"缺少必需键 {key}")
    K, N = _int('K', values['K']), _int('N', values['N'])
    missing = [j for j in range(1, N + 1) if j not in demands]
    extra = [j for j in demands if not 1 <= j <= N]
    if missing or extra:
        raise ScenarioError(f"需求集合与 N={N} 不匹配: 缺少 {missing}, 多余 {extra}")
    try:
        network = validate(DemandNetwork(K=K, N=N, demands=tuple(demands[j] for j in range(1, N + 1))))
    except NetworkValidationError as e:
        raise ScenarioError(f"网络结构不合法: {str(e)}")

    base_dir = base_dir or Path('.')

    def path(key: str) -> Optional[Path]:
        if key not in values:
            return None
        p = Path(values[key])
        return p if p.is_absolute() else base_dir / p

    scenario = Scenario(
        name=values.get('name', default_name),
        network=network,
        n=_int('n', values['n']) if 'n' in values else 1,
        N_e=_int('N_e', values['N_e']) if 'N_e' in values else None,
        seed=_int('seed', values['seed']) if 'seed' in values else 0,
        g_min=_floats('g_min', values['g_min'])[0] if 'g_min' in values else None,
        g_max=_floats('g_max', values['g_max'])[0] if 'g_max' in values else None,
        distinct_values=_int('distinct_values', values['distinct_values']) if 'distinct_values' in values else 1,
        T_target=_complexes('T_target', values['T_target']) if 'T_target' in values else None,
        snr_db=_floats('snr_db', values['snr_db']) if 'snr_db' in values else None,
        eps_list=_floats('eps_list', values['eps_list']) if 'eps_list' in values else None,
        slot_stream=path('slot_stream'),
        channel_file=path('channel_file'),
        out_dir=path('out_dir'),
    )
    if scenario.n < 1:
        raise ScenarioError(f"n 必须为正整数: {scenario.n}")
    if scenario.distinct_values < 1 or scenario.distinct_values > scenario.n:
        raise ScenarioError(f"distinct_values={scenario.distinct_values} 必须在 [1, n={scenario.n}] 内")
    if scenario.T_target is not None and len(scenario.T_target) != scenario.distinct_values:
        raise ScenarioError(f"T_target 给出 {len(scenario.T_target)} 个值，需要 {scenario.distinct_values} 个")
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"场景文件不存在: {path}")
    logger.info(f"加载场景: {path}")
    return parse_scenario(path.read_text(encoding='utf-8'), base_dir=path.parent, default_name=path.stem)


def format_scenario(network: DemandNetwork, **extra) -> str:
    lines = [f"K={network.K}", f"N={network.N}"]
    lines += [f"S{j}={','.join(str(k) for k in network.demand(j))}" for j in range(1, network.N + 1)]
    lines += [f"{key}={value}" for key, value in extra.items()]
    return '\n'.join(lines) + '\n'
