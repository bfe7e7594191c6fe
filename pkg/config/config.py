# config.py
import os
import yaml
from pathlib import Path
from typing import Optional

_DEFAULT_PATH = Path(__file__).resolve().parent.parent / 'config.yaml'


def _load_yaml(config_path: Optional[str] = None) -> dict:
    path = config_path or os.environ.get('IA_WORKBENCH_CONFIG') or _DEFAULT_PATH
    with open(path, 'r', encoding='utf-8') as file:
        return yaml.safe_load(file)


class Config:
    """配置管理类
    功能：加载和管理所有配置信息
    """
    def __init__(self, config_path: Optional[str] = None):
        _config = _load_yaml(config_path)

        # 线性规划配置
        self.lp_config = {
            'max_pivots': int(_config['LP']['max_pivots']),
            'max_denominator_bits': int(_config['LP']['max_denominator_bits'])
        }

        # 信道配置
        self.channel_config = {
            'g_min': float(_config['Channel']['g_min']),
            'g_max': float(_config['Channel']['g_max']),
            'eq_tolerance': float(_config['Channel']['eq_tolerance'])
        }

        # 信道辅助条件配置
        self.aiding_config = {
            'match_epsilon': float(_config['Aiding']['match_epsilon']),
            'retry_budget': int(_config['Aiding']['retry_budget']),
            'match_budget': int(_config['Aiding']['match_budget'])
        }

        # 波束设计配置
        self.design_config = {
            'rank_tolerance': float(_config['Design']['rank_tolerance'])
        }

        # 速率仿真配置
        self.sim_config = {
            'snr_db': [float(v) for v in _config['Simulation']['snr_db']],
            'slope_window_db': float(_config['Simulation']['slope_window_db'])
        }

        # 输出配置
        self.output_config = {
            'out_dir': _config['Output']['out_dir'],
            'float_format': _config['Output']['float_format']
        }

        # 日志配置
        self.logging_config = {
            'level': _config['Logging']['level'],
            'log_dir': _config['Logging']['log_dir'],
            'to_file': bool(_config['Logging']['to_file'])
        }
