# processors/rate_simulator.py
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from channels.extended_channel import ExtendedChannel
from network.demand_network import DemandNetwork, interference_set
from processors.ia_designer import AlignmentReport, BeamformingSet, IADesigner, numeric_rank

logger = logging.getLogger(__name__)


class NotDecodableError(RuntimeError):
    """对齐未通过验证，拒绝计算迫零速率"""


@dataclass
class RatePoint:
    snr_db: float
    P: float
    message_rates: Dict[int, float]

    @property
    def sum_rate(self) -> float:
        return float(sum(self.message_rates.values()))


@dataclass
class SlopeEstimate:
    dof: float
    snr_range: Tuple[float, float]
    residual: float
    points: List[RatePoint] = field(default_factory=list)


def _normalized(M: np.ndarray) -> np.ndarray:
    if M.shape[1] == 0:
        return M
    norms = np.linalg.norm(M, axis=0)
    return M / np.where(norms > 0, norms, 1.0)


class RateSimulator:
    """高信噪比速率仿真
    功能：迫零速率、忽略干扰基线、SNR 扫描与自由度斜率估计
    """

    def __init__(self, config):
        self.config = config.sim_config
        self.designer = IADesigner(config)
        self.rank_tolerance = config.design_config['rank_tolerance']
        self.logger = logging.getLogger(__name__)

    def _images(self, channel: ExtendedChannel, receiver: int,
                beamformers: BeamformingSet) -> Dict[int, np.ndarray]:
        return {k: channel.H(receiver, k) @ _normalized(V) for k, V in beamformers.V.items() if V.shape[1]}

    def zf_rates(self, channel: ExtendedChannel, network: DemandNetwork, beamformers: BeamformingSet,
                 P: float, report: Optional[AlignmentReport] = None) -> Dict[int, float]:
        """每条消息在请求它的每个接收机上做正交投影迫零，取各接收机速率的最小值（比特/符号）"""
        report = report or self.designer.verify_alignment(channel, network, beamformers)
        if not report.decodable:
            failed = [r.receiver for r in report.receivers if not r.decodable]
            raise NotDecodableError(f"[sim] 接收机 {failed} 对齐验证未通过")

        tau = channel.tau
        rates: Dict[int, float] = {k: 0.0 for k in range(1, network.K + 1)}
        requested: Dict[int, List[float]] = {}
        for j in range(1, network.N + 1):
            images = self._images(channel, j, beamformers)
            relevant = set(network.demand(j)) | set(interference_set(network, j))
            for k in network.demand(j):
                if k not in images:
                    continue
                others = [images[l] for l in sorted(relevant) if l != k and l in images]
                if others:
                    O = np.hstack(others)
                    r = numeric_rank(O, self.rank_tolerance)
                    U = np.linalg.svd(O, full_matrices=True)[0]
                    G = U[:, r:].conj().T @ images[k]
                else:
                    G = images[k]
                d_k = images[k].shape[1]
                eig = np.linalg.eigvalsh(G.conj().T @ G)
                rate = float(np.sum(np.log2(1.0 + (P / d_k) * np.clip(eig, 0.0, None)))) / tau
                requested.setdefault(k, []).append(rate)
        for k, values in requested.items():
            rates[k] = min(values)
        return rates

    def tin_rates(self, channel: ExtendedChannel, network: DemandNetwork, beamformers: BeamformingSet,
                  P: float) -> Dict[int, float]:
        """匹配滤波逐流检测，其余所有流当作噪声"""
        tau = channel.tau
        rates: Dict[int, float] = {k: 0.0 for k in range(1, network.K + 1)}
        requested: Dict[int, List[float]] = {}
        for j in range(1, network.N + 1):
            images = self._images(channel, j, beamformers)
            relevant = set(network.demand(j)) | set(interference_set(network, j))
            streams = [(l, c, images[l][:, c], P / images[l].shape[1])
                       for l in sorted(relevant) if l in images for c in range(images[l].shape[1])]
            for k in network.demand(j):
                if k not in images:
                    continue
                total = 0.0
                for c in range(images[k].shape[1]):
                    h = images[k][:, c]
                    u = h / np.linalg.norm(h)
                    power = P / images[k].shape[1]
                    noise = 1.0 + sum(p * abs(np.vdot(u, g)) ** 2
                                      for l, cc, g, p in streams if not (l == k and cc == c))
                    total += np.log2(1.0 + power * np.linalg.norm(h) ** 2 / noise)
                requested.setdefault(k, []).append(total / tau)
        for k, values in requested.items():
            rates[k] = min(values)
        return rates

    def rate_sweep(self, channel: ExtendedChannel, network: DemandNetwork, beamformers: BeamformingSet,
                   snr_db: Optional[Sequence[float]] = None, mode: str = 'zf') -> List[RatePoint]:
        snr_db = sorted(snr_db if snr_db is not None else self.config['snr_db'])
        if mode not in ('zf', 'tin'):
            raise ValueError(f"未知速率模式: {mode}")
        report = self.designer.verify_alignment(channel, network, beamformers) if mode == 'zf' else None
        points = []
        for snr in snr_db:
            P = 10.0 ** (snr / 10.0)
            if mode == 'zf':
                rates = self.zf_rates(channel, network, beamformers, P, report)
            else:
                rates = self.tin_rates(channel, network, beamformers, P)
            points.append(RatePoint(snr_db=float(snr), P=P, message_rates=rates))
            self.logger.debug(f"SNR {snr} dB: 和速率 {points[-1].sum_rate:.4f} 比特/符号")
        return points

    def dof_slope(self, channel: ExtendedChannel, network: DemandNetwork, beamformers: BeamformingSet,
                  snr_db: Optional[Sequence[float]] = None, mode: str = 'zf') -> SlopeEstimate:
        """对最高 slope_window_db 范围内的点做最小二乘，斜率 = Δ和速率 / Δlog2(P)"""
        points = self.rate_sweep(channel, network, beamformers, snr_db, mode)
        if len(points) < 2:
            raise ValueError("斜率估计至少需要两个 SNR 点")
        top = points[-1].snr_db
        used = [p for p in points if p.snr_db >= top - self.config['slope_window_db']]
        if len(used) < 2:
            used = points[-2:]
        x = np.log2([p.P for p in used])
        y = np.array([p.sum_rate for p in used])
        slope, intercept = np.polyfit(x, y, 1)
        residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
        estimate = SlopeEstimate(dof=float(slope), snr_range=(used[0].snr_db, used[-1].snr_db),
                                 residual=residual, points=points)
        self.logger.info(f"自由度估计 {estimate.dof:.4f}（{estimate.snr_range[0]}–{estimate.snr_range[1]} dB）")
        return estimate
