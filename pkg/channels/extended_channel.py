# channels/extended_channel.py
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from channels.diagonal import ChannelShapeError, DiagonalMatrix

logger = logging.getLogger(__name__)

Link = Tuple[int, int]


class ChannelBoundsError(ValueError):
    """信道幅度范围不合法"""


@dataclass(frozen=True)
class ChannelBounds:
    g_min: float
    g_max: float

    def __post_init__(self):
        if not (0 < self.g_min <= self.g_max < np.inf):
            raise ChannelBoundsError(f"需要 0 < g_min ≤ g_max < ∞，实际 g_min={self.g_min}, g_max={self.g_max}")

    @property
    def center(self) -> float:
        return float(np.sqrt(self.g_min * self.g_max))

    def contains(self, values: np.ndarray, rtol: float = 1e-12) -> bool:
        mags = np.abs(values)
        return bool(np.all(mags >= self.g_min * (1 - rtol)) and np.all(mags <= self.g_max * (1 + rtol)))

    @classmethod
    def from_config(cls, config) -> 'ChannelBounds':
        return cls(g_min=config.channel_config['g_min'], g_max=config.channel_config['g_max'])


class ExtendedChannel:
    """τ 符号扩展信道：每条链路 (j, k) 对应一个 τ×τ 对角矩阵 H^[jk]"""

    def __init__(self, tau: int, K: int, N: int, gains: Mapping[Link, DiagonalMatrix],
                 bounds: Optional[ChannelBounds] = None):
        if tau < 1:
            raise ChannelShapeError(f"扩展长度 τ 必须为正: {tau}")
        self.tau = tau
        self.K = K
        self.N = N
        self.bounds = bounds
        self._gains: Dict[Link, DiagonalMatrix] = {}
        for j in range(1, N + 1):
            for k in range(1, K + 1):
                if (j, k) not in gains:
                    raise ChannelShapeError(f"缺少链路 H^[{j},{k}]")
                h = gains[(j, k)]
                if not isinstance(h, DiagonalMatrix):
                    h = DiagonalMatrix(h)
                if h.size != tau:
                    raise ChannelShapeError(f"H^[{j},{k}] 尺寸 {h.size} 与 τ={tau} 不一致")
                if bounds is not None and not bounds.contains(h.entries):
                    raise ChannelBoundsError(
                        f"H^[{j},{k}] 幅度超出 [{bounds.g_min}, {bounds.g_max}]")
                self._gains[(j, k)] = h

    def H(self, j: int, k: int) -> DiagonalMatrix:
        try:
            return self._gains[(j, k)]
        except KeyError:
            raise ChannelShapeError(f"链路越界: H^[{j},{k}] (N={self.N}, K={self.K})")

    @property
    def gains(self) -> Dict[Link, DiagonalMatrix]:
        return dict(self._gains)

    def with_gain(self, j: int, k: int, value: DiagonalMatrix) -> 'ExtendedChannel':
        gains = self.gains
        gains[(j, k)] = value
        return ExtendedChannel(self.tau, self.K, self.N, gains, self.bounds)

    def select_slots(self, positions: Sequence[int]) -> 'ExtendedChannel':
        """取出若干时隙组成新的扩展信道（时隙匹配后组装符号扩展使用）"""
        idx = np.asarray(positions, dtype=int)
        gains = {link: DiagonalMatrix(h.entries[idx]) for link, h in self._gains.items()}
        return ExtendedChannel(len(idx), self.K, self.N, gains, self.bounds)

    def tensor(self) -> np.ndarray:
        """返回 (N, K, τ) 复数数组"""
        out = np.empty((self.N, self.K, self.tau), dtype=np.complex128)
        for (j, k), h in self._gains.items():
            out[j - 1, k - 1] = h.entries
        return out

    @classmethod
    def from_tensor(cls, values: np.ndarray, bounds: Optional[ChannelBounds] = None) -> 'ExtendedChannel':
        N, K, tau = values.shape
        gains = {(j, k): DiagonalMatrix(values[j - 1, k - 1])
                 for j in range(1, N + 1) for k in range(1, K + 1)}
        return cls(tau, K, N, gains, bounds)


def channel_product(channel: ExtendedChannel, factors: Mapping[Link, int]) -> DiagonalMatrix:
    """∏ (H^[ik])^e，factors 为链路到整数指数的映射"""
    result = DiagonalMatrix.identity(channel.tau)
    for (i, k), exponent in sorted(factors.items()):
        if exponent:
            result = result @ channel.H(i, k).power(exponent)
    return result


# ----------------------------------------------------------------------
# 随机信道与时隙流

def _draw(rng: np.random.Generator, shape, bounds: ChannelBounds) -> np.ndarray:
    mags = rng.uniform(bounds.g_min, bounds.g_max, size=shape)
    phases = rng.uniform(0.0, 2 * np.pi, size=shape)
    return mags * np.exp(1j * phases)


def draw_narrow(rng: np.random.Generator, shape, bounds: ChannelBounds, half_width: float) -> np.ndarray:
    """幅度在几何中心 c 附近 [c·e^-a, c·e^a] 对数均匀取值，相位均匀"""
    half_width = min(half_width, 0.5 * np.log(bounds.g_max / bounds.g_min))
    mags = bounds.center * np.exp(rng.uniform(-half_width, half_width, size=shape))
    phases = rng.uniform(0.0, 2 * np.pi, size=shape)
    return mags * np.exp(1j * phases)


def random_channel(tau: int, K: int, N: int, seed, bounds: ChannelBounds) -> ExtendedChannel:
    """所有对角元独立，幅度在 [g_min, g_max] 上均匀，相位均匀；同一 seed 结果相同"""
    rng = np.random.default_rng(seed)
    return ExtendedChannel.from_tensor(_draw(rng, (N, K, tau), bounds), bounds)


def constant_stream(length: int, K: int, N: int, seed, bounds: ChannelBounds) -> ExtendedChannel:
    """所有时隙取同一组信道值"""
    rng = np.random.default_rng(seed)
    slot = _draw(rng, (N, K, 1), bounds)
    return ExtendedChannel.from_tensor(np.repeat(slot, length, axis=2), bounds)


def continuous_stream(length: int, K: int, N: int, seed, bounds: ChannelBounds) -> ExtendedChannel:
    return random_channel(length, K, N, seed, bounds)


def quantized_stream(length: int, K: int, N: int, seed, bounds: ChannelBounds,
                     levels: int) -> ExtendedChannel:
    """幅度取 levels 个等间隔值、相位取 levels 个等间隔值"""
    if levels < 1:
        raise ValueError(f"量化级数必须为正: {levels}")
    rng = np.random.default_rng(seed)
    shape = (N, K, length)
    if levels == 1:
        mags = np.full(shape, bounds.center)
    else:
        mags = bounds.g_min + (bounds.g_max - bounds.g_min) * rng.integers(0, levels, size=shape) / (levels - 1)
    phases = 2 * np.pi * rng.integers(0, levels, size=shape) / levels
    return ExtendedChannel.from_tensor(mags * np.exp(1j * phases), bounds)


# ----------------------------------------------------------------------
# 文本格式：每行 "H j k re_1 im_1 ... re_τ im_τ"，浮点用 repr 保证无损

def dump_channel(channel: ExtendedChannel) -> List[str]:
    lines = []
    for j in range(1, channel.N + 1):
        for k in range(1, channel.K + 1):
            parts = ['H', str(j), str(k)]
            for v in channel.H(j, k).entries:
                parts.append(repr(float(v.real)))
                parts.append(repr(float(v.imag)))
            lines.append(' '.join(parts))
    return lines


def load_channel(lines: Iterable[str], bounds: Optional[ChannelBounds] = None) -> ExtendedChannel:
    gains: Dict[Link, DiagonalMatrix] = {}
    tau = None
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split()
        if parts[0] != 'H' or len(parts) < 5 or (len(parts) - 3) % 2:
            raise ChannelShapeError(f"第 {lineno} 行格式错误: {line[:40]}")
        j, k = int(parts[1]), int(parts[2])
        values = np.array([float(v) for v in parts[3:]])
        entries = values[0::2] + 1j * values[1::2]
        if tau is None:
            tau = len(entries)
        elif len(entries) != tau:
            raise ChannelShapeError(f"第 {lineno} 行长度 {len(entries)} 与 τ={tau} 不一致")
        if (j, k) in gains:
            raise ChannelShapeError(f"链路 H^[{j},{k}] 重复")
        gains[(j, k)] = DiagonalMatrix(entries)
    if not gains:
        raise ChannelShapeError("信道文件为空")
    N = max(j for j, _ in gains)
    K = max(k for _, k in gains)
    return ExtendedChannel(tau, K, N, gains, bounds)
