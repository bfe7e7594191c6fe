# storage/report_writer.py
import io
import os
import logging
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import pandas as pd

from channels.extended_channel import ChannelBounds, ExtendedChannel, dump_channel, load_channel
from processors.channel_aiding import MatchReport
from processors.ia_designer import BeamformingSet
from processors.rate_simulator import RatePoint


class ReportWriter:
    """把实验结果写入输出目录（先写临时文件再原子替换）"""

    def __init__(self, config, out_dir: Optional[str] = None):
        self.config = config
        self.logger = logging.getLogger(__name__)
        self.out_dir = Path(out_dir or config.output_config['out_dir'])
        self.float_format = config.output_config['float_format']

    def _atomic_write(self, name: str, text: str) -> Path:
        """
        原子写入文本文件

        Args:
            name: 输出目录下的文件名
            text: 文件内容

        Returns:
            写入后的文件路径
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        target = self.out_dir / name
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=self.out_dir)
        try:
            with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as f:
                f.write(text)
            os.replace(tmp, target)
        except Exception as e:
            self.logger.error(f"写入 {target} 失败: {str(e)}")
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
        self.logger.info(f"已写入 {target}")
        return target

    def write_lines(self, name: str, lines: Iterable[str]) -> Path:
        return self._atomic_write(name, ''.join(f"{line}\n" for line in lines))

    def _write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, float_format=self.float_format, lineterminator='\n')
        return self._atomic_write(name, buffer.getvalue())

    def write_rates(self, name: str, points: Sequence[RatePoint], K: int,
                    dof_estimate: Optional[float] = None) -> Path:
        """速率表：snr_db,sum_rate_bits,msg_1..msg_K，可选追加 dof_estimate= 行"""
        rows = []
        for p in points:
            row = {'snr_db': p.snr_db, 'sum_rate_bits': p.sum_rate}
            row.update({f"msg_{k}": p.message_rates.get(k, 0.0) for k in range(1, K + 1)})
            rows.append(row)
        columns = ['snr_db', 'sum_rate_bits'] + [f"msg_{k}" for k in range(1, K + 1)]
        buffer = io.StringIO()
        pd.DataFrame(rows, columns=columns).to_csv(buffer, index=False, float_format=self.float_format,
                                                   lineterminator='\n')
        text = buffer.getvalue()
        if dof_estimate is not None:
            text += f"dof_estimate={self.float_format % dof_estimate}\n"
        return self._atomic_write(name, text)

    def write_match(self, name: str, reports: Sequence[MatchReport]) -> Path:
        frame = pd.DataFrame([{'epsilon': r.epsilon, 'match_rate': r.match_rate,
                               'worst_residual': r.worst_residual} for r in reports],
                             columns=['epsilon', 'match_rate', 'worst_residual'])
        return self._write_frame(name, frame)

    def write_channel(self, name: str, channel: ExtendedChannel) -> Path:
        return self.write_lines(name, dump_channel(channel))

    def write_beamformers(self, name: str, beamformers: BeamformingSet) -> Path:
        return self.write_lines(name, beamformers.dump_lines())

    def read_channel(self, path, bounds: Optional[ChannelBounds] = None) -> ExtendedChannel:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"信道文件不存在: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            return load_channel(f, bounds)
