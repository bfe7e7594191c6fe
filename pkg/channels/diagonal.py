# channels/diagonal.py
from typing import Iterable, Union

import numpy as np


class ChannelShapeError(ValueError):
    """矩阵尺寸不一致"""


class SingularChannelError(ValueError):
    """对角矩阵存在零元，不可逆"""


class DiagonalMatrix:
    """τ×τ 复对角矩阵，只存对角元（只读 numpy 数组）"""

    __slots__ = ('entries',)

    def __init__(self, entries: Union[Iterable[complex], np.ndarray]):
        arr = np.array(entries, dtype=np.complex128).ravel()
        arr.setflags(write=False)
        object.__setattr__(self, 'entries', arr)

    def __setattr__(self, name, value):
        raise AttributeError("DiagonalMatrix 不可修改")

    @classmethod
    def identity(cls, size: int) -> 'DiagonalMatrix':
        return cls(np.ones(size))

    @classmethod
    def scalar(cls, value: complex, size: int) -> 'DiagonalMatrix':
        return cls(np.full(size, value, dtype=np.complex128))

    @property
    def size(self) -> int:
        return int(self.entries.shape[0])

    def _check(self, other: 'DiagonalMatrix') -> None:
        if self.size != other.size:
            raise ChannelShapeError(f"对角矩阵尺寸不一致: {self.size} vs {other.size}")

    def __matmul__(self, other):
        if isinstance(other, DiagonalMatrix):
            self._check(other)
            return DiagonalMatrix(self.entries * other.entries)
        other = np.asarray(other)
        if other.shape[0] != self.size:
            raise ChannelShapeError(f"对角矩阵尺寸 {self.size} 与矩阵行数 {other.shape[0]} 不一致")
        if other.ndim == 1:
            return self.entries * other
        return self.entries[:, None] * other

    def inverse(self) -> 'DiagonalMatrix':
        if np.any(self.entries == 0):
            raise SingularChannelError(f"对角元含零，位置 {np.flatnonzero(self.entries == 0).tolist()}")
        return DiagonalMatrix(1.0 / self.entries)

    def power(self, exponent: int) -> 'DiagonalMatrix':
        if exponent < 0:
            return self.inverse().power(-exponent)
        return DiagonalMatrix(self.entries ** exponent)

    def isclose(self, other: 'DiagonalMatrix', tol: float) -> bool:
        self._check(other)
        scale = np.maximum(np.abs(self.entries), np.abs(other.entries))
        return bool(np.all(np.abs(self.entries - other.entries) <= tol * scale))

    def is_scalar(self, tol: float) -> bool:
        return self.isclose(DiagonalMatrix.scalar(self.entries[0], self.size), tol)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.entries)

    def __repr__(self) -> str:
        return f"DiagonalMatrix({self.entries.tolist()})"


def diag_product(a: DiagonalMatrix, b: DiagonalMatrix) -> DiagonalMatrix:
    return a @ b


def diag_inverse(a: DiagonalMatrix) -> DiagonalMatrix:
    return a.inverse()


def diag_equal(a: DiagonalMatrix, b: DiagonalMatrix, tol: float) -> bool:
    return a.isclose(b, tol)
