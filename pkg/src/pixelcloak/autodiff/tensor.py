"""Dense float64 tensor value type used by the expression engine.

Tensors are immutable after construction: the backing array is marked
read-only, so values can be shared freely across threads and expression
evaluations.
"""

import numpy as np


class Tensor:
    """An n-dimensional array of float64 values in row-major order."""

    __slots__ = ("_array",)

    def __init__(self, values, shape=None):
        # np.array (not ascontiguousarray) so 0-d scalars keep shape ()
        arr = np.array(values, dtype=np.float64, order="C")
        if shape is not None:
            arr = arr.reshape(tuple(shape))
        arr.flags.writeable = False
        object.__setattr__(self, "_array", arr)

    @property
    def shape(self) -> tuple:
        return self._array.shape

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the underlying values."""
        return self._array.reshape(-1)

    @property
    def array(self) -> np.ndarray:
        """Read-only ndarray view."""
        return self._array

    @property
    def size(self) -> int:
        return self._array.size

    def tolist(self):
        return self._array.tolist()

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._array, other._array)

    def __hash__(self):
        return hash((self.shape, self._array.tobytes()))


def as_array(value) -> np.ndarray:
    """Accept a Tensor or anything ndarray-like; return a float64 ndarray."""
    if isinstance(value, Tensor):
        return value.array
    return np.asarray(value, dtype=np.float64)
