"""Contiguous windows of (input, output) observations.

A window holds the observations between two absolute integer timestamps,
inclusive on both ends. Inputs are D-dimensional vectors, outputs are
C-dimensional (one value per channel). Slicing by absolute timestamps
``[a, b]`` returns ``b - a + 1`` points.
"""

from __future__ import annotations

import numpy as np


class TimeSeriesWindow:
    """Observations ``(x_t, y_t)`` for ``t = start_index .. start_index + n - 1``.

    Parameters
    ----------
    inputs : array_like, shape (n, D) or (n,)
        Input vectors; a 1-D array is treated as D = 1.
    outputs : array_like, shape (n, C) or (n,)
        Output vectors; a 1-D array is treated as C = 1.
    start_index : int
        Absolute timestamp of the first element.
    """

    __slots__ = ("inputs", "outputs", "start_index")

    def __init__(self, inputs, outputs, start_index: int = 0):
        x = np.atleast_1d(np.asarray(inputs, dtype=float))
        y = np.atleast_1d(np.asarray(outputs, dtype=float))
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if len(x) != len(y):
            raise ValueError(f"inputs ({len(x)}) and outputs ({len(y)}) differ in length")
        if len(x) == 0:
            raise ValueError("window must contain at least one observation")
        self.inputs = x
        self.outputs = y
        self.start_index = int(start_index)

    def __len__(self) -> int:
        return len(self.outputs)

    @property
    def end_index(self) -> int:
        """Absolute timestamp of the last element."""
        return self.start_index + len(self) - 1

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def channel_count(self) -> int:
        return self.outputs.shape[1]

    def timestamps(self) -> np.ndarray:
        return np.arange(self.start_index, self.start_index + len(self))

    def slice(self, a: int, b: int) -> "TimeSeriesWindow":
        """Return the sub-window for absolute timestamps ``a..b`` (inclusive)."""
        if a < self.start_index or b > self.end_index or a > b:
            raise IndexError(
                f"slice [{a}, {b}] outside window [{self.start_index}, {self.end_index}]"
            )
        i = a - self.start_index
        j = b - self.start_index + 1
        return TimeSeriesWindow(self.inputs[i:j], self.outputs[i:j], start_index=a)

    def extend(self, other: "TimeSeriesWindow") -> "TimeSeriesWindow":
        """Concatenate a contiguous continuation onto this window."""
        if other.start_index != self.end_index + 1:
            raise ValueError(
                f"windows not contiguous: this ends at {self.end_index}, "
                f"next starts at {other.start_index}"
            )
        return TimeSeriesWindow(
            np.vstack([self.inputs, other.inputs]),
            np.vstack([self.outputs, other.outputs]),
            start_index=self.start_index,
        )

    def __repr__(self) -> str:
        return (
            f"TimeSeriesWindow(t={self.start_index}..{self.end_index}, "
            f"D={self.input_dim}, C={self.channel_count})"
        )
