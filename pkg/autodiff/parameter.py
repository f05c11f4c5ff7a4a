"""
Named, freezable tensors.
"""

import hashlib

import numpy as np

from autodiff.tensor import Tensor


class Parameter(Tensor):
    """
    A Tensor with a name and a trainable flag.

    The flag is the only place freezing is expressed: a frozen Parameter
    records no gradient and is never handed to an optimizer.
    """

    def __init__(self, data, name: str = "", trainable: bool = True):
        super().__init__(data, requires_grad=trainable)
        self.name = name

    @property
    def trainable(self) -> bool:
        return self.requires_grad

    @trainable.setter
    def trainable(self, value: bool) -> None:
        self.requires_grad = bool(value)
        if not value:
            self.grad = None

    def digest(self) -> str:
        """SHA-256 of the shape and raw little-endian values."""
        h = hashlib.sha256()
        h.update(str(self.shape).encode())
        h.update(np.ascontiguousarray(self.data, dtype="<f8").tobytes())
        return h.hexdigest()

    def __repr__(self):
        return f"Parameter(name='{self.name}', shape={self.shape}, trainable={self.trainable})"
