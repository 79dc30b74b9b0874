"""Tiny module system: parameter registration, train/eval mode, state IO.

Attributes holding Tensors are parameters; attributes holding Modules (or
lists/dicts of Modules) are children; BatchNormState attributes are buffers
that serialize but never receive gradients. Attributes starting with an
underscore are ignored, which is where derived constants live.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import BatchNormState, Tensor
from ..errors import InternalError


class Module:
    def __init__(self):
        self.training = True

    def _components(self):
        for key, value in vars(self).items():
            if key.startswith("_") or key == "training":
                continue
            yield key, value

    def named_parameters(self, prefix: str = ""):
        for key, value in self._components():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")
            elif isinstance(value, dict):
                for k, item in value.items():
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{k}.")

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def named_buffers(self, prefix: str = ""):
        for key, value in self._components():
            name = f"{prefix}{key}"
            if isinstance(value, BatchNormState):
                yield f"{name}.running_mean", value
                yield f"{name}.running_var", value
            elif isinstance(value, Module):
                yield from value.named_buffers(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{name}.{i}.")
            elif isinstance(value, dict):
                for k, item in value.items():
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{name}.{k}.")

    def modules(self):
        yield self
        for _, value in self._components():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()
            elif isinstance(value, dict):
                for item in value.values():
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode: bool = True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    # -- checkpoint state -----------------------------------------------

    def state_arrays(self, prefix: str = "") -> dict:
        """Flat name -> ndarray map of parameters and running statistics."""
        out = {}
        for name, tensor in self.named_parameters(prefix):
            out[name] = tensor.data.copy()
        for name, state in self.named_buffers(prefix):
            field = "mean" if name.endswith("running_mean") else "var"
            out[name] = getattr(state, field).copy()
        return out

    def load_state_arrays(self, arrays: dict, prefix: str = "") -> None:
        for name, tensor in self.named_parameters(prefix):
            if name not in arrays:
                raise InternalError(f"checkpoint missing parameter {name!r}")
            src = np.asarray(arrays[name])
            if src.shape != tensor.data.shape:
                raise InternalError(
                    f"parameter {name!r}: checkpoint shape {src.shape} "
                    f"!= model shape {tensor.data.shape}"
                )
            tensor.data = src.astype(tensor.data.dtype, copy=True)
        for name, state in self.named_buffers(prefix):
            if name not in arrays:
                raise InternalError(f"checkpoint missing buffer {name!r}")
            field = "mean" if name.endswith("running_mean") else "var"
            setattr(state, field, np.asarray(arrays[name]).copy())
