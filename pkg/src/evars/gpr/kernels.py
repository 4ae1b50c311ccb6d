"""Covariance function algebra: primitive kernels plus sum/product composition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import InputError


class Kernel:
    """Base class for covariance functions over real vectors."""

    def gram(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __add__(self, other: "Kernel") -> "Sum":
        return Sum(self, other)

    def __mul__(self, other: "Kernel") -> "Product":
        return Product(self, other)


def _require_positive(**params: float):
    for name, value in params.items():
        if not np.isfinite(value) or value <= 0:
            raise InputError(f"kernel parameter {name} must be positive, got {value}")


@dataclass(frozen=True)
class SquaredExponential(Kernel):
    variance: float = 1.0
    length_scale: float = 1.0

    def __post_init__(self):
        _require_positive(variance=self.variance, length_scale=self.length_scale)

    def gram(self, x1, x2):
        sq = cdist(x1, x2, "sqeuclidean")
        return self.variance * np.exp(-0.5 * sq / self.length_scale**2)


@dataclass(frozen=True)
class Periodic(Kernel):
    variance: float = 1.0
    length_scale: float = 1.0
    period: float = 1.0

    def __post_init__(self):
        _require_positive(variance=self.variance,
                          length_scale=self.length_scale,
                          period=self.period)

    def gram(self, x1, x2):
        # sum of per-dimension sin^2 terms keeps the Gram matrix PSD
        diff = x1[:, None, :] - x2[None, :, :]
        s2 = np.sin(np.pi * np.abs(diff) / self.period) ** 2
        return self.variance * np.exp(-2.0 * s2.sum(axis=2)
                                      / self.length_scale**2)


@dataclass(frozen=True)
class Linear(Kernel):
    variance: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        _require_positive(variance=self.variance)

    def gram(self, x1, x2):
        return self.variance * ((x1 - self.offset) @ (x2 - self.offset).T)


@dataclass(frozen=True)
class Constant(Kernel):
    value: float = 1.0

    def __post_init__(self):
        _require_positive(value=self.value)

    def gram(self, x1, x2):
        return np.full((x1.shape[0], x2.shape[0]), self.value)


@dataclass(frozen=True)
class Sum(Kernel):
    left: Kernel
    right: Kernel

    def gram(self, x1, x2):
        return self.left.gram(x1, x2) + self.right.gram(x1, x2)


@dataclass(frozen=True)
class Product(Kernel):
    left: Kernel
    right: Kernel

    def gram(self, x1, x2):
        return self.left.gram(x1, x2) * self.right.gram(x1, x2)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel composition tree plus the additive white-noise level."""

    kernel: Kernel
    noise: float = 1e-4

    def __post_init__(self):
        if not np.isfinite(self.noise) or self.noise < 0:
            raise InputError(f"noise level must be >= 0, got {self.noise}")


def kernel_eval(spec: KernelSpec, x1, x2) -> float:
    """Covariance value between two covariate vectors (noise excluded)."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.shape != x2.shape or x1.ndim != 1:
        raise InputError(f"shape mismatch: {x1.shape} vs {x2.shape}")
    if not (np.isfinite(x1).all() and np.isfinite(x2).all()):
        raise InputError("kernel inputs must be finite")
    return float(spec.kernel.gram(x1[None, :], x2[None, :])[0, 0])


_LEAF_TYPES = {
    "squared_exponential": SquaredExponential,
    "periodic": Periodic,
    "linear": Linear,
    "constant": Constant,
}
_NODE_TYPES = {"sum": Sum, "product": Product}


def kernel_to_dict(kernel: Kernel) -> dict:
    for name, cls in _NODE_TYPES.items():
        if isinstance(kernel, cls):
            return {"type": name,
                    "left": kernel_to_dict(kernel.left),
                    "right": kernel_to_dict(kernel.right)}
    for name, cls in _LEAF_TYPES.items():
        if isinstance(kernel, cls):
            params = {f: getattr(kernel, f) for f in cls.__dataclass_fields__}
            return {"type": name, **params}
    raise InputError(f"unknown kernel type {type(kernel).__name__}")


def kernel_from_dict(tree: dict) -> Kernel:
    kind = tree.get("type")
    if kind in _NODE_TYPES:
        return _NODE_TYPES[kind](kernel_from_dict(tree["left"]),
                                 kernel_from_dict(tree["right"]))
    if kind in _LEAF_TYPES:
        params = {k: v for k, v in tree.items() if k != "type"}
        return _LEAF_TYPES[kind](**params)
    raise InputError(f"unknown kernel type tag {kind!r}")


def perturb_kernel(kernel: Kernel, rng: np.random.Generator,
                   scale: float = 0.3) -> Kernel:
    """Structurally identical kernel with multiplicatively jittered parameters.

    Positive parameters get a log-normal factor; the linear kernel's offset
    gets an additive normal perturbation.
    """
    tree = kernel_to_dict(kernel)

    def walk(node: dict) -> dict:
        if node["type"] in _NODE_TYPES:
            return {"type": node["type"],
                    "left": walk(node["left"]), "right": walk(node["right"])}
        out = {"type": node["type"]}
        for key, value in node.items():
            if key == "type":
                continue
            if key == "offset":
                out[key] = value + rng.normal(0.0, scale)
            else:
                out[key] = value * float(np.exp(rng.normal(0.0, scale)))
        return out

    return kernel_from_dict(walk(tree))
