"""Exact Gaussian process regression via Cholesky factorization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from ..errors import ConditioningError, InputError
from .kernels import KernelSpec, kernel_from_dict, kernel_to_dict

JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class Preprocess:
    """What preprocessing to apply when fitting a model."""

    standardize_target: bool = False
    standardize_covariates: bool = False
    pca_variance: float | None = None  # retained variance share, e.g. 0.95


@dataclass(frozen=True)
class FittedPreprocess:
    x_mean: np.ndarray
    x_scale: np.ndarray
    components: np.ndarray | None  # rows are principal directions
    y_mean: float
    y_scale: float

    def transform_x(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.x_mean) / self.x_scale
        if self.components is not None:
            z = z @ self.components.T
        return z


def _identity_preprocess(d: int) -> FittedPreprocess:
    return FittedPreprocess(np.zeros(d), np.ones(d), None, 0.0, 1.0)


def _fit_preprocess(x: np.ndarray, y: np.ndarray,
                    options: Preprocess) -> FittedPreprocess:
    d = x.shape[1]
    x_mean = np.zeros(d)
    x_scale = np.ones(d)
    components = None
    if options.standardize_covariates and d > 0:
        x_mean = x.mean(axis=0)
        x_scale = x.std(axis=0)
        x_scale[x_scale == 0] = 1.0
    if options.pca_variance is not None and d > 0:
        z = (x - x_mean) / x_scale
        _, singular, vt = np.linalg.svd(z, full_matrices=False)
        explained = singular**2
        total = explained.sum()
        if total > 0:
            share = np.cumsum(explained) / total
            keep = int(np.searchsorted(share, options.pca_variance) + 1)
        else:
            keep = d
        components = vt[:keep]
    y_mean, y_scale = 0.0, 1.0
    if options.standardize_target:
        y_mean = float(y.mean())
        y_scale = float(y.std())
        if y_scale == 0:
            y_scale = 1.0
    return FittedPreprocess(x_mean, x_scale, components, y_mean, y_scale)


@dataclass(frozen=True)
class GprModel:
    """A fitted GP: kernel, Cholesky factor and precomputed target solve."""

    spec: KernelSpec
    mean_constant: float
    pre: FittedPreprocess
    x_train: np.ndarray  # preprocessed inputs
    y_train: np.ndarray  # standardized targets
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0


def fit_arrays(x: np.ndarray, y: np.ndarray, spec: KernelSpec,
               mean_constant: float = 0.0,
               preprocess: Preprocess | None = None) -> GprModel:
    """Fit on raw arrays; Cholesky with escalating jitter on failure."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or len(y) != x.shape[0]:
        raise InputError(f"bad training shapes {x.shape} / {y.shape}")
    if x.shape[0] < 2:
        raise InputError("need at least two training rows")
    pre = _fit_preprocess(x, y, preprocess) if preprocess else \
        _identity_preprocess(x.shape[1])
    xt = pre.transform_x(x)
    yt = (y - pre.y_mean) / pre.y_scale

    gram = spec.kernel.gram(xt, xt)
    gram = 0.5 * (gram + gram.T)
    k_noisy = gram + spec.noise * np.eye(len(yt))
    diag_scale = float(np.mean(np.diag(k_noisy))) or 1.0

    jitter = 0.0
    level = JITTER_START
    while True:
        try:
            chol = cholesky(k_noisy + jitter * np.eye(len(yt)), lower=True)
            break
        except np.linalg.LinAlgError:
            pass
        except ValueError:
            pass
        if level > JITTER_MAX:
            raise ConditioningError(
                f"Cholesky failed up to jitter {JITTER_MAX} * mean diagonal"
            )
        jitter = level * diag_scale
        level *= 10.0
    alpha = cho_solve((chol, True), yt - mean_constant)
    return GprModel(spec=spec, mean_constant=mean_constant, pre=pre,
                    x_train=xt, y_train=yt, chol=chol, alpha=alpha,
                    jitter=jitter)


def fit(dataset, spec: KernelSpec, mean_constant: float = 0.0,
        preprocess: Preprocess | None = None) -> GprModel:
    """Fit on a dataset's covariates and target."""
    return fit_arrays(dataset.covariates, dataset.target, spec,
                      mean_constant=mean_constant, preprocess=preprocess)


def predict_batch(model: GprModel, x: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and (noise-free) variance for a batch of inputs."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.isfinite(x).all():
        raise InputError("prediction inputs must be finite")
    xt = model.pre.transform_x(x)
    if xt.shape[1] != model.x_train.shape[1]:
        raise InputError(
            f"input dimension {xt.shape[1]} != trained {model.x_train.shape[1]}"
        )
    k_star = model.spec.kernel.gram(model.x_train, xt)
    mean_std = model.mean_constant + k_star.T @ model.alpha
    v = solve_triangular(model.chol, k_star, lower=True)
    prior = np.array([model.spec.kernel.gram(row[None], row[None])[0, 0]
                      for row in xt])
    var_std = np.maximum(prior - np.sum(v**2, axis=0), 0.0)
    mean = model.pre.y_mean + model.pre.y_scale * mean_std
    var = model.pre.y_scale**2 * var_std
    return mean, var


def predict(model: GprModel, x) -> tuple[float, float]:
    mean, var = predict_batch(model, np.atleast_1d(np.asarray(x, float))[None])
    return float(mean[0]), float(var[0])


def log_marginal_likelihood(model: GprModel) -> float:
    resid = model.y_train - model.mean_constant
    n = len(resid)
    return float(-0.5 * resid @ model.alpha
                 - np.sum(np.log(np.diag(model.chol)))
                 - 0.5 * n * np.log(2.0 * np.pi))


def model_to_dict(model: GprModel) -> dict:
    return {
        "kernel": kernel_to_dict(model.spec.kernel),
        "noise": model.spec.noise,
        "mean_constant": model.mean_constant,
        "preprocess": {
            "x_mean": model.pre.x_mean.tolist(),
            "x_scale": model.pre.x_scale.tolist(),
            "components": None if model.pre.components is None
            else model.pre.components.tolist(),
            "y_mean": model.pre.y_mean,
            "y_scale": model.pre.y_scale,
        },
        "x_train": model.x_train.tolist(),
        "y_train": model.y_train.tolist(),
        "jitter": model.jitter,
    }


def model_from_dict(doc: dict) -> GprModel:
    spec = KernelSpec(kernel_from_dict(doc["kernel"]), noise=doc["noise"])
    pp = doc["preprocess"]
    pre = FittedPreprocess(
        x_mean=np.asarray(pp["x_mean"], float),
        x_scale=np.asarray(pp["x_scale"], float),
        components=None if pp["components"] is None
        else np.asarray(pp["components"], float),
        y_mean=pp["y_mean"],
        y_scale=pp["y_scale"],
    )
    xt = np.asarray(doc["x_train"], float)
    yt = np.asarray(doc["y_train"], float)
    gram = spec.kernel.gram(xt, xt)
    gram = 0.5 * (gram + gram.T)
    chol = cholesky(gram + (spec.noise + doc["jitter"]) * np.eye(len(yt)),
                    lower=True)
    alpha = cho_solve((chol, True), yt - doc["mean_constant"])
    return GprModel(spec=spec, mean_constant=doc["mean_constant"], pre=pre,
                    x_train=xt, y_train=yt, chol=chol, alpha=alpha,
                    jitter=doc["jitter"])
