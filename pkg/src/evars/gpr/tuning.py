"""Random-search model selection with rolling-origin cross-validation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, EvarsError, TuningError
from .kernels import (
    KernelSpec,
    Linear,
    Periodic,
    SquaredExponential,
    perturb_kernel,
)
from .model import (
    GprModel,
    Preprocess,
    fit_arrays,
    log_marginal_likelihood,
    predict_batch,
)

# Kernel structures covered by the random search; periodic components are
# initialized near the season length of the dataset at hand.
KERNEL_GRAMMAR = (
    "se",
    "periodic",
    "linear",
    "se+periodic",
    "se*periodic",
    "se+linear",
)


@dataclass(frozen=True)
class CandidateConfig:
    """One sampled model configuration."""

    spec: KernelSpec
    mean_constant: float
    preprocess: Preprocess

    def to_dict(self) -> dict:
        from .kernels import kernel_to_dict
        return {
            "kernel": kernel_to_dict(self.spec.kernel),
            "noise": self.spec.noise,
            "mean_constant": self.mean_constant,
            "preprocess": {
                "standardize_target": self.preprocess.standardize_target,
                "standardize_covariates": self.preprocess.standardize_covariates,
                "pca_variance": self.preprocess.pca_variance,
            },
        }


def _log_uniform(rng: np.random.Generator, low: float, high: float) -> float:
    return float(np.exp(rng.uniform(np.log(low), np.log(high))))


def sample_candidate(rng: np.random.Generator, n_seas: int) -> CandidateConfig:
    structure = KERNEL_GRAMMAR[rng.integers(len(KERNEL_GRAMMAR))]

    def se():
        return SquaredExponential(variance=_log_uniform(rng, 1e-2, 1e2),
                                  length_scale=_log_uniform(rng, 0.1, 10.0))

    def periodic():
        return Periodic(variance=_log_uniform(rng, 1e-2, 1e2),
                        length_scale=_log_uniform(rng, 0.1, 10.0),
                        period=_log_uniform(rng, 0.5, 2.0) * n_seas)

    def linear():
        return Linear(variance=_log_uniform(rng, 1e-2, 1e1),
                      offset=float(rng.normal(0.0, 1.0)))

    kernels = {"se": se, "periodic": periodic, "linear": linear}
    if "+" in structure:
        left, right = structure.split("+")
        kernel = kernels[left]() + kernels[right]()
    elif "*" in structure:
        left, right = structure.split("*")
        kernel = kernels[left]() * kernels[right]()
    else:
        kernel = kernels[structure]()

    noise = _log_uniform(rng, 1e-6, 1.0)
    mean_constant = 0.0 if rng.random() < 0.5 else float(rng.normal(0.0, 0.5))
    preprocess = Preprocess(
        standardize_target=True,
        standardize_covariates=True,
        pca_variance=0.95 if rng.random() < 0.5 else None,
    )
    return CandidateConfig(KernelSpec(kernel, noise), mean_constant, preprocess)


def rolling_origin_splits(n: int, folds: int
                          ) -> list[tuple[np.ndarray, np.ndarray]]:
    """Expanding-window train/validation index pairs respecting time order."""
    if folds < 1:
        raise ConfigError("folds must be >= 1")
    segment = n // (folds + 1)
    if segment < 1:
        raise ConfigError(f"{n} rows cannot form {folds + 1} segments")
    splits = []
    for f in range(folds):
        train_end = (f + 1) * segment
        val_end = (f + 2) * segment if f < folds - 1 else n
        splits.append((np.arange(0, train_end),
                       np.arange(train_end, val_end)))
    return splits


def _cv_rmse(x: np.ndarray, y: np.ndarray, candidate: CandidateConfig,
             splits) -> float:
    errors = []
    for train_idx, val_idx in splits:
        model = fit_arrays(x[train_idx], y[train_idx], candidate.spec,
                           mean_constant=candidate.mean_constant,
                           preprocess=candidate.preprocess)
        pred, _ = predict_batch(model, x[val_idx])
        errors.append(float(np.sqrt(np.mean((y[val_idx] - pred) ** 2))))
    return float(np.mean(errors))


def tune_base_model(offline, budget: int, folds: int = 3, seed: int = 0
                    ) -> tuple[GprModel, CandidateConfig]:
    """Sample `budget` configurations, score each by rolling-origin CV RMSE
    on the offline part, refit the winner on all offline data."""
    if budget < 1:
        raise ConfigError("tuning budget must be >= 1")
    x = offline.covariates
    y = offline.target
    splits = rolling_origin_splits(len(y), folds)
    rng = np.random.default_rng(seed)
    candidates = [sample_candidate(rng, offline.season_length)
                  for _ in range(budget)]

    best_idx, best_score = None, np.inf
    for idx, candidate in enumerate(candidates):
        try:
            score = _cv_rmse(x, y, candidate, splits)
        except EvarsError:
            continue
        if np.isfinite(score) and score < best_score:
            best_idx, best_score = idx, score
    if best_idx is None:
        raise TuningError("no candidate configuration survived fitting")
    winner = candidates[best_idx]
    model = fit_arrays(x, y, winner.spec, mean_constant=winner.mean_constant,
                       preprocess=winner.preprocess)
    return model, winner


def refit_with_structure(base: CandidateConfig, dataset, budget: int = 20,
                         seed: int = 0) -> GprModel:
    """Refit keeping the tuned kernel structure and preprocessing, with a
    small seeded search over parameter perturbations scored by marginal
    likelihood. Candidate 0 is the unperturbed base configuration."""
    if budget < 1:
        raise ConfigError("refit budget must be >= 1")
    rng = np.random.default_rng(seed)
    specs = [base.spec]
    for _ in range(budget - 1):
        kernel = perturb_kernel(base.spec.kernel, rng, scale=0.3)
        noise = base.spec.noise * float(np.exp(rng.normal(0.0, 0.3)))
        specs.append(KernelSpec(kernel, noise))

    best_model, best_score = None, -np.inf
    for spec in specs:
        try:
            model = fit_arrays(dataset.covariates, dataset.target, spec,
                               mean_constant=base.mean_constant,
                               preprocess=base.preprocess)
        except EvarsError:
            continue
        score = log_marginal_likelihood(model)
        if np.isfinite(score) and score > best_score:
            best_model, best_score = model, score
    if best_model is None:
        raise TuningError("every refit candidate failed conditioning")
    return best_model
