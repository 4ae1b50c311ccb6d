"""Online change point detection over the target stream.

Two detectors are provided: a two-stage sequentially discounting
autoregression scheme with smoothing, and Bayesian online change point
detection with a Normal-Gamma observation model. Both consume the
seasonally differenced target stream.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import t as student_t

from .errors import CalibrationError, ConfigError, InputError

# Relative floor on the innovation variance; keeps log-densities finite on
# constant streams.
VARIANCE_FLOOR_REL = 1e-8
VARIANCE_FLOOR_ABS = 1e-12
# The innovation variance behind the predictive density is discounted much
# more slowly than the mean and autocovariances; with the fast factor the
# variance estimate itself is so noisy that scores spike on stationary
# streams and the response to a real shift varies by orders of magnitude.
INNOVATION_VARIANCE_RATE = 0.05


class SdarState:
    """Autoregression with exponentially discounted sufficient statistics."""

    def __init__(self, order: int = 1, r: float = 0.5):
        if order < 1:
            raise ConfigError("SDAR order must be >= 1")
        if not 0.0 < r < 1.0:
            raise ConfigError("forgetting factor must lie in (0, 1)")
        self.order = order
        self.r = r
        self.mean = 0.0
        self.second_moment = 0.0
        self.autocov = np.zeros(order + 1)
        self.coeffs = np.zeros(order)
        self.sigma2 = 0.0
        self.count = 0
        self._recent: deque[float] = deque(maxlen=order)  # newest first

    @property
    def warm(self) -> bool:
        return self.count >= self.order + 2

    def _variance_floor(self) -> float:
        return VARIANCE_FLOOR_REL * self.second_moment + VARIANCE_FLOOR_ABS

    def _predict(self) -> float:
        yhat = self.mean
        for i, past in enumerate(self._recent):
            yhat += self.coeffs[i] * (past - self.mean)
        return yhat

    def update(self, y: float) -> float:
        """Observe one value; returns the log predictive density of y under
        the pre-update model (0 during warm-up)."""
        if not np.isfinite(y):
            raise InputError(f"non-finite observation {y}")
        r = self.r
        if self.warm:
            yhat = self._predict()
            sigma2 = max(self.sigma2, self._variance_floor())
            log_density = float(-0.5 * np.log(2.0 * np.pi * sigma2)
                                - (y - yhat) ** 2 / (2.0 * sigma2))
        else:
            # residual against the anchored mean is zero on the first step
            yhat = y if self.count == 0 else self.mean
            log_density = 0.0

        if self.count == 0:
            # anchor the moments at the first observation so a constant
            # stream has zero residuals from the start
            self.mean = y
            self.second_moment = y * y
        else:
            self.mean = (1.0 - r) * self.mean + r * y
            self.second_moment = (1.0 - r) * self.second_moment + r * y * y
        centered = y - self.mean
        self.autocov[0] = (1.0 - r) * self.autocov[0] + r * centered * centered
        for j, past in enumerate(self._recent):
            self.autocov[j + 1] = ((1.0 - r) * self.autocov[j + 1]
                                   + r * centered * (past - self.mean))
        self.count += 1
        if self.count >= self.order + 2:
            self._solve_yule_walker()
        s = INNOVATION_VARIANCE_RATE
        self.sigma2 = (1.0 - s) * self.sigma2 + s * (y - yhat) ** 2
        self._recent.appendleft(float(y))
        return log_density

    def _solve_yule_walker(self):
        p = self.order
        toeplitz = np.empty((p, p))
        for i in range(p):
            for j in range(p):
                toeplitz[i, j] = self.autocov[abs(i - j)]
        toeplitz += np.eye(p) * self._variance_floor()
        try:
            self.coeffs = np.linalg.solve(toeplitz, self.autocov[1:p + 1])
        except np.linalg.LinAlgError:
            pass  # keep previous coefficients on a singular system


class ChangeFinderState:
    """Two SDAR stages with moving-average smoothing of outlier scores."""

    def __init__(self, order: int = 1, r: float = 0.4, smooth: int = 4,
                 threshold: float | None = None):
        if smooth < 1:
            raise ConfigError("smoothing window must be >= 1")
        self.order = order
        self.smooth = smooth
        self.stage1 = SdarState(order=order, r=r)
        self.stage2 = SdarState(order=order, r=r)
        self.outlier_scores: deque[float] = deque(maxlen=smooth)
        self.losses: deque[float] = deque(maxlen=smooth)
        self.threshold = threshold
        self.updates = 0

    @property
    def warmup_steps(self) -> int:
        return 2 * self.smooth + self.order

    @property
    def warm(self) -> bool:
        return self.updates >= self.warmup_steps

    def step(self, y: float) -> tuple[float, bool]:
        """Returns (change point score, change declared).

        Each stage's output only enters the next step of the pipeline once
        that stage is warm; this avoids scoring the artificial jump from the
        neutral warm-up value to the first real log-density."""
        stage1_ready = self.stage1.warm
        outlier = -self.stage1.update(y)
        if stage1_ready:
            self.outlier_scores.append(outlier)
        if self.outlier_scores:
            smoothed = float(np.mean(self.outlier_scores))
            stage2_ready = self.stage2.warm
            loss = -self.stage2.update(smoothed)
            if stage2_ready:
                self.losses.append(loss)
        score = float(np.mean(self.losses)) if self.losses else 0.0
        self.updates += 1
        fired = (self.warm and self.threshold is not None
                 and score > self.threshold)
        return score, fired


def calibrate_cf_threshold(offline_scores, percentile: float) -> float:
    """Percentile (linear interpolation) of warm-up-excluded offline scores."""
    if not 0.0 < percentile <= 100.0:
        raise ConfigError("percentile must lie in (0, 100]")
    scores = np.asarray(offline_scores, dtype=float)
    scores = scores[np.isfinite(scores)]
    if len(scores) < 10:
        raise CalibrationError(
            f"need at least 10 offline scores, got {len(scores)}"
        )
    return float(np.percentile(scores, percentile))


class BocpdState:
    """Run-length posterior with Normal-Gamma sufficient statistics.

    The hazard is constant at 1/hazard_lambda. Run lengths whose posterior
    mass falls below `truncation` are pruned (pass None to disable).
    """

    def __init__(self, hazard_lambda: float, prior_mean: float = 0.0,
                 prior_count: float = 1.0, prior_shape: float = 1.0,
                 prior_scale: float = 1.0, truncation: float | None = 1e-10,
                 min_run_guard: int = 5):
        if hazard_lambda <= 0:
            raise ConfigError("hazard timescale must be positive")
        self.hazard = 1.0 / hazard_lambda
        self.prior = (prior_mean, prior_count, prior_shape, prior_scale)
        self.truncation = truncation
        self.min_run_guard = min_run_guard
        self.run_lengths = np.array([0], dtype=int)
        self.log_probs = np.array([0.0])
        mu0, kappa0, alpha0, beta0 = self.prior
        self.mu = np.array([mu0])
        self.kappa = np.array([kappa0])
        self.alpha = np.array([alpha0])
        self.beta = np.array([beta0])
        self.map_run_length = 0
        self.steps = 0

    @property
    def posterior(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def _log_predictive(self, y: float) -> np.ndarray:
        scale = np.sqrt(self.beta * (self.kappa + 1.0)
                        / (self.alpha * self.kappa))
        return student_t.logpdf(y, df=2.0 * self.alpha, loc=self.mu,
                                scale=scale)

    def _updated_stats(self, y: float):
        # run length 0 is a fresh run whose first observation is y
        mu0, kappa0, alpha0, beta0 = self.prior
        new_mu = (self.kappa * self.mu + y) / (self.kappa + 1.0)
        new_beta = self.beta + self.kappa * (y - self.mu) ** 2 \
            / (2.0 * (self.kappa + 1.0))
        mu_fresh = (kappa0 * mu0 + y) / (kappa0 + 1.0)
        beta_fresh = beta0 + kappa0 * (y - mu0) ** 2 / (2.0 * (kappa0 + 1.0))
        self.mu = np.concatenate([[mu_fresh], new_mu])
        self.kappa = np.concatenate([[kappa0 + 1.0], self.kappa + 1.0])
        self.alpha = np.concatenate([[alpha0 + 0.5], self.alpha + 0.5])
        self.beta = np.concatenate([[beta_fresh], new_beta])

    def step(self, y: float) -> tuple[bool, int]:
        """Observe one value; returns (change declared, MAP run length)."""
        if not np.isfinite(y):
            raise InputError(f"non-finite observation {y}")
        if self.steps == 0:
            # The first observation starts the initial run.
            self._updated_stats(y)
            self.mu, self.kappa = self.mu[:1], self.kappa[:1]
            self.alpha, self.beta = self.alpha[:1], self.beta[:1]
            self.steps = 1
            return False, 0

        log_pred = self._log_predictive(y)
        with np.errstate(divide="ignore"):
            log_growth = self.log_probs + log_pred + np.log1p(-self.hazard)
            log_cp = logsumexp(self.log_probs + log_pred + np.log(self.hazard))
        joint = np.concatenate([[log_cp], log_growth])
        self.log_probs = joint - logsumexp(joint)
        self.run_lengths = np.concatenate([[0], self.run_lengths + 1])
        self._updated_stats(y)

        if self.truncation is not None:
            keep = self.log_probs >= np.log(self.truncation)
            keep[np.argmax(self.log_probs)] = True
            if not keep.all():
                self.run_lengths = self.run_lengths[keep]
                self.mu, self.kappa = self.mu[keep], self.kappa[keep]
                self.alpha, self.beta = self.alpha[keep], self.beta[keep]
                self.log_probs = self.log_probs[keep]
                self.log_probs -= logsumexp(self.log_probs)

        previous_map = self.map_run_length
        self.map_run_length = int(self.run_lengths[np.argmax(self.log_probs)])
        self.steps += 1
        fired = (self.map_run_length == 0
                 and previous_map >= self.min_run_guard)
        return fired, self.map_run_length


def seasonal_difference(series, n_seas: int) -> np.ndarray:
    """series[i] - series[i - n_seas]; output shorter by one season."""
    series = np.asarray(series, dtype=float)
    if len(series) <= n_seas:
        raise InputError(
            f"need more than {n_seas} values, got {len(series)}"
        )
    return series[n_seas:] - series[:-n_seas]


@dataclass
class DetectorConfig:
    """Which detector monitors the stream and with which parameters."""

    kind: str = "changefinder"
    cf_r: float = 0.4
    cf_order: int = 1
    cf_smooth: int = 4
    cf_thr_perc: float = 70.0
    const_hazard_factor: float = 5.0  # hazard timescale = factor * n_seas
    bocpd_truncation: float | None = 1e-10
    bocpd_min_run_guard: int = 5

    def __post_init__(self):
        if self.kind not in ("changefinder", "bocpd"):
            raise ConfigError(f"unknown detector kind {self.kind!r}")


@dataclass
class DetectionEvent:
    step: int
    detector: str
    score: float
    threshold: float

    def to_dict(self) -> dict:
        return {"step": self.step, "detector": self.detector,
                "score": self.score, "threshold": self.threshold}


class DriftDetector:
    """Feeds a seasonally differenced stream into the configured detector.

    ``warm_start`` must be called with the offline targets before online
    updates; for the SDAR detector it also calibrates the score threshold.
    """

    def __init__(self, config: DetectorConfig, n_seas: int):
        self.config = config
        self.n_seas = n_seas
        self._ring: deque[float] = deque(maxlen=n_seas)
        self._inner = None
        self._step = 0

    def _push(self, y: float) -> float | None:
        if len(self._ring) < self.n_seas:
            self._ring.append(float(y))
            return None
        diff = float(y) - self._ring[0]
        self._ring.append(float(y))
        return diff

    def warm_start(self, offline_targets) -> None:
        targets = np.asarray(offline_targets, dtype=float)
        if len(targets) <= self.n_seas:
            raise CalibrationError(
                "offline part must exceed one season for differencing"
            )
        diffs = [self._push(y) for y in targets]
        diffs = [d for d in diffs if d is not None]
        if self.config.kind == "changefinder":
            detector = ChangeFinderState(order=self.config.cf_order,
                                         r=self.config.cf_r,
                                         smooth=self.config.cf_smooth)
            scores = []
            for d in diffs:
                score, _ = detector.step(d)
                if detector.warm:
                    scores.append(score)
            detector.threshold = calibrate_cf_threshold(
                scores, self.config.cf_thr_perc)
            self._inner = detector
        else:
            diffs_arr = np.asarray(diffs)
            variance = float(np.var(diffs_arr))
            detector = BocpdState(
                hazard_lambda=self.config.const_hazard_factor * self.n_seas,
                prior_mean=float(diffs_arr[0]),
                prior_count=1.0,
                prior_shape=1.0,
                prior_scale=max(variance, VARIANCE_FLOOR_ABS),
                truncation=self.config.bocpd_truncation,
                min_run_guard=self.config.bocpd_min_run_guard,
            )
            for d in diffs:
                detector.step(d)
            self._inner = detector
        self._step = len(targets)

    def update(self, y: float) -> tuple[bool, DetectionEvent | None]:
        if self._inner is None:
            raise CalibrationError("warm_start must be called before update")
        diff = self._push(y)
        self._step += 1
        if diff is None:
            return False, None
        if self.config.kind == "changefinder":
            score, fired = self._inner.step(diff)
            threshold = self._inner.threshold
        else:
            fired, map_run = self._inner.step(diff)
            score, threshold = float(map_run), 0.0
        if fired:
            return True, DetectionEvent(step=self._step - 1,
                                        detector=self.config.kind,
                                        score=score, threshold=threshold)
        return False, None
