"""Ordinary Kriging with an anisotropic Matern 3/2 correlation.

Each output gets its own correlation lengths and process variance. Inputs
are min-max scaled to ``[0, 1]`` over the training set and outputs are
standardized, so the correlation lengths are searched in a fixed box.

The nugget acts as extra variance at zero lag: a prediction point that
coincides with a training input sees correlation ``1 + nugget`` to it, which
keeps the predictor an exact interpolator with zero variance there.

Hyperparameters maximize the restricted likelihood with the process variance
profiled out::

    l(theta) = -1/2 [(n - 1) log sigma2 + log|R| + log(1' R^-1 1)]
    sigma2   = (y - mu 1)' R^-1 (y - mu 1) / (n - 1)
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.stats import norm

from .errors import FitError, SchemaError
from .pso import PsoConfig, minimize

logger = logging.getLogger(__name__)

SCHEMA = "hybridfem.kriging"
VERSION = 1
SQRT3 = np.sqrt(3.0)
NUGGET = 1e-10
MAX_NUGGET = 1e-6
THETA_BOUNDS = (1e-2, 1e2)
_SIGMA2_FLOOR = 1e-300


def matern32(c: np.ndarray, c2: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Product Matern 3/2 correlation between rows of ``c (m, d)`` and ``c2 (n, d)``."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    c2 = np.atleast_2d(np.asarray(c2, dtype=float))
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise ValueError("correlation lengths must be positive")
    a = SQRT3 * np.abs(c[:, None, :] - c2[None, :, :]) / theta
    return np.exp(-a.sum(axis=-1)) * np.prod(1.0 + a, axis=-1)


@numba.njit(cache=True)
def _fill_lower(x: np.ndarray, scale: np.ndarray, diag: float, out: np.ndarray) -> None:
    n, d = x.shape
    for i in range(n):
        out[i, i] = diag
        for j in range(i):
            s = 0.0
            p = 1.0
            for k in range(d):
                a = abs(x[i, k] - x[j, k]) * scale[k]
                s += a
                p *= 1.0 + a
            out[i, j] = np.exp(-s) * p


class _Correlation:
    """Training correlation matrices for many ``theta`` on fixed inputs."""

    def __init__(self, x: np.ndarray):
        self.x = np.ascontiguousarray(x, dtype=float)
        self.n = len(x)

    def lower(self, theta: np.ndarray, nugget: float) -> np.ndarray:
        """Correlation matrix with only the lower triangle filled (enough for Cholesky)."""
        R = np.zeros((self.n, self.n))
        _fill_lower(self.x, SQRT3 / np.asarray(theta, dtype=float), 1.0 + nugget, R)
        return R


def _gls(L: np.ndarray, y: np.ndarray):
    """Generalized least squares pieces from the lower Cholesky factor."""
    a = solve_triangular(L, np.ones(len(y)), lower=True, check_finite=False)
    b = solve_triangular(L, y, lower=True, check_finite=False)
    aa = float(a @ a)
    mu = float(a @ b) / aa
    quad = float(b @ b) - float(a @ b) ** 2 / aa
    return mu, max(quad, 0.0), aa


def reml(L: np.ndarray, y: np.ndarray) -> float:
    """Profiled restricted log-likelihood for one output."""
    n = len(y)
    _, quad, aa = _gls(L, y)
    sigma2 = max(quad / (n - 1), _SIGMA2_FLOOR)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return -0.5 * ((n - 1) * np.log(sigma2) + logdet + np.log(aa))


def _neg_reml_batch(corr: _Correlation, y: np.ndarray, nugget: float):
    def f(log_theta: np.ndarray) -> np.ndarray:
        out = np.empty(len(log_theta))
        for k, lt in enumerate(log_theta):
            try:
                L = cholesky(corr.lower(10.0 ** lt, nugget), lower=True, check_finite=False,
                             overwrite_a=True)
            except LinAlgError:
                out[k] = np.inf
                continue
            val = reml(L, y)
            out[k] = -val if np.isfinite(val) else np.inf
        return out

    return f


@dataclass
class _Output:
    """Fitted state of one output component (standardized units)."""

    theta: np.ndarray
    sigma2: float
    mu: float
    L: np.ndarray
    alpha: np.ndarray  # R^-1 (y - mu 1)
    a1: np.ndarray  # L^-1 1
    one_r_one: float
    reml: float


@dataclass
class KrigingModel:
    """Immutable fitted multi-output Ordinary Kriging model."""

    x: np.ndarray  # normalized training inputs (n, d)
    y: np.ndarray  # standardized training outputs (n, p)
    theta: np.ndarray  # (p, d)
    nugget: float
    x_lo: np.ndarray
    x_span: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        corr = _Correlation(self.x)
        self._outputs = []
        for j in range(self.y.shape[1]):
            L = cholesky(corr.lower(self.theta[j], self.nugget), lower=True, check_finite=False)
            yj = self.y[:, j]
            mu, quad, aa = _gls(L, yj)
            sigma2 = max(quad / (len(yj) - 1), _SIGMA2_FLOOR) if len(yj) > 1 else _SIGMA2_FLOOR
            resid = solve_triangular(L, yj - mu, lower=True, check_finite=False)
            alpha = solve_triangular(L.T, resid, lower=False, check_finite=False)
            a1 = solve_triangular(L, np.ones(len(yj)), lower=True, check_finite=False)
            self._outputs.append(_Output(self.theta[j], sigma2, mu, L, alpha, a1, aa, reml(L, yj)))

    @property
    def n_inputs(self) -> int:
        return self.x.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.y.shape[1]

    @property
    def n_train(self) -> int:
        return self.x.shape[0]

    @property
    def sigma2(self) -> np.ndarray:
        """Process variances in output units."""
        return np.array([o.sigma2 for o in self._outputs]) * self.y_std ** 2

    @property
    def mu(self) -> np.ndarray:
        """Estimated constant means in output units."""
        return self.y_mean + self.y_std * np.array([o.mu for o in self._outputs])

    @property
    def reml_values(self) -> np.ndarray:
        return np.array([o.reml for o in self._outputs])

    def normalize(self, c: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(np.asarray(c, dtype=float)) - self.x_lo) / self.x_span

    def _corr(self, xs: np.ndarray, j: int) -> np.ndarray:
        r = matern32(xs, self.x, self.theta[j])
        r[np.all(xs[:, None, :] == self.x[None, :, :], axis=-1)] += self.nugget
        return r

    def predict_mean(self, c: np.ndarray) -> np.ndarray:
        """Mean prediction ``(m, p)`` at raw inputs ``c (m, d)``."""
        xs = self.normalize(c)
        out = np.empty((len(xs), self.n_outputs))
        for j, o in enumerate(self._outputs):
            out[:, j] = o.mu + self._corr(xs, j) @ o.alpha
        return self.y_mean + self.y_std * out

    def predict_variance(self, c: np.ndarray) -> np.ndarray:
        """Prediction variance ``(m, p)``, including the mean-estimation term."""
        xs = self.normalize(c)
        out = np.empty((len(xs), self.n_outputs))
        for j, o in enumerate(self._outputs):
            r = self._corr(xs, j)
            v = solve_triangular(o.L, r.T, lower=True, check_finite=False)  # (n, m)
            u = 1.0 - o.a1 @ v
            s = (1.0 + self.nugget) - np.sum(v * v, axis=0) + u * u / o.one_r_one
            out[:, j] = o.sigma2 * np.maximum(s, 0.0)
        return out * self.y_std ** 2

    def predict(self, c: np.ndarray, variance: bool = False):
        mean = self.predict_mean(c)
        return (mean, self.predict_variance(c)) if variance else mean

    def confidence_interval(self, c: np.ndarray, level: float = 0.95):
        """Two-sided normal interval ``(lower, upper)`` from the diagonal variance."""
        z = norm.ppf(0.5 + 0.5 * level)
        mean = self.predict_mean(c)
        half = z * np.sqrt(self.predict_variance(c))
        return mean - half, mean + half

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "version": VERSION, "nugget": self.nugget,
                "x": self.x.tolist(), "y": self.y.tolist(), "theta": self.theta.tolist(),
                "x_lo": self.x_lo.tolist(), "x_span": self.x_span.tolist(),
                "y_mean": self.y_mean.tolist(), "y_std": self.y_std.tolist(), "meta": self.meta}

    @classmethod
    def from_dict(cls, d: dict) -> "KrigingModel":
        if d.get("schema") != SCHEMA:
            raise SchemaError("not a Kriging model file")
        if d.get("version") != VERSION:
            raise SchemaError(f"unsupported Kriging model version {d.get('version')}")
        try:
            return cls(x=np.array(d["x"]), y=np.array(d["y"]), theta=np.array(d["theta"]),
                       nugget=float(d["nugget"]), x_lo=np.array(d["x_lo"]), x_span=np.array(d["x_span"]),
                       y_mean=np.array(d["y_mean"]), y_std=np.array(d["y_std"]), meta=d.get("meta", {}))
        except KeyError as exc:
            raise SchemaError(f"Kriging model field missing: {exc}") from exc


def fit(c: np.ndarray, y: np.ndarray, *, seed: int = 0, config: PsoConfig = PsoConfig(),
        theta_bounds: tuple[float, float] = THETA_BOUNDS, nugget: float = NUGGET,
        meta: dict | None = None) -> KrigingModel:
    """Fit one Ordinary Kriging model per output column of ``y``.

    Correlation lengths are searched in log10 space by particle swarm plus
    compass search, one seeded search per output. If every tried correlation
    matrix is numerically singular the nugget is raised tenfold, up to
    ``MAX_NUGGET``.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if len(c) != len(y):
        raise ValueError("inputs and outputs differ in length")
    if len(np.unique(c, axis=0)) < max(2, len(c)):
        raise FitError("Kriging needs at least two pairwise distinct inputs")
    if not np.all(np.isfinite(y)):
        raise FitError("non-finite training outputs")
    x_lo = c.min(axis=0)
    x_span = c.max(axis=0) - x_lo
    x_span[x_span == 0] = 1.0
    x = (c - x_lo) / x_span
    y_mean = y.mean(axis=0)
    y_std = y.std(axis=0)
    y_std[y_std == 0] = 1.0
    ys = (y - y_mean) / y_std

    lo = np.full(c.shape[1], np.log10(theta_bounds[0]))
    hi = np.full(c.shape[1], np.log10(theta_bounds[1]))
    corr = _Correlation(x)
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**63 - 1, size=ys.shape[1])
    while True:
        thetas, failed = [], False
        for j in range(ys.shape[1]):
            res = minimize(_neg_reml_batch(corr, ys[:, j], nugget), lo, hi, config, seed=int(seeds[j]))
            if not np.isfinite(res.fun):
                failed = True
                break
            thetas.append(10.0 ** res.x)
            logger.debug("output %d: theta=%s reml=%.6g (%d evaluations)", j, thetas[-1], -res.fun,
                         res.evaluations)
        if not failed:
            break
        if nugget * 10.0 > MAX_NUGGET * (1.0 + 1e-9):
            raise FitError("correlation matrix singular for every tried theta; increase the nugget")
        nugget *= 10.0
        logger.info("singular correlation matrices, raising nugget to %.1e", nugget)
    return KrigingModel(x=x, y=ys, theta=np.array(thetas), nugget=nugget, x_lo=x_lo, x_span=x_span,
                        y_mean=y_mean, y_std=y_std, meta={"seed": seed, **(meta or {})})


def save_model(model: KrigingModel, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path: str | os.PathLike) -> KrigingModel:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed model file ({exc})") from exc
    return KrigingModel.from_dict(d)


def fit_training_set(ts, *, seed: int = 0, config: PsoConfig = PsoConfig(), **kw) -> KrigingModel:
    """Fit the 9 remainder outputs of a training set; records its macro parameter."""
    meta = {"macro_c1": ts.macro_c1, "n_train": len(ts), "provenance": ts.provenance}
    return fit(ts.c, ts.outputs, seed=seed, config=config, meta=meta, **kw)
