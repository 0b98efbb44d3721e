"""Distributional output heads: Normal, Student-t and Johnson's SU.

Raw network outputs are mapped to valid parameterizations with softplus
corrections (``EPS_SCALE = 1e-3``, ``GAIN = 3``):

* scale      sigma = EPS_SCALE + GAIN * softplus(raw)
* t dof      nu    = 2 + GAIN * softplus(raw)       (variance exists)
* SU tail    tau   = 1 + GAIN * softplus(raw)
* locations and the SU skewness slot pass through untouched.

Johnson's SU with location lambda, scale sigma, tailweight tau and
skewness zeta has density

    f(x) = tau / (sigma sqrt(2 pi)) * 1/sqrt(1 + z^2)
           * exp(-0.5 * (zeta + tau * asinh(z))^2),     z = (x - lambda)/sigma

so W = zeta + tau * asinh(Z) is standard normal, which gives closed-form
quantiles and CDF for all three families (Student-t through the
incomplete beta).

Parameter containers hold one array entry per delivery hour; every map
broadcasts over trailing shapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import (
    norm_cdf,
    norm_quantile,
    softplus,
    student_t_cdf,
    student_t_logpdf,
    student_t_quantile,
)

__all__ = [
    "EPS_SCALE",
    "GAIN",
    "NormalParams",
    "StudentTParams",
    "JsuParams",
    "DistParams",
    "transform_head_outputs",
    "log_pdf",
    "cdf",
    "quantile",
    "quantile_matrix",
    "sample",
]

EPS_SCALE = 1e-3
GAIN = 3.0

_LN_2PI = math.log(2.0 * math.pi)


def _as_float_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


@dataclass
class NormalParams:
    """Per-hour mean and scale."""

    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class StudentTParams:
    """Per-hour location, scale and degrees of freedom."""

    mu: np.ndarray
    sigma: np.ndarray
    nu: np.ndarray


@dataclass
class JsuParams:
    """Per-hour Johnson's SU location, scale, tailweight and skewness."""

    loc: np.ndarray
    scale: np.ndarray
    tail: np.ndarray
    skew: np.ndarray


DistParams = NormalParams | StudentTParams | JsuParams


def positive_scale(raw):
    """Map an unconstrained output slot to a strictly positive scale."""
    return EPS_SCALE + GAIN * softplus(raw)


def transform_head_outputs(raw, kind: str, hours: int = 24) -> DistParams:
    """Slice a flat network output into valid distribution parameters.

    ``raw`` has shape (..., n_params * hours); slots are parameter-major,
    so slot p*hours + h feeds parameter p of hour h.
    """
    raw = _as_float_array(raw)
    n_params = {"normal": 2, "student_t": 3, "jsu": 4}.get(kind)
    if n_params is None:
        raise ValueError(f"unknown distribution head {kind!r}")
    if raw.shape[-1] != n_params * hours:
        raise ValueError(
            f"head {kind!r} expects {n_params * hours} output slots, got {raw.shape[-1]}"
        )
    blocks = [raw[..., i * hours:(i + 1) * hours] for i in range(n_params)]
    if kind == "normal":
        return NormalParams(mu=blocks[0], sigma=positive_scale(blocks[1]))
    if kind == "student_t":
        return StudentTParams(
            mu=blocks[0],
            sigma=positive_scale(blocks[1]),
            nu=2.0 + GAIN * softplus(blocks[2]),
        )
    return JsuParams(
        loc=blocks[0],
        scale=positive_scale(blocks[1]),
        tail=1.0 + GAIN * softplus(blocks[2]),
        skew=blocks[3],
    )


def log_pdf(params: DistParams, x) -> np.ndarray:
    x = _as_float_array(x)
    if isinstance(params, NormalParams):
        z = (x - params.mu) / params.sigma
        return -0.5 * (_LN_2PI + z * z) - np.log(params.sigma)
    if isinstance(params, StudentTParams):
        z = (x - params.mu) / params.sigma
        nu = params.nu
        lg = np.vectorize(math.lgamma, otypes=[float])
        return (
            lg(0.5 * (nu + 1.0))
            - lg(0.5 * nu)
            - 0.5 * np.log(nu * math.pi)
            - 0.5 * (nu + 1.0) * np.log1p(z * z / nu)
            - np.log(params.sigma)
        )
    if isinstance(params, JsuParams):
        z = (x - params.loc) / params.scale
        w = params.skew + params.tail * np.arcsinh(z)
        return (
            np.log(params.tail)
            - np.log(params.scale)
            - 0.5 * _LN_2PI
            - 0.5 * np.log1p(z * z)
            - 0.5 * w * w
        )
    raise TypeError(f"unsupported parameter container {type(params).__name__}")


def cdf(params: DistParams, x) -> np.ndarray:
    x = _as_float_array(x)
    if isinstance(params, NormalParams):
        return norm_cdf((x - params.mu) / params.sigma)
    if isinstance(params, StudentTParams):
        z = np.broadcast_arrays((x - params.mu) / params.sigma, params.nu)
        t_cdf = np.vectorize(student_t_cdf, otypes=[float])
        return t_cdf(z[0], z[1])
    if isinstance(params, JsuParams):
        z = (x - params.loc) / params.scale
        return norm_cdf(params.skew + params.tail * np.arcsinh(z))
    raise TypeError(f"unsupported parameter container {type(params).__name__}")


def quantile(params: DistParams, p: float) -> np.ndarray:
    """Quantile of each hour's distribution at a single level ``p``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p!r}")
    z = norm_quantile(p)
    if isinstance(params, NormalParams):
        return params.mu + params.sigma * z
    if isinstance(params, StudentTParams):
        t_q = np.vectorize(lambda nu: student_t_quantile(p, nu), otypes=[float])
        return params.mu + params.sigma * t_q(params.nu)
    if isinstance(params, JsuParams):
        return params.loc + params.scale * np.sinh((z - params.skew) / params.tail)
    raise TypeError(f"unsupported parameter container {type(params).__name__}")


def quantile_matrix(params: DistParams, levels) -> np.ndarray:
    """Stack ``quantile`` over levels; shape (..., hours, len(levels))."""
    cols = [quantile(params, float(p)) for p in levels]
    return np.stack(cols, axis=-1)


def sample(params: DistParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` joint realizations; shape (n,) + params shape."""
    if isinstance(params, NormalParams):
        z = rng.standard_normal((n,) + np.shape(params.mu))
        return params.mu + params.sigma * z
    if isinstance(params, StudentTParams):
        z = rng.standard_t(np.broadcast_to(params.nu, np.shape(params.mu)), size=(n,) + np.shape(params.mu))
        return params.mu + params.sigma * z
    if isinstance(params, JsuParams):
        z = rng.standard_normal((n,) + np.shape(params.loc))
        return params.loc + params.scale * np.sinh((z - params.skew) / params.tail)
    raise TypeError(f"unsupported parameter container {type(params).__name__}")
