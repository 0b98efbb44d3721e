"""Small feed-forward nets with swappable output heads, trained by Adam.

Trunk (two softplus hidden layers, optional input standardization):

    h1  = softplus(x W1 + b1)
    h2  = softplus(h1 W2 + b2)
    out = h2 W3 + b3

Heads interpret ``out`` per delivery day (24 hours):

* point      out slot h        -> price of hour h,       loss = MAE
* quantile   hour-major layout -> (hours, levels) grid,  loss = pinball
* normal / student_t / jsu     -> parameter-major slots out[p*24 + h],
  mapped through the transforms in :mod:`conformal_epf.distributions`,
  loss = negative log likelihood (per-sample sum over hours, batch mean)

Gradients are exact closed forms, verified against central finite
differences in the test suite. Everything is plain numpy driven by a
seeded Generator, so training is bit-reproducible.

The input standardization layer keeps running mean/var with momentum
0.99 (no learned affine, so it adds no trainable parameters); batches
are normalized with their own statistics during training and with the
frozen running statistics at inference.
"""

from __future__ import annotations

import base64
import enum
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import distributions as dists
from .dataset import HOURS_PER_DAY, ScalerState
from .special import digamma, sigmoid, softplus

__all__ = [
    "HeadKind",
    "TrainConfig",
    "MlpParams",
    "AdamState",
    "TrainResult",
    "head_output_dim",
    "init_mlp_params",
    "mlp_forward",
    "pinball_loss",
    "mae_loss",
    "distribution_nll",
    "loss_gradient",
    "init_adam",
    "adam_step",
    "train_member",
    "save_checkpoint",
    "load_checkpoint",
    "Checkpoint",
]

_BN_EPS = 1e-5

_PARAM_KEYS = ("w1", "b1", "w2", "b2", "w3", "b3")


class HeadKind(str, enum.Enum):
    POINT = "point"
    QUANTILE = "quantile"
    NORMAL = "normal"
    STUDENT_T = "student_t"
    JSU = "jsu"

    @property
    def is_distribution(self) -> bool:
        return self in (HeadKind.NORMAL, HeadKind.STUDENT_T, HeadKind.JSU)


_N_DIST_PARAMS = {HeadKind.NORMAL: 2, HeadKind.STUDENT_T: 3, HeadKind.JSU: 4}


def head_output_dim(head: HeadKind, n_levels: int | None = None, hours: int = HOURS_PER_DAY) -> int:
    if head == HeadKind.POINT:
        return hours
    if head == HeadKind.QUANTILE:
        if not n_levels:
            raise ValueError("quantile head needs the number of levels")
        return hours * n_levels
    return hours * _N_DIST_PARAMS[head]


@dataclass
class TrainConfig:
    """Optimizer and architecture settings for one ensemble member."""

    hidden_units: int = 64  # both hidden layers share this width
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 800
    patience: int = 50
    validation_fraction: float = 0.2
    batch_norm: bool = True
    bn_momentum: float = 0.99
    seed: int = 0

    def __post_init__(self):
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if not 0.0 <= self.bn_momentum < 1.0:
            raise ValueError("bn_momentum must lie in [0, 1)")


@dataclass
class MlpParams:
    """Trainable weights plus frozen input-standardization statistics."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    bn_mean: np.ndarray | None = None
    bn_var: np.ndarray | None = None

    def copy(self) -> "MlpParams":
        return MlpParams(
            w1=self.w1.copy(), b1=self.b1.copy(),
            w2=self.w2.copy(), b2=self.b2.copy(),
            w3=self.w3.copy(), b3=self.b3.copy(),
            bn_mean=None if self.bn_mean is None else self.bn_mean.copy(),
            bn_var=None if self.bn_var is None else self.bn_var.copy(),
        )

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.w3.shape[1]


def init_mlp_params(
    n_inputs: int,
    n_hidden: int,
    n_outputs: int,
    rng: np.random.Generator,
    batch_norm: bool = True,
) -> MlpParams:
    """Glorot-uniform weights, zero biases, fresh (0, 1) input statistics."""

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return MlpParams(
        w1=glorot(n_inputs, n_hidden), b1=np.zeros(n_hidden),
        w2=glorot(n_hidden, n_hidden), b2=np.zeros(n_hidden),
        w3=glorot(n_hidden, n_outputs), b3=np.zeros(n_outputs),
        bn_mean=np.zeros(n_inputs) if batch_norm else None,
        bn_var=np.ones(n_inputs) if batch_norm else None,
    )


def _normalize_input(params: MlpParams, x: np.ndarray) -> np.ndarray:
    if params.bn_mean is None:
        return x
    return (x - params.bn_mean) / np.sqrt(params.bn_var + _BN_EPS)


def _forward_cache(params: MlpParams, x: np.ndarray):
    xn = _normalize_input(params, x)
    z1 = xn @ params.w1 + params.b1
    a1 = softplus(z1)
    z2 = a1 @ params.w2 + params.b2
    a2 = softplus(z2)
    out = a2 @ params.w3 + params.b3
    return xn, z1, a1, z2, a2, out


def mlp_forward(params: MlpParams, x: np.ndarray, head: HeadKind | None = None,
                n_levels: int | None = None) -> np.ndarray:
    """Raw network output for a single input row or a batch.

    Inference mode: the input standardization uses the stored running
    statistics. When ``head`` is given the output width is validated.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = _forward_cache(params, np.atleast_2d(x))[-1]
    if head is not None:
        expected = head_output_dim(head, n_levels)
        if out.shape[-1] != expected:
            raise ValueError(f"head {head.value} expects {expected} outputs, "
                             f"network produces {out.shape[-1]}")
    return out[0] if single else out


def pinball_loss(pred: np.ndarray, y: np.ndarray, levels) -> float:
    """Mean pinball loss over all (sample, hour, level) entries.

    ``pred`` has shape (..., hours, n_levels), ``y`` shape (..., hours).
    Ties y == q sit on the (1 - level) * (q - y) branch.
    """
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    lv = np.asarray(levels, dtype=float)
    diff = y[..., None] - pred
    return float(np.mean(np.where(diff > 0, lv * diff, (lv - 1.0) * diff)))


def mae_loss(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.abs(np.asarray(y, float) - np.asarray(pred, float))))


def distribution_nll(params: dists.DistParams, y: np.ndarray) -> float:
    """Negative log likelihood: per-sample sum over hours, batch mean."""
    lp = dists.log_pdf(params, np.asarray(y, dtype=float))
    if lp.ndim <= 1:
        return float(-np.sum(lp))
    return float(np.mean(-np.sum(lp, axis=-1)))


def _head_loss_and_output_grad(out, y, head: HeadKind, levels):
    """Loss and dloss/dout for a batch; ``out`` (B, n_out), ``y`` (B, hours)."""
    b, h = y.shape
    if head == HeadKind.POINT:
        loss = mae_loss(out, y)
        g = np.where(y > out, -1.0, 1.0) / (b * h)
        return loss, g
    if head == HeadKind.QUANTILE:
        lv = np.asarray(levels, dtype=float)
        k = len(lv)
        pred = out.reshape(b, h, k)
        diff = y[..., None] - pred
        loss = float(np.mean(np.where(diff > 0, lv * diff, (lv - 1.0) * diff)))
        g = np.where(diff > 0, -lv, 1.0 - lv) / (b * h * k)
        return loss, g.reshape(b, h * k)

    gain = dists.GAIN
    blocks = [out[:, i * h:(i + 1) * h] for i in range(out.shape[1] // h)]
    g = np.empty_like(out)
    if head == HeadKind.NORMAL:
        mu_raw, s_raw = blocks
        sig = dists.EPS_SCALE + gain * softplus(s_raw)
        z = (y - mu_raw) / sig
        nll = 0.5 * np.log(2.0 * np.pi) + np.log(sig) + 0.5 * z * z
        loss = float(np.mean(np.sum(nll, axis=1)))
        d_mu = -z / sig
        d_sig = (1.0 - z * z) / sig
        g[:, :h] = d_mu / b
        g[:, h:] = d_sig * gain * sigmoid(s_raw) / b
        return loss, g
    if head == HeadKind.STUDENT_T:
        mu_raw, s_raw, n_raw = blocks
        sig = dists.EPS_SCALE + gain * softplus(s_raw)
        nu = 2.0 + gain * softplus(n_raw)
        z = (y - mu_raw) / sig
        zz = z * z
        lp = dists.log_pdf(dists.StudentTParams(mu=mu_raw, sigma=sig, nu=nu), y)
        loss = float(np.mean(-np.sum(lp, axis=1)))
        a = nu + zz
        d_mu = -(nu + 1.0) * z / (a * sig)
        d_sig = (1.0 - (nu + 1.0) * zz / a) / sig
        dlp_dnu = (
            0.5 * digamma(0.5 * (nu + 1.0))
            - 0.5 * digamma(0.5 * nu)
            - 0.5 / nu
            - 0.5 * np.log1p(zz / nu)
            + (nu + 1.0) * zz / (2.0 * (nu * nu + nu * zz))
        )
        g[:, :h] = d_mu / b
        g[:, h:2 * h] = d_sig * gain * sigmoid(s_raw) / b
        g[:, 2 * h:] = -dlp_dnu * gain * sigmoid(n_raw) / b
        return loss, g
    if head == HeadKind.JSU:
        loc_raw, s_raw, t_raw, skew_raw = blocks
        sig = dists.EPS_SCALE + gain * softplus(s_raw)
        tau = 1.0 + gain * softplus(t_raw)
        z = (y - loc_raw) / sig
        r = np.arcsinh(z)
        w = skew_raw + tau * r
        c = 1.0 + z * z
        lp = (np.log(tau) - np.log(sig) - 0.5 * np.log(2.0 * np.pi)
              - 0.5 * np.log(c) - 0.5 * w * w)
        loss = float(np.mean(-np.sum(lp, axis=1)))
        dlp_dz = -z / c - w * tau / np.sqrt(c)
        d_loc = dlp_dz / sig  # -d(lp)/d(loc)
        d_sig = 1.0 / sig + dlp_dz * z / sig
        d_tau = w * r - 1.0 / tau
        d_skew = w
        g[:, :h] = d_loc / b
        g[:, h:2 * h] = d_sig * gain * sigmoid(s_raw) / b
        g[:, 2 * h:3 * h] = d_tau * gain * sigmoid(t_raw) / b
        g[:, 3 * h:] = d_skew / b
        return loss, g
    raise ValueError(f"unknown head {head!r}")


def loss_gradient(params: MlpParams, x: np.ndarray, y: np.ndarray,
                  head: HeadKind, levels=None) -> tuple[float, dict[str, np.ndarray]]:
    """Batch loss and exact gradients for every trainable array.

    The stored input statistics (if any) are treated as frozen
    constants, so the map is purely parametric in w1..b3.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    xn, z1, a1, z2, a2, out = _forward_cache(params, x)
    loss, g_out = _head_loss_and_output_grad(out, y, head, levels)

    grads: dict[str, np.ndarray] = {}
    grads["w3"] = a2.T @ g_out
    grads["b3"] = g_out.sum(axis=0)
    d_a2 = g_out @ params.w3.T
    d_z2 = d_a2 * sigmoid(z2)
    grads["w2"] = a1.T @ d_z2
    grads["b2"] = d_z2.sum(axis=0)
    d_a1 = d_z2 @ params.w2.T
    d_z1 = d_a1 * sigmoid(z1)
    grads["w1"] = xn.T @ d_z1
    grads["b1"] = d_z1.sum(axis=0)
    return loss, grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0


def init_adam(params: MlpParams) -> AdamState:
    zeros = {k: np.zeros_like(getattr(params, k)) for k in _PARAM_KEYS}
    return AdamState(m=zeros, v={k: z.copy() for k, z in zeros.items()}, step=0)


def adam_step(params: MlpParams, state: AdamState, grads: dict[str, np.ndarray],
              learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, applied to the arrays in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for k in _PARAM_KEYS:
        g = grads[k]
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        m_hat = state.m[k] / c1
        v_hat = state.v[k] / c2
        getattr(params, k)[...] -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)


def _evaluate_loss(params: MlpParams, x, y, head: HeadKind, levels) -> float:
    out = mlp_forward(params, x)
    if head == HeadKind.POINT:
        return mae_loss(out, y)
    if head == HeadKind.QUANTILE:
        k = len(levels)
        return pinball_loss(out.reshape(len(x), y.shape[1], k), y, levels)
    return distribution_nll(dists.transform_head_outputs(out, head.value, hours=y.shape[1]), y)


@dataclass
class TrainResult:
    params: MlpParams
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0


def train_member(
    x: np.ndarray,
    y: np.ndarray,
    head: HeadKind,
    cfg: TrainConfig,
    levels=None,
    initial: MlpParams | None = None,
) -> TrainResult:
    """Train one ensemble member on an (inputs, hourly targets) window.

    The last ``validation_fraction`` of rows (chronological tail) is
    held out; early stopping counts epochs without strict validation
    improvement and restores the best-epoch parameters. ``initial``
    warm-starts from existing weights instead of a fresh draw.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or len(x) != len(y):
        raise ValueError("x and y must be 2-d with matching row counts")
    n = len(x)
    n_val = max(1, int(cfg.validation_fraction * n))
    n_train = n - n_val
    if n_train < 1:
        raise ValueError(f"window of {n} rows is too small to hold out a validation tail")

    if head == HeadKind.QUANTILE and levels is None:
        raise ValueError("quantile head needs explicit levels")
    out_dim = head_output_dim(head, None if levels is None else len(levels), hours=y.shape[1])

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    if initial is not None:
        if initial.n_inputs != x.shape[1] or initial.n_outputs != out_dim:
            raise ValueError("warm-start parameters do not match the requested architecture")
        params = initial.copy()
        if cfg.batch_norm and params.bn_mean is None:
            params.bn_mean = np.zeros(x.shape[1])
            params.bn_var = np.ones(x.shape[1])
    else:
        params = init_mlp_params(x.shape[1], cfg.hidden_units, out_dim, rng,
                                 batch_norm=cfg.batch_norm)

    x_train, y_train = x[:n_train], y[:n_train]
    x_val, y_val = x[n_train:], y[n_train:]

    adam = init_adam(params)
    best = params.copy()
    best_val = np.inf
    best_epoch = 0
    wait = 0
    result = TrainResult(params=best)

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n_train)
        epoch_losses = []
        for lo in range(0, n_train, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            if cfg.batch_norm:
                mu = xb.mean(axis=0)
                var = xb.var(axis=0)
                params.bn_mean *= cfg.bn_momentum
                params.bn_mean += (1.0 - cfg.bn_momentum) * mu
                params.bn_var *= cfg.bn_momentum
                params.bn_var += (1.0 - cfg.bn_momentum) * var
                step_view = replace(params, bn_mean=mu, bn_var=var)
            else:
                step_view = params
            loss, grads = loss_gradient(step_view, xb, yb, head, levels)
            adam_step(params, adam, grads, cfg.learning_rate)
            epoch_losses.append(loss)
        result.train_loss.append(float(np.mean(epoch_losses)))

        val = _evaluate_loss(params, x_val, y_val, head, levels)
        if not np.isfinite(val):
            val = np.inf
        result.val_loss.append(float(val))
        if val < best_val:
            best_val = val
            best = params.copy()
            best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= cfg.patience:
                result.stopped_epoch = epoch
                break
    else:
        result.stopped_epoch = cfg.max_epochs

    result.params = best
    result.best_epoch = best_epoch
    return result


# ---------------------------------------------------------------------------
# checkpointing


@dataclass
class Checkpoint:
    params: MlpParams
    head: HeadKind
    levels: tuple[float, ...] | None
    scaler: ScalerState | None
    seed: int | None


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(spec: dict) -> np.ndarray:
    buf = base64.b64decode(spec["data"])
    return np.frombuffer(buf, dtype=np.float64).reshape(spec["shape"]).copy()


def save_checkpoint(path, params: MlpParams, head: HeadKind,
                    levels=None, scaler: ScalerState | None = None,
                    seed: int | None = None) -> None:
    """Lossless (bit-exact) JSON serialization of a trained member."""
    arrays = {k: _encode_array(getattr(params, k)) for k in _PARAM_KEYS}
    if params.bn_mean is not None:
        arrays["bn_mean"] = _encode_array(params.bn_mean)
        arrays["bn_var"] = _encode_array(params.bn_var)
    doc = {
        "format": "mlp-checkpoint",
        "version": 1,
        "head": head.value,
        "levels": None if levels is None else [float(v) for v in levels],
        "seed": seed,
        "arrays": arrays,
        "scaler": None if scaler is None else {
            "feature_mean": _encode_array(scaler.feature_mean),
            "feature_std": _encode_array(scaler.feature_std),
            "target_mean": _encode_array(scaler.target_mean),
            "target_std": _encode_array(scaler.target_std),
        },
    }
    with open(path, "w") as handle:
        json.dump(doc, handle)


def load_checkpoint(path) -> Checkpoint:
    with open(path) as handle:
        doc = json.load(handle)
    if doc.get("format") != "mlp-checkpoint":
        raise ValueError(f"{path} is not a model checkpoint")
    if doc.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    arrays = doc["arrays"]
    params = MlpParams(
        **{k: _decode_array(arrays[k]) for k in _PARAM_KEYS},
        bn_mean=_decode_array(arrays["bn_mean"]) if "bn_mean" in arrays else None,
        bn_var=_decode_array(arrays["bn_var"]) if "bn_var" in arrays else None,
    )
    scaler = None
    if doc.get("scaler") is not None:
        s = doc["scaler"]
        scaler = ScalerState(
            feature_mean=_decode_array(s["feature_mean"]),
            feature_std=_decode_array(s["feature_std"]),
            target_mean=_decode_array(s["target_mean"]),
            target_std=_decode_array(s["target_std"]),
        )
    levels = doc.get("levels")
    return Checkpoint(
        params=params,
        head=HeadKind(doc["head"]),
        levels=None if levels is None else tuple(levels),
        scaler=scaler,
        seed=doc.get("seed"),
    )
