"""End-to-end constellation learning.

A linear bias-free encoder (one-hot index -> complex point, jointly
normalized to unit average power over all M rows) feeds a surrogate channel
y = (x + n) e^{i phi}; a one-hidden-layer softmax decoder estimates the
posterior over indices.  Encoder and decoder are trained jointly by Adam on
the batch cross-entropy, with analytic gradients through the decoder, the
channel (noise and phase draws held fixed), and the encoder normalization.

Channel parameters (SNR, launch power, noise figure, residual-phase
variance) are redrawn once per batch from a scenario specification, which is
what makes the learned geometry robust to the corresponding uncertainty.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .constellation import Constellation, make_square_qam, moments, normalize

POSTERIOR_CLAMP = 1e-12


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


# ---------------------------------------------------------------------------
# weights


@dataclass
class EncoderWeights:
    """M x 2 matrix, row i = unnormalized (re, im) of point i; no bias."""

    matrix: np.ndarray

    @property
    def cardinality(self) -> int:
        return self.matrix.shape[0]

    def scale(self) -> float:
        """Normalization factor 1/sqrt(mean row power), over all M rows."""
        s = float(np.sum(self.matrix**2))
        if s == 0.0:
            raise ValueError("all-zero encoder cannot be normalized")
        return math.sqrt(self.cardinality / s)

    def constellation(self, name: str = "learned") -> Constellation:
        rows = self.matrix[:, 0] + 1j * self.matrix[:, 1]
        return normalize(rows, name=name)


@dataclass
class DecoderWeights:
    """(re, im) -> hidden(M/2, leaky ReLU) -> softmax over M indices."""

    w1: np.ndarray  # (2, H)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H, M)
    b2: np.ndarray  # (M,)
    leaky_slope: float = 0.01


def init_weights(M: int, rng, jitter: float = 0.05):
    """Encoder = square-QAM rows plus Gaussian jitter; decoder = Glorot uniform."""
    side = math.isqrt(M)
    if side * side == M and M >= 4:
        base = make_square_qam(M).points
        enc_mat = np.column_stack([base.real, base.imag])
    else:
        enc_mat = rng.standard_normal((M, 2)) / math.sqrt(2.0)
    enc_mat = enc_mat + jitter * rng.standard_normal((M, 2))
    hidden = M // 2
    lim1 = math.sqrt(6.0 / (2 + hidden))
    lim2 = math.sqrt(6.0 / (hidden + M))
    dec = DecoderWeights(
        w1=rng.uniform(-lim1, lim1, size=(2, hidden)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-lim2, lim2, size=(hidden, M)),
        b2=np.zeros(M),
    )
    return EncoderWeights(enc_mat), dec


def _params(enc: EncoderWeights, dec: DecoderWeights) -> dict[str, np.ndarray]:
    return {"enc": enc.matrix, "w1": dec.w1, "b1": dec.b1, "w2": dec.w2, "b2": dec.b2}


# ---------------------------------------------------------------------------
# forward / backward


def encoder_forward(w: EncoderWeights, index) -> np.ndarray:
    """Map symbol index (or index array) to the normalized complex point."""
    idx = np.asarray(index)
    if np.any(idx < 0) or np.any(idx >= w.cardinality):
        raise IndexError(f"symbol index out of range 0..{w.cardinality - 1}")
    rows = w.scale() * w.matrix[idx]
    return rows[..., 0] + 1j * rows[..., 1]


def decoder_forward(w: DecoderWeights, y) -> np.ndarray:
    """Posterior vector(s) for received sample(s) y."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=np.complex128))
    a = np.column_stack([y_arr.real, y_arr.imag])
    pre = a @ w.w1 + w.b1
    hid = np.where(pre > 0.0, pre, w.leaky_slope * pre)
    logits = hid @ w.w2 + w.b2
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p[0] if np.ndim(y) == 0 else p


def cross_entropy_loss(one_hot_batch, posterior_batch) -> float:
    """Batch-mean cross-entropy, natural log, posteriors clamped at 1e-12."""
    u = np.asarray(one_hot_batch, dtype=np.float64)
    s = np.clip(np.asarray(posterior_batch, dtype=np.float64), POSTERIOR_CLAMP, None)
    return float(-np.mean(np.sum(u * np.log(s), axis=1)))


def loss_with_draws(enc, dec, indices, noise, phases) -> float:
    """Cross-entropy of one batch with the channel draws held fixed.

    noise is the additive complex draw per sample, phases the residual-phase
    draw; both enter as constants, so this is a deterministic function of the
    weights (the function the analytic gradients differentiate).
    """
    loss, _ = _forward_backward(enc, dec, indices, noise, phases, want_grads=False)
    return loss


def backward(enc, dec, indices, noise, phases):
    """Loss and analytic gradients for one batch with fixed channel draws.

    Returns
    -------
    (loss, grads)
        grads maps {"enc", "w1", "b1", "w2", "b2"} to arrays of the
        parameter shapes; the encoder gradient includes the dependence of
        the joint normalization factor on every row.
    """
    return _forward_backward(enc, dec, indices, noise, phases, want_grads=True)


def _forward_backward(enc, dec, indices, noise, phases, want_grads):
    idx = np.asarray(indices, dtype=np.intp)
    b_size = idx.size
    mat = enc.matrix
    m_card = enc.cardinality

    s_total = float(np.sum(mat**2))
    g = math.sqrt(m_card / s_total)
    x = g * mat[idx]  # (B, 2)

    nz = np.asarray(noise, dtype=np.complex128)
    v0 = x[:, 0] + nz.real
    v1 = x[:, 1] + nz.imag
    cos_p = np.cos(phases)
    sin_p = np.sin(phases)
    y = np.column_stack([cos_p * v0 - sin_p * v1, sin_p * v0 + cos_p * v1])

    pre = y @ dec.w1 + dec.b1
    hid = np.where(pre > 0.0, pre, dec.leaky_slope * pre)
    logits = hid @ dec.w2 + dec.b2

    # log-softmax; exact cross-entropy without posterior clamping
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp_sh = np.exp(shifted)
    denom = exp_sh.sum(axis=1)
    log_p_sent = shifted[np.arange(b_size), idx] - np.log(denom)
    loss = float(-np.mean(log_p_sent))

    if not want_grads:
        return loss, None

    p = exp_sh / denom[:, None]
    d_logits = p
    d_logits[np.arange(b_size), idx] -= 1.0
    d_logits /= b_size

    g_w2 = hid.T @ d_logits
    g_b2 = d_logits.sum(axis=0)
    d_hid = d_logits @ dec.w2.T
    d_pre = d_hid * np.where(pre > 0.0, 1.0, dec.leaky_slope)
    g_w1 = y.T @ d_pre
    g_b1 = d_pre.sum(axis=0)
    d_y = d_pre @ dec.w1.T

    # undo the rotation: dv = R(-phi) dy, and dx = dv
    d_x = np.column_stack(
        [
            cos_p * d_y[:, 0] + sin_p * d_y[:, 1],
            -sin_p * d_y[:, 0] + cos_p * d_y[:, 1],
        ]
    )

    d_rows = np.zeros_like(mat)
    np.add.at(d_rows, idx, d_x)
    # x = g(enc) * enc[idx] with g = sqrt(M/S): the scale couples all rows
    inner = float(np.sum(d_rows * mat))
    g_enc = g * d_rows - (g * inner / s_total) * mat

    grads = {"enc": g_enc, "w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}
    return loss, grads


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
        return state


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """One bias-corrected Adam update, applied in place; returns params."""
    state.step += 1
    b1c = 1.0 - state.beta1**state.step
    b2c = 1.0 - state.beta2**state.step
    for key, p in params.items():
        grad = grads[key]
        if grad.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {key!r}")
        state.m[key] = state.beta1 * state.m[key] + (1.0 - state.beta1) * grad
        state.v[key] = state.beta2 * state.v[key] + (1.0 - state.beta2) * grad**2
        m_hat = state.m[key] / b1c
        v_hat = state.v[key] / b2c
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class SamplingRule:
    """fixed(v) | uniform(lo, hi) | log_uniform(lo, hi), drawn once per batch."""

    kind: str
    lo: float
    hi: float = float("nan")

    @classmethod
    def fixed(cls, value: float):
        return cls("fixed", float(value))

    @classmethod
    def uniform(cls, lo: float, hi: float):
        if not lo < hi:
            raise ValueError(f"uniform range needs lo < hi, got {lo}:{hi}")
        return cls("uniform", float(lo), float(hi))

    @classmethod
    def log_uniform(cls, lo: float, hi: float):
        if not 0.0 < lo < hi:
            raise ValueError(f"log-uniform range needs 0 < lo < hi, got {lo}:{hi}")
        return cls("log_uniform", float(lo), float(hi))

    def sample(self, rng) -> float:
        if self.kind == "fixed":
            return self.lo
        u = rng.uniform()
        if self.kind == "uniform":
            return self.lo + u * (self.hi - self.lo)
        return math.exp(math.log(self.lo) + u * (math.log(self.hi) - math.log(self.lo)))


@dataclass(frozen=True)
class ScenarioSpec:
    """Per-batch sampling rules for the channel parameters of one scenario.

    noise_model "awgn" uses snr_db; "nlin" uses noise_figure_db and
    launch_power_dbm against the link/coefficient budget.  sigma2_rpn is
    always required.
    """

    noise_model: str
    sigma2_rpn: SamplingRule
    snr_db: SamplingRule | None = None
    noise_figure_db: SamplingRule | None = None
    launch_power_dbm: SamplingRule | None = None
    link: ch.LinkParams | None = None
    nlin_coeffs: ch.NlinCoefficients | None = None

    def __post_init__(self):
        if self.noise_model == "awgn":
            if self.snr_db is None:
                raise ValueError("awgn scenario needs an snr_db rule")
        elif self.noise_model == "nlin":
            missing = [
                n
                for n in ("noise_figure_db", "launch_power_dbm", "link", "nlin_coeffs")
                if getattr(self, n) is None
            ]
            if missing:
                raise ValueError(f"nlin scenario needs {', '.join(missing)}")
        else:
            raise ValueError(f"unknown noise model {self.noise_model!r}")


def sample_scenario(spec: ScenarioSpec, rng) -> dict:
    """Draw one concrete parameter set (applied to a whole batch).

    Draw order is fixed: snr_db | (noise_figure_db, launch_power_dbm), then
    sigma2_rpn.
    """
    draw = {}
    if spec.noise_model == "awgn":
        draw["snr_db"] = spec.snr_db.sample(rng)
    else:
        draw["noise_figure_db"] = spec.noise_figure_db.sample(rng)
        draw["launch_power_dbm"] = spec.launch_power_dbm.sample(rng)
    draw["sigma2_rpn"] = spec.sigma2_rpn.sample(rng)
    return draw


def effective_noise_variance(spec: ScenarioSpec, draw: dict, const: Constellation) -> float:
    """Additive variance seen by the unit-power constellation for one draw.

    AWGN: 1/SNR.  NLIN: (ASE + NLIN)/P_in, i.e. the physical budget referred
    to the unit-power domain (the encoder scales by sqrt(P_in) on the way
    in, the decoder divides it back out).
    """
    if spec.noise_model == "awgn":
        return ch.awgn_variance(ch.AwgnSpec(draw["snr_db"]))
    link = dataclasses.replace(
        spec.link,
        noise_figure_db=draw["noise_figure_db"],
        launch_power_dbm=draw["launch_power_dbm"],
    )
    p_w = ch.dbm_to_watts(draw["launch_power_dbm"])
    return ch.total_noise_variance(link, spec.nlin_coeffs, moments(const)) / p_w


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    M: int = 64
    epochs: int = 1000
    samples_per_epoch: int = 0  # 0 -> 256*M
    batch_size: int = 0  # 0 -> 32*M
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    init_jitter: float = 0.05
    plateau_stop: bool = False
    plateau_window: int = 50
    plateau_tol: float = 1e-5

    def __post_init__(self):
        if self.M < 2 or (self.M & (self.M - 1)) != 0:
            raise ValueError("M must be a power of two >= 2")
        if self.samples_per_epoch == 0:
            self.samples_per_epoch = 256 * self.M
        if self.batch_size == 0:
            self.batch_size = 32 * self.M
        if self.samples_per_epoch % self.batch_size != 0:
            raise ValueError("batch_size must divide samples_per_epoch")


@dataclass
class TrainResult:
    constellation: Constellation
    encoder: EncoderWeights
    decoder: DecoderWeights
    loss_history: list


def train(cfg: TrainConfig, scenario: ScenarioSpec, name: str = "learned") -> TrainResult:
    """Run the end-to-end training loop; deterministic for a given seed.

    Each epoch regenerates uniformly drawn symbol indices, splits them into
    batches, redraws the channel parameters per batch, and applies one Adam
    step per batch on the analytic gradients.
    """
    rng = np.random.default_rng(cfg.seed)
    enc, dec = init_weights(cfg.M, rng, jitter=cfg.init_jitter)
    params = _params(enc, dec)
    state = AdamState.for_params(
        params, lr=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps
    )

    n_batches = cfg.samples_per_epoch // cfg.batch_size
    history = []
    for epoch in range(cfg.epochs):
        indices = rng.integers(0, cfg.M, size=cfg.samples_per_epoch)
        epoch_loss = 0.0
        for b in range(n_batches):
            batch_idx = indices[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            draw = sample_scenario(scenario, rng)
            sigma_n2 = effective_noise_variance(spec=scenario, draw=draw, const=enc.constellation())
            noise = ch.draw_complex_noise(rng, cfg.batch_size, sigma_n2)
            phases = math.sqrt(draw["sigma2_rpn"]) * rng.standard_normal(cfg.batch_size)
            loss, grads = backward(enc, dec, batch_idx, noise, phases)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {b}"
                )
            adam_step(state, params, grads)
            epoch_loss += loss
        history.append(epoch_loss / n_batches)

        scale = enc.scale()
        power = scale**2 * float(np.sum(enc.matrix**2)) / cfg.M
        if abs(power - 1.0) > 1e-9:
            raise AssertionError("encoder unit-power invariant violated")

        if cfg.plateau_stop and len(history) >= 2 * cfg.plateau_window:
            prev = float(np.mean(history[-2 * cfg.plateau_window : -cfg.plateau_window]))
            cur = float(np.mean(history[-cfg.plateau_window :]))
            if abs(cur - prev) < cfg.plateau_tol * max(abs(prev), 1e-12):
                break

    return TrainResult(
        constellation=enc.constellation(name=name),
        encoder=enc,
        decoder=dec,
        loss_history=history,
    )
