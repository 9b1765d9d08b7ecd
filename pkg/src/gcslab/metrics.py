"""Mutual-information estimation with a mismatched Gaussian receiver.

The receiver assumes a memoryless circular Gaussian channel with variance
sigma_G^2 estimated from the data, computes symbol posteriors by Bayes' rule,
and scores the transmitted symbols; m minus the resulting conditional-entropy
estimate lower-bounds the true MI.  A decoder-network variant maps a
cross-entropy value to the same bits-per-symbol scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation

SIGMA_G2_FLOOR = 1e-12  # keeps the noiseless case well-defined

_LN2 = np.log(2.0)
_CHUNK = 1 << 16


@dataclass(frozen=True)
class MiEstimate:
    bits_per_symbol: float
    num_symbols: int
    sigma_g2: float


def entropy_uniform(M: int) -> float:
    """Entropy of a uniform M-ary source, log2(M) bits."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return float(np.log2(M))


def estimate_sigma_g(sent, received) -> float:
    """Auxiliary-channel variance estimate, mean |y - x|^2."""
    x = np.asarray(sent, dtype=np.complex128)
    y = np.asarray(received, dtype=np.complex128)
    if x.shape != y.shape or x.size == 0:
        raise ValueError(f"need equal nonempty lengths, got {x.shape} vs {y.shape}")
    diff = y - x
    return float(np.mean(diff.real**2 + diff.imag**2))


def gaussian_posteriors(y, c: Constellation, sigma_g2: float) -> np.ndarray:
    """Posteriors q(x_i | y) of the auxiliary Gaussian channel, uniform prior.

    Log-domain with per-sample max subtraction, so high-SNR inputs do not
    underflow.  Scalar y gives a length-M vector, an array of n samples an
    (n, M) matrix.
    """
    if sigma_g2 <= 0.0:
        raise ValueError("sigma_g2 must be > 0")
    y_arr = np.atleast_1d(np.asarray(y, dtype=np.complex128))
    diff = y_arr[:, None] - c.points[None, :]
    ll = -(diff.real**2 + diff.imag**2) / (2.0 * sigma_g2)
    ll -= ll.max(axis=1, keepdims=True)
    q = np.exp(ll)
    q /= q.sum(axis=1, keepdims=True)
    return q[0] if np.isscalar(y) or np.ndim(y) == 0 else q


def mi_gaussian_receiver(sent_indices, received, c: Constellation) -> MiEstimate:
    """Monte-Carlo achievable-rate estimate for a transmitted sequence.

    sigma_G^2 is estimated from the same sequence; the result is clamped
    below at zero (the estimator only lower-bounds the MI).
    """
    idx = np.asarray(sent_indices, dtype=np.intp)
    y = np.asarray(received, dtype=np.complex128)
    if idx.shape != y.shape:
        raise ValueError(f"length mismatch: {idx.shape} indices vs {y.shape} samples")
    x = c.points[idx]
    sigma_g2 = max(estimate_sigma_g(x, y), SIGMA_G2_FLOOR)

    # -log2 q(x_sent | y) accumulated in chunks to bound the (n, M) workspace
    total = 0.0
    for start in range(0, y.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        diff = y[sl, None] - c.points[None, :]
        ll = -(diff.real**2 + diff.imag**2) / (2.0 * sigma_g2)
        peak = ll.max(axis=1)
        lse = peak + np.log(np.exp(ll - peak[:, None]).sum(axis=1))
        ll_sent = ll[np.arange(ll.shape[0]), idx[sl]]
        total += float(np.sum(lse - ll_sent))
    h_cond_bits = total / (y.size * _LN2)
    mi = max(0.0, entropy_uniform(c.cardinality) - h_cond_bits)
    return MiEstimate(bits_per_symbol=mi, num_symbols=int(y.size), sigma_g2=sigma_g2)


def air_decoder(one_hot_batch, posterior_batch) -> float:
    """Decoder-based achievable rate, m - cross-entropy/ln(2) bits per symbol."""
    from .autoencoder import cross_entropy_loss

    m_bits = np.log2(np.asarray(one_hot_batch).shape[1])
    return float(m_bits - cross_entropy_loss(one_hot_batch, posterior_batch) / _LN2)
