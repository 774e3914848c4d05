"""Small-cell propagation: LoS/NLoS path loss, channel gain, interference,
and uplink rate.

Gains use the expected-path-loss mixture of the LoS and NLoS branches
weighted by the distance-dependent LoS probability, so the channel is a
deterministic function of geometry (no fading, by design).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_DISTANCE_M = 1.0  # users cannot stand on the antenna


@dataclass
class ChannelState:
    gain: np.ndarray          # (U, K) linear
    interference: np.ndarray  # (U, K) W
    distance: np.ndarray      # (U, K) m


def _check_positive(name: str, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return arr


def path_loss_los(d_m, carrier_ghz) -> np.ndarray | float:
    """Line-of-sight path loss in dB at distance d_m and carrier in GHz."""
    d = _check_positive("distance", d_m)
    fq = _check_positive("carrier frequency", carrier_ghz)
    out = 22.0 * np.log10(d) + 28.0 + 20.0 * np.log10(fq)
    return float(out) if np.isscalar(d_m) and np.isscalar(carrier_ghz) else out


def path_loss_nlos(d_m, carrier_ghz) -> np.ndarray | float:
    """Non-line-of-sight path loss in dB."""
    d = _check_positive("distance", d_m)
    fq = _check_positive("carrier frequency", carrier_ghz)
    out = 36.7 * np.log10(d) + 22.7 + 26.0 * np.log10(fq)
    return float(out) if np.isscalar(d_m) and np.isscalar(carrier_ghz) else out


def los_probability(d_m) -> np.ndarray | float:
    """Probability that the link at distance d_m is line of sight; 1 within 18 m."""
    d = _check_positive("distance", d_m)
    decay = np.exp(-d / 36.0)
    out = np.minimum(18.0 / d, 1.0) * (1.0 - decay) + decay
    return float(out) if np.isscalar(d_m) else out


def channel_gain(d_m, carrier_ghz) -> np.ndarray | float:
    """Linear channel gain: inverse of the probability-weighted linear path loss."""
    p_los = los_probability(d_m)
    los_lin = 10.0 ** (np.asarray(path_loss_los(d_m, carrier_ghz)) / 10.0)
    nlos_lin = 10.0 ** (np.asarray(path_loss_nlos(d_m, carrier_ghz)) / 10.0)
    out = 1.0 / (p_los * los_lin + (1.0 - p_los) * nlos_lin)
    return float(out) if np.isscalar(d_m) and np.isscalar(carrier_ghz) else out


def interference_matrix(gain: np.ndarray, p_u: float, model: str = "paper",
                        assoc: np.ndarray | None = None,
                        ) -> np.ndarray:
    """Co-channel interference seen by each (user, SBS) pair, in watts.

    'paper' mode charges user u at SBS k with its own uplink as received at
    every other SBS, I[u,k] = p_u * sum_{i != k} gain[u,i]. 'cross_user' is
    the conventional alternative: the sum of other users' signals received
    at k, restricted to users associated elsewhere; it needs `assoc`
    (per-user SBS index, -1 for unassociated).
    """
    u_count, k_count = gain.shape
    if model == "paper":
        total = gain.sum(axis=1, keepdims=True)
        return p_u * (total - gain)
    if model == "cross_user":
        if assoc is None:
            raise ValueError("cross_user interference requires an association vector")
        inter = np.zeros((u_count, k_count))
        for k in range(k_count):
            # users transmitting toward some other SBS leak into k
            others = (assoc >= 0) & (assoc != k)
            leak = p_u * gain[others, k].sum()
            own = np.zeros(u_count)
            own[others] = p_u * gain[others, k]
            inter[:, k] = leak - own
        return inter
    raise ValueError(f"unknown interference model {model!r}")


def interference(u: int, k: int, state, p_u: float, model: str = "paper",
                 assoc: np.ndarray | None = None) -> float:
    """Single-pair convenience wrapper; accepts a ChannelState or a gain matrix."""
    gain = state.gain if isinstance(state, ChannelState) else np.asarray(state)
    return float(interference_matrix(gain, p_u, model=model, assoc=assoc)[u, k])


def uplink_rate(w_hz, p_w, gain, interference_w, noise_w) -> np.ndarray | float:
    """Shannon uplink rate in bits/s for bandwidth w_hz."""
    w = np.asarray(w_hz, dtype=float)
    sinr = p_w * np.asarray(gain) / (np.asarray(interference_w) + noise_w)
    out = w * np.log2(1.0 + sinr)
    return float(out) if np.isscalar(w_hz) else out


def spectral_efficiency(p_w: float, gain: np.ndarray, interference_w: np.ndarray,
                        noise_w: float) -> np.ndarray:
    """bits/s/Hz per (user, SBS) pair at the configured transmit power."""
    sinr = p_w * gain / (interference_w + noise_w)
    return np.log2(1.0 + sinr)


def build_channel_state(user_pos: np.ndarray, sbs_pos: np.ndarray, cfg,
                        assoc: np.ndarray | None = None) -> ChannelState:
    """Distances, gains, and interference for the current topology snapshot."""
    diff = user_pos[:, None, :] - sbs_pos[None, :, :]
    dist = np.maximum(np.linalg.norm(diff, axis=2), MIN_DISTANCE_M)
    gain = channel_gain(dist, cfg.carrier_freq)
    inter = interference_matrix(gain, cfg.transmit_power, model=cfg.interference_model,
                                assoc=assoc)
    return ChannelState(gain=gain, interference=inter, distance=dist)
