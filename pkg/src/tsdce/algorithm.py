"""TSDCE: transformed spatial domain channel estimation.

Per-path pipeline: rank-one extraction of the spatial-domain crop,
unbiased 2D autocorrelation, phase differences with wrap-branch
selection, cumulative unwrapping, weighted least-squares slope fits for
the two spatial frequencies, then amplitude and phase of the complex
gain. A successive-interference-cancellation loop repeats this for
``l_desired`` paths over ``rounds`` refinement rounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import freq_to_angle
from .numkit import acf2d_unbiased, dominant_singular_triplet
from .observation import Observation, to_spatial, wrap


class UndefinedPhaseError(ValueError):
    """Gain-phase estimate requested for an identically-zero residual."""


@dataclass(frozen=True)
class PathEstimate:
    """Estimated path parameters; same shape as channel.PathParams."""

    gain_magnitude: float
    gain_phase: float
    aod: float
    aoa: float
    omega_aod: float
    omega_aoa: float

    @classmethod
    def from_freqs(cls, gain_magnitude, gain_phase, omega_aod, omega_aoa):
        return cls(
            gain_magnitude=float(gain_magnitude),
            gain_phase=float(gain_phase),
            aod=freq_to_angle(omega_aod, "aod"),
            aoa=freq_to_angle(omega_aoa, "aoa"),
            omega_aod=float(omega_aod),
            omega_aoa=float(omega_aoa),
        )

    @property
    def gain(self) -> complex:
        return self.gain_magnitude * np.exp(1j * self.gain_phase)


@dataclass(frozen=True)
class TsdceConfig:
    l_desired: int
    rounds: int
    rho: float
    n_t: int
    n_r: int
    svd_tol: float = 1e-12
    svd_max_iter: int = 10_000

    def __post_init__(self):
        if self.l_desired < 1 or self.rounds < 1:
            raise ValueError("l_desired and rounds must be >= 1")
        if self.l_desired > min(self.n_t, self.n_r):
            raise ValueError("l_desired must not exceed min(n_t, n_r)")


def extract_rank_one(residual: np.ndarray, tol=1e-12, max_iter=10_000) -> np.ndarray:
    """Best rank-one approximation from the dominant singular triplet."""
    s, u, v = dominant_singular_triplet(residual, tol=tol, max_iter=max_iter)
    return s * np.outer(u, v.conj())


def phase_differences(r: np.ndarray, axis: str) -> np.ndarray:
    """First-order phase differences along the first column or first row
    of the autocorrelation; element 0 is defined as zero."""
    if axis == "col0":
        seq = r[:, 0]
    elif axis == "row0":
        seq = r[0, :]
    else:
        raise ValueError(f"axis must be 'row0' or 'col0', got {axis!r}")
    delta = np.zeros(len(seq))
    delta[1:] = np.angle(seq[1:] * np.conj(seq[:-1]))
    return delta


def select_wrap_branch(delta: np.ndarray) -> np.ndarray:
    """Keep the differences as-is or rewrap them to [0, 2pi], whichever
    branch has the smaller sample variance. Ties keep the original.

    A frequency near +-pi makes the principal-value differences flip
    sign; the [0, 2pi] branch removes those flips.
    """
    delta = np.asarray(delta, dtype=float)
    if len(delta) < 2:
        raise ValueError("need at least two phase differences")
    # [0, 2pi) wrap so the fixed leading zero stays zero instead of
    # turning into a 2pi outlier that skews the variance comparison
    wrapped = np.mod(delta, 2.0 * np.pi)
    if np.var(wrapped) < np.var(delta):
        return wrapped
    return delta


def unwrap_cumsum(delta: np.ndarray) -> np.ndarray:
    """Cumulative sum of phase differences = unwrapped phase sequence."""
    return np.cumsum(np.asarray(delta, dtype=float))


def wls_weights(M: int) -> np.ndarray:
    """Inverse-variance weights w_i = (M+1)(M-i)/(i+1) for the unwrapped
    phases of an unbiased-ACF slope fit; strictly decreasing in i."""
    if M < 2:
        raise ValueError("M must be >= 2")
    i = np.arange(M, dtype=float)
    return (M + 1) * (M - i) / (i + 1)


def wls_slope(phases: np.ndarray, weights: np.ndarray) -> float:
    """Weighted least-squares slope of ``phases`` against index 0..M-1."""
    phases = np.asarray(phases, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if phases.shape != weights.shape or len(phases) < 2:
        raise ValueError("phases and weights must be equal-length, >= 2")
    i = np.arange(len(phases), dtype=float)
    wsum = weights.sum()
    x_bar = (weights * i).sum() / wsum
    y_bar = (weights * phases).sum() / wsum
    denom = (weights * (i - x_bar) ** 2).sum()
    return float((weights * (i - x_bar) * (phases - y_bar)).sum() / denom)


def estimate_amplitude(r: np.ndarray, rho: float, n_t: int, n_r: int) -> float:
    """Path gain magnitude from the ACF magnitudes at nonzero lags.

    Lags are weighted by their sample count kappa = (n_r-m)(n_t-n); the
    normalization constant is the sum of those weights.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    mlag = np.arange(n_r)[:, None]
    nlag = np.arange(n_t)[None, :]
    kappa = (n_r - mlag) * (n_t - nlag)
    norm = 0.25 * n_r * (n_r + 1) * n_t * (n_t + 1) - n_t * n_r
    acc = np.sum(kappa * np.abs(r)) - kappa[0, 0] * np.abs(r[0, 0])
    a1_sq = acc / (rho * norm)
    return float(np.sqrt(n_t * n_r) * np.sqrt(a1_sq))


def estimate_gain_phase(d_tilde, omega_aoa: float, omega_aod: float, rho: float) -> float:
    """Phase of the derotated mean of the spatial observation (the
    circular-normal maximum-likelihood mean)."""
    n_r, n_t = d_tilde.shape
    m = np.arange(n_r)[:, None]
    n = np.arange(n_t)[None, :]
    mean = np.mean(d_tilde * np.exp(-1j * (omega_aoa * m + omega_aod * n))) / np.sqrt(rho)
    if mean == 0:
        raise UndefinedPhaseError("zero derotated mean, phase undefined")
    return float(np.angle(mean))


def reconstruct_path(est: PathEstimate, n_t: int, n_r: int) -> np.ndarray:
    """Spatial-domain cisoid (|a|/sqrt(n_t n_r)) e^{j phase} e^{j(wm+wn)}
    used for interference cancellation."""
    m = np.arange(n_r)[:, None]
    n = np.arange(n_t)[None, :]
    amp = est.gain_magnitude / np.sqrt(n_t * n_r)
    return amp * np.exp(1j * (est.gain_phase + est.omega_aoa * m + est.omega_aod * n))


def _estimate_component(d_tilde, rho, n_t, n_r) -> PathEstimate:
    """Single-path parameter estimation from a spatial-domain component."""
    r = acf2d_unbiased(d_tilde)
    omegas = {}
    for axis, M in (("col0", n_r), ("row0", n_t)):
        delta = phase_differences(r, axis)
        delta = select_wrap_branch(delta)
        unwrapped = unwrap_cumsum(delta)
        slope = wls_slope(unwrapped, wls_weights(M))
        omegas[axis] = wrap(slope, -np.pi, np.pi)
    gain_mag = estimate_amplitude(r, rho, n_t, n_r)
    try:
        gain_phase = estimate_gain_phase(d_tilde, omegas["col0"], omegas["row0"], rho)
    except UndefinedPhaseError:
        gain_phase = 0.0
    return PathEstimate.from_freqs(gain_mag, gain_phase, omegas["row0"], omegas["col0"])


def run(obs: Observation, cfg: TsdceConfig, trace=None):
    """Full TSDCE: SIC over ``l_desired`` paths, ``rounds`` rounds.

    The rank-one SVD step is applied in round 1 while later paths remain
    unestimated (and always when a single path is requested); from round
    2 on the cancellation residual itself is used. If ``trace`` is a
    list, per-iteration residuals and estimates are appended to it.
    """
    sp = to_spatial(obs, cfg.n_t, cfg.n_r)
    d_bar = sp.d_bar
    sqrt_rho = np.sqrt(cfg.rho)
    estimates = {}
    for k in range(1, cfg.rounds + 1):
        for l in range(1, cfg.l_desired + 1):
            residual = d_bar.copy()
            for i, est in estimates.items():
                if i != l:
                    residual -= sqrt_rho * reconstruct_path(est, cfg.n_t, cfg.n_r)
            if k == 1 and (l < cfg.l_desired or cfg.l_desired == 1):
                d_tilde = extract_rank_one(residual, cfg.svd_tol, cfg.svd_max_iter)
            else:
                d_tilde = residual
            estimates[l] = _estimate_component(d_tilde, cfg.rho, cfg.n_t, cfg.n_r)
            if trace is not None:
                trace.append(
                    {"round": k, "path": l, "residual": residual, "estimate": estimates[l]}
                )
    return [estimates[l] for l in range(1, cfg.l_desired + 1)]


def reconstruct_channel(estimates, n_t: int, n_r: int) -> np.ndarray:
    """Rebuild the channel matrix from estimated path parameters."""
    if not estimates:
        raise ValueError("need at least one path estimate")
    m = np.arange(n_r)[:, None]
    n = np.arange(n_t)[None, :]
    h = np.zeros((n_r, n_t), dtype=complex)
    for est in estimates:
        h += est.gain * np.exp(1j * (est.omega_aoa * m + est.omega_aod * n))
    return h
