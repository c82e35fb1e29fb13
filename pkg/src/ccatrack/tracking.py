"""MSI prediction with Gaussian processes, LoS angle geometry and
Monte-Carlo bounding of the beam-angle tracking error."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize

from .array import TWO_PI, wrap_pi
from .frames import body_to_global, direction_angles

JITTER = 1e-8
MSI_NAMES = ("x", "y", "z", "yaw", "pitch", "roll")


class GpError(RuntimeError):
    pass


# ---------------------------------------------------------------- GP core


def _sqdist_dims(A, B):
    """Per-dimension squared differences, shape (len(A), len(B), d)."""
    return (A[:, None, :] - B[None, :, :]) ** 2


def se_correlation(A, B, length_scales):
    """Squared-exponential correlation with per-dimension length-scales."""
    A = np.atleast_2d(np.asarray(A, float)) / length_scales
    B = np.atleast_2d(np.asarray(B, float)) / length_scales
    d2 = (A**2).sum(1)[:, None] + (B**2).sum(1)[None, :] - 2 * A @ B.T
    return np.exp(-0.5 * np.maximum(d2, 0.0))


def _factor(R, eta, jitter):
    n = len(R)
    Bm = R + (eta + jitter) * np.eye(n)
    try:
        return cho_factor(Bm, lower=True, check_finite=False), Bm
    except LinAlgError as exc:
        raise GpError(
            f"kernel matrix not positive definite (noise ratio {eta:.3g}, jitter {jitter:.3g}); "
            "increase the jitter or remove duplicate inputs"
        ) from exc


@dataclass(frozen=True)
class GpModel:
    """Fitted GP with shared correlation across output columns.

    Every column ``h`` of ``Y`` is an independent GP with prior covariance
    ``signal_var[h] * (R + eta I)`` where ``R`` is the squared-exponential
    correlation; ``noise_var = signal_var * eta``.
    """

    X: np.ndarray
    Y: np.ndarray
    length_scales: np.ndarray
    signal_var: np.ndarray
    eta: float
    mean: np.ndarray
    jitter: float = JITTER
    _chol: tuple = field(default=None, repr=False, compare=False)
    _alpha: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def noise_var(self) -> np.ndarray:
        return self.signal_var * self.eta

    @property
    def n_outputs(self) -> int:
        return self.Y.shape[1]

    def log_marginal_likelihood(self) -> float:
        n = len(self.X)
        L = self._chol[0]
        logdet = 2 * np.log(np.diag(L)).sum()
        Yc = self.Y - self.mean
        quad = (Yc * self._alpha).sum(0) / self.signal_var
        return float(
            -0.5 * quad.sum()
            - 0.5 * self.n_outputs * logdet
            - 0.5 * n * np.log(self.signal_var).sum()
            - 0.5 * n * self.n_outputs * math.log(2 * math.pi)
        )


def _as_2d_outputs(Y):
    Y = np.asarray(Y, float)
    return Y[:, None] if Y.ndim == 1 else Y


def gp_condition(X, Y, length_scales, signal_var, noise_var, mean="zero", jitter=JITTER) -> GpModel:
    """Build a GP from fixed hyperparameters.

    ``noise_var / signal_var`` must be equal across output columns.
    ``mean`` is ``"zero"``, ``"constant"`` (training column means) or an
    explicit per-column array.
    """
    X = np.atleast_2d(np.asarray(X, float))
    Y = _as_2d_outputs(Y)
    if len(X) != len(Y):
        raise ValueError("X and Y have different numbers of rows")
    if len(X) < 1:
        raise ValueError("need at least one training pair")
    H = Y.shape[1]
    sv = np.broadcast_to(np.asarray(signal_var, float), (H,)).copy()
    nv = np.broadcast_to(np.asarray(noise_var, float), (H,))
    if np.any(sv <= 0) or np.any(nv < 0):
        raise ValueError("signal variance must be positive and noise variance non-negative")
    ratios = nv / sv
    if not np.allclose(ratios, ratios[0], rtol=1e-12, atol=0):
        raise ValueError("noise/signal ratio must be shared by all output columns")
    ell = np.broadcast_to(np.asarray(length_scales, float), (X.shape[1],)).copy()
    if np.any(ell <= 0):
        raise ValueError("length-scales must be positive")
    if isinstance(mean, str):
        mu = Y.mean(0) if mean == "constant" else np.zeros(H)
    else:
        mu = np.broadcast_to(np.asarray(mean, float), (H,)).copy()
    eta = float(ratios[0])
    R = se_correlation(X, X, ell)
    chol, _ = _factor(R, eta, jitter)
    alpha = cho_solve(chol, Y - mu, check_finite=False)
    return GpModel(X, Y, ell, sv, eta, mu, jitter, chol, alpha)


def _nll_profiled(theta, D, Yc, jitter):
    """Negative log marginal likelihood with column amplitudes profiled out."""
    n, _, d = D.shape
    H = Yc.shape[1]
    ell = np.exp(theta[:d])
    eta = math.exp(theta[d])
    scaled = D / ell**2
    R = np.exp(-0.5 * scaled.sum(-1))
    try:
        chol, _ = _factor(R, eta, jitter)
    except GpError:
        return 1e25, np.zeros_like(theta)
    alpha = cho_solve(chol, Yc, check_finite=False)
    c = np.maximum((Yc * alpha).sum(0) / n, 1e-300)
    logdet = 2 * np.log(np.diag(chol[0])).sum()
    nll = 0.5 * n * np.log(c).sum() + 0.5 * H * logdet + 0.5 * n * H * (1 + math.log(2 * math.pi))
    Binv = cho_solve(chol, np.eye(n), check_finite=False)
    W = H * Binv - (alpha / c) @ alpha.T
    WR = W * R
    grad = np.empty_like(theta)
    grad[:d] = 0.5 * np.einsum("ij,ijk->k", WR, scaled)
    grad[d] = 0.5 * np.trace(W) * eta
    return float(nll), grad


def gp_fit(
    X, Y, mean="constant", n_restarts=3, rng=None, jitter=JITTER, eta_bounds=(1e-8, 10.0)
) -> GpModel:
    """Fit length-scales and the noise ratio by maximum marginal likelihood.

    Column signal variances have a closed-form optimum given the correlation
    matrix and are profiled out. L-BFGS-B runs from a data-scaled start plus
    ``n_restarts`` random starts inside the bounds.
    """
    X = np.atleast_2d(np.asarray(X, float))
    Y = _as_2d_outputs(Y)
    if len(X) < 2:
        raise ValueError("gp_fit needs at least 2 training pairs")
    if len(X) != len(Y):
        raise ValueError("X and Y have different numbers of rows")
    rng = np.random.default_rng(0) if rng is None else rng
    H = Y.shape[1]
    mu = Y.mean(0) if mean == "constant" else np.zeros(H)
    Yc = Y - mu
    d = X.shape[1]
    spread = X.std(0)
    spread = np.where(spread > 1e-12, spread, 1.0)
    lo = np.concatenate([np.log(spread * 1e-2), [math.log(eta_bounds[0])]])
    hi = np.concatenate([np.log(spread * 1e3), [math.log(eta_bounds[1])]])
    D = _sqdist_dims(X, X)
    starts = [np.concatenate([np.log(spread * math.sqrt(d)), [math.log(1e-3)]])]
    starts += [rng.uniform(lo, hi) for _ in range(n_restarts)]
    best = None
    for x0 in starts:
        res = minimize(
            _nll_profiled,
            np.clip(x0, lo, hi),
            args=(D, Yc, jitter),
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(lo, hi)),
        )
        if best is None or res.fun < best.fun:
            best = res
    ell = np.exp(best.x[:d])
    eta = math.exp(best.x[d])
    R = se_correlation(X, X, ell)
    chol, _ = _factor(R, eta, jitter)
    alpha = cho_solve(chol, Yc, check_finite=False)
    c = np.maximum((Yc * alpha).sum(0) / len(X), 1e-300)
    return GpModel(X, Y, ell, c, eta, mu, jitter, chol, alpha)


def gp_refit(model: GpModel, X, Y) -> GpModel:
    """Re-condition on new data keeping correlation hyperparameters.

    Column amplitudes are re-profiled on the new data.
    """
    X = np.atleast_2d(np.asarray(X, float))
    Y = _as_2d_outputs(Y)
    mu = Y.mean(0) if np.any(model.mean != 0) else np.zeros(Y.shape[1])
    R = se_correlation(X, X, model.length_scales)
    chol, _ = _factor(R, model.eta, model.jitter)
    alpha = cho_solve(chol, Y - mu, check_finite=False)
    c = np.maximum(((Y - mu) * alpha).sum(0) / len(X), 1e-300)
    return GpModel(X, Y, model.length_scales, c, model.eta, mu, model.jitter, chol, alpha)


def gp_predict(model: GpModel, Xs, include_noise=True):
    """Posterior mean ``(m, H)`` and marginal variance ``(m, H)``.

    ``mean = mu + K(X*, X) K(X, X)^-1 (Y - mu)``; the variance adds the
    observation noise when ``include_noise`` is set.
    """
    Xs = np.atleast_2d(np.asarray(Xs, float))
    k = se_correlation(Xs, model.X, model.length_scales)
    mean = model.mean + k @ model._alpha
    L = model._chol[0]
    v = solve_triangular(L, k.T, lower=True, check_finite=False)
    base = 1.0 - (v**2).sum(0)
    if include_noise:
        base = base + model.eta
    base = np.maximum(base, 0.0)
    return mean, base[:, None] * model.signal_var[None, :]


def gp_dump(model: GpModel) -> str:
    """Hyperparameters and a digest of the training set as JSON text."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(model.X).tobytes())
    h.update(np.ascontiguousarray(model.Y).tobytes())
    doc = {
        "n_train": int(len(model.X)),
        "input_dim": int(model.X.shape[1]),
        "n_outputs": int(model.n_outputs),
        "length_scales": [float(x) for x in model.length_scales],
        "signal_var": [float(x) for x in model.signal_var],
        "noise_ratio": float(model.eta),
        "mean": [float(x) for x in model.mean],
        "jitter": float(model.jitter),
        "log_marginal_likelihood": model.log_marginal_likelihood(),
        "training_sha256": h.hexdigest(),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def prediction_error_band(mean, variance):
    """``mean -+ 3 sqrt(variance)``, the 99% Gaussian band."""
    mean = np.asarray(mean, float)
    var = np.asarray(variance, float)
    if np.any(var < 0):
        raise ValueError("variance must be non-negative")
    s = 3.0 * np.sqrt(var)
    return mean - s, mean + s


# ---------------------------------------------------------- MSI datasets


def lagged_dataset(series, window, horizon, extras=None, stride=1, max_pairs=None):
    """Training pairs from one MSI component.

    A pair anchored at slot ``t`` has input ``series[t-window:t-1] - series[t-1]``
    (the last lag is dropped, being identically zero) optionally followed by
    ``extras[t-1]``, and output ``series[t:t+horizon] - series[t-1]``.
    """
    s = np.asarray(series, float)
    anchors = np.arange(window, len(s) - horizon + 1, stride)
    if max_pairs is not None and len(anchors) > max_pairs:
        keep = np.linspace(0, len(anchors) - 1, max_pairs).round().astype(int)
        anchors = anchors[keep]
    if len(anchors) == 0:
        raise ValueError("series too short for the requested window and horizon")
    X = np.stack([lagged_input(s, t, window, extras) for t in anchors])
    Y = np.stack([s[t : t + horizon] - s[t - 1] for t in anchors])
    return X, Y


def lagged_input(series, t, window, extras=None):
    s = np.asarray(series, float)
    if t < window:
        raise ValueError("not enough history for one window")
    x = s[t - window : t - 1] - s[t - 1]
    if extras is not None:
        x = np.concatenate([x, np.asarray(extras, float)[t - 1]])
    return x


@dataclass(frozen=True)
class MsiDistribution:
    """Gaussian marginals of x, y, z, yaw, pitch, roll per predicted slot."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.mean, float))
        v = np.atleast_2d(np.asarray(self.var, float))
        if m.shape != v.shape or m.shape[-1] != 6:
            raise ValueError("mean and var must both have shape (S, 6)")
        if np.any(v < 0):
            raise ValueError("variances must be non-negative")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "var", v)

    @classmethod
    def exact(cls, msi):
        m = np.atleast_2d(np.asarray(msi, float))
        return cls(m, np.zeros_like(m))

    def __len__(self):
        return len(self.mean)

    def slot(self, s) -> "MsiDistribution":
        return MsiDistribution(self.mean[s : s + 1], self.var[s : s + 1])

    def band(self):
        return prediction_error_band(self.mean, self.var)


class MsiPredictor:
    """Per-component GPs forecasting one UAV's MSI ``horizon`` slots ahead.

    Position components use lagged windows; attitude components append the
    last velocity and acceleration vectors. Yaw is unwrapped before
    windowing and wrapped again on output.
    """

    def __init__(self, window=10, horizon=50, max_pairs=120, n_restarts=1, seed=0, eta_min=1e-2, stride=5):
        if window < 2 or horizon < 1:
            raise ValueError("window must be >= 2 and horizon >= 1")
        self.window = window
        self.horizon = horizon
        self.max_pairs = max_pairs
        self.n_restarts = n_restarts
        self.seed = seed
        self.eta_min = eta_min
        self.stride = stride
        self.models = None

    def _channels(self, msi, vel, acc):
        msi = np.asarray(msi, float).copy()
        msi[:, 3:] = np.unwrap(msi[:, 3:], axis=0)
        extras = np.hstack([np.asarray(vel, float), np.asarray(acc, float)])
        return msi, extras

    def _dataset(self, msi, extras, c):
        ex = extras if c >= 3 else None
        return lagged_dataset(
            msi[:, c], self.window, self.horizon, ex, stride=self.stride, max_pairs=self.max_pairs
        )

    def fit(self, msi, vel, acc) -> "MsiPredictor":
        msi, extras = self._channels(msi, vel, acc)
        rng = np.random.default_rng(self.seed)
        self.models = []
        for c in range(6):
            X, Y = self._dataset(msi, extras, c)
            model = gp_fit(
                X, Y, mean="constant", n_restarts=self.n_restarts, rng=rng, eta_bounds=(self.eta_min, 10.0)
            )
            self.models.append(model)
        return self

    def condition(self, msi, vel, acc) -> "MsiPredictor":
        """Refresh the training set keeping fitted hyperparameters."""
        if self.models is None:
            return self.fit(msi, vel, acc)
        msi, extras = self._channels(msi, vel, acc)
        self.models = [gp_refit(m, *self._dataset(msi, extras, c)) for c, m in enumerate(self.models)]
        return self

    def predict(self, msi, vel, acc, include_noise=True) -> MsiDistribution:
        """Forecast slots ``len(msi) .. len(msi)+horizon-1`` from the history."""
        if self.models is None:
            raise RuntimeError("predictor is not fitted")
        msi, extras = self._channels(msi, vel, acc)
        n = len(msi)
        mean = np.zeros((self.horizon, 6))
        var = np.zeros((self.horizon, 6))
        for c, model in enumerate(self.models):
            x = lagged_input(msi[:, c], n, self.window, extras if c >= 3 else None)
            m, v = gp_predict(model, x[None, :], include_noise)
            mean[:, c] = m[0] + msi[n - 1, c]
            var[:, c] = v[0]
        mean[:, 3:] = wrap_pi(mean[:, 3:])
        return MsiDistribution(mean, var)

    def dump(self) -> str:
        return json.dumps(
            {name: json.loads(gp_dump(m)) for name, m in zip(MSI_NAMES, self.models)},
            indent=2,
            sort_keys=True,
        )


# ------------------------------------------------------------- geometry


def geometric_angles(tx_msi, rx_msi, tx_mount=None, rx_mount=None):
    """AOD at the transmitter and AOA at the receiver in their array frames.

    ``*_msi`` are ``(..., 6)`` arrays of position and attitude; ``*_mount``
    are array-to-body rotation matrices (identity puts the cylinder axis on
    the body z axis). Returns ``((aod_az, aod_el), (aoa_az, aoa_el))``.
    """
    tx = np.asarray(tx_msi, float)
    rx = np.asarray(rx_msi, float)
    los = rx[..., :3] - tx[..., :3]
    dist = np.linalg.norm(los, axis=-1)
    if np.any(dist <= 1e-9):
        raise ValueError("transmitter and receiver positions coincide")
    u = los / dist[..., None]
    Rt = body_to_global(tx[..., 3], tx[..., 4], tx[..., 5])
    Rr = body_to_global(rx[..., 3], rx[..., 4], rx[..., 5])
    if tx_mount is not None:
        Rt = Rt @ np.asarray(tx_mount, float)
    if rx_mount is not None:
        Rr = Rr @ np.asarray(rx_mount, float)
    d_tx = np.einsum("...ji,...j->...i", Rt, u)
    d_rx = np.einsum("...ji,...j->...i", Rr, -u)
    return direction_angles(d_tx), direction_angles(d_rx)


# ------------------------------------------------------ error bounding


@dataclass(frozen=True)
class AngleEstimate:
    """Mean beam angles with centred error ranges at confidence ``p_alpha``/``p_beta``."""

    alpha: float
    beta: float
    alpha_min: float
    alpha_max: float
    beta_min: float
    beta_max: float
    p_alpha: float = 0.9
    p_beta: float = 0.9

    def __post_init__(self):
        tol = 1e-12
        if not (self.alpha_min - tol <= self.alpha <= self.alpha_max + tol):
            raise ValueError("azimuth mean outside its range")
        if not (self.beta_min - tol <= self.beta <= self.beta_max + tol):
            raise ValueError("elevation mean outside its range")

    @classmethod
    def point(cls, alpha, beta):
        return cls(alpha, beta, alpha, alpha, beta, beta, 1.0, 1.0)

    @classmethod
    def centered(cls, alpha, beta, half_a, half_b, p_alpha=0.9, p_beta=0.9):
        return cls(alpha, beta, alpha - half_a, alpha + half_a, beta - half_b, beta + half_b, p_alpha, p_beta)

    @property
    def half_widths(self):
        return 0.5 * (self.alpha_max - self.alpha_min), 0.5 * (self.beta_max - self.beta_min)

    def contains(self, alpha, beta):
        """Boolean masks of samples inside the azimuth / elevation ranges."""
        ha, hb = self.half_widths
        da = np.abs(wrap_pi(np.asarray(alpha, float) - self.alpha))
        db = np.abs(np.asarray(beta, float) - self.beta)
        return da <= ha + 1e-12, db <= hb + 1e-12


def _interval(samples, p, circular):
    if np.all(samples == samples[0]):
        # point mass: summation round-off would otherwise open a tiny interval
        return float(samples[0]), 0.0
    if circular:
        centre = math.atan2(np.sin(samples).mean(), np.cos(samples).mean()) % TWO_PI
        dev = np.abs(wrap_pi(samples - centre))
    else:
        centre = float(samples.mean())
        dev = np.abs(samples - centre)
    half = float(np.quantile(np.sort(dev), p, method="higher")) if p < 1 else float(dev.max())
    return centre, half


def sample_msi(dist: MsiDistribution, n, rng):
    """``(n, S, 6)`` Gaussian draws from per-component marginals."""
    z = rng.standard_normal((n,) + dist.mean.shape)
    return dist.mean[None] + z * np.sqrt(dist.var)[None]


def sample_angles(tx_dist, rx_dist, n, rng, tx_mount=None, rx_mount=None):
    tx = sample_msi(tx_dist, n, rng)
    rx = sample_msi(rx_dist, n, rng)
    return geometric_angles(tx, rx, tx_mount, rx_mount)


def bound_tracking_error(
    tx_dist: MsiDistribution,
    rx_dist: MsiDistribution,
    tx_mount=None,
    rx_mount=None,
    i_max=1000,
    p_alpha=0.9,
    p_beta=0.9,
    rng=None,
    side="tx",
):
    """Monte-Carlo error ranges of the AOD (``side="tx"``), AOA (``"rx"``) or both.

    Draws ``i_max`` joint MSI samples, maps them through the LoS geometry and
    returns the sample mean angle with the centred interval holding a
    fraction ``p_alpha`` (``p_beta``) of the samples. Distributions with
    several slots give a list with one estimate per slot.
    """
    if i_max < 100:
        raise ValueError("i_max must be at least 100")
    for p in (p_alpha, p_beta):
        if not 0 < p <= 1:
            raise ValueError("confidence levels must lie in (0, 1]")
    if side not in ("tx", "rx", "both"):
        raise ValueError("side must be 'tx', 'rx' or 'both'")
    if len(tx_dist) != len(rx_dist):
        raise ValueError("distributions cover different numbers of slots")
    rng = np.random.default_rng() if rng is None else rng
    aod, aoa = sample_angles(tx_dist, rx_dist, i_max, rng, tx_mount, rx_mount)

    def estimates(angles):
        az, el = angles
        out = []
        for s in range(az.shape[1]):
            a, ha = _interval(az[:, s], p_alpha, True)
            b, hb = _interval(el[:, s], p_beta, False)
            out.append(AngleEstimate.centered(a, b, ha, hb, p_alpha, p_beta))
        return out[0] if len(out) == 1 else out

    if side == "tx":
        return estimates(aod)
    if side == "rx":
        return estimates(aoa)
    return estimates(aod), estimates(aoa)
