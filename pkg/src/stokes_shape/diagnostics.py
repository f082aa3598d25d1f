"""Post-processing of chain logs: R-hat, radius quantiles and correlations, running means."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boundary import BoundaryParams, ClampParams, clamp, inner_radius
from .errors import ShapeError, ZeroWithinVariance

DEFAULT_PROBS = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class Chain:
    """Records of one sample log, as written by :func:`stokes_shape.inference.run_chain`."""

    step: np.ndarray
    accepted: np.ndarray
    rho: np.ndarray
    phi: np.ndarray
    obs: np.ndarray  # (n, n_obs)
    coeffs: np.ndarray  # (n, K)

    def __post_init__(self):
        if self.step.size > 1 and np.any(np.diff(self.step) <= 0):
            raise ShapeError("chain step indices must increase")

    def __len__(self):
        return self.step.size

    @property
    def K(self) -> int:
        return self.coeffs.shape[1]

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted)) if len(self) else float("nan")

    def discard(self, fraction: float) -> "Chain":
        """Drop the first ``floor(fraction * n)`` records."""
        if not 0.0 <= fraction < 1.0:
            raise ValueError("burn-in fraction must lie in [0, 1)")
        k = int(np.floor(fraction * len(self)))
        return Chain(self.step[k:], self.accepted[k:], self.rho[k:], self.phi[k:],
                     self.obs[k:], self.coeffs[k:])


def read_chain(path) -> Chain:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    if header[:4] != ["step", "accepted", "rho", "phi"]:
        raise ShapeError(f"{path}: not a chain log")
    n_obs = sum(h.startswith("obs_") for h in header)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] == 0:
        data = np.empty((0, len(header)))
    return Chain(step=data[:, 0].astype(int), accepted=data[:, 1].astype(bool), rho=data[:, 2],
                 phi=data[:, 3], obs=data[:, 4:4 + n_obs], coeffs=data[:, 4 + n_obs:])


def read_chains(paths) -> list[Chain]:
    chains = [read_chain(p) for p in paths]
    if len({c.K for c in chains}) > 1:
        raise ShapeError("chains have different K; they are not compatible")
    return chains


# ---------------------------------------------------------------------------
# Radius evaluation


def angle_grid(n: int = 360) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


def radius_matrix(coeffs: np.ndarray, b0: float, cp: ClampParams, angles: np.ndarray) -> np.ndarray:
    """Clamped radius of every sample (rows) at every angle (columns)."""
    coeffs = np.atleast_2d(coeffs)
    k = np.arange(1, coeffs.shape[1] // 2 + 1)
    ka = np.outer(k, angles)
    b = coeffs[:, 0::2] @ np.cos(ka) + coeffs[:, 1::2] @ np.sin(ka)
    return clamp(b0 + b, cp)


def enclosed_area(params: BoundaryParams, cp: ClampParams, n_points: int = 2048) -> float:
    """Area ``int 1/2 r^2 dphi`` enclosed by the inner boundary (periodic rectangle rule)."""
    if n_points < 1024:
        raise ValueError("use at least 1024 points")
    r = inner_radius(params, cp, angle_grid(n_points))
    return float(np.pi * np.mean(r * r))


def enclosed_areas(coeffs: np.ndarray, b0: float, cp: ClampParams, n_points: int = 2048) -> np.ndarray:
    r = radius_matrix(coeffs, b0, cp, angle_grid(n_points))
    return np.pi * np.mean(r * r, axis=1)


# ---------------------------------------------------------------------------
# Statistics


def rhat(chains) -> float:
    """Potential scale reduction ``sqrt(var+/W)`` over ``m >= 2`` equal-length series."""
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("need at least two series of length >= 2")
    m, n = x.shape
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean()
    if W == 0.0:
        raise ZeroWithinVariance("every chain is constant")
    B = n / (m - 1) * np.sum((means - means.mean()) ** 2)
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def quantiles(values: np.ndarray, probs, method: str = "linear") -> np.ndarray:
    """Column-wise quantiles; ``linear`` is the type-7 convention."""
    probs = np.asarray(probs, dtype=float)
    if np.any((probs <= 0) | (probs >= 1)):
        raise ValueError("probabilities must lie in (0, 1)")
    return np.quantile(values, probs, axis=0, method=method)


def radius_quantiles(coeffs: np.ndarray, b0: float, cp: ClampParams, angles=None,
                     probs=DEFAULT_PROBS, method: str = "linear") -> np.ndarray:
    """Quantiles of the inner radius across samples, shape ``(len(probs), len(angles))``."""
    angles = angle_grid() if angles is None else np.asarray(angles)
    return quantiles(radius_matrix(coeffs, b0, cp, angles), probs, method)


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Correlation across samples, NaN when either side has zero variance."""
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = np.dot(dx, dx), np.dot(dy, dy)
    scale = max(np.max(np.abs(x)), np.max(np.abs(y)), 1.0)
    if sxx <= (1e-14 * scale) ** 2 * x.size or syy <= (1e-14 * scale) ** 2 * y.size:
        return float("nan")
    return float(np.clip(np.dot(dx, dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def radius_correlation(coeffs: np.ndarray, b0: float, cp: ClampParams, base_angles,
                       lags) -> np.ndarray:
    """Correlation of ``r(phi0)`` with ``r(phi0 + lag)``, shape ``(len(base), len(lags))``."""
    coeffs = np.atleast_2d(coeffs)
    if coeffs.shape[0] < 3:
        raise ValueError("need at least three samples")
    base, lags = np.asarray(base_angles, float), np.asarray(lags, float)
    r0 = radius_matrix(coeffs, b0, cp, base)
    out = np.empty((base.size, lags.size))
    for i, phi0 in enumerate(base):
        rl = radius_matrix(coeffs, b0, cp, phi0 + lags)
        out[i] = [pearson(r0[:, i], rl[:, j]) for j in range(lags.size)]
    return out


def observation_quantiles(obs: np.ndarray, probs=DEFAULT_PROBS, method: str = "linear") -> np.ndarray:
    """Per-component quantiles of logged observations, shape ``(len(probs), n_obs)``."""
    return quantiles(np.atleast_2d(obs), probs, method)


def running_mean(series: np.ndarray) -> np.ndarray:
    series = np.asarray(series, dtype=float)
    return np.cumsum(series) / np.arange(1, series.size + 1)


# ---------------------------------------------------------------------------
# Plot-ready tables


def _fmt(v: float) -> str:
    return "nan" if np.isnan(v) else repr(float(v))


def write_radius_quantiles(path, angles, probs, table) -> None:
    lines = ["angle_deg,prob,value"]
    for i, p in enumerate(probs):
        for j, a in enumerate(angles):
            lines.append(f"{float(np.rad2deg(a))!r},{float(p)!r},{_fmt(table[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_radius_correlation(path, base_angles, lags, table) -> None:
    lines = ["base_deg,lag_deg,corr"]
    for i, b in enumerate(base_angles):
        for j, lag in enumerate(lags):
            lines.append(f"{float(np.rad2deg(b))!r},{float(np.rad2deg(lag))!r},{_fmt(table[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_observation_quantiles(path, probs, table, data=None) -> None:
    lines = ["component,prob,value" + (",data" if data is not None else "")]
    for j in range(table.shape[1]):
        for i, p in enumerate(probs):
            row = f"{j + 1},{float(p)!r},{_fmt(table[i, j])}"
            lines.append(row + (f",{float(data[j])!r}" if data is not None else ""))
    Path(path).write_text("\n".join(lines) + "\n")


def write_running_means(path, series_by_chain, steps_by_chain) -> None:
    lines = ["chain,step,mean"]
    for c, (mean, steps) in enumerate(zip(series_by_chain, steps_by_chain)):
        lines += [f"{c},{int(s)},{_fmt(v)}" for s, v in zip(steps, mean)]
    Path(path).write_text("\n".join(lines) + "\n")
