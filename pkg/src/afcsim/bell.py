"""Franson fringe analysis, CHSH statistics, and Monte-Carlo error bars.

Conventions: the four analyzer port combinations are ordered
(A1B1, A1B2, A2B1, A2B2) throughout; A is the idler-side analyzer (phase
alpha), B the signal side (phase beta).  Middle-middle coincidence counts
follow A * (1 + (-1)^(i+j) V cos(alpha + beta + phi0)).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from afcsim.analyzer import SLOT_MIDDLE, project_pair

__all__ = [
    "COMBO_LABELS",
    "COMBO_SIGNS",
    "DEFAULT_CHSH_PHASES",
    "TSIRELSON_BOUND",
    "FringeScan",
    "ChshResult",
    "VisibilityFit",
    "correlation_e",
    "chsh_s",
    "chsh_from_counts",
    "fit_visibility",
    "monte_carlo_errors",
    "bell_violation_sigmas",
    "analytic_correlation",
    "analytic_chsh",
    "middle_middle_probabilities",
]

COMBO_LABELS = ("A1B1", "A1B2", "A2B1", "A2B2")
COMBO_SIGNS = (1.0, -1.0, -1.0, 1.0)  # (-1)^(i+j)

# (alpha, alpha', beta, beta') for the CHSH test
DEFAULT_CHSH_PHASES = (0.0, math.pi / 2, math.pi / 4, -math.pi / 4)

TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class FringeScan:
    """Three-fold coincidence counts versus the signal-analyzer phase beta,
    at fixed idler phase alpha.  ``counts[n, k]`` is the count for beta_rad[n]
    and port combination COMBO_LABELS[k]."""

    alpha_rad: float
    beta_rad: np.ndarray
    counts: np.ndarray
    integration_time_per_point_s: float = 250.0

    def __post_init__(self):
        beta = np.asarray(self.beta_rad, dtype=float)
        counts = np.asarray(self.counts, dtype=float)
        if counts.shape != (beta.size, 4):
            raise ValueError("counts must have shape (n_beta, 4)")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "beta_rad", beta)
        object.__setattr__(self, "counts", counts)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["beta_rad", "c11", "c12", "c21", "c22"])
            for b, row in zip(self.beta_rad, self.counts):
                writer.writerow([f"{b:.10g}"] + [int(c) for c in row])

    @classmethod
    def from_csv(cls, path, alpha_rad: float, integration_time_per_point_s: float = 250.0):
        beta, counts = [], []
        with open(path, newline="") as f:
            for rec in csv.reader(f):
                if not rec or rec[0].startswith("#") or rec[0] == "beta_rad":
                    continue
                beta.append(float(rec[0]))
                counts.append([float(x) for x in rec[1:5]])
        return cls(
            alpha_rad=alpha_rad,
            beta_rad=np.array(beta),
            counts=np.array(counts),
            integration_time_per_point_s=integration_time_per_point_s,
        )


@dataclass(frozen=True)
class ChshResult:
    s_value: float
    sigma_s: float
    settings: tuple[float, float, float, float]
    e_values: tuple[float, float, float, float]
    e_sigmas: tuple[float, float, float, float]

    def __post_init__(self):
        if abs(self.s_value) > TSIRELSON_BOUND + 3.0 * max(self.sigma_s, 0.0):
            raise ValueError(
                f"S = {self.s_value} past the quantum bound beyond 3 sigma; "
                "upstream counts are inconsistent"
            )

    def as_dict(self) -> dict:
        return {
            "S": self.s_value,
            "sigma_S": self.sigma_s,
            "settings_rad": list(self.settings),
            "E": list(self.e_values),
            "sigma_E": list(self.e_sigmas),
            "violation_sigmas": bell_violation_sigmas(self),
        }


def correlation_e(counts) -> float:
    """Correlation coefficient (C11 - C12 - C21 + C22) / (sum of all four)."""
    c = np.asarray(counts, dtype=float).reshape(4)
    total = c.sum()
    if total <= 0:
        raise ValueError("all-zero counts; correlation undefined")
    return float((c[0] - c[1] - c[2] + c[3]) / total)


def chsh_s(e_values) -> float:
    """S = |E(a,b) - E(a',b) + E(a,b') + E(a',b')|.

    The four correlations must be ordered ((a,b), (a',b), (a,b'), (a',b')).
    """
    e = np.asarray(e_values, dtype=float).reshape(4)
    if np.any(np.abs(e) > 1.0 + 1e-9):
        raise ValueError("correlation coefficients must lie in [-1, 1]")
    return float(abs(e[0] - e[1] + e[2] + e[3]))


def _s_from_count_matrix(counts: np.ndarray) -> float:
    return chsh_s([correlation_e(row) for row in counts.reshape(4, 4)])


def chsh_from_counts(
    counts,
    settings: tuple[float, float, float, float] = DEFAULT_CHSH_PHASES,
    n_trials: int = 100,
    seed: int = 0,
) -> ChshResult:
    """CHSH statistic from a (4, 4) count matrix: one row per setting pair
    ((a,b), (a',b), (a,b'), (a',b')), columns ordered as COMBO_LABELS.

    Errors come from a Poisson parametric bootstrap over all 16 counts.
    """
    c = np.asarray(counts, dtype=float).reshape(4, 4)
    e_vals = tuple(correlation_e(row) for row in c)
    sigma_s = monte_carlo_errors(c, _s_from_count_matrix, n_trials=n_trials, seed=seed)
    e_sig = monte_carlo_errors(
        c, lambda m: np.array([correlation_e(r) for r in m.reshape(4, 4)]),
        n_trials=n_trials, seed=seed,
    )
    return ChshResult(
        s_value=chsh_s(e_vals),
        sigma_s=float(sigma_s),
        settings=tuple(settings),
        e_values=e_vals,
        e_sigmas=tuple(float(x) for x in e_sig),
    )


def monte_carlo_errors(counts, statistic, n_trials: int = 100, seed: int = 0):
    """Standard deviation of a statistic under Poisson count resampling.

    Every raw count is resampled as Poisson with mean equal to the observed
    value, the statistic is recomputed per trial, and the sample standard
    deviation is returned (matching the statistic's shape).  Deterministic
    per seed.
    """
    if n_trials < 2:
        raise ValueError("need at least two trials")
    base = np.asarray(counts, dtype=float)
    if np.any(base < 0):
        raise ValueError("counts must be nonnegative")
    rng = np.random.default_rng(seed)
    samples = [np.asarray(statistic(rng.poisson(base))) for _ in range(n_trials)]
    return np.std(np.stack(samples), axis=0, ddof=1)


def bell_violation_sigmas(result: ChshResult) -> float:
    """(S - 2) / sigma_S: how many standard deviations past the classical
    bound."""
    if result.sigma_s <= 0:
        raise ValueError("sigma_S must be positive")
    return (result.s_value - 2.0) / result.sigma_s


@dataclass(frozen=True)
class VisibilityFit:
    visibility: float
    phase_offset_rad: float
    amplitude: float
    sigma_visibility: float
    converged: bool


def _fringe_model(beta, amplitude, visibility, phi0, alpha, sign):
    return amplitude * (1.0 + sign * visibility * np.cos(alpha + beta + phi0))


def _fit_single(beta, counts, alpha, sign):
    """Linear solve on the (1, cos, sin) basis, then bounded refinement."""
    design = np.column_stack([np.ones_like(beta), np.cos(beta), np.sin(beta)])
    coef, *_ = np.linalg.lstsq(design, counts, rcond=None)
    a0 = max(coef[0], 1e-9)
    v0 = min(np.hypot(coef[1], coef[2]) / a0, 1.0)
    phi0 = math.atan2(-coef[2] * sign, coef[1] * sign) - alpha
    phi0 = (phi0 + math.pi) % (2 * math.pi) - math.pi

    res = optimize.least_squares(
        lambda p: _fringe_model(beta, p[0], p[1], p[2], alpha, sign) - counts,
        x0=[a0, v0, phi0],
        bounds=([0.0, 0.0, -2 * math.pi], [np.inf, 1.0, 2 * math.pi]),
    )
    return res.x, bool(res.success)


def fit_visibility(
    scan: FringeScan,
    combo: int | str,
    n_trials: int = 100,
    seed: int = 0,
) -> VisibilityFit:
    """Least-squares Franson fringe fit for one port combination.

    Fits counts = A (1 + (-1)^(i+j) V cos(alpha + beta + phi0)) over
    (A, V, phi0) with V clamped to [0, 1]; the starting point comes from the
    exact linear solution on the known fringe period.  sigma_V is a Poisson
    Monte-Carlo error.  Insufficient data (fewer than 5 phases or a span
    under pi) raises ValueError; optimizer failure is reported through the
    ``converged`` flag instead.
    """
    k = COMBO_LABELS.index(combo) if isinstance(combo, str) else int(combo)
    beta = scan.beta_rad
    if beta.size < 5 or np.ptp(beta) < math.pi:
        raise ValueError("need at least 5 phase points spanning at least pi")
    counts = scan.counts[:, k]
    sign = COMBO_SIGNS[k]

    params, ok = _fit_single(beta, counts, scan.alpha_rad, sign)

    def trial_stat(resampled):
        p, ok_trial = _fit_single(beta, resampled, scan.alpha_rad, sign)
        return p[1] if ok_trial else np.nan

    sigma_v = monte_carlo_errors(counts, trial_stat, n_trials=n_trials, seed=seed)
    return VisibilityFit(
        visibility=float(params[1]),
        phase_offset_rad=float(params[2]),
        amplitude=float(params[0]),
        sigma_visibility=float(sigma_v),
        converged=ok,
    )


# --- analytic (infinite statistics) path ---------------------------------


def middle_middle_probabilities(rho, alpha_rad: float, beta_rad: float) -> np.ndarray:
    """Joint middle-slot probabilities for the four port combinations,
    ordered as COMBO_LABELS."""
    table = project_pair(rho, alpha_rad, beta_rad)
    mm = table[:, SLOT_MIDDLE, :, SLOT_MIDDLE]
    return np.array([mm[0, 0], mm[0, 1], mm[1, 0], mm[1, 1]])


def analytic_correlation(rho, alpha_rad: float, beta_rad: float) -> float:
    """Correlation coefficient of the exact Born-rule rates."""
    return correlation_e(middle_middle_probabilities(rho, alpha_rad, beta_rad))


def analytic_chsh(rho, phases=DEFAULT_CHSH_PHASES) -> float:
    """CHSH S evaluated on exact projection probabilities."""
    a, ap, b, bp = phases
    e = [
        analytic_correlation(rho, a, b),
        analytic_correlation(rho, ap, b),
        analytic_correlation(rho, a, bp),
        analytic_correlation(rho, ap, bp),
    ]
    return chsh_s(e)
