"""Plug-in estimators built from kernel-smoothed observation densities.

All estimators target the joint distribution function ``F0(t0, z0)`` of an
event time and its mark, observed only through current status data
``(t, z, delta)``.  Writing ``g`` for the censoring density, the observation
density identifies ``F0`` through

    E[ 1{z <= z0} delta | t ] = F0(t, z0),

which suggests estimating numerator and denominator separately by kernel
smoothing and taking the ratio.  Two variants are implemented:

* ``f1`` smooths in the time direction only -- the numerator is a kernel
  average of ``1{z_i <= z0} delta_i``;
* ``f2`` smooths in both directions -- the mark indicator is replaced by its
  kernel smoothing, i.e. each uncensored observation contributes
  ``K2((z0 - z_i) / beta)`` where ``K2`` is the antiderivative of the mark
  factor.  Integrating out the mark recovers the time-only smoother exactly,
  which keeps the marginal identity ``1 - f2(t0, z_max + beta) = h0/g`` an
  algebraic fact rather than an approximation.

The bivariate density estimate differentiates the same ratio:

    f2_density = (g_hat * d/dt h_hat - g_hat' * h_hat) / g_hat^2,

with ``h_hat`` the smoothed sub-density of uncensored observations.  The
ratio form makes a positive floor on ``g_hat`` essential; evaluations where
``g_hat`` falls below ``g_floor`` raise ``UnstableDenominatorError``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DerivativeUnavailableError,
    InvalidBandwidthError,
    KernelAssumptionError,
    UnstableDenominatorError,
)
from .kernels import (
    Bandwidths,
    BivariateKernel,
    KernelFamily,
    UnivariateKernel,
    epanechnikov_kernel,
    eval_rescaled,
    eval_rescaled_cdf,
    product_kernel,
)
from .scenarios import Sample

__all__ = [
    "EstimatorConfig",
    "g_hat",
    "g_hat_prime",
    "h0_hat",
    "f1",
    "f1_counting",
    "f2",
    "f2_density",
    "GridValue",
    "evaluate_grid",
    "write_grid_csv",
]

DEFAULT_G_FLOOR = 1e-8

# chunk size bound for vectorized multi-point evaluation: keeps the
# (points x n) weight matrices under ~2e6 doubles
_CHUNK_BUDGET = 2_000_000


@dataclass(frozen=True)
class EstimatorConfig:
    """Kernels, bandwidths and the denominator floor for one estimation run.

    ``kernel_t`` smooths censoring times; ``kernel_tz`` (a product kernel)
    is required by the doubly-smoothed estimators and must have a time
    factor identical to ``kernel_t``.  ``g_floor`` is the positive floor
    under the estimated censoring density below which ratios are refused.
    """

    kernel_t: UnivariateKernel = field(default_factory=epanechnikov_kernel)
    bandwidths: Bandwidths = field(default_factory=lambda: Bandwidths(0.1))
    kernel_tz: BivariateKernel | None = None
    g_floor: float = DEFAULT_G_FLOOR

    def __post_init__(self) -> None:
        if self.g_floor <= 0.0 or not np.isfinite(self.g_floor):
            raise ValueError(f"g_floor must be positive, got {self.g_floor!r}")

    def with_bandwidths(self, alpha: float, beta: float | None = None) -> "EstimatorConfig":
        return EstimatorConfig(
            kernel_t=self.kernel_t,
            bandwidths=Bandwidths(alpha, beta),
            kernel_tz=self.kernel_tz,
            g_floor=self.g_floor,
        )


def _require_mark_kernel(config: EstimatorConfig) -> BivariateKernel:
    """Return the product kernel, checking it matches the time kernel."""
    k2 = config.kernel_tz
    if k2 is None:
        raise KernelAssumptionError(
            "doubly-smoothed estimation needs a bivariate kernel (kernel_tz)"
        )
    a, b = config.kernel_t, k2.factor_t
    if a is b:
        return k2
    if a.family is b.family and a.family is not KernelFamily.CUSTOM:
        return k2
    probe = np.linspace(-1.25, 1.25, 101)
    if float(np.max(np.abs(a.pdf(probe) - b.pdf(probe)))) > 1e-12:
        raise KernelAssumptionError(
            "time factor of the bivariate kernel must equal kernel_t"
        )
    return k2


def _require_beta(config: EstimatorConfig) -> float:
    beta = config.bandwidths.beta
    if beta is None:
        raise InvalidBandwidthError(
            "doubly-smoothed estimation needs a mark bandwidth (beta)"
        )
    return beta


def _time_weights(sample: Sample, config: EstimatorConfig, t0: float) -> np.ndarray:
    return eval_rescaled(config.kernel_t, config.bandwidths.alpha, t0 - sample.t)


def g_hat(sample: Sample, config: EstimatorConfig, t0: float) -> float:
    """Kernel estimate of the censoring density at ``t0``.

    ``g_hat(t0) = n^{-1} sum_i k_alpha(t0 - t_i)``.  May legitimately be
    zero when no censoring time falls within ``alpha`` of ``t0``.
    """
    return float(np.mean(_time_weights(sample, config, t0)))


def g_hat_prime(sample: Sample, config: EstimatorConfig, t0: float) -> float:
    """Derivative of :func:`g_hat` at ``t0`` via the kernel derivative."""
    deriv = config.kernel_t.deriv
    if deriv is None:
        raise DerivativeUnavailableError(
            f"kernel {config.kernel_t.name!r} has no derivative"
        )
    alpha = config.bandwidths.alpha
    u = (t0 - sample.t) / alpha
    return float(np.mean(deriv(u)) / alpha**2)


def h0_hat(sample: Sample, config: EstimatorConfig, t0: float) -> float:
    """Smoothed sub-density of censored observations at ``t0``.

    Averages ``(1 - delta_i) k_alpha(t0 - t_i)``; together with the
    uncensored sub-density this decomposes ``g_hat``.
    """
    w = _time_weights(sample, config, t0)
    return float(np.mean(w * (1 - sample.delta)))


def _ratio(num: float, den: float, g_floor: float) -> float:
    if den < g_floor:
        raise UnstableDenominatorError(
            f"censoring density estimate {den:.3e} below floor {g_floor:.3e}",
            g_value=den,
        )
    return num / den


def f1(sample: Sample, config: EstimatorConfig, t0: float, z0: float) -> float:
    """Distribution function estimate smoothing in time only.

    ``f1(t0, z0) = [n^{-1} sum_i 1{z_i <= z0} delta_i k_alpha(t0 - t_i)]
    / g_hat(t0)``.  Values always lie in [0, 1] because the numerator terms
    are a subset of the denominator terms; monotonicity in ``t0`` is *not*
    guaranteed.
    """
    w = _time_weights(sample, config, t0)
    num = float(np.mean(w * sample.delta * (sample.z <= z0)))
    den = float(np.mean(w))
    return _ratio(num, den, config.g_floor)


def f1_counting(sample: Sample, config: EstimatorConfig, t0: float, z0: float) -> float:
    """Ratio-of-counts form of :func:`f1` for the Uniform time kernel.

    Counts observations with ``|t_i - t0| <= alpha``; equals :func:`f1`
    exactly (up to float rounding) when ``kernel_t`` is Uniform, and is the
    natural unsmoothed reading of the estimator.
    """
    if config.kernel_t.family is not KernelFamily.UNIFORM:
        raise KernelAssumptionError(
            "counting form is only defined for the uniform time kernel"
        )
    alpha = config.bandwidths.alpha
    inside = np.abs(sample.t - t0) <= alpha
    num = float(np.sum(inside & (sample.delta == 1) & (sample.z <= z0)))
    den = float(np.sum(inside))
    # scale both counts to density units so the floor means the same thing
    scale = 1.0 / (2.0 * alpha * len(sample))
    return _ratio(num * scale, den * scale, config.g_floor)


def f2(sample: Sample, config: EstimatorConfig, t0: float, z0: float) -> float:
    """Distribution function estimate smoothing in time and mark.

    Each uncensored observation contributes the smoothed mark indicator
    ``K2((z0 - z_i) / beta)`` times ``k_alpha(t0 - t_i)``, where ``K2`` is
    the antiderivative of the mark kernel factor; ``K2`` runs from 0 to 1,
    so the value stays in [0, 1] and increases in ``z0``.  At
    ``z0 >= max mark + beta`` every smoothed indicator equals one and the
    estimator reduces exactly to the uncensored mass over ``g_hat``.
    """
    k2 = _require_mark_kernel(config)
    beta = _require_beta(config)
    w = _time_weights(sample, config, t0)
    mark = eval_rescaled_cdf(k2.factor_z, beta, z0 - sample.z)
    num = float(np.mean(w * sample.delta * mark))
    den = float(np.mean(w))
    return _ratio(num, den, config.g_floor)


def _f2_components(
    sample: Sample,
    config: EstimatorConfig,
    t_points: np.ndarray,
    z_points: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized pieces of the density estimate at paired points.

    Returns arrays ``(g, g_prime, h, dh_dt)`` over ``(t_points[j],
    z_points[j])``.  Evaluation is chunked so the intermediate weight
    matrices stay small.
    """
    k2 = _require_mark_kernel(config)
    beta = _require_beta(config)
    alpha = config.bandwidths.alpha
    kd_t = config.kernel_t.deriv
    kz = k2.factor_z
    if kd_t is None or kz.deriv is None:
        raise DerivativeUnavailableError(
            "density estimation differentiates both kernel factors; "
            f"{config.kernel_t.name!r} x {kz.name!r} lacks a derivative"
        )
    t_points = np.atleast_1d(np.asarray(t_points, dtype=float))
    z_points = np.atleast_1d(np.asarray(z_points, dtype=float))
    n = len(sample)
    m = t_points.size
    g = np.empty(m)
    gp = np.empty(m)
    h = np.empty(m)
    dh = np.empty(m)
    chunk = max(1, _CHUNK_BUDGET // max(n, 1))
    for start in range(0, m, chunk):
        sl = slice(start, min(start + chunk, m))
        ut = (t_points[sl, None] - sample.t[None, :]) / alpha
        uz = (z_points[sl, None] - sample.z[None, :]) / beta
        wt = config.kernel_t.pdf(ut) / alpha
        wz = kz.pdf(uz) / beta
        g[sl] = wt.mean(axis=1)
        gp[sl] = (kd_t(ut) / alpha**2).mean(axis=1)
        h[sl] = (wt * wz * sample.delta).mean(axis=1)
        dh[sl] = ((kd_t(ut) / alpha**2) * wz * sample.delta).mean(axis=1)
    return g, gp, h, dh


def f2_density(sample: Sample, config: EstimatorConfig, t0: float, z0: float) -> float:
    """Estimate of the joint density ``f0(t0, z0)``.

    Differentiates the smoothed ratio in its time argument:
    ``(g_hat * d/dt h_hat - g_hat' * h_hat) / g_hat^2`` with ``h_hat`` the
    doubly-smoothed uncensored sub-density.  Not guaranteed nonnegative in
    small samples, though it is positive with probability tending to one
    under undersmoothing.
    """
    g, gp, h, dh = _f2_components(sample, config, np.array([t0]), np.array([z0]))
    if g[0] < config.g_floor:
        raise UnstableDenominatorError(
            f"censoring density estimate {g[0]:.3e} below floor "
            f"{config.g_floor:.3e}",
            g_value=float(g[0]),
        )
    return float((g[0] * dh[0] - gp[0] * h[0]) / g[0] ** 2)


@dataclass(frozen=True)
class GridValue:
    """One evaluated grid point; missing entries are None."""

    t: float
    z: float
    f1: float | None
    f2: float | None
    density: float | None


def evaluate_grid(
    sample: Sample,
    config: EstimatorConfig,
    t_grid: np.ndarray,
    z_grid: np.ndarray,
) -> list[GridValue]:
    """Evaluate the estimators on the Cartesian grid ``t_grid x z_grid``.

    The singly-smoothed estimate is always computed.  The doubly-smoothed
    estimate and the density require a mark bandwidth and (for the density)
    differentiable kernels; when those prerequisites are missing the
    corresponding columns are left as None rather than failing the whole
    grid.  Points whose denominator is unstable get None everywhere.
    """
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    z_grid = np.atleast_1d(np.asarray(z_grid, dtype=float))
    want_f2 = config.kernel_tz is not None and config.bandwidths.beta is not None
    want_density = want_f2
    if want_density:
        kz = config.kernel_tz.factor_z
        want_density = config.kernel_t.deriv is not None and kz.deriv is not None

    rows: list[GridValue] = []
    for t0 in t_grid:
        for z0 in z_grid:
            try:
                v1 = f1(sample, config, float(t0), float(z0))
            except UnstableDenominatorError:
                rows.append(GridValue(float(t0), float(z0), None, None, None))
                continue
            v2 = f2(sample, config, float(t0), float(z0)) if want_f2 else None
            vd = (
                f2_density(sample, config, float(t0), float(z0))
                if want_density
                else None
            )
            rows.append(GridValue(float(t0), float(z0), v1, v2, vd))
    return rows


def write_grid_csv(rows: list[GridValue], path: str | Path | io.TextIOBase) -> None:
    """Write grid values as CSV with header ``t,z,F1,F2,f2`` ('' = missing)."""

    def _write(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "z", "F1", "F2", "f2"])
        for r in rows:
            writer.writerow(
                [
                    repr(r.t),
                    repr(r.z),
                    "" if r.f1 is None else repr(r.f1),
                    "" if r.f2 is None else repr(r.f2),
                    "" if r.density is None else repr(r.density),
                ]
            )

    if isinstance(path, io.TextIOBase):
        _write(path)
    else:
        with open(path, "w", newline="") as fh:
            _write(fh)
