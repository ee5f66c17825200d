"""Least-squares kernels for decay times, linewidths, and depth scaling.

All three models are one- or two-parameter and well conditioned, so a
damped Gauss-Newton iteration with analytic Jacobians is used instead of
a general-purpose optimizer; initial guesses come from deterministic
closed-form estimates (log-linear regression, half-max crossing), which
keeps fits reproducible bit-for-bit.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

MAX_ITERATIONS = 200


class FitError(RuntimeError):
    """Fit could not be performed or did not converge."""


@dataclass(frozen=True)
class FitResult:
    """Parameter estimates with linearized standard errors."""

    params: dict[str, float]
    stderr: dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int
    n_points: int = 0

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def format(self) -> str:
        lines = [f"converged: {self.converged} after {self.iterations} iterations "
                 f"on {self.n_points} points",
                 f"residual norm: {self.residual_norm:.6e}"]
        for name, value in self.params.items():
            lines.append(f"{name} = {value:.8e} +/- {self.stderr[name]:.3e}")
        return "\n".join(lines)


def _gauss_newton(model: Callable[[np.ndarray, np.ndarray], np.ndarray],
                  jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray],
                  x: np.ndarray, y: np.ndarray, theta0: np.ndarray,
                  names: Sequence[str],
                  lower: Optional[np.ndarray] = None) -> FitResult:
    """Damped Gauss-Newton with multiplicative damping adaptation."""
    theta = np.asarray(theta0, dtype=float).copy()
    lam = 1e-3
    r = y - model(x, theta)
    rss = float(r @ r)
    converged = False
    it = 0
    for it in range(1, MAX_ITERATIONS + 1):
        jac = jacobian(x, theta)
        g = jac.T @ r
        h = jac.T @ jac
        step_ok = False
        for _ in range(40):
            try:
                delta = np.linalg.solve(h + lam * np.diag(np.diag(h)), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + delta
            if lower is not None:
                cand = np.maximum(cand, lower)
            r_new = y - model(x, cand)
            rss_new = float(r_new @ r_new)
            if math.isfinite(rss_new) and rss_new <= rss:
                step_ok = True
                break
            lam *= 10.0
        if not step_ok:
            break
        rel_step = float(np.max(np.abs(cand - theta) / (np.abs(theta) + 1e-300)))
        improvement = rss - rss_new
        theta, r, rss = cand, r_new, rss_new
        lam = max(lam * 0.3, 1e-12)
        if rel_step < 1e-12 or improvement <= 1e-15 * (rss + 1e-300):
            converged = True
            break
    else:
        it = MAX_ITERATIONS

    jac = jacobian(x, theta)
    dof = max(x.size - theta.size, 1)
    sigma2 = rss / dof
    try:
        cov = sigma2 * np.linalg.inv(jac.T @ jac)
        err = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        err = np.full(theta.size, math.nan)
    return FitResult(params=dict(zip(names, theta.tolist())),
                     stderr=dict(zip(names, err.tolist())),
                     residual_norm=math.sqrt(rss),
                     converged=converged,
                     iterations=it,
                     n_points=int(x.size))


def fit_exp_decay(t: Sequence[float], y: Sequence[float],
                  window: Optional[tuple[float, float]] = None) -> FitResult:
    """Fit A * exp(-t/T) to positive decay data.

    ``window`` restricts the fit to t in [t0, t1].  Returns parameters
    ``amplitude`` and ``t_decay``; raises :class:`FitError` for fewer
    than five usable points or a non-positive fitted decay time.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape:
        raise FitError("t and y must have the same shape")
    mask = np.isfinite(t) & np.isfinite(y)
    if window is not None:
        mask &= (t >= window[0]) & (t <= window[1])
    t, y = t[mask], y[mask]
    if t.size < 5:
        raise FitError(f"need >= 5 points in the fit window, got {t.size}")

    pos = y > 0.0
    if np.count_nonzero(pos) < 2:
        raise FitError("need positive samples for the log-linear seed")
    coeff = np.polyfit(t[pos], np.log(y[pos]), 1)
    slope = min(coeff[0], -1e-300)
    theta0 = np.array([math.exp(coeff[1]), -1.0 / slope])

    def model(x, th):
        return th[0] * np.exp(-x / th[1])

    def jac(x, th):
        e = np.exp(-x / th[1])
        return np.column_stack([e, th[0] * e * x / th[1] ** 2])

    res = _gauss_newton(model, jac, t, y, theta0, ("amplitude", "t_decay"),
                        lower=np.array([0.0, 1e-300]))
    if res.params["t_decay"] <= 0.0:
        raise FitError(f"fitted decay time is not positive: {res.params['t_decay']:g}")
    return res


def fit_lorentzian_od(delta: Sequence[float], d_meas: Sequence[float],
                      exclude_below: Optional[float] = None) -> FitResult:
    """Fit the optical-depth line profile d_res / (1 + 4 (delta/Gamma)^2).

    ``exclude_below`` drops points with |delta| < that value (used when
    near-resonance data saturates the detector).  Returns ``d_res`` and
    ``gamma_total``.
    """
    delta = np.asarray(delta, dtype=float)
    d_meas = np.asarray(d_meas, dtype=float)
    if delta.shape != d_meas.shape:
        raise FitError("delta and d arrays must have the same shape")
    mask = np.isfinite(delta) & np.isfinite(d_meas)
    if exclude_below is not None:
        mask &= np.abs(delta) >= exclude_below
    delta, d_meas = delta[mask], d_meas[mask]
    if delta.size < 5:
        raise FitError(f"need >= 5 detuning points, got {delta.size}")
    if float(np.ptp(d_meas)) == 0.0:
        raise FitError("degenerate data: all optical depths equal")

    d0 = float(np.max(d_meas))
    # half-max crossing for the width seed
    above = d_meas >= d0 / 2.0
    if np.any(above) and not np.all(above):
        gamma0 = 2.0 * float(np.max(np.abs(delta[above])))
    else:
        gamma0 = 2.0 * float(np.median(np.abs(delta)) + 1e-300)

    def model(x, th):
        return th[0] / (1.0 + 4.0 * (x / th[1]) ** 2)

    def jac(x, th):
        u = 1.0 + 4.0 * (x / th[1]) ** 2
        return np.column_stack([1.0 / u, th[0] * 8.0 * x**2 / (th[1] ** 3 * u**2)])

    return _gauss_newton(model, jac, delta, d_meas, np.array([d0, gamma0]),
                         ("d_res", "gamma_total"),
                         lower=np.array([0.0, 1e-300]))


def fit_tsr_vs_d(d: Sequence[float], t_sr: Sequence[float]) -> FitResult:
    """One-parameter fit of the decay-time scaling (1/Gamma)/(1 + d/4).

    Returns the effective linewidth ``gamma_eff`` (same units as 1/t_sr).
    """
    d = np.asarray(d, dtype=float)
    t_sr = np.asarray(t_sr, dtype=float)
    if d.shape != t_sr.shape:
        raise FitError("d and t_sr arrays must have the same shape")
    mask = np.isfinite(d) & np.isfinite(t_sr) & (t_sr > 0.0)
    d, t_sr = d[mask], t_sr[mask]
    if d.size < 3:
        raise FitError(f"need >= 3 (d, T_SR) pairs, got {d.size}")

    # the model is linear in 1/Gamma, so the seed is already the optimum
    u = 1.0 / (1.0 + d / 4.0)
    inv_gamma0 = float((u @ t_sr) / (u @ u))

    def model(x, th):
        return (1.0 / th[0]) / (1.0 + x / 4.0)

    def jac(x, th):
        return (-1.0 / (th[0] ** 2 * (1.0 + x / 4.0))).reshape(-1, 1)

    return _gauss_newton(model, jac, d, t_sr, np.array([1.0 / inv_gamma0]),
                         ("gamma_eff",), lower=np.array([1e-300]))


def read_xy(source: str | io.TextIOBase) -> tuple[np.ndarray, np.ndarray]:
    """Read two-column numeric text: whitespace or comma separated,
    ``#`` starts a comment."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    xs: list[float] = []
    ys: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) < 2:
            raise FitError(f"line {lineno}: expected two columns, got {raw!r}")
        try:
            xs.append(float(parts[0]))
            ys.append(float(parts[1]))
        except ValueError as exc:
            raise FitError(f"line {lineno}: {exc}") from exc
    if not xs:
        raise FitError("no data rows found")
    return np.asarray(xs), np.asarray(ys)
