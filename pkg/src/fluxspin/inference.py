"""Weighted least-squares fits of relaxation kernels and the Curie-Weiss law.

Kernel fits work in transformed coordinates so that positivity and ordering
constraints hold automatically:

* cutoff 1/f: (phi_p, alpha, log tau_min, log(tau_max / tau_min))
* diffusion:  (phi_p, log omega_c)

Minimization is MINPACK's Levenberg-Marquardt (``scipy.optimize.least_squares``
with ``method="lm"``) driven by a central-difference Jacobian. Parameter
points where the model cannot be evaluated get a large constant residual,
so the damping schedule rejects those steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError, FluxSpinError, RankDeficiencyError
from .kernels import CutoffOneOverF, HomogeneousDiffusion, InhomogeneousDiffusion, Variant
from .protocol import Mode, trace_model

MAX_ITER = 500
_PENALTY = 1e8
_RANK_TOL = 1e-10
_DIFF_STEP = 1e-6


@dataclass(frozen=True)
class FitResult:
    """Best-fit parameters with 1-sigma errors and covariance.

    ``flags`` collects diagnostics such as ``"uninformative"`` or
    ``"unphysical"``.
    """

    names: tuple
    values: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int
    converged: bool
    n_iter: int
    flags: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def params(self):
        return dict(zip(self.names, self.values.tolist()))

    @property
    def uncertainties(self):
        return dict(zip(self.names, self.errors.tolist()))

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof if self.dof > 0 else math.nan

    def __getitem__(self, name):
        return self.params[name]

    def to_dict(self):
        """Plain-Python summary suitable for JSON."""
        return {
            "params": self.params,
            "errors": self.uncertainties,
            "covariance": self.covariance.tolist(),
            "chi2": self.chi2,
            "dof": self.dof,
            "reduced_chi2": self.reduced_chi2,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "flags": list(self.flags),
            **self.extra,
        }


def _central_jacobian(fun, q, r0):
    jac = np.empty((r0.size, q.size))
    for j in range(q.size):
        h = _DIFF_STEP * max(1.0, abs(q[j]))
        up, down = q.copy(), q.copy()
        up[j] += h
        down[j] -= h
        jac[:, j] = (fun(up) - fun(down)) / (2.0 * h)
    return jac


def _check_rank(jac, names):
    # scale columns so the test is about directions, not units
    norms = np.linalg.norm(jac, axis=0)
    if np.any(norms == 0):
        raise RankDeficiencyError("model does not depend on some parameters",
                                  [n for n, z in zip(names, norms == 0) if z])
    _, s, vt = np.linalg.svd(jac / norms, full_matrices=False)
    if s[-1] < _RANK_TOL * s[0]:
        null = np.abs(vt[-1])
        dirs = [n for n, c in zip(names, null) if c > 0.3 * null.max()]
        raise RankDeficiencyError(f"Jacobian is singular along {', '.join(dirs)}", dirs)


def least_squares_fit(residual, q0, names, max_iter=MAX_ITER):
    """Minimize sum residual(q)^2 with Levenberg-Marquardt.

    ``residual`` may raise :class:`FluxSpinError` or return non-finite
    values for infeasible q; those points are penalized.

    Returns
    -------
    q, cov_q, chi2, dof, converged, n_iter
    """
    q0 = np.asarray(q0, dtype=float)

    def safe(q):
        try:
            r = np.asarray(residual(q), dtype=float)
        except (FluxSpinError, OverflowError, ZeroDivisionError):
            return np.full(n_res, _PENALTY)
        return np.where(np.isfinite(r), r, _PENALTY)

    r0 = np.asarray(residual(q0), dtype=float)
    n_res = r0.size
    dof = n_res - q0.size
    if dof < 2:
        raise DomainError(f"need at least {q0.size + 2} points for {q0.size} parameters, got {n_res}")
    sol = optimize.least_squares(safe, q0, jac=lambda q: _central_jacobian(safe, q, safe(q)), method="lm",
                                 xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=max_iter, x_scale="jac")
    r = safe(sol.x)
    jac = _central_jacobian(safe, sol.x, r)
    _check_rank(jac, names)
    chi2 = float(r @ r)
    cov = np.linalg.pinv(jac.T @ jac)
    if chi2 / dof > 1.0:
        cov *= chi2 / dof
    return sol.x, cov, chi2, dof, bool(sol.status > 0), int(sol.nfev)


_CUTOFF_NAMES = ("phi_p", "alpha", "tau_min", "tau_max")
_DIFFUSION_NAMES = ("phi_p", "omega_c")


def _variant(variant):
    if isinstance(variant, str):
        return Variant(variant)
    if isinstance(variant, Variant):
        return variant
    return variant.variant


def _build_kernel(variant, q):
    if variant is Variant.CUTOFF:
        return CutoffOneOverF(float(q[1]), math.exp(q[2]), math.exp(q[2] + q[3]))
    cls = HomogeneousDiffusion if variant is Variant.HOMOGENEOUS else InhomogeneousDiffusion
    return cls(math.exp(q[1]))


def kernel_from_params(variant, params):
    """Kernel from natural parameters as reported in :attr:`FitResult.params`."""
    variant = _variant(variant)
    if variant is Variant.CUTOFF:
        return CutoffOneOverF(params["alpha"], params["tau_min"], params["tau_max"])
    cls = HomogeneousDiffusion if variant is Variant.HOMOGENEOUS else InhomogeneousDiffusion
    return cls(params["omega_c"])


def _natural(variant, q, cov_q):
    """Map transformed parameters and covariance back to natural ones."""
    if variant is Variant.CUTOFF:
        tmin, tmax = math.exp(q[2]), math.exp(q[2] + q[3])
        values = np.array([q[0], q[1], tmin, tmax])
        grad = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, tmin, 0], [0, 0, tmax, tmax]], dtype=float)
    else:
        values = np.array([q[0], math.exp(q[1])])
        grad = np.diag([1.0, values[1]])
    return values, grad @ cov_q @ grad.T


def _saturation_time(t, y, level):
    idx = np.flatnonzero(y >= level)
    return float(t[idx[0]]) if idx.size else float(t[-1])


def auto_init(trace, variant):
    """Heuristic starting point in natural parameters.

    phi_p from the largest signal, tau_min from the first point above
    3 sigma, tau_max from 90% saturation, alpha = 1, and omega_c from the
    inverse half-saturation time.
    """
    variant = _variant(variant)
    t, y, s = trace.t, trace.phi_fb, trace.sigma
    phi = float(np.max(y)) if np.max(y) > 0 else float(np.max(np.abs(y)))
    if trace.mode is Mode.DEPOLARIZATION:
        # decaying signal: mirror so the saturation heuristics apply
        y = phi - y
    if variant is Variant.CUTOFF:
        above = np.flatnonzero(y > 3 * s)
        tmin = max(float(t[above[0]]) if above.size else float(t[0]), float(t[t > 0][0]) if np.any(t > 0) else 1.0)
        tmax = max(_saturation_time(t, y, 0.9 * phi), 10.0 * tmin)
        return {"phi_p": phi, "alpha": 1.0, "tau_min": tmin, "tau_max": tmax}
    half = _saturation_time(t, y, 0.5 * phi)
    return {"phi_p": phi, "omega_c": 1.0 / max(half, float(t[t > 0][0]) if np.any(t > 0) else 1.0)}


def _to_q(variant, init):
    if variant is Variant.CUTOFF:
        return np.array([init["phi_p"], init["alpha"], math.log(init["tau_min"]),
                         math.log(init["tau_max"] / init["tau_min"])])
    return np.array([init["phi_p"], math.log(init["omega_c"])])


def fit_kernel(trace, variant, init=None, t_max=None, max_iter=MAX_ITER):
    """Fit phi_p and the kernel parameters of ``variant`` to one trace.

    Parameters
    ----------
    trace : ExperimentTrace
        Times in microseconds, so rates come out in 1/us.
    variant : Variant, str or kernel
    init : dict, optional
        Natural-parameter starting point; :func:`auto_init` by default.
    t_max : float, optional
        Only points with t <= t_max enter the fit.

    Raises
    ------
    RankDeficiencyError
        If the Jacobian at the optimum is singular.
    """
    variant = _variant(variant)
    if t_max is not None:
        keep = trace.t <= t_max
        trace = type(trace)(trace.mode, trace.fixed_time, trace.t[keep], trace.phi_fb[keep], trace.sigma[keep],
                            trace.temperature, trace.device_id, trace.seed)
    init = dict(auto_init(trace, variant), **(init or {}))
    names = _CUTOFF_NAMES if variant is Variant.CUTOFF else _DIFFUSION_NAMES
    qnames = ("phi_p", "alpha", "log_tau_min", "log_span") if variant is Variant.CUTOFF else ("phi_p", "log_omega_c")

    def residual(q):
        return (trace.phi_fb - trace_model(trace, _build_kernel(variant, q), q[0])) / trace.sigma

    q, cov_q, chi2, dof, ok, nfev = least_squares_fit(residual, _to_q(variant, init), qnames, max_iter)
    values, cov = _natural(variant, q, cov_q)
    return FitResult(names, values, cov, chi2, dof, ok, nfev, extra={"variant": variant.value})


def fit_kernel_joint(traces, init=None, max_iter=MAX_ITER):
    """Cutoff 1/f fit with shared (alpha, tau_min, tau_max) and one phi_p per trace."""
    traces = list(traces)
    if not traces:
        raise DomainError("no traces to fit")
    starts = [auto_init(tr, Variant.CUTOFF) for tr in traces]
    shared = {k: float(np.exp(np.mean(np.log([s[k] for s in starts])))) for k in ("tau_min", "tau_max")}
    shared["alpha"] = 1.0
    shared.update({k: v for k, v in (init or {}).items() if k != "phi_p"})
    q0 = np.array([shared["alpha"], math.log(shared["tau_min"]), math.log(shared["tau_max"] / shared["tau_min"])]
                  + [s["phi_p"] for s in starts])
    qnames = ("alpha", "log_tau_min", "log_span") + tuple(f"phi_p[{i}]" for i in range(len(traces)))

    def residual(q):
        kernel = CutoffOneOverF(float(q[0]), math.exp(q[1]), math.exp(q[1] + q[2]))
        return np.concatenate([(tr.phi_fb - trace_model(tr, kernel, q[3 + i])) / tr.sigma
                               for i, tr in enumerate(traces)])

    q, cov_q, chi2, dof, ok, nfev = least_squares_fit(residual, q0, qnames, max_iter)
    tmin, tmax = math.exp(q[1]), math.exp(q[1] + q[2])
    grad = np.eye(q.size)
    grad[1, 1] = tmin
    grad[2, 1:3] = tmax
    values = np.concatenate([[q[0], tmin, tmax], q[3:]])
    names = ("alpha", "tau_min", "tau_max") + tuple(f"phi_p[{i}]" for i in range(len(traces)))
    return FitResult(names, values, grad @ cov_q @ grad.T, chi2, dof, ok, nfev, extra={"variant": "cutoff_joint"})


def curie_weiss(temperature, amplitude, t_c):
    """Curie-Weiss amplitude A / (T - T_c)."""
    return amplitude / (np.asarray(temperature, dtype=float) - t_c)


def fit_curie_weiss(temperatures, phi_p, sigma, max_iter=MAX_ITER):
    """Fit phi_p(T) = A / (T - T_c).

    Internally the model is 1 / (b T - c) with A = 1 / b and T_c = c / b,
    which is smooth through the divergence and starts from the weighted
    straight-line fit of 1 / phi_p against T.

    Returns
    -------
    FitResult
        Parameters ``amplitude`` and ``t_c``. Flagged ``"unphysical"`` when
        T_c >= min(T) and ``"uninformative"`` when the T_c error exceeds |T_c|.
    """
    temp = np.asarray(temperatures, dtype=float)
    y = np.asarray(phi_p, dtype=float)
    s = np.broadcast_to(np.asarray(sigma, dtype=float), temp.shape)
    if temp.size < 3:
        raise DomainError("need at least 3 temperatures")
    if np.any(s <= 0) or np.any(y == 0):
        raise DomainError("sigma must be positive and amplitudes non-zero")

    # work on a unit flux scale so the argmin does not depend on it
    scale = float(np.median(np.abs(y)))
    y, s = y / scale, s / scale
    # 1/y has error s / y^2
    b0, c0 = np.polyfit(temp, 1.0 / y, 1, w=y * y / s)
    q0 = np.array([b0, -c0])

    def residual(q):
        return (y - 1.0 / (q[0] * temp - q[1])) / s

    q, cov_q, chi2, dof, ok, nfev = least_squares_fit(residual, q0, ("b", "c"), max_iter)
    q, cov_q = q / scale, cov_q / scale ** 2
    b, c = q
    grad = np.array([[-1.0 / b ** 2, 0.0], [-c / b ** 2, 1.0 / b]])
    values = np.array([1.0 / b, c / b])
    cov = grad @ cov_q @ grad.T
    flags = []
    if values[1] >= temp.min():
        flags.append("unphysical")
    if math.sqrt(max(cov[1, 1], 0.0)) > abs(values[1]):
        flags.append("uninformative")
    return FitResult(("amplitude", "t_c"), values, cov, chi2, dof, ok, nfev, tuple(flags))
