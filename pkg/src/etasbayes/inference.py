"""Iterated-linearization fit of the five ETAS parameters.

The log-likelihood is decomposed into one background-integral row, one row
per (parent, bin) Omori integral, and one log-intensity row per in-domain
event. Each row is recast as a Poisson count observation (integral rows:
count 0, exposure 1; event rows: count 1, exposure 0) whose log-intensity
is the row's log-component, so the working objective

    sum_rows [ -exposure * exp(f) + count * f ]  +  log prior

equals the exact log-posterior when f is evaluated exactly, and becomes a
strictly concave problem when each f is replaced by its first-order Taylor
expansion about the current trial point. One outer iteration = linearize,
maximize (Newton, analytic Hessian), line-search between old and new trial
points on the exact objective, check convergence against the posterior
scale. The Gaussian at the final mode, pushed through the link functions,
yields the reported marginals and samples.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtri

from .binning import (BinningConfig, bin_log_integrals, make_bins,
                      point_log_intensities)
from .catalog import Catalog, TimeDomain
from .model import EtasParams, PARAM_NAMES
from .priors import (InternalParams, PriorSpec, forward, forward_derivative,
                     to_internal)

__all__ = [
    "SurrogatePoint",
    "SurrogateData",
    "GaussianApprox",
    "FitConfig",
    "IterationRecord",
    "PosteriorResult",
    "NonConvergenceError",
    "assemble_surrogate",
    "linearized_log_posterior",
    "log_prior",
    "laplace_fit",
    "line_search",
    "check_convergence",
    "fit",
    "sample_posterior",
]

_LOG2PI = math.log(2.0 * math.pi)
_LINE_SEARCH_FRACTIONS = tuple(0.5 ** k for k in range(7))  # 1 .. 1/64
_LINE_SEARCH_MAX_EXPANSION = 16.0
_GRID_POINTS = 401
_GRID_HALF_WIDTH = 6.0
_THETA_GRID_LIMIT = 8.0  # beyond this the Gaussian CDF saturates in float64


class NonConvergenceError(RuntimeError):
    """Inner Newton solve failed to reach the requested gradient norm."""


@dataclass(frozen=True)
class SurrogatePoint:
    """One Poisson-trick row: its kind, count, exposure, and context."""

    kind: str  # "background" | "bin" | "event"
    count: int
    exposure: float
    parent_id: int = -1
    lo: float = math.nan
    hi: float = math.nan
    event_time: float = math.nan
    history_len: int = -1


class SurrogateData:
    """Packed row data for one fit; contexts are iteration-invariant.

    Row order is [background, bins..., events...]. Only the trial point
    changes between iterations, so everything here is built once.
    """

    def __init__(self, dom: TimeDomain, bin_lo, bin_hi, bin_tpar, bin_dm,
                 bin_parent, src_times, src_dm, evt_times, evt_prefix):
        self.dom = dom
        self.bin_lo = np.asarray(bin_lo, dtype=float)
        self.bin_hi = np.asarray(bin_hi, dtype=float)
        self.bin_tpar = np.asarray(bin_tpar, dtype=float)
        self.bin_dm = np.asarray(bin_dm, dtype=float)
        self.bin_parent = np.asarray(bin_parent, dtype=np.int64)
        self.src_times = np.asarray(src_times, dtype=float)
        self.src_dm = np.asarray(src_dm, dtype=float)
        self.evt_times = np.asarray(evt_times, dtype=float)
        self.evt_prefix = np.asarray(evt_prefix, dtype=np.int64)
        self.n_bins = self.bin_lo.size
        self.n_events = self.evt_times.size
        self.n_rows = 1 + self.n_bins + self.n_events
        # count = 1 and exposure = 0 on event rows; 0 / 1 on integral rows
        self.counts = np.zeros(self.n_rows)
        self.counts[1 + self.n_bins:] = 1.0
        self.exposures = np.ones(self.n_rows)
        self.exposures[1 + self.n_bins:] = 0.0

    def __len__(self) -> int:
        return self.n_rows

    def points(self) -> Iterator[SurrogatePoint]:
        yield SurrogatePoint("background", 0, 1.0)
        for j in range(self.n_bins):
            yield SurrogatePoint("bin", 0, 1.0,
                                 parent_id=int(self.bin_parent[j]),
                                 lo=float(self.bin_lo[j]),
                                 hi=float(self.bin_hi[j]))
        for j in range(self.n_events):
            yield SurrogatePoint("event", 1, 0.0,
                                 event_time=float(self.evt_times[j]),
                                 history_len=int(self.evt_prefix[j]))

    def _feasible(self, eta: np.ndarray) -> bool:
        mu, K, alpha, c, p = eta
        return mu > 0.0 and K > 0.0 and c > 0.0 and p > 1.0

    def evaluate(self, theta: np.ndarray, links: PriorSpec,
                 need_grad: bool = True):
        """Row log-components (and internal-scale gradients) at theta.

        Returns (values, grads) or (None, None) when the mapped parameters
        leave the region where the closed forms are defined (possible for
        extreme trial points; the line search treats this as -inf).
        """
        ip = InternalParams.from_array(theta)
        eta = links.forward_array(theta)
        if not self._feasible(eta):
            return None, None
        values = np.empty(self.n_rows)
        grads = np.empty((self.n_rows, 5)) if need_grad else None
        values[0] = math.log(self.dom.length) + math.log(eta[0])
        bv, bg = bin_log_integrals(self.bin_lo, self.bin_hi, self.bin_tpar,
                                   self.bin_dm, ip, links, need_grad=need_grad)
        values[1:1 + self.n_bins] = bv
        ev, eg = point_log_intensities(self.src_times, self.src_dm,
                                       self.evt_times, self.evt_prefix,
                                       ip, links, need_grad=need_grad)
        values[1 + self.n_bins:] = ev
        if need_grad:
            th = theta
            deta = links.derivative_array(th)
            grads[0] = 0.0
            grads[0, 0] = deta[0] / eta[0]
            grads[1:1 + self.n_bins] = bg
            grads[1 + self.n_bins:] = eg
        return values, grads


def assemble_surrogate(modeled: Catalog, history: Catalog, dom: TimeDomain,
                       cfg: BinningConfig) -> SurrogateData:
    """Build the full Poisson-trick row set for a split catalogue.

    One background row; bin rows for every parent in history and modeled
    (parents at T2 contribute nothing and are skipped); one event row per
    modeled event carrying its strict-past source prefix.
    """
    bin_lo, bin_hi, bin_tpar, bin_dm, bin_parent = [], [], [], [], []
    for cat in (history, modeled):
        for ev in cat:
            if ev.time >= dom.t2:
                continue
            for tb in make_bins(ev, dom, cfg):
                bin_lo.append(tb.lo)
                bin_hi.append(tb.hi)
                bin_tpar.append(ev.time)
                bin_dm.append(ev.magnitude - dom.m0)
                bin_parent.append(ev.id)
    src_times = np.concatenate([history.times, modeled.times])
    src_dm = np.concatenate([history.mags, modeled.mags]) - dom.m0
    evt_prefix = np.searchsorted(src_times, modeled.times, side="left")
    return SurrogateData(dom, bin_lo, bin_hi, bin_tpar, bin_dm, bin_parent,
                         src_times, src_dm, modeled.times,
                         evt_prefix.astype(np.int64))


def log_prior(theta: np.ndarray) -> float:
    """Standard 5-dimensional Gaussian log-density on the internal scale."""
    theta = np.asarray(theta, dtype=float)
    return float(-0.5 * theta @ theta - 2.5 * _LOG2PI)


def exact_log_posterior(theta: np.ndarray, data: SurrogateData,
                        links: PriorSpec) -> float:
    """Exact working objective: unlinearized rows plus the internal prior.

    Because the per-bin integrals telescope, this equals the exact
    point-process log-likelihood plus the log prior for any theta.
    """
    values, _ = data.evaluate(theta, links, need_grad=False)
    if values is None:
        return -math.inf
    with np.errstate(over="ignore"):
        integral = np.exp(values[:1 + data.n_bins]).sum()
    if not np.isfinite(integral):
        return -math.inf
    return float(-integral + values[1 + data.n_bins:].sum()) + log_prior(theta)


def exact_log_posterior_grad(theta: np.ndarray, data: SurrogateData,
                             links: PriorSpec) -> np.ndarray:
    """Analytic gradient of the exact working objective (test instrument)."""
    values, grads = data.evaluate(np.asarray(theta, float), links)
    if values is None:
        raise ValueError("theta maps outside the model domain")
    n_int = 1 + data.n_bins
    w = np.exp(values[:n_int])
    return grads[n_int:].sum(axis=0) - grads[:n_int].T @ w - np.asarray(theta, float)


def linearized_log_posterior(theta: np.ndarray, lin_point: np.ndarray,
                             data: SurrogateData, links: PriorSpec) -> float:
    """Working objective with every row Taylor-expanded about lin_point.

    Exact at theta = lin_point by construction (the expansion is carried
    in delta form).
    """
    values, grads = data.evaluate(np.asarray(lin_point, float), links)
    if values is None:
        raise ValueError("linearization point maps outside the model domain")
    fbar = values + grads @ (np.asarray(theta, float) - np.asarray(lin_point, float))
    return _linear_objective(np.asarray(theta, float), fbar, data)


def _linear_objective(theta: np.ndarray, fbar: np.ndarray,
                      data: SurrogateData) -> float:
    with np.errstate(over="ignore"):
        integral = np.exp(fbar[:1 + data.n_bins]).sum()
    if not np.isfinite(integral):
        return -math.inf
    return float(-integral + fbar[1 + data.n_bins:].sum()) + log_prior(theta)


@dataclass(frozen=True)
class GaussianApprox:
    """Gaussian posterior approximation on the internal scale."""

    mode: np.ndarray
    precision: np.ndarray
    log_det_precision: float
    covariance: np.ndarray

    def mode_internal(self) -> InternalParams:
        return InternalParams.from_array(self.mode)

    def stddevs(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))


def _solve_spd(mat: np.ndarray, rhs: np.ndarray):
    """Cholesky solve with Levenberg-style diagonal inflation fallback."""
    scale = float(np.max(np.abs(np.diag(mat)))) or 1.0
    for k in range(9):
        damp = 0.0 if k == 0 else scale * 10.0 ** (k - 9)
        try:
            f = cho_factor(mat + damp * np.eye(mat.shape[0]), lower=True)
            return cho_solve(f, rhs), f
        except np.linalg.LinAlgError:
            continue
    raise NonConvergenceError("normal matrix not positive definite")


def laplace_fit(data: SurrogateData, links: PriorSpec,
                lin_point: np.ndarray, grad_tol: float = 1e-8,
                max_newton: int = 100) -> GaussianApprox:
    """Gaussian approximation of the linearized posterior about lin_point.

    Newton with the analytic Hessian; the linearized objective is a sum of
    -exp(affine), affine, and -|theta|^2/2 terms, hence strictly concave,
    so undamped Newton with a feasibility backtrack converges from the
    linearization point itself.
    """
    lin_point = np.asarray(lin_point, dtype=float)
    values, grads = data.evaluate(lin_point, links)
    if values is None:
        raise ValueError("linearization point maps outside the model domain")
    n_int = 1 + data.n_bins
    g_int = grads[:n_int]
    g_evt_sum = grads[n_int:].sum(axis=0)

    theta = lin_point.copy()
    obj = _linear_objective(theta, values, data)
    for _ in range(max_newton):
        fbar_int = values[:n_int] + g_int @ (theta - lin_point)
        with np.errstate(over="ignore"):
            w = np.exp(fbar_int)
        if not np.all(np.isfinite(w)):
            raise NonConvergenceError("overflow at the current Newton iterate")
        grad = g_evt_sum - g_int.T @ w - theta
        if np.max(np.abs(grad)) < grad_tol:
            break
        precision = g_int.T @ (w[:, None] * g_int) + np.eye(5)
        step, _ = _solve_spd(precision, grad)
        step_norm = float(np.max(np.abs(step)))
        frac, improved = 1.0, False
        for _ in range(40):
            cand = theta + frac * step
            fbar = values + grads @ (cand - lin_point)
            cand_obj = _linear_objective(cand, fbar, data)
            if cand_obj > obj:
                theta, obj, improved = cand, cand_obj, True
                break
            frac *= 0.5
        if not improved:
            # on large catalogues the objective cannot resolve the last
            # ascent in float64; the remaining Newton displacement is then
            # the honest measure of how far the mode can still move
            if step_norm < 1e-6:
                break
            raise NonConvergenceError(
                f"Newton stalled with remaining step {step_norm:.2e}"
            )
    else:
        raise NonConvergenceError(
            f"Newton did not reach gradient norm {grad_tol} in {max_newton} steps"
        )
    fbar_int = values[:n_int] + g_int @ (theta - lin_point)
    w = np.exp(fbar_int)
    precision = g_int.T @ (w[:, None] * g_int) + np.eye(5)
    precision = 0.5 * (precision + precision.T)
    covariance, f = _solve_spd(precision, np.eye(5))
    covariance = 0.5 * (covariance + covariance.T)
    log_det = 2.0 * float(np.log(np.diag(f[0])).sum())
    return GaussianApprox(mode=theta, precision=precision,
                          log_det_precision=log_det, covariance=covariance)


def line_search(theta0: np.ndarray, theta1_star: np.ndarray,
                objective: Callable[[np.ndarray], float],
                max_step: Optional[float] = None,
                base: Optional[float] = None):
    """Pick the best point on the line from theta0 through theta1_star.

    The exact (re-evaluated, not linearized) objective is scanned over the
    backtracking fraction grid 1, 1/2, ..., 1/64; when the full step
    already improves, the fraction is doubled (up to 16x) while the
    objective keeps rising. The overshoot matters: on ridged posteriors
    the relinearization fixed point contracts slowly and pure backtracking
    needs hundreds of outer iterations. Returns
    (theta_new, fraction, objective_value, stalled); a capped step length
    (max_step) bounds |theta_new - theta0|, and if no candidate improves
    on theta0 the search stalls and returns theta0. ``base`` short-cuts
    the objective value at theta0 when the caller already has it.
    """
    theta0 = np.asarray(theta0, dtype=float)
    delta = np.asarray(theta1_star, dtype=float) - theta0
    norm = float(np.linalg.norm(delta))
    if base is None:
        base = objective(theta0)
    if norm == 0.0:
        return theta0, 0.0, base, True

    def frac_allowed(frac):
        return max_step is None or frac * norm <= max_step

    best_frac, best_obj = 0.0, base
    for frac in _LINE_SEARCH_FRACTIONS:
        if not frac_allowed(frac):
            continue
        val = objective(theta0 + frac * delta)
        if math.isfinite(val) and val > best_obj:
            best_frac, best_obj = frac, val
        elif best_frac > 0.0:
            break  # profile dropped past the peak; smaller fractions lose
    if best_frac == 0.0 and max_step is not None and max_step < norm * _LINE_SEARCH_FRACTIONS[-1]:
        frac = max_step / norm
        val = objective(theta0 + frac * delta)
        if math.isfinite(val) and val > best_obj:
            best_frac, best_obj = frac, val
    if best_frac == 0.0:
        return theta0, 0.0, base, True
    if best_frac == 1.0:
        frac = 2.0
        while frac <= _LINE_SEARCH_MAX_EXPANSION and frac_allowed(frac):
            val = objective(theta0 + frac * delta)
            if not (math.isfinite(val) and val > best_obj):
                break
            best_frac, best_obj = frac, val
            frac *= 2.0
    return theta0 + best_frac * delta, best_frac, best_obj, False


def check_convergence(theta_new: np.ndarray, theta_old: np.ndarray,
                      approx: GaussianApprox, fraction: float) -> bool:
    """True when every coordinate moved less than fraction * posterior sd."""
    sd = approx.stddevs()
    return bool(np.all(np.abs(np.asarray(theta_new) - np.asarray(theta_old))
                       < fraction * sd))


@dataclass(frozen=True)
class FitConfig:
    """Everything one inversion needs besides the catalogue itself."""

    initial: EtasParams = field(
        default_factory=lambda: EtasParams(0.3, 0.1, 1.0, 0.2, 1.1))
    priors: PriorSpec = field(default_factory=PriorSpec)
    binning: BinningConfig = field(default_factory=BinningConfig)
    max_iter: int = 100
    convergence_fraction: float = 0.01
    max_step: Optional[float] = None
    n_posterior_samples: int = 0
    sample_seed: int = 0
    importance_samples: int = 0


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    theta: np.ndarray
    params: np.ndarray
    step_fraction: float
    objective: float
    stalled: bool


@dataclass
class PosteriorResult:
    """Posterior approximation plus the trajectory that produced it."""

    approx: GaussianApprox
    marginals: dict
    samples: Optional[np.ndarray]
    iterations: int
    converged: bool
    history: list
    mode_params: EtasParams
    elapsed_seconds: float
    n_events: int
    diagnostics: dict = field(default_factory=dict)
    # links are needed to transform samples/intervals after the fit
    _links: PriorSpec = field(default=None, repr=False)

    def interval(self, name: str, level: float = 0.95):
        """Central credible interval of one parameter on the ETAS scale."""
        k = PARAM_NAMES.index(name)
        z = -float(ndtri(0.5 * (1.0 - level)))
        lo = self.approx.mode[k] - z * self.approx.stddevs()[k]
        hi = self.approx.mode[k] + z * self.approx.stddevs()[k]
        target = self._links.targets[k]
        return forward(lo, target), forward(hi, target)

    def to_dict(self) -> dict:
        return {
            "mode_internal": self.approx.mode.tolist(),
            "mode_params": self.mode_params.as_array().tolist(),
            "precision": self.approx.precision.tolist(),
            "covariance": self.approx.covariance.tolist(),
            "log_det_precision": self.approx.log_det_precision,
            "marginals": {
                name: {"x": x.tolist(), "density": d.tolist()}
                for name, (x, d) in self.marginals.items()
            },
            "samples": None if self.samples is None else self.samples.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "history": [
                {
                    "iteration": r.iteration,
                    "theta": r.theta.tolist(),
                    "params": r.params.tolist(),
                    "step_fraction": r.step_fraction,
                    "objective": r.objective,
                    "stalled": r.stalled,
                }
                for r in self.history
            ],
            "elapsed_seconds": self.elapsed_seconds,
            "n_events": self.n_events,
            "diagnostics": self.diagnostics,
        }

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def _marginal_grids(approx: GaussianApprox, links: PriorSpec) -> dict:
    """Per-parameter ETAS-scale density grids via change of variables."""
    out = {}
    sd = approx.stddevs()
    for k, name in enumerate(PARAM_NAMES):
        m, s = approx.mode[k], sd[k]
        lo = max(m - _GRID_HALF_WIDTH * s, -_THETA_GRID_LIMIT)
        hi = min(m + _GRID_HALF_WIDTH * s, _THETA_GRID_LIMIT)
        if not lo < hi:
            lo, hi = m - _GRID_HALF_WIDTH * s, m + _GRID_HALF_WIDTH * s
        grid = np.linspace(lo, hi, _GRID_POINTS)
        target = links.targets[k]
        x = forward(grid, target)
        dens_theta = np.exp(-0.5 * ((grid - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        dens = dens_theta / forward_derivative(grid, target)
        out[name] = (x, dens)
    return out


def fit(modeled: Catalog, history: Catalog, dom: TimeDomain,
        cfg: FitConfig) -> PosteriorResult:
    """Run the full outer loop and return the posterior approximation.

    Iterates linearize -> maximize -> line-search -> convergence-check
    until the trial point settles (or max_iter, or a stall). When
    max_step is set, convergence checking is disabled and exactly
    max_iter iterations run. A final Gaussian approximation is computed
    at the settled trial point so the reported mode is a fixed point of
    the linearization.
    """
    t0 = time.perf_counter()
    links = cfg.priors
    if not links.contains(cfg.initial):
        raise ValueError("initial trial parameters must lie inside the prior support")
    theta = to_internal(cfg.initial, links).as_array()
    data = assemble_surrogate(modeled, history, dom, cfg.binning)
    objective = lambda th: exact_log_posterior(th, data, links)

    trace: list[IterationRecord] = []
    converged = False
    diagnostics: dict = {}
    iterations = 0
    last_obj = None
    for it in range(1, cfg.max_iter + 1):
        iterations = it
        try:
            approx = laplace_fit(data, links, theta)
        except NonConvergenceError as exc:
            diagnostics["newton_failure"] = f"iteration {it}: {exc}"
            break
        theta_new, frac, obj, stalled = line_search(
            theta, approx.mode, objective, cfg.max_step, base=last_obj)
        last_obj = obj
        trace.append(IterationRecord(
            iteration=it, theta=theta_new.copy(),
            params=links.forward_array(theta_new), step_fraction=frac,
            objective=obj, stalled=stalled))
        if stalled:
            diagnostics["stall_iteration"] = it
            theta = theta_new
            break
        if cfg.max_step is None:
            converged = check_convergence(theta_new, theta, approx,
                                          cfg.convergence_fraction)
        theta = theta_new
        if converged:
            break

    final = laplace_fit(data, links, theta)
    marginals = _marginal_grids(final, links)
    samples = None
    if cfg.n_posterior_samples > 0:
        rng = np.random.default_rng(cfg.sample_seed)
        samples = _sample_from_approx(final, links, cfg.n_posterior_samples, rng)
    if cfg.importance_samples > 0:
        diagnostics["importance"] = _importance_diagnostics(
            final, links, objective, cfg.importance_samples,
            np.random.default_rng(cfg.sample_seed + 1))
    result = PosteriorResult(
        approx=final,
        marginals=marginals,
        samples=samples,
        iterations=iterations,
        converged=converged,
        history=trace,
        mode_params=EtasParams.from_array(links.forward_array(final.mode)),
        elapsed_seconds=time.perf_counter() - t0,
        n_events=len(modeled),
        diagnostics=diagnostics,
        _links=links,
    )
    return result


def _sample_from_approx(approx: GaussianApprox, links: PriorSpec, n: int,
                        rng: np.random.Generator) -> np.ndarray:
    chol = np.linalg.cholesky(approx.covariance)
    z = approx.mode[None, :] + rng.standard_normal((n, 5)) @ chol.T
    cols = [forward(z[:, k], t) for k, t in enumerate(links.targets)]
    return np.column_stack(cols)


def sample_posterior(res: PosteriorResult, n: int,
                     rng: np.random.Generator) -> np.ndarray:
    """n ETAS-scale draws from the Gaussian approximation, (n, 5) matrix."""
    if n == 0:
        return np.empty((0, 5))
    return _sample_from_approx(res.approx, res._links, n, rng)


def _importance_diagnostics(approx: GaussianApprox, links: PriorSpec,
                            objective, n: int, rng: np.random.Generator) -> dict:
    """Importance-reweight Gaussian draws against the exact objective.

    Reports the effective sample size (as a fraction of n) and the
    reweighted parameter means; a fraction near 1 means the Gaussian is an
    adequate description, smaller values quantify skewness it misses.
    """
    chol = np.linalg.cholesky(approx.covariance)
    z = rng.standard_normal((n, 5))
    thetas = approx.mode[None, :] + z @ chol.T
    # log N(theta; mode, cov) = -0.5 z'z - 2.5 log 2pi + 0.5 log det precision
    logq = -0.5 * (z ** 2).sum(axis=1) - 2.5 * _LOG2PI \
        + 0.5 * approx.log_det_precision
    logp = np.array([objective(t) for t in thetas])
    logw = logp - logq
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    ess = 1.0 / float((w ** 2).sum())
    means = (w[:, None] * np.column_stack(
        [forward(thetas[:, k], t) for k, t in enumerate(links.targets)])).sum(axis=0)
    return {
        "n": n,
        "ess_fraction": ess / n,
        "reweighted_means": means.tolist(),
    }
