"""Initial-state reconstruction by regularized least squares in time.

The objective is

    J(x0) = 1/2 * integral_0^T |C exp(-L t) x0 - y_obs(t)|^2 dt + lam/2 * |x0|^2

with the integral taken by the trapezoidal rule on the observation grid.
Its gradient comes from the adjoint system

    dP/dtau = -L P + C^T u(tau),   u(tau) = y(T - tau) - y_obs(T - tau),  P(0) = 0,

integrated forward in ``tau``; the gradient is ``P(T) + lam * x0``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .dynamics import NetworkSystem, Trajectory

__all__ = [
    "FixedStep",
    "Backtracking",
    "EstimationConfig",
    "EstimationResult",
    "ShapeError",
    "StepSizeError",
    "objective",
    "gradient",
    "estimate",
    "lipschitz_estimate",
    "default_lambda",
    "save_result",
    "load_result",
]

log = logging.getLogger(__name__)


class ShapeError(ValueError):
    pass


class StepSizeError(RuntimeError):
    pass


@dataclass(frozen=True)
class FixedStep:
    alpha: float


@dataclass(frozen=True)
class Backtracking:
    """Armijo backtracking.

    ``trial`` picks the first step tried at each iteration: ``"bb"`` uses the
    Barzilai-Borwein ratio of the last two iterates (the Lipschitz step on
    the first iteration), ``"lipschitz"`` always starts from ``1 / L_est``.
    """

    c: float = 1e-4
    rho: float = 0.5
    trial: str = "bb"


@dataclass
class EstimationConfig:
    lam: float = 0.0
    max_iters: int = 5000
    grad_tol: float | None = None
    step_rule: FixedStep | Backtracking = field(default_factory=Backtracking)
    init: np.ndarray | None = None
    adjoint: str = "exact"
    backend: str | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.grad_tol is not None and self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.adjoint not in ("exact", "rk4"):
            raise ValueError(f"unknown adjoint integrator {self.adjoint!r}")
        rule = self.step_rule
        if isinstance(rule, FixedStep) and rule.alpha <= 0:
            raise ValueError("fixed step must be positive")
        if isinstance(rule, Backtracking) and not (0 < rule.c < 1 and 0 < rule.rho < 1):
            raise ValueError("backtracking needs 0 < c < 1 and 0 < rho < 1")


@dataclass
class EstimationResult:
    x0_hat: np.ndarray
    objective_history: list[float]
    grad_norm_history: list[float]
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x0_hat"] = [float(v) for v in self.x0_hat]
        return d


def default_lambda(k: int, horizon: float) -> float:
    return 1e-6 * k * horizon


def _check(sys: NetworkSystem, observed: Trajectory, x0=None):
    if observed.k != sys.k:
        raise ShapeError(f"trajectory has {observed.k} outputs, system has k = {sys.k}")
    if not observed.is_uniform():
        raise ShapeError("observation times must be uniformly spaced")
    if x0 is not None and np.shape(x0) != (sys.n,):
        raise ShapeError(f"state must have length {sys.n}, got shape {np.shape(x0)}")


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    m = len(times)
    if m == 1:
        return np.zeros(1)
    dt = times[1] - times[0]
    w = np.full(m, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


class _Problem:
    """Precomputed quantities shared by objective and gradient evaluations."""

    def __init__(self, sys: NetworkSystem, observed: Trajectory, adjoint: str = "exact",
                 backend: str | None = None):
        _check(sys, observed)
        self.sys = sys
        self.y_obs = observed.samples
        self.times = observed.times
        self.w = _trapezoid_weights(self.times)
        lam, self.V = sys.eig
        self.CV = sys.observed_modes
        self.decay_t = np.exp(-np.outer(self.times, lam))
        dt = self.times[1] - self.times[0] if len(self.times) > 1 else 0.0
        self.dt = dt
        self.step_decay = np.exp(-lam * dt)
        self.adjoint = adjoint
        self.kern = kernels.backend(backend)

    def outputs(self, x0) -> np.ndarray:
        return (self.decay_t * (self.V.T @ x0)) @ self.CV.T

    def residual(self, x0) -> np.ndarray:
        return self.outputs(x0) - self.y_obs

    def misfit(self, r) -> float:
        return 0.5 * float(np.dot(self.w, np.einsum("ij,ij->i", r, r)))

    def adjoint_state(self, r) -> np.ndarray:
        """P(T) for residual samples ``r`` (rows in time order)."""
        if self.adjoint == "exact":
            # exact propagation between samples, trapezoid impulses at samples
            forcing = np.ascontiguousarray((self.w[:, None] * r) @ self.CV)
            return self.V @ self.kern.modal_sweep(self.step_decay, forcing)
        forcing = np.zeros((len(self.times), self.sys.n))
        forcing[:, list(self.sys.accessible)] = r
        return self.kern.adjoint_rk4(*self.sys.csr.args(), forcing, float(self.dt))

    def value_and_grad(self, x0, lam):
        r = self.residual(x0)
        J = self.misfit(r) + 0.5 * lam * float(x0 @ x0)
        return J, self.adjoint_state(r) + lam * x0

    def value(self, x0, lam):
        return self.misfit(self.residual(x0)) + 0.5 * lam * float(x0 @ x0)

    def hess_vec(self, v, lam):
        """Gauss-Newton product; exact for this quadratic objective."""
        return self.adjoint_state(self.outputs(v)) + lam * v


def objective(sys: NetworkSystem, x0, observed: Trajectory, lam: float) -> float:
    """Trapezoidal output misfit plus Tikhonov term."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    _check(sys, observed, x0)
    return _Problem(sys, observed).value(np.asarray(x0, dtype=float), lam)


def gradient(sys: NetworkSystem, x0, observed: Trajectory, lam: float,
             method: str = "exact", backend: str | None = None) -> np.ndarray:
    """Adjoint gradient of :func:`objective` with respect to ``x0``.

    ``method="exact"`` solves the adjoint equation mode by mode with the
    trapezoidal forcing, which is the exact gradient of the discretized
    objective. ``method="rk4"`` integrates it with classical RK4 at the
    sample period and linearly interpolated forcing; it agrees to O(dt^2).
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    _check(sys, observed, x0)
    prob = _Problem(sys, observed, method, backend)
    return prob.value_and_grad(np.asarray(x0, dtype=float), lam)[1]


def lipschitz_estimate(prob: _Problem, lam: float, iters: int = 10) -> float:
    """Largest eigenvalue of the Gauss-Newton operator by power iteration."""
    v = np.linspace(1.0, 2.0, prob.sys.n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        hv = prob.hess_vec(v, lam)
        est = float(np.linalg.norm(hv))
        if est == 0.0:
            return max(lam, 1e-300)
        v = hv / est
    return est


def estimate(sys: NetworkSystem, observed: Trajectory,
             cfg: EstimationConfig | None = None) -> EstimationResult:
    """Minimize the objective by gradient descent from ``cfg.init`` (zeros)."""
    cfg = cfg or EstimationConfig()
    if len(observed) == 0:
        raise ValueError("empty trajectory")
    prob = _Problem(sys, observed, cfg.adjoint, cfg.backend)
    lam = cfg.lam
    grad_tol = cfg.grad_tol
    if grad_tol is None:
        grad_tol = max(1e-8 * float(np.linalg.norm(observed.samples)), 1e-300)

    x = np.zeros(sys.n) if cfg.init is None else np.array(cfg.init, dtype=float)
    if x.shape != (sys.n,):
        raise ShapeError(f"init must have length {sys.n}")
    J, g = prob.value_and_grad(x, lam)
    gnorm = float(np.linalg.norm(g))
    obj_hist, grad_hist = [J], [gnorm]
    best_x, best_J = x.copy(), J

    rule = cfg.step_rule
    alpha0 = 1.0 / lipschitz_estimate(prob, lam) if isinstance(rule, Backtracking) else rule.alpha
    x_prev = g_prev = None
    increases = 0
    converged = gnorm <= grad_tol
    it = 0
    while not converged and it < cfg.max_iters:
        if isinstance(rule, FixedStep):
            x_new = x - rule.alpha * g
            J_new, g_new = prob.value_and_grad(x_new, lam)
            increases = increases + 1 if J_new > J else 0
            if increases >= 10 or not np.isfinite(J_new):
                raise StepSizeError(
                    f"objective increased for {increases} consecutive iterations with fixed "
                    f"step {rule.alpha:g}; use backtracking or a smaller step"
                )
        else:
            alpha = alpha0
            if rule.trial == "bb" and x_prev is not None:
                s, y = x - x_prev, g - g_prev
                sy = float(s @ y)
                if sy > 0:
                    alpha = float(s @ s) / sy
            gg = gnorm * gnorm
            while True:
                x_new = x - alpha * g
                J_new = prob.value(x_new, lam)
                if J_new <= J - rule.c * alpha * gg:
                    break
                alpha *= rule.rho
                if alpha < 1e-300:
                    break
            if J_new > J:
                log.debug("line search stalled at iteration %d", it)
                break
            J_new, g_new = prob.value_and_grad(x_new, lam)
        x_prev, g_prev = x, g
        x, J, g = x_new, J_new, g_new
        gnorm = float(np.linalg.norm(g))
        it += 1
        obj_hist.append(J)
        grad_hist.append(gnorm)
        if J < best_J:
            best_x, best_J = x.copy(), J
        converged = gnorm <= grad_tol

    if converged:
        best_x = x
    return EstimationResult(best_x, obj_hist, grad_hist, it, bool(converged))


def save_result(res: EstimationResult, path) -> None:
    Path(path).write_text(json.dumps(res.to_dict(), indent=2) + "\n")


def load_result(path) -> EstimationResult:
    d = json.loads(Path(path).read_text())
    return EstimationResult(
        np.array(d["x0_hat"], dtype=float),
        list(d["objective_history"]),
        list(d["grad_norm_history"]),
        int(d["iterations"]),
        bool(d["converged"]),
    )
