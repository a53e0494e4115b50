"""Gradient training of the two-layer linear autoencoder.

The loss is the squared Frobenius reconstruction error of x @ w1 @ w2
against the fixed input. Three update rules are provided:

  untied       independent first and second layer steps, both descending
  rbm          tied weights (w2 = w1.T) with the Gram-difference step
  incremental  tied weights, stepping on the change of the
               reconstruction Gram since the previous iteration

plus an iterative orthogonalization that trains the observation-side
tied factor directly and needs no spectral decomposition.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, Diverged, NotConverged
from .spectral import matrix_values
from .dimred import WeightSet

RULES = ("untied", "rbm", "incremental", "ortho")

# convergence window and thresholds for train()
_WINDOW = 100
_REL_CHANGE = 1e-12
_STALL_TOL = 1e-10


@dataclass(frozen=True)
class OptimState:
    """Weights plus bookkeeping after m update steps.

    g_ref is the reference Gram of the incremental rule (the
    reconstruction Gram of the previous step); unused by other rules.
    """

    w1: np.ndarray
    w2: np.ndarray
    m: int
    delta: float
    g_ref: np.ndarray | None = None


def forward(x0, w1, w2):
    """Latent activity and reconstruction: (x0 @ w1, x0 @ w1 @ w2)."""
    a = matrix_values(x0)
    if a.shape[1] != w1.shape[0]:
        raise DimensionMismatch(
            "matrix has %d observables, w1 expects %d"
            % (a.shape[1], w1.shape[0])
        )
    y = a @ w1
    return y, y @ w2


def recon_gap(x0, w1, w2):
    """Reconstruction minus input, the quantity every rule steps on."""
    a = matrix_values(x0)
    y, x_hat = forward(a, w1, w2)
    return x_hat - a, y


def grad(x0, w1, w2):
    """Exact loss gradients with respect to both layers.

    With e the residual input minus reconstruction, the derivatives of
    the squared error are -2 x0.T e w2.T for the first layer and
    -2 y.T e for the second.
    """
    a = matrix_values(x0)
    y, x_hat = forward(a, w1, w2)
    e = a - x_hat
    g1 = -2.0 * (a.T @ e @ w2.T)
    g2 = -2.0 * (y.T @ e)
    return g1, g2


def error(x0, w1, w2):
    """Squared Frobenius reconstruction error."""
    gap, _ = recon_gap(x0, w1, w2)
    return float(np.sum(gap * gap))


def step(state, rule, x0):
    """One functional update step; returns a new state.

    untied updates both layers simultaneously from the same forward
    pass. The tied rules keep w2 = w1.T after each step.
    """
    a = matrix_values(x0)
    gap, y = recon_gap(a, state.w1, state.w2)
    delta = state.delta
    if rule == "untied":
        w2 = state.w2 - delta * (y.T @ gap)
        w1 = state.w1 - delta * (a.T @ gap @ state.w2.T)
        return OptimState(w1, w2, state.m + 1, delta, state.g_ref)
    if rule == "rbm":
        x_hat = a + gap
        g_gap = x_hat.T @ x_hat - a.T @ a
        w1 = state.w1 - delta * (g_gap @ state.w1)
        return OptimState(w1, w1.T, state.m + 1, delta, state.g_ref)
    if rule == "incremental":
        x_hat = a + gap
        g_now = x_hat.T @ x_hat
        g_ref = state.g_ref if state.g_ref is not None else a.T @ a
        w1 = state.w1 - delta * ((g_now - g_ref) @ state.w1)
        return OptimState(w1, w1.T, state.m + 1, delta, g_now)
    raise ValueError("rule must be 'untied', 'rbm' or 'incremental'")


def identity_residuals(x0, state):
    """Norms of the two stationarity conditions.

    At any local optimum the latent activity is orthogonal to the
    reconstruction gap, and the Gram of the reconstruction matches the
    input Gram along the trained directions. Both norms vanish at the
    exact spectral solution.
    """
    a = matrix_values(x0)
    gap, y = recon_gap(a, state.w1, state.w2)
    x_hat = a + gap
    first = float(np.linalg.norm(y.T @ gap))
    second = float(np.linalg.norm((x_hat.T @ x_hat - a.T @ a) @ state.w1))
    return first, second


def tied_two_term_update(x0, w1, delta):
    """Tied first-layer step written as the two-term product rule.

    Equals the Gram-difference step minus the higher order correction
    delta * gap.T @ gap @ w1; the two agree to first order in the gap.
    """
    a = matrix_values(x0)
    y = a @ w1
    gap = y @ w1.T - a
    y_gap = gap @ w1
    return -delta * (gap.T @ y + a.T @ y_gap)


def train(x0, n, rule="untied", delta=None, max_iters=50000, seed=0,
          record_every=0):
    """Run one update rule from small random weights until the error
    stalls or reaches the best achievable value.

    Returns (state, report). The report carries the final squared error,
    the unreachable floor left by the rank constraint, their ratio, the
    iteration count and the stationarity residuals. With record_every
    positive it also carries a trace of (iteration, error) samples.
    Raises Diverged when the error grows past ten times its initial
    value.
    """
    a = matrix_values(x0)
    if rule not in ("untied", "rbm", "incremental"):
        raise ValueError("rule must be 'untied', 'rbm' or 'incremental'")
    n_obs, n_var = a.shape
    sing = np.linalg.svd(a, compute_uv=False)
    lam1_sq = float(sing[0] ** 2) if sing.size else 1.0
    tail = float(np.sum(sing[n:] ** 2))
    if delta is None:
        delta = 0.2 / lam1_sq if lam1_sq > 0 else 0.1
    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal((n_var, n)) / np.sqrt(n_var)
    if rule == "untied":
        w2 = rng.standard_normal((n, n_var)) / np.sqrt(n_var)
    else:
        w2 = w1.T
    state = OptimState(w1, w2, 0, float(delta), None)
    err0 = error(a, state.w1, state.w2)
    window = []
    trace = []
    if record_every > 0:
        trace.append((0, err0))
    err = err0
    converged = False
    for _ in range(max_iters):
        state = step(state, rule, a)
        err = error(a, state.w1, state.w2)
        if not np.isfinite(err) or err > 10.0 * max(err0, 1.0):
            raise Diverged(
                "error %g after %d steps (initial %g)" % (err, state.m, err0)
            )
        if record_every > 0 and state.m % record_every == 0:
            trace.append((state.m, err))
        if err - tail <= _STALL_TOL * max(tail, 1.0):
            converged = True
            break
        window.append(err)
        if len(window) > _WINDOW:
            past = window.pop(0)
            if abs(past - err) <= _REL_CHANGE * max(err, 1.0):
                converged = True
                break
    if record_every > 0 and (not trace or trace[-1][0] != state.m):
        trace.append((state.m, err))
    first, second = identity_residuals(a, state)
    report = {
        "converged": converged,
        "iterations": state.m,
        "final_error": err,
        "tail_energy": tail,
        "ratio": err / tail if tail > 0 else float("inf"),
        "stationarity": (first, second),
        "trace": trace,
    }
    return state, report


def orthogonalize(x0, n, max_iters=50000, delta=None, seed=0,
                  record_every=0):
    """Train an orthonormal observation-side factor by gradient descent.

    Descends the tied reconstruction error of v @ v.T applied to the
    left of the data. Any minimizer spans the top spectral directions
    and is automatically orthonormal, so the deviation of v.T @ v from
    the identity measures convergence without any reference
    decomposition.

    Returns (weights, report) where weights holds v1 = v.T, v2 = v and
    the matching right-side decoder v.T @ x0. Raises NotConverged with
    the final deviation when the iteration budget runs out.
    """
    a = matrix_values(x0)
    n_obs = a.shape[0]
    lam1 = float(np.linalg.norm(a, 2)) if a.size else 0.0
    lam1_sq = lam1 * lam1
    if delta is None:
        delta = 0.2 / lam1_sq if lam1_sq > 0 else 0.1
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n_obs, n)) / np.sqrt(n_obs)
    dev = float("inf")
    gnorm = float("inf")
    iters = 0
    trace = []
    for iters in range(1, max_iters + 1):
        e = a - v @ (v.T @ a)
        pull = e @ (a.T @ v) + a @ (e.T @ v)
        v = v + 2.0 * delta * pull
        if not np.all(np.isfinite(v)):
            raise Diverged("weights left the finite range after %d steps" % iters)
        if iters % 25 == 0 or iters == max_iters:
            dev = float(np.linalg.norm(v.T @ v - np.eye(n)))
            gnorm = float(np.linalg.norm(pull))
            if record_every > 0:
                trace.append((iters, dev, gnorm))
            if dev < 1e-6 and gnorm < 1e-8 * max(lam1_sq, 1.0):
                break
    else:
        raise NotConverged(
            "deviation %g after %d iterations" % (dev, max_iters),
            deviation=dev,
        )
    weights = WeightSet(
        w1=None,
        w2=v.T @ a,
        v1=v.T,
        v2=v,
        scenario="ortho",
        n_latent=n,
    )
    report = {
        "iterations": iters,
        "deviation": dev,
        "grad_norm": gnorm,
        "step_size": float(delta),
        "trace": trace,
    }
    return weights, report
