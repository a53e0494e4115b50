"""Harmonic dynamics generated by a Gram matrix.

A state is a pair of conjugate row vectors (p, q). The quadratic energy
one half p p.T plus one half q g q.T decouples in the eigenbasis of g
into independent oscillators whose angular frequencies are the singular
values of the underlying data matrix. Propagation is exact mode-by-mode
rotation, so composing many steps conserves the energy to roundoff.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RankTooLarge

# relative eigenvalue floor below which a mode is treated as free
FREE_MODE_FLOOR = 1e-12


@dataclass(frozen=True)
class OscillatorState:
    """Momentum row p, coordinate row q and the accumulated time."""

    p: np.ndarray
    q: np.ndarray
    t: float = 0.0


def _as_state_vectors(state, dim):
    p = np.asarray(state.p, dtype=float).reshape(-1)
    q = np.asarray(state.q, dtype=float).reshape(-1)
    if p.shape[0] != dim or q.shape[0] != dim:
        raise DimensionMismatch(
            "state vectors must have length %d, got %d and %d"
            % (dim, p.shape[0], q.shape[0])
        )
    return p, q


def hamiltonian(state, g):
    """Total energy one half |p|^2 plus one half q g q.T."""
    g = np.asarray(g, dtype=float)
    p, q = _as_state_vectors(state, g.shape[0])
    return float(0.5 * (p @ p) + 0.5 * (q @ g @ q))


def _rotate(p_modes, q_modes, omega, t):
    """Exact evolution of decoupled modes; zero frequency drifts freely."""
    p_new = np.empty_like(p_modes)
    q_new = np.empty_like(q_modes)
    top = float(np.max(omega)) if omega.size else 0.0
    free = omega <= FREE_MODE_FLOOR * top
    osc = ~free
    w = omega[osc]
    c = np.cos(w * t)
    s = np.sin(w * t)
    p_new[osc] = p_modes[osc] * c - q_modes[osc] * w * s
    q_new[osc] = p_modes[osc] * s / w + q_modes[osc] * c
    p_new[free] = p_modes[free]
    q_new[free] = q_modes[free] + p_modes[free] * t
    return p_new, q_new


def propagate(state, g, t):
    """Advance the state by time t under the full quadratic energy."""
    g = np.asarray(g, dtype=float)
    p, q = _as_state_vectors(state, g.shape[0])
    evals, evecs = np.linalg.eigh(g)
    omega = np.sqrt(np.clip(evals, 0.0, None))
    p_modes, q_modes = _rotate(p @ evecs, q @ evecs, omega, t)
    return OscillatorState(
        p=p_modes @ evecs.T,
        q=q_modes @ evecs.T,
        t=state.t + t,
    )


def normal_modes(state, f):
    """Mode coordinates of the state: (p @ w, q @ w)."""
    p, q = _as_state_vectors(state, f.w.shape[0])
    return p @ f.w, q @ f.w


def truncated_propagate(state, f, n, t):
    """Advance keeping only the top n modes coupled.

    The top n spectral directions rotate with their exact frequencies;
    everything orthogonal to them moves as a free particle. Returns
    (new_state, noise_energy, noise_bound) where noise_energy is the
    kinetic energy stored outside the kept modes and noise_bound is half
    the discarded squared singular values, the admissible ceiling for
    states prepared with mode momenta no larger than their frequencies.
    """
    if not 1 <= n <= f.m_rank:
        raise RankTooLarge("n must lie in [1, %d], got %d" % (f.m_rank, n))
    p, q = _as_state_vectors(state, f.w.shape[0])
    w_n = f.w[:, :n]
    omega = f.lambdas[:n]
    p_modes, q_modes = _rotate(p @ w_n, q @ w_n, omega, t)
    p_comp = p - (p @ w_n) @ w_n.T
    q_comp = q - (q @ w_n) @ w_n.T
    new_state = OscillatorState(
        p=p_modes @ w_n.T + p_comp,
        q=q_modes @ w_n.T + q_comp + p_comp * t,
        t=state.t + t,
    )
    noise_energy = float(0.5 * (p_comp @ p_comp))
    noise_bound = float(0.5 * np.sum(f.lambdas[n:] ** 2))
    return new_state, noise_energy, noise_bound


def r_squared(f, n):
    """Energy fraction captured by the top n modes."""
    if not 0 <= n <= f.lambdas.size:
        raise RankTooLarge(
            "n must lie in [0, %d], got %d" % (f.lambdas.size, n)
        )
    total = float(np.sum(f.lambdas**2))
    if total == 0.0:
        return 0.0
    return float(np.sum(f.lambdas[:n] ** 2)) / total
