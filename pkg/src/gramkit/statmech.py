"""Occupation statistics, activation functions, observation energies, and
non-Gaussianity measures for the training matrix.

Occupation formulas follow the three classical ensembles. Observation
energies measure how strongly one observation overlaps the rest of the
training set, with a ferromagnetic sign favoring alignment and an
anti-ferromagnetic sign favoring misalignment; the conjugate variants
replace the raw overlap metric with the inverse-Gram metric.
"""

from dataclasses import dataclass

import numpy as np

from . import gram as gram_mod
from . import spectral
from .errors import BoseDivergence, DimensionMismatch, InfeasibleConstraints
from .spectral import DEFAULT_CUTOFF, matrix_values

ENERGY_MODELS = ("ferro", "ferro-conj", "antiferro", "antiferro-conj")
ENSEMBLE_KINDS = ("boltzmann", "fermi", "bose")


@dataclass(frozen=True)
class StatEnsemble:
    """Occupation-statistics selector with parameters alpha and beta.

    alpha is the chemical potential over temperature, beta the inverse
    temperature.
    """

    kind: str
    alpha: float
    beta: float

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError("kind must be one of %s" % (ENSEMBLE_KINDS,))


def fourth_moment(v):
    """Plain fourth moment of a sample vector: mean of the fourth powers."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0
    return float(np.mean(v**4))


def kurtosis(v, demean=False):
    """Fourth cumulant of a sample: E(z^4) - 3 (E(z^2))^2.

    The sample is used as-is by default; set demean to subtract the
    sample mean first.
    """
    z = np.asarray(v, dtype=float)
    if z.size == 0:
        return 0.0
    if demean:
        z = z - z.mean()
    m2 = np.mean(z**2)
    return float(np.mean(z**4) - 3.0 * m2 * m2)


def occupation(ensemble, energy):
    """Occupation density of a state at the given energy.

    boltzmann: exp(alpha - beta * energy)
    fermi:     1 / (exp(-alpha + beta * energy) + 1)
    bose:      1 / (exp(-alpha + beta * energy) - 1), which requires the
               exponential to exceed 1 everywhere (BoseDivergence otherwise).
    """
    energy = np.asarray(energy, dtype=float)
    z = ensemble.alpha - ensemble.beta * energy
    if ensemble.kind == "boltzmann":
        out = np.exp(z)
    elif ensemble.kind == "fermi":
        out = 1.0 / (np.exp(-z) + 1.0)
    else:
        denom = np.exp(-z) - 1.0
        if np.any(denom <= 0.0):
            raise BoseDivergence(
                "bose occupation needs exp(-alpha + beta*energy) > 1"
            )
        out = 1.0 / denom
    return float(out) if out.ndim == 0 else out


def fermi_logistic(alpha, beta, energy):
    """Probability of the occupied fermion state: logistic(alpha - beta*energy)."""
    z = np.asarray(alpha - beta * np.asarray(energy, dtype=float), dtype=float)
    out = 1.0 / (1.0 + np.exp(-z))
    return float(out) if out.ndim == 0 else out


def spin_mean(alpha, beta, energy):
    """Mean spin of the two-state fermion: tanh((alpha - beta*energy) / 2)."""
    z = np.asarray(alpha - beta * np.asarray(energy, dtype=float), dtype=float)
    out = np.tanh(z / 2.0)
    return float(out) if out.ndim == 0 else out


def tanh_update(h, temperature):
    """Deterministic recurrent-network activation: tanh(h / (2 T))."""
    out = np.tanh(np.asarray(h, dtype=float) / (2.0 * temperature))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EntropySolution:
    """Result of the constrained entropy maximization."""

    densities: np.ndarray
    alpha: float
    beta: float
    fit_residual: float
    iterations: int


def boltzmann_from_entropy(energies, degeneracies, total_count, total_energy,
                           max_iters=20000, tol=1e-13):
    """Maximize the Stirling-approximated entropy under the two linear
    constraints sum(L k) = K and sum(e L k) = E.

    The entropy is S(k) = sum_i L_i k_i (1 - ln k_i); its constrained
    maximum is the exponential family k_i = exp(alpha - beta e_i). The
    solver is projected gradient ascent with a curvature-scaled step;
    alpha and beta are recovered afterwards by a least-squares fit of
    ln k_i against (1, -e_i).
    """
    eps = np.asarray(energies, dtype=float)
    lvals = np.asarray(degeneracies, dtype=float)
    if eps.shape != lvals.shape or eps.ndim != 1:
        raise DimensionMismatch("energies and degeneracies must be equal-length vectors")
    if np.any(lvals <= 0):
        raise InfeasibleConstraints("degeneracies must be positive")
    total_count = float(total_count)
    total_energy = float(total_energy)
    if total_count <= 0:
        raise InfeasibleConstraints("total count must be positive")
    mean_target = total_energy / total_count
    lo, hi = eps.min(), eps.max()
    if lo == hi:
        if abs(mean_target - lo) > 1e-12 * max(1.0, abs(lo)):
            raise InfeasibleConstraints(
                "single energy level %g cannot average to %g" % (lo, mean_target)
            )
    elif not lo < mean_target < hi:
        raise InfeasibleConstraints(
            "mean energy %g outside the open range (%g, %g)" % (mean_target, lo, hi)
        )

    constraints = np.vstack([lvals, eps * lvals])
    targets = np.array([total_count, total_energy])

    def project(k):
        # minimum-norm correction back onto both constraints (least
        # squares handles linearly dependent constraint rows)
        gap = targets - constraints @ k
        correction, *_ = np.linalg.lstsq(constraints, gap, rcond=None)
        return k + correction

    k = np.full(eps.shape, total_count / lvals.sum())
    k = project(k)
    k = np.clip(k, 1e-12, None)
    iterations = 0
    for iterations in range(1, max_iters + 1):
        grad = -lvals * np.log(k)
        # tangent component of the gradient decides convergence
        coef, *_ = np.linalg.lstsq(constraints.T, grad, rcond=None)
        tangent = grad - constraints.T @ coef
        if np.linalg.norm(tangent) <= tol * (1.0 + np.linalg.norm(grad)):
            break
        # curvature of S is -L_i / k_i, so scale by k / L for a Newton-like step
        k = k + 0.5 * (k / lvals) * tangent
        k = np.clip(k, 1e-12, None)
        k = project(k)
        k = np.clip(k, 1e-12, None)

    design = np.column_stack([np.ones_like(eps), -eps])
    coeffs, *_ = np.linalg.lstsq(design, np.log(k), rcond=None)
    fitted = design @ coeffs
    residual = float(np.linalg.norm(np.log(k) - fitted))
    return EntropySolution(
        densities=k,
        alpha=float(coeffs[0]),
        beta=float(coeffs[1]),
        fit_residual=residual,
        iterations=iterations,
    )


def energies(x, model="ferro", gram_pair=None, cutoff=DEFAULT_CUTOFF):
    """Per-observation energy under the chosen model.

    "ferro": -(total squared overlap with all observations minus the
    squared self-overlap) / 2, which is non-positive and smallest for
    observations aligned with the bulk of the data.
    "ferro-conj": same combination with the overlap replaced by the
    inverse-Gram metric self-product.
    "antiferro" and "antiferro-conj" flip the sign.
    """
    if model not in ENERGY_MODELS:
        raise ValueError("model must be one of %s" % (ENERGY_MODELS,))
    a = matrix_values(x)
    if model in ("ferro", "antiferro"):
        gp = gram_pair if gram_pair is not None else gram_mod.gram_matrices(a)
        gprime = gp.g_prime
        total_sq = (gprime**2).sum(axis=1)
        self_sq = np.diag(gprime) ** 2
        eps = -0.5 * (total_sq - self_sq)
        if model == "antiferro":
            eps = -eps
    else:
        f = spectral.svd(a, cutoff)
        metric_self = (f.v**2).sum(axis=1)
        self_sq = ((a**2).sum(axis=1)) ** 2
        eps = -0.5 * (metric_self - self_sq)
        if model == "antiferro-conj":
            eps = -eps
    return eps


def boltzmann_probabilities(energy, temperature=1.0):
    """Normalized Boltzmann weights of the observation energies.

    Returns (probabilities, partition, log_partition). Energies are
    shifted by their maximum weight before exponentiation, so the
    probabilities are immune to overflow; the raw partition value can
    still overflow to inf for extreme energies, in which case
    log_partition remains finite and exact.
    """
    eps = np.asarray(energy, dtype=float)
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    weights = -eps / temperature
    shift = weights.max()
    scaled = np.exp(weights - shift)
    total = scaled.sum()
    probabilities = scaled / total
    log_partition = float(shift + np.log(total))
    with np.errstate(over="ignore"):
        partition = float(np.exp(log_partition))
    return probabilities, partition, log_partition


def rank_and_reorder(gp, probabilities):
    """Stable ascending sort of observations by probability.

    Returns (order, reordered_gram) where order[i] is the index of the
    i-th least probable observation and reordered_gram is g_prime with
    rows and columns permuted into that order.
    """
    probabilities = np.asarray(probabilities, dtype=float)
    order = np.argsort(probabilities, kind="stable")
    reordered = gp.g_prime[np.ix_(order, order)]
    return order, reordered


def langevin_step(vector, g, noise, variant="gram", cutoff=DEFAULT_CUTOFF):
    """One discrete Langevin update driven by the Gram metric.

    variant "gram": the input is a conjugate observation and the drift
    is g @ vector, which equals the plain observation it conjugates.
    variant "inverse": the input is a plain observation and the drift is
    pinv(g) @ vector, its conjugate.
    Returns vector + drift + noise.
    """
    vector = np.asarray(vector, dtype=float)
    noise = np.asarray(noise, dtype=float)
    g = np.asarray(g, dtype=float)
    if vector.shape != (g.shape[0],) or noise.shape != vector.shape:
        raise DimensionMismatch("vector, noise, and metric sizes disagree")
    if variant == "gram":
        drift = g @ vector
    elif variant == "inverse":
        inv, _, _ = gram_mod.pseudo_inverse(g, cutoff)
        drift = inv @ vector
    else:
        raise ValueError("variant must be 'gram' or 'inverse'")
    return vector + drift + noise


def degeneracy_estimate(energy_values, center, half_width, update_mode="parallel",
                        n_observables=None):
    """Characteristic scale of an energy level: the number of observations
    whose energy falls in [center - half_width, center + half_width],
    multiplied by the per-sweep update count (1 for parallel dynamics,
    the number of observables for sequential dynamics)."""
    eps = np.asarray(energy_values, dtype=float)
    count = int(np.sum((eps >= center - half_width) & (eps <= center + half_width)))
    if update_mode == "parallel":
        return count
    if update_mode == "sequential":
        if n_observables is None:
            raise ValueError("sequential dynamics needs n_observables")
        return count * int(n_observables)
    raise ValueError("update_mode must be 'parallel' or 'sequential'")
