"""Exact low-rank reduction and the family of equivalent weight scenarios.

Every exact rank-n autoencoder solution factors through the truncated
SVD; the remaining freedom is one invertible n x n mixing matrix. The
five named scenarios pick specific mixings:

  a       identity                        encoder w, decoder w.T
  b       inverse singular values         orthonormal latent observables
  c       a rotation, tied weights        decoder equals encoder transpose
  d       inverse singular values then a rotation (orthonormal latents)
  dprime  the same rotation applied before the inverse scaling

Each scenario is built in both spaces at once: w1/w2 act on the right of
the data (observable mixing), v1/v2 on the left (observation mixing). The
reconstruction is identical across scenarios because the mixing cancels.
"""

from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import DimensionMismatch, RankTooLarge, ZeroSingularValue
from .spectral import matrix_values

SCENARIOS = ("a", "b", "c", "d", "dprime")

# relative floor under which a singular value cannot be inverted safely
INVERSION_FLOOR = 1e-12


@dataclass(frozen=True)
class WeightSet:
    """Encoder/decoder pairs of one scenario in both spaces.

    w1 : N x n encoder applied on the right (latent = x @ w1).
    w2 : n x N decoder applied on the right.
    v1 : n x P encoder applied on the left (latent = v1 @ x).
    v2 : P x n decoder applied on the left.
    """

    w1: np.ndarray
    w2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    scenario: str
    n_latent: int


def random_rotation(n, seed):
    """A Haar-ish random n x n rotation: QR of a seeded Gaussian matrix
    with the diagonal of the triangular factor forced positive."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def truncate(f, n):
    """Best rank-n reconstruction and the exact error it leaves behind.

    Returns (x_hat, tail_energy) where x_hat keeps the top n spectral
    directions and tail_energy is the sum of the dropped squared
    singular values, which equals the squared Frobenius reconstruction
    error.
    """
    if not 1 <= n <= f.m_rank:
        raise RankTooLarge("n must lie in [1, %d], got %d" % (f.m_rank, n))
    x_hat = (f.v[:, :n] * f.lambdas[:n]) @ f.w[:, :n].T
    tail = float(np.sum(f.lambdas[n:] ** 2))
    return x_hat, tail


def _mixing(f, n, scenario, rotation):
    """The mixing matrix s and its exact inverse for one scenario."""
    lam = f.lambdas[:n]
    if scenario in ("b", "d", "dprime"):
        if lam[-1] <= INVERSION_FLOOR * lam[0]:
            raise ZeroSingularValue(
                "singular value %g too small to invert" % lam[-1]
            )
    if rotation is None:
        rotation = np.eye(n)
    rotation = np.asarray(rotation, dtype=float)
    if rotation.shape != (n, n):
        raise DimensionMismatch("rotation must be %d x %d" % (n, n))
    if scenario == "a":
        s = np.eye(n)
        s_inv = np.eye(n)
    elif scenario == "b":
        s = np.diag(1.0 / lam)
        s_inv = np.diag(lam)
    elif scenario == "c":
        s = rotation.T
        s_inv = rotation
    elif scenario == "d":
        s = np.diag(1.0 / lam) @ rotation
        s_inv = rotation.T @ np.diag(lam)
    elif scenario == "dprime":
        s = rotation @ np.diag(1.0 / lam)
        s_inv = np.diag(lam) @ rotation.T
    else:
        raise ValueError("scenario must be one of %s" % (SCENARIOS,))
    return s, s_inv


def scenario_weights(f, n, scenario="a", rotation=None):
    """Exact rank-n weight construction for one mixing scenario.

    The encoder/decoder pairs are w1 = W_hat @ s, w2 = s^-1 @ W_hat.T on
    the observable side and v1 = s @ V_hat.T, v2 = V_hat @ s^-1 on the
    observation side, with s the scenario's mixing matrix. Compositions
    w2 @ w1 and v1 @ v2 are the n x n identity by construction.
    """
    if not 1 <= n <= f.m_rank:
        raise RankTooLarge("n must lie in [1, %d], got %d" % (f.m_rank, n))
    s, s_inv = _mixing(f, n, scenario, rotation)
    w_hat = f.w[:, :n]
    v_hat = f.v[:, :n]
    return WeightSet(
        w1=w_hat @ s,
        w2=s_inv @ w_hat.T,
        v1=s @ v_hat.T,
        v2=v_hat @ s_inv,
        scenario=scenario,
        n_latent=n,
    )


def latent(x, ws):
    """Latent variables of both spaces: (x @ w1, v1 @ x)."""
    a = matrix_values(x)
    if a.shape[1] != ws.w1.shape[0]:
        raise DimensionMismatch(
            "matrix has %d observables, encoder expects %d"
            % (a.shape[1], ws.w1.shape[0])
        )
    if a.shape[0] != ws.v1.shape[1]:
        raise DimensionMismatch(
            "matrix has %d observations, encoder expects %d"
            % (a.shape[0], ws.v1.shape[1])
        )
    return a @ ws.w1, ws.v1 @ a


def reduced_grams(f, n):
    """Gram matrices of the truncated reconstruction, in closed form."""
    if not 1 <= n <= f.m_rank:
        raise RankTooLarge("n must lie in [1, %d], got %d" % (f.m_rank, n))
    lam_sq = f.lambdas[:n] ** 2
    g_hat = (f.w[:, :n] * lam_sq) @ f.w[:, :n].T
    g_prime_hat = (f.v[:, :n] * lam_sq) @ f.v[:, :n].T
    return g_hat, g_prime_hat


def recon_error(x, x_hat):
    """Squared Frobenius norm of the reconstruction gap."""
    a = matrix_values(x)
    b = np.asarray(x_hat, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch("shapes differ: %s vs %s" % (a.shape, b.shape))
    diff = a - b
    return float(np.sum(diff * diff))


def recon_error_expanded(x, ws, side="observations"):
    """Reconstruction error computed from the fully expanded sums.

    side "observations": loop over rows, reconstructing each row through
    the explicit double index sum over the two observable-side weight
    matrices.
    side "observables": loop over columns, reconstructing each column
    through the observation-side weights.
    The value must agree with recon_error of the matrix form; keeping
    the summation order independent makes this an oracle for it.
    """
    a = matrix_values(x)
    total = 0.0
    if side == "observations":
        for mu in range(a.shape[0]):
            row_hat = np.einsum("k,kj,ji->i", a[mu], ws.w1, ws.w2)
            diff = a[mu] - row_hat
            total += float(diff @ diff)
    elif side == "observables":
        for i in range(a.shape[1]):
            col_hat = np.einsum("mn,nk,k->m", ws.v2, ws.v1, a[:, i])
            diff = a[:, i] - col_hat
            total += float(diff @ diff)
    else:
        raise ValueError("side must be 'observations' or 'observables'")
    return total


def duality_check(x, n, rotation=None, cutoff=spectral.DEFAULT_CUTOFF,
                  factors=None):
    """Residuals of the cross-space latent/decoder identities.

    The latent variables of the rotated-orthonormal scenario in one
    space coincide with the decoder of the tied-rotation scenario in the
    other space, and the plain/whitened scenarios swap latents with
    decoders in the same way. All six residual norms vanish analytically;
    the report returns the numerical values.
    """
    a = matrix_values(x)
    f = factors if factors is not None else spectral.svd(a, cutoff)
    if not 1 <= n <= f.m_rank:
        raise RankTooLarge("n must lie in [1, %d], got %d" % (f.m_rank, n))
    ws = {
        name: scenario_weights(f, n, name, rotation)
        for name in ("a", "b", "c", "d")
    }
    y = {name: a @ ws[name].w1 for name in ws}
    y_prime = {name: ws[name].v1 @ a for name in ws}
    return {
        "hidden_observables_d_vs_decoder_c":
            float(np.linalg.norm(y["d"] - ws["c"].v2)),
        "decoder_d_vs_hidden_observations_c":
            float(np.linalg.norm(ws["d"].w2 - y_prime["c"])),
        "hidden_observables_a_vs_decoder_b":
            float(np.linalg.norm(y["a"] - ws["b"].v2)),
        "hidden_observables_b_vs_decoder_a":
            float(np.linalg.norm(y["b"] - ws["a"].v2)),
        "hidden_observations_a_vs_decoder_b":
            float(np.linalg.norm(y_prime["a"] - ws["b"].w2)),
        "hidden_observations_b_vs_decoder_a":
            float(np.linalg.norm(y_prime["b"] - ws["a"].w2)),
    }
