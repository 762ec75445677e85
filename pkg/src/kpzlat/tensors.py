"""Coupling tensors of a normalized potential and the moving-frame conditions.

The cubic tensor ``gamma`` is half the third-derivative tensor of the
potential at the origin and the quartic tensor ``delta`` is one sixth of the
fourth.  Both are fully symmetric.  The order-``n^{3/2}`` and order-``n``
frame corrections are governed by two ``d x d`` matrices built from these
tensors and the tilt ``lam``; the lattice frame is consistent with the
diffusive scaling only when both matrices are proportional to the identity.
"""

from dataclasses import dataclass

import numpy as np

from .potentials import eval_derivatives


def gamma_delta(potential, numeric=False):
    """Extract ``(gamma, delta)`` from the potential's derivatives at zero."""
    zero = np.zeros(potential.d)
    t3 = eval_derivatives(potential, zero, 3, numeric=numeric)
    t4 = eval_derivatives(potential, zero, 4, numeric=numeric)
    return t3 / 2.0, t4 / 6.0


def check_algebraic_constraint(gamma):
    """Largest interchange residual of the cubic tensor.

    Returns ``max |sum_k g^k_ab g^k_cd - sum_k g^k_ac g^k_bd|`` over all index
    choices; exact zero (up to roundoff) is required for the limit's
    trilinear structure.
    """
    gamma = np.asarray(gamma, dtype=float)
    left = np.einsum("kab,kcd->abcd", gamma, gamma)
    right = np.einsum("kac,kbd->abcd", gamma, gamma)
    return float(np.max(np.abs(left - right)))


def lambda_matrix(gamma, lam):
    """Tilt response matrix: ``2 sum_k g^a_bk lam^k``."""
    gamma = np.asarray(gamma, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return 2.0 * np.einsum("abk,k->ab", gamma, lam)


def xi_matrix(gamma, delta, lam):
    """Order-one frame matrix from the quartic and iterated-cubic couplings.

    Entry ``(a, b)``::

        3 q^a_b k2 k3 lam^k2 lam^k3 + (14/5) sum_k q^a_bkk + (1/5) q^a_bbb
        - 2 g^a_bk1 g^k1_k2k3 lam^k2 lam^k3 - (18/5) sum_k g^a_bk1 g^k1_kk
        - (2/5) g^a_bk1 g^k1_bb

    with summation over repeated ``k`` indices.
    """
    gamma = np.asarray(gamma, dtype=float)
    delta = np.asarray(delta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    # 'abbb->ab' style specs extract the thrice-repeated diagonal in one shot
    out = 3.0 * np.einsum("abij,i,j->ab", delta, lam, lam)
    out += (14.0 / 5.0) * np.einsum("abkk->ab", delta)
    out += (1.0 / 5.0) * np.einsum("abbb->ab", delta)
    gg = np.einsum("abk,kij->abij", gamma, gamma)
    out -= 2.0 * np.einsum("abij,i,j->ab", gg, lam, lam)
    out -= (18.0 / 5.0) * np.einsum("abkk->ab", gg)
    out -= (2.0 / 5.0) * np.einsum("abbb->ab", gg)
    return out


@dataclass
class FrameReport:
    """Verdict on whether both frame matrices are scalar."""

    eta: float
    eta_prime: float
    lambda_deviation: float
    xi_deviation: float
    tol: float
    lambda_ok: bool
    xi_ok: bool

    @property
    def ok(self):
        return self.lambda_ok and self.xi_ok


def check_frame_conditions(gamma, delta, lam, tol=1e-8):
    """Project the frame matrices on the identity and report the residuals.

    ``eta`` and ``eta_prime`` are the trace-averaged diagonal values; the
    deviations are sup-norm distances from ``eta I`` and ``eta_prime I``.
    """
    lmat = lambda_matrix(gamma, lam)
    xmat = xi_matrix(gamma, delta, lam)
    d = lmat.shape[0]
    eta = float(np.trace(lmat)) / d
    eta_prime = float(np.trace(xmat)) / d
    ldev = float(np.max(np.abs(lmat - eta * np.eye(d))))
    xdev = float(np.max(np.abs(xmat - eta_prime * np.eye(d))))
    return FrameReport(
        eta=eta,
        eta_prime=eta_prime,
        lambda_deviation=ldev,
        xi_deviation=xdev,
        tol=tol,
        lambda_ok=ldev <= tol,
        xi_ok=xdev <= tol,
    )


def moving_frame(n, eta, eta_prime):
    """Frame speed ``f_n = n^2 + eta n^{3/2} + eta' n``."""
    n = float(n)
    return n * n + eta * n ** 1.5 + eta_prime * n


def diagonal_family_audit(c3, c4, lam):
    """Frame scalars for the diagonal potential family with equal tilt.

    The cubic/quartic tensors are ``c3``/``c4`` on the fully diagonal entries
    and zero elsewhere.  The widely quoted closed form for the order-one
    scalar, ``3 lam^2 (c4 - c3^2) + (3 c4 - c3^2)``, disagrees with the direct
    evaluation of the defining matrix whenever ``c3 != 0`` and ``lam^2 != 3``;
    both values and their difference are reported, and the defining matrix is
    authoritative.
    """
    c3 = float(c3)
    c4 = float(c4)
    lam = float(lam)
    eta = 2.0 * c3 * lam
    eta_prime = lam * lam * (3.0 * c4 - 2.0 * c3 * c3) + (3.0 * c4 - 4.0 * c3 * c3)
    quoted = 3.0 * lam * lam * (c4 - c3 * c3) + (3.0 * c4 - c3 * c3)
    return {
        "eta": eta,
        "eta_prime": eta_prime,
        "eta_prime_quoted": quoted,
        "discrepancy": quoted - eta_prime,
        "discrepancy_detected": abs(quoted - eta_prime) > 1e-12,
    }
