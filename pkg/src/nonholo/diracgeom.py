"""Numeric membership oracles for linear Dirac structures and the reduced
structures used to certify integrator output.

All checks are residual-based: every membership test returns magnitudes so
trajectory verification can plot drift, never a bare boolean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .constraints import ConstraintFamily
from .liealg import LieAlgebra, SemidirectAlgebra

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class DiracTestPoint:
    """Tuple ((xi, rho), (beta, eta)) tested against the reduced structure."""

    xi: np.ndarray
    rho: np.ndarray
    beta: np.ndarray
    eta: np.ndarray


@dataclass(frozen=True)
class SdpDiracTestPoint:
    """Stage-two tuple ((xi, w, rho, b), (beta, c, eta, v)) on g (x) V."""

    xi: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    b: np.ndarray
    beta: np.ndarray
    c: np.ndarray
    eta: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class MembershipReport:
    residuals: tuple
    member: bool

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0


def symmetric_pairing(v1, a1, v2, a2) -> float:
    """<<(v1,a1),(v2,a2)>> = a1.v2 + a2.v1 on V (+) V*."""
    return float(np.dot(a1, v2) + np.dot(a2, v1))


def is_dirac(basis: linalg.SubspaceBasis, tol: float = 1e-10):
    """Check D = D^perp: dimension n and pairwise isotropy of the basis.

    Returns (ok, max pairing residual over normalized basis pairs).
    """
    if basis.ambient_dim % 2 != 0:
        raise ValueError("ambient dimension must be even")
    n = basis.ambient_dim // 2
    Q = linalg.orthonormalize(basis.columns)
    V, A = Q[:n], Q[n:]
    # all pairwise symmetric pairings at once: A^T V + V^T A
    G = A.T @ V + V.T @ A
    residual = float(np.max(np.abs(G))) if G.size else 0.0
    return (basis.dim == n and Q.shape[1] == n and residual <= tol), residual


def induced_dirac_basis(omega: np.ndarray,
                        delta: linalg.SubspaceBasis) -> linalg.SubspaceBasis:
    """Basis of the Dirac structure built from a symplectic form and a
    distribution:  D = {(v, omega v + n) : v in Delta, n in Delta^o}."""
    omega = np.asarray(omega, dtype=float)
    n = omega.shape[0]
    V = linalg.orthonormalize(delta.columns)
    N = linalg.annihilator_basis(linalg.SubspaceBasis(n, V)).columns
    top = np.hstack([V, np.zeros((n, N.shape[1]))])
    bot = np.hstack([omega @ V, N])
    return linalg.SubspaceBasis(2 * n, np.vstack([top, bot]))


def induced_dirac_membership(omega: np.ndarray, delta: linalg.SubspaceBasis,
                             v, alpha, tol: float = DEFAULT_TOL):
    """(v, alpha) in D iff v in Delta and (alpha - omega v).w = 0 on Delta.

    Returns (member, residual); residual is the worst violation over an
    orthonormal basis of Delta plus the distance of v to Delta.
    """
    omega = np.asarray(omega, dtype=float)
    if np.max(np.abs(omega + omega.T)) > 1e-12:
        raise ValueError("omega must be antisymmetric")
    v = np.asarray(v, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    Q = linalg.orthonormalize(delta.columns)
    r_v = float(np.linalg.norm(v - Q @ (Q.T @ v)))
    r_a = float(np.max(np.abs(Q.T @ (alpha - omega @ v)))) if Q.size else 0.0
    residual = max(r_v, r_a)
    scale = 1.0 + max(np.linalg.norm(v), np.linalg.norm(alpha))
    return residual <= tol * scale, residual


def reduced_membership(algebra: LieAlgebra, mu, fam: ConstraintFamily, a,
                       pt: DiracTestPoint,
                       tol: float = DEFAULT_TOL) -> MembershipReport:
    """Reduced Dirac membership at (a, mu):

        eta = xi in g^Delta(a),   beta + rho - ad*_xi mu in (g^Delta(a))^o.

    Residuals: |eta - xi|, dist(xi, g^Delta(a)), dist of the force balance
    to the annihilator.
    """
    mu = np.asarray(mu, dtype=float)
    r1 = float(np.linalg.norm(np.asarray(pt.eta, float) - np.asarray(pt.xi, float)))
    B = fam.basis(a)
    r2 = linalg.distance_to(B, pt.xi)
    force = (np.asarray(pt.beta, float) + np.asarray(pt.rho, float)
             - algebra.ad_star(pt.xi, mu))
    r3 = linalg.distance_to(fam.annihilator(a), force)
    scale = 1.0 + max(np.abs(np.concatenate(
        [pt.xi, pt.rho, pt.beta, pt.eta, mu])), default=0.0)
    res = (r1, r2, r3)
    return MembershipReport(res, all(r <= tol * scale for r in res))


def lagrangian_test_point(xi, mudot, dl_da, rep, a) -> DiracTestPoint:
    """Test point of the reduced Lagrange-Dirac system: the cotangent data is
    the reduced Dirac differential (-dl/da <> a, eta) with eta = xi."""
    xi = np.asarray(xi, dtype=float)
    if rep is None or np.asarray(a, float).size == 0:
        beta = np.zeros_like(xi)
    else:
        beta = -rep.diamond(np.asarray(dl_da, float), a)
    return DiracTestPoint(xi=xi, rho=np.asarray(mudot, float), beta=beta, eta=xi)


def sdp_reduced_membership(sdp: SemidirectAlgebra, mu, a,
                           fam: ConstraintFamily, pt: SdpDiracTestPoint,
                           tol: float = DEFAULT_TOL) -> MembershipReport:
    """Stage-two reduced Dirac membership on g (x) V at (mu, a):

        -rho + ad*_xi mu - w <> a - beta in (g^Delta(a))^o,
        b + xi a + c = 0,   xi = eta,   w = v,   xi in g^Delta(a).

    Five residuals, one per clause, in that order.
    """
    mu = np.asarray(mu, dtype=float)
    a = np.asarray(a, dtype=float)
    force = (-np.asarray(pt.rho, float) + sdp.base.ad_star(pt.xi, mu)
             - sdp.rep.diamond(pt.w, a) - np.asarray(pt.beta, float))
    r1 = linalg.distance_to(fam.annihilator(a), force)
    r2 = float(np.linalg.norm(np.asarray(pt.b, float)
                              + sdp.rep.dual_action(pt.xi, a)
                              + np.asarray(pt.c, float)))
    r3 = float(np.linalg.norm(np.asarray(pt.xi, float) - np.asarray(pt.eta, float)))
    r4 = float(np.linalg.norm(np.asarray(pt.w, float) - np.asarray(pt.v, float)))
    r5 = linalg.distance_to(fam.basis(a), pt.xi)
    scale = 1.0 + max(np.abs(np.concatenate(
        [pt.xi, pt.w, pt.rho, pt.b, pt.beta, pt.c, pt.eta, pt.v, mu, a])),
        default=0.0)
    res = (r1, r2, r3, r4, r5)
    return MembershipReport(res, all(r <= tol * scale for r in res))


def hamiltonian_sdp_test_point(xi, w, mudot, adot) -> SdpDiracTestPoint:
    """Tuple of the reduced Hamilton-Dirac system: cotangent data (0, 0,
    dh/dmu, dh/da) with (xi, w) = (dh/dmu, dh/da)."""
    xi = np.asarray(xi, dtype=float)
    w = np.asarray(w, dtype=float)
    return SdpDiracTestPoint(
        xi=xi, w=w, rho=np.asarray(mudot, float), b=np.asarray(adot, float),
        beta=np.zeros_like(xi), c=np.zeros_like(w), eta=xi, v=w)
