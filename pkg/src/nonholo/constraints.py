"""Parameter-dependent constraint families g^Delta(a) with basis/annihilator
providers.

Built-in kinds:
  * Unconstrained            -- the whole algebra.
  * SuslovLinear(normals)    -- {xi : xi . n_k = 0}, fixed linear constraints.
  * TypeI                    -- rolling-type on k (x) V with X = xi a^sharp.
  * TypeII(phi)              -- X = xi phi(a) for user phi: V* -> V.
  * TypeIII(alpha)           -- X = alpha(a) xi for a linear-map-valued alpha.

The integrator parametrizes xi = B(a) c, so families expose bases rather
than projectors.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from . import linalg
from .liealg import LieAlgebra, SemidirectAlgebra

SINGULAR_EPS = 1e-8


class SingularContact(Exception):
    """Contact-point map undefined (e.g. Euler disk lying flat)."""


class RankDrop(Exception):
    """Constraint basis lost rank along the advected-parameter orbit."""


class ConstraintFamily:
    """Maps an advected parameter a to a basis of g^Delta(a) subset g.

    `basis_fn(a)` returns the (algebra.dim x d) column matrix; columns must
    stay linearly independent (rank drop raises RankDrop).  `dbasis_fn(a,
    adot)`, when given, returns d/dt B(a(t)) for the oracle integrator.
    """

    def __init__(self, algebra: LieAlgebra, basis_fn, dim: int,
                 dbasis_fn=None, kind: str = "custom"):
        self.algebra = algebra
        self._basis_fn = basis_fn
        self.dim = dim
        self._dbasis_fn = dbasis_fn
        self.kind = kind

    @property
    def is_constant(self) -> bool:
        return self.kind in ("unconstrained", "suslov")

    def basis_matrix(self, a) -> np.ndarray:
        B = np.asarray(self._basis_fn(a), dtype=float)
        if B.shape != (self.algebra.dim, self.dim):
            raise RankDrop(
                f"basis shape {B.shape} != ({self.algebra.dim}, {self.dim})")
        if np.linalg.matrix_rank(B, tol=1e-10 * max(1.0, np.abs(B).max())) < self.dim:
            raise RankDrop("constraint basis lost rank")
        return B

    def basis(self, a) -> linalg.SubspaceBasis:
        return linalg.SubspaceBasis(self.algebra.dim, self.basis_matrix(a))

    def annihilator(self, a) -> linalg.SubspaceBasis:
        return linalg.annihilator_basis(self.basis(a))

    def dbasis_dt(self, a, adot) -> np.ndarray:
        """d/dt B(a(t)); analytic when supplied, central difference otherwise."""
        if self._dbasis_fn is not None:
            return np.asarray(self._dbasis_fn(a, adot), dtype=float)
        a = np.asarray(a, dtype=float)
        adot = np.asarray(adot, dtype=float)
        if a.size == 0 or not np.any(adot):
            return np.zeros((self.algebra.dim, self.dim))
        h = 1e-6 / max(1.0, float(np.linalg.norm(adot)))
        Bp = np.asarray(self._basis_fn(a + h * adot), dtype=float)
        Bm = np.asarray(self._basis_fn(a - h * adot), dtype=float)
        return (Bp - Bm) / (2.0 * h)

    def distance(self, a, xi) -> float:
        return linalg.distance_to(self.basis(a), xi)

    def contains(self, a, xi, tol: float = 1e-8):
        return linalg.subspace_contains(self.basis(a), xi, tol)


def unconstrained(algebra: LieAlgebra) -> ConstraintFamily:
    n = algebra.dim
    B = np.eye(n)
    return ConstraintFamily(algebra, lambda a: B, n,
                            dbasis_fn=lambda a, adot: np.zeros((n, n)),
                            kind="unconstrained")


def suslov(algebra: LieAlgebra, normals) -> ConstraintFamily:
    """{xi : xi . n_k = 0} for fixed normal directions n_k."""
    N = np.atleast_2d(np.asarray(normals, dtype=float))
    B = linalg.nullspace_basis(N).columns
    d = B.shape[1]
    return ConstraintFamily(algebra, lambda a: B, d,
                            dbasis_fn=lambda a, adot: np.zeros((algebra.dim, d)),
                            kind="suslov")


def rolling_type_ii(algebra: SemidirectAlgebra,
                    phi: Callable[[np.ndarray], np.ndarray],
                    dphi: Optional[Callable] = None) -> ConstraintFamily:
    """Case II on k (x) V: g^Delta(a) = {(xi, X) : X = xi phi(a)}.

    Basis columns are (e_i, rho'(e_i) phi(a)).  `dphi(a, adot)`, when given,
    is the chain-rule derivative of phi along adot.
    """
    k, m = algebra.base_dim, algebra.fiber_dim

    def basis_fn(a):
        p = np.asarray(phi(a), dtype=float)
        B = np.zeros((k + m, k))
        B[:k, :k] = np.eye(k)
        for i in range(k):
            B[k:, i] = algebra.rep.matrices[i] @ p
        return B

    dbasis_fn = None
    if dphi is not None:
        def dbasis_fn(a, adot):
            pdot = np.asarray(dphi(a, adot), dtype=float)
            dB = np.zeros((k + m, k))
            for i in range(k):
                dB[k:, i] = algebra.rep.matrices[i] @ pdot
            return dB

    return ConstraintFamily(algebra, basis_fn, k, dbasis_fn=dbasis_fn,
                            kind="type_ii")


def rolling_type_i(algebra: SemidirectAlgebra) -> ConstraintFamily:
    """Case I: X = xi a^sharp, with sharp the coordinate identification."""
    fam = rolling_type_ii(algebra, lambda a: np.asarray(a, dtype=float),
                          dphi=lambda a, adot: np.asarray(adot, dtype=float))
    fam.kind = "type_i"
    return fam


def rolling_type_iii(algebra: SemidirectAlgebra,
                     alpha: Callable[[np.ndarray], np.ndarray],
                     dalpha: Optional[Callable] = None) -> ConstraintFamily:
    """Case III: g^Delta(a) = {(xi, X) : X = alpha(a) xi}.

    alpha(a) is a (fiber_dim x base_dim) matrix; the invariance property is
    the caller's obligation.
    """
    k, m = algebra.base_dim, algebra.fiber_dim

    def basis_fn(a):
        A = np.asarray(alpha(a), dtype=float)
        B = np.zeros((k + m, k))
        B[:k, :k] = np.eye(k)
        B[k:, :] = A
        return B

    dbasis_fn = None
    if dalpha is not None:
        def dbasis_fn(a, adot):
            dB = np.zeros((k + m, k))
            dB[k:, :] = np.asarray(dalpha(a, adot), dtype=float)
            return dB

    return ConstraintFamily(algebra, basis_fn, k, dbasis_fn=dbasis_fn,
                            kind="type_iii")


def euler_disk_contact(gamma, r: float, e3_body) -> np.ndarray:
    """Body-frame vector from the contact point to the disk center.

    s(Gamma) = r * (E3 x (Gamma x E3)) / |E3 x (Gamma x E3)|.  Undefined
    (SingularContact) when Gamma is parallel to the body normal E3.
    """
    gamma = np.asarray(gamma, dtype=float)
    e3 = np.asarray(e3_body, dtype=float)
    u = np.cross(e3, np.cross(gamma, e3))
    nu = np.linalg.norm(u)
    if nu <= SINGULAR_EPS:
        raise SingularContact("disk orientation parallel to its normal")
    return r * u / nu


def euler_disk_contact_derivative(gamma, gammadot, r: float, e3_body) -> np.ndarray:
    """d/dt s(Gamma(t)) along gammadot."""
    gamma = np.asarray(gamma, dtype=float)
    e3 = np.asarray(e3_body, dtype=float)
    P = np.eye(3) - np.outer(e3, e3)
    u = P @ gamma
    nu = np.linalg.norm(u)
    if nu <= SINGULAR_EPS:
        raise SingularContact("disk orientation parallel to its normal")
    udot = P @ np.asarray(gammadot, dtype=float)
    return r * (udot / nu - u * (u @ udot) / nu**3)
