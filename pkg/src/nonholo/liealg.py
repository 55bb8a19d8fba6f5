"""Lie algebra structures: so(3), abelian R^m, semidirect products g (x) V.

Conventions fixed repo-wide:
  * hat(v) w = v x w, so ad*_Omega Pi = Pi x Omega on so(3).
  * Duals are identified with primals via the coordinate dot product.
  * The semidirect bracket is [(x1,v1),(x2,v2)] = ([x1,x2], x1 v2 - x2 v1)
    with xi v = rho'(xi) v.
  * The dual action on fiber duals is  xi a = -rho'(xi)^T a, so the advection
    equation adot + xi a = 0 reads adot = rho'(xi)^T a.
"""

from __future__ import annotations

import numpy as np

JACOBI_TOL = 1e-10
HOMOMORPHISM_TOL = 1e-10


def hat(v) -> np.ndarray:
    """3x3 skew matrix with hat(v) w = v x w."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def unhat(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


class LieAlgebra:
    """Finite-dimensional real Lie algebra given by structure constants.

    ct[i, j, k] is the coefficient of e_k in [e_i, e_j].  The constructor
    checks antisymmetry and the Jacobi identity on all basis triples.
    """

    def __init__(self, structure_constants: np.ndarray, name: str = ""):
        ct = np.asarray(structure_constants, dtype=float)
        n = ct.shape[0]
        if ct.shape != (n, n, n):
            raise ValueError("structure constants must be (n, n, n)")
        if np.max(np.abs(ct + np.swapaxes(ct, 0, 1))) > JACOBI_TOL:
            raise ValueError("bracket is not antisymmetric")
        jac = (
            np.einsum("ijm,mkl->ijkl", ct, ct)
            + np.einsum("jkm,mil->ijkl", ct, ct)
            + np.einsum("kim,mjl->ijkl", ct, ct)
        )
        if np.max(np.abs(jac)) > JACOBI_TOL:
            raise ValueError("Jacobi identity violated")
        self.ct = ct
        self.dim = n
        self.name = name

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("i,ijk,j->k", np.asarray(x, float), self.ct,
                         np.asarray(y, float))

    def ad(self, x) -> np.ndarray:
        """Matrix of ad_x: y -> [x, y]."""
        return np.einsum("i,ijk->jk", np.asarray(x, float), self.ct).T

    def ad_star(self, xi, mu) -> np.ndarray:
        """Coadjoint action: <ad*_xi mu, z> = <mu, [xi, z]>."""
        return np.einsum("i,ijk,k->j", np.asarray(xi, float), self.ct,
                         np.asarray(mu, float))

    def pair(self, mu, xi) -> float:
        return float(np.dot(mu, xi))


def so3() -> LieAlgebra:
    """so(3) in the hat basis: [e_i, e_j] = e_i x e_j."""
    ct = np.zeros((3, 3, 3))
    for i in range(3):
        ei = np.zeros(3)
        ei[i] = 1.0
        for j in range(3):
            ej = np.zeros(3)
            ej[j] = 1.0
            ct[i, j] = np.cross(ei, ej)
    return LieAlgebra(ct, name="so(3)")


def abelian(m: int) -> LieAlgebra:
    return LieAlgebra(np.zeros((m, m, m)), name=f"R^{m}")


class Representation:
    """Linear action rho' of an algebra on a vector space V (dim = fiber_dim).

    `matrices[i]` is rho'(e_i).  The constructor checks the homomorphism
    property rho'([x,y]) = [rho'(x), rho'(y)] on basis pairs.
    """

    def __init__(self, algebra: LieAlgebra, matrices):
        mats = np.asarray(matrices, dtype=float)
        if mats.ndim == 3 and mats.shape[0] != algebra.dim:
            raise ValueError("need one matrix per basis element")
        self.algebra = algebra
        self.matrices = mats
        self.fiber_dim = mats.shape[1] if mats.ndim == 3 else 0
        for i in range(algebra.dim):
            for j in range(algebra.dim):
                lhs = np.einsum("k,kab->ab", algebra.ct[i, j], mats)
                rhs = mats[i] @ mats[j] - mats[j] @ mats[i]
                if np.max(np.abs(lhs - rhs)) > HOMOMORPHISM_TOL:
                    raise ValueError("rho' is not a Lie algebra homomorphism")

    def rho(self, xi) -> np.ndarray:
        """Matrix of v -> xi v."""
        return np.einsum("i,iab->ab", np.asarray(xi, float), self.matrices)

    def act(self, xi, v) -> np.ndarray:
        return self.rho(xi) @ np.asarray(v, float)

    def diamond(self, v, a) -> np.ndarray:
        """<v <> a, xi> = <a, xi v> for v in V, a in V*."""
        v = np.asarray(v, float)
        a = np.asarray(a, float)
        return np.einsum("iab,b,a->i", self.matrices, v, a)

    def dual_action(self, xi, a) -> np.ndarray:
        """xi a = -rho'(xi)^T a on fiber duals."""
        return -self.rho(xi).T @ np.asarray(a, float)


def so3_on_r3() -> Representation:
    return Representation(so3(), np.stack([hat([1, 0, 0]), hat([0, 1, 0]),
                                           hat([0, 0, 1])]))


class SemidirectAlgebra(LieAlgebra):
    """g (x) V built from a base algebra and a representation of it on V.

    Elements are coordinate vectors of length base.dim + fiber_dim; the
    structure constants implement ([x1,x2], x1 v2 - x2 v1).
    """

    def __init__(self, base: LieAlgebra, rep: Representation, name: str = ""):
        if rep.algebra.dim != base.dim:
            raise ValueError("representation must be of the base algebra")
        n, m = base.dim, rep.fiber_dim
        ct = np.zeros((n + m, n + m, n + m))
        ct[:n, :n, :n] = base.ct
        # [ (e_i, 0), (0, f_b) ] = (0, rho'(e_i) f_b)
        ct[:n, n:, n:] = np.swapaxes(rep.matrices, 1, 2)
        ct[n:, :n, n:] = -np.swapaxes(np.swapaxes(rep.matrices, 1, 2), 0, 1)
        super().__init__(ct, name=name or f"{base.name} (x) R^{m}")
        self.base = base
        self.rep = rep
        self.base_dim = n
        self.fiber_dim = m

    def split(self, z):
        z = np.asarray(z, float)
        return z[: self.base_dim], z[self.base_dim:]

    def join(self, xi, v) -> np.ndarray:
        return np.concatenate([np.asarray(xi, float), np.asarray(v, float)])

    def sdp_ad_star(self, z, w) -> np.ndarray:
        """ad*_{(xi,v)} (mu,a) = (ad*_xi mu - v <> a, -xi a)."""
        xi, v = self.split(z)
        mu, a = self.split(w)
        return self.join(
            self.base.ad_star(xi, mu) - self.rep.diamond(v, a),
            -self.rep.dual_action(xi, a),
        )


def se3() -> SemidirectAlgebra:
    """se(3) = so(3) (x) R^3, coordinates (Omega, X)."""
    return SemidirectAlgebra(so3(), so3_on_r3(), name="se(3)")


# ---------------------------------------------------------------------------
# Group side: SO(3)/SE(3) exponentials, composition and dual actions.

def exp_so3(omega) -> np.ndarray:
    """Rodrigues formula: exact exponential of hat(omega)."""
    omega = np.asarray(omega, dtype=float)
    th = np.linalg.norm(omega)
    K = hat(omega)
    if th < 1e-8:
        # series: avoids 0/0; error O(th^4) below double precision here
        return np.eye(3) + K + 0.5 * (K @ K)
    return (np.eye(3) + (np.sin(th) / th) * K
            + ((1.0 - np.cos(th)) / th**2) * (K @ K))


def reorthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation back onto SO(3) by Gram-Schmidt on rows."""
    R = np.asarray(R, dtype=float)
    u = R[0] / np.linalg.norm(R[0])
    v = R[1] - (u @ R[1]) * u
    v /= np.linalg.norm(v)
    w = np.cross(u, v)
    return np.stack([u, v, w])


class GroupState:
    """Element of SO(3) or SE(3): rotation matrix plus optional translation."""

    def __init__(self, rotation=None, translation=None):
        self.rotation = np.eye(3) if rotation is None else np.asarray(rotation, float)
        self.translation = (None if translation is None
                            else np.asarray(translation, float))

    @property
    def has_translation(self) -> bool:
        return self.translation is not None

    def compose(self, other: "GroupState") -> "GroupState":
        R = self.rotation @ other.rotation
        if self.has_translation or other.has_translation:
            x = self.translation if self.has_translation else np.zeros(3)
            y = other.translation if other.has_translation else np.zeros(3)
            return GroupState(R, x + self.rotation @ y)
        return GroupState(R)

    def exp_step(self, z, dt: float) -> "GroupState":
        """Right-multiply by exp(dt * z) for z = (omega[, X])."""
        z = np.asarray(z, float)
        omega = z[:3]
        R = exp_so3(dt * omega)
        if self.has_translation:
            # exact se(3) exponential's translation part is not needed at
            # O(dt^3) accuracy; midpoint quadrature of xdot = Lambda X
            X = z[3:6] if z.shape[0] >= 6 else np.zeros(3)
            xnew = self.translation + dt * (self.rotation @ exp_so3(0.5 * dt * omega) @ X)
            return GroupState(self.rotation @ R, xnew)
        return GroupState(self.rotation @ R)

    def dual_action(self, a) -> np.ndarray:
        """Left action on fiber duals: Lambda a (rotation part only)."""
        return self.rotation @ np.asarray(a, float)

    def inverse_dual_action(self, a) -> np.ndarray:
        return self.rotation.T @ np.asarray(a, float)

    def orthonormality_defect(self) -> float:
        R = self.rotation
        return float(np.max(np.abs(R.T @ R - np.eye(3))))
