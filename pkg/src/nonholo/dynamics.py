"""Assembly and integration of the implicit Euler-Poincare-Suslov equations
with advected parameters, plus the Hamiltonian-side (Lie-Poisson-Suslov) twin.

The motion equation is

    mu = dl/dxi,   xi in g^Delta(a),
    mudot - ad*_xi mu - (dl/da) <> a  in  (g^Delta(a))^o,
    adot + xi a = 0,

closed with the null-space parametrization xi = B(a) c, which eliminates the
annihilator clause identically:

    B^T [ d/dt(dl/dxi) - ad*_xi mu - (dl/da) <> a ] = 0.

Production stepper: implicit midpoint on (c, a) (symmetric; preserves
quadratic invariants to Newton tolerance).  Reference oracle: classical RK4
at a fine step, solving the projected equations explicitly for cdot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import diracgeom, linalg
from .constraints import ConstraintFamily, RankDrop, SingularContact
from .liealg import GroupState, LieAlgebra, Representation, SemidirectAlgebra

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
FD_STEP = 1e-6


class NewtonDiverged(Exception):
    """Implicit midpoint solve failed to converge."""


class NotHyperregular(Exception):
    """Operation requires an invertible reduced Legendre transform."""


@dataclass
class LagrangianSpec:
    """Reduced Lagrangian l(xi, a) with its variational derivatives.

    `inertia(a)` is the symmetric positive matrix M(a) with dl/dxi = M(a) xi
    for Lagrangians quadratic in xi; it enables the Hamiltonian side and the
    explicit oracle.
    """

    l: Callable
    dl_dxi: Callable
    dl_da: Callable
    inertia: Optional[Callable] = None

    def check_derivatives(self, dim: int, fiber_dim: int, rng=None,
                          n_points: int = 10, tol: float = 1e-6) -> float:
        """Compare dl_dxi / dl_da against central differences of l.

        Returns the worst relative deviation; raises ValueError above tol.
        """
        rng = np.random.default_rng(0) if rng is None else rng
        worst = 0.0
        for _ in range(n_points):
            xi = rng.standard_normal(dim)
            a = rng.standard_normal(fiber_dim)
            scale = 1.0 + abs(self.l(xi, a))
            g = np.asarray(self.dl_dxi(xi, a), float)
            for i in range(dim):
                e = np.zeros(dim)
                e[i] = FD_STEP * (1.0 + abs(xi[i]))
                fd = (self.l(xi + e, a) - self.l(xi - e, a)) / (2 * e[i])
                worst = max(worst, abs(fd - g[i]) / scale)
            if fiber_dim:
                ga = np.asarray(self.dl_da(xi, a), float)
                for i in range(fiber_dim):
                    e = np.zeros(fiber_dim)
                    e[i] = FD_STEP * (1.0 + abs(a[i]))
                    fd = (self.l(xi, a + e) - self.l(xi, a - e)) / (2 * e[i])
                    worst = max(worst, abs(fd - ga[i]) / scale)
        if worst > tol:
            raise ValueError(f"analytic derivatives deviate from finite "
                             f"differences by {worst:.3e}")
        return worst


@dataclass
class HamiltonianSpec:
    """Reduced Hamiltonian h(mu, a) with dh/dmu and dh/da."""

    h: Callable
    dh_dmu: Callable
    dh_da: Callable


def legendre(lag: LagrangianSpec) -> HamiltonianSpec:
    """h(mu, a) = <mu, xi> - l(xi, a) at xi = M(a)^{-1} mu (hyperregular)."""
    if lag.inertia is None:
        raise NotHyperregular("Lagrangian has no inertia callback")

    def xi_of(mu, a):
        M = np.asarray(lag.inertia(a), float)
        try:
            xi = linalg.solve_linear(M, np.asarray(mu, float))
        except linalg.SingularMatrix as exc:
            raise NotHyperregular("inertia matrix is singular") from exc
        return xi

    def h(mu, a):
        xi = xi_of(mu, a)
        return float(np.dot(mu, xi)) - lag.l(xi, a)

    def dh_da(mu, a):
        return -np.asarray(lag.dl_da(xi_of(mu, a), a), float)

    return HamiltonianSpec(h=h, dh_dmu=xi_of, dh_da=dh_da)


@dataclass
class ReducedState:
    """Point (xi, a) at time t; mu = dl/dxi is derived, never independent."""

    t: float
    xi: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.a = np.asarray(self.a, dtype=float)


@dataclass
class Trajectory:
    """Uniform-step samples with per-sample diagnostics."""

    times: np.ndarray
    xi: np.ndarray
    mu: np.ndarray
    a: np.ndarray
    energy: np.ndarray = None
    res_constraint: np.ndarray = None
    res_dirac: np.ndarray = None
    res_advection: np.ndarray = None
    group_states: Optional[list] = None

    def __len__(self):
        return len(self.times)

    def state(self, k: int) -> ReducedState:
        return ReducedState(t=self.times[k], xi=self.xi[k], a=self.a[k])


class ReducedSystem:
    """A reduced Lagrangian, a constraint family, and the advection action.

    `rep` is the representation of the algebra on the advected-parameter
    space V (None when there is no advected parameter).
    """

    def __init__(self, algebra: LieAlgebra, lagrangian: LagrangianSpec,
                 family: ConstraintFamily, rep: Optional[Representation] = None,
                 name: str = "", fast_data=None, check: bool = True):
        self.algebra = algebra
        self.lagrangian = lagrangian
        self.family = family
        self.rep = rep
        self.name = name
        self.fast_data = fast_data
        self.fiber_dim = rep.fiber_dim if rep is not None else 0
        self._sdp = None
        if check:
            lagrangian.check_derivatives(algebra.dim, self.fiber_dim)

    @property
    def sdp(self) -> Optional[SemidirectAlgebra]:
        """g (x) V for the stage-two Dirac certification."""
        if self.rep is None:
            return None
        if self._sdp is None:
            self._sdp = SemidirectAlgebra(self.algebra, self.rep)
        return self._sdp

    def mu(self, xi, a) -> np.ndarray:
        return np.asarray(self.lagrangian.dl_dxi(xi, a), float)

    def energy(self, xi, a) -> float:
        """e = <mu, xi> - l(xi, a); conserved along solutions."""
        xi = np.asarray(xi, float)
        return float(np.dot(self.mu(xi, a), xi)) - float(self.lagrangian.l(xi, a))

    def diamond_force(self, xi, a) -> np.ndarray:
        """(dl/da) <> a, the symmetry-breaking force on g*."""
        if self.rep is None:
            return np.zeros(self.algebra.dim)
        return self.rep.diamond(self.lagrangian.dl_da(xi, a), a)

    def advection_rate(self, xi, a) -> np.ndarray:
        """adot = -xi a."""
        if self.rep is None:
            return np.zeros(0)
        return -self.rep.dual_action(xi, a)

    def constrained_coords(self, xi, a, B=None) -> np.ndarray:
        """Least-squares coordinates c with xi = B(a) c."""
        B = self.family.basis_matrix(a) if B is None else B
        return linalg.solve_linear(B.T @ B, B.T @ np.asarray(xi, float))

    def initial_state(self, xi_guess, a0, t0: float = 0.0) -> ReducedState:
        """Project a velocity guess onto g^Delta(a0)."""
        a0 = np.asarray(a0, dtype=float)
        B = self.family.basis_matrix(a0)
        c = self.constrained_coords(xi_guess, a0, B)
        return ReducedState(t=t0, xi=B @ c, a=a0)


def _dmu_da(sys: ReducedSystem, xi, a, adot) -> np.ndarray:
    """Directional derivative of dl/dxi along adot, by central difference."""
    if sys.fiber_dim == 0 or not np.any(adot):
        return np.zeros(sys.algebra.dim)
    h = FD_STEP / max(1.0, float(np.linalg.norm(adot)))
    gp = np.asarray(sys.lagrangian.dl_dxi(xi, a + h * adot), float)
    gm = np.asarray(sys.lagrangian.dl_dxi(xi, a - h * adot), float)
    return (gp - gm) / (2.0 * h)


def eps_rhs(sys: ReducedSystem, xi, a):
    """Explicit form of the projected equations.

    Returns (xidot, adot, mudot, multiplier) where the multiplier is the
    constraint reaction recovered on the annihilator, used for diagnostics.
    Requires inertia (the hyperregular case).
    """
    if sys.lagrangian.inertia is None:
        raise NotHyperregular("explicit assembly requires inertia(a)")
    xi = np.asarray(xi, dtype=float)
    a = np.asarray(a, dtype=float)
    M = np.asarray(sys.lagrangian.inertia(a), float)
    B = sys.family.basis_matrix(a)
    c = sys.constrained_coords(xi, a, B)
    adot = sys.advection_rate(xi, a)
    mu = sys.mu(xi, a)
    rhs = sys.algebra.ad_star(xi, mu) + sys.diamond_force(xi, a)
    Bdot = sys.family.dbasis_dt(a, adot)
    drift = _dmu_da(sys, xi, a, adot)
    try:
        cdot = linalg.solve_linear(B.T @ M @ B,
                                   B.T @ (rhs - M @ (Bdot @ c) - drift))
    except linalg.SingularMatrix as exc:
        raise NotHyperregular("projected inertia B^T M B is singular") from exc
    xidot = B @ cdot + Bdot @ c
    mudot = M @ xidot + drift
    multiplier = mudot - rhs
    return xidot, adot, mudot, multiplier


def _newton(residual, z0, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Dense Newton with forward-difference Jacobian."""
    z = np.asarray(z0, dtype=float).copy()
    nz = z.size
    r = residual(z)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            return z
        J = np.empty((nz, nz))
        for j in range(nz):
            h = 1e-7 * (1.0 + abs(z[j]))
            zp = z.copy()
            zp[j] += h
            J[:, j] = (residual(zp) - r) / h
        try:
            dz = linalg.solve_linear(J, -r)
        except linalg.SingularMatrix as exc:
            raise NewtonDiverged("singular Newton system") from exc
        z = z + dz
        r = residual(z)
        if not np.all(np.isfinite(r)):
            raise NewtonDiverged("residual became non-finite")
    if np.max(np.abs(r)) <= tol:
        return z
    raise NewtonDiverged(
        f"no convergence after {max_iter} iterations "
        f"(|r| = {np.max(np.abs(r)):.3e})")


def _expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring on a Taylor series."""
    A = np.asarray(A, dtype=float)
    s = max(0, int(np.ceil(np.log2(max(np.max(np.abs(A)), 1e-300)))) + 1)
    X = A / (2.0 ** s)
    E = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, 20):
        term = term @ X / k
        E = E + term
        if np.max(np.abs(term)) < 1e-18:
            break
    for _ in range(s):
        E = E @ E
    return E


def step(sys: ReducedSystem, state: ReducedState, dt: float,
         advection: str = "ode") -> ReducedState:
    """One implicit-midpoint step on the constrained coordinates (c, a).

    The constraint basis is re-evaluated at the midpoint a-value inside the
    Newton residual; the basis-derivative term enters through it.

    advection="ode" treats adot = -xi a with the midpoint rule; "exact"
    advects a by the exponential of the frozen midpoint velocity.  The two
    agree to O(dt^2).
    """
    if advection not in ("ode", "exact"):
        raise ValueError("advection must be 'ode' or 'exact'")
    if sys.lagrangian.inertia is None:
        # stepping a degenerate system would need DAE index analysis; the
        # residual / certification API still accepts such systems
        raise NotHyperregular("time stepping requires inertia(a)")
    d, m = sys.family.dim, sys.fiber_dim
    a0, xi0 = state.a, state.xi
    mu0 = sys.mu(xi0, a0)

    def residual(z):
        c1, a1 = z[:d], z[d:]
        ah = 0.5 * (a0 + a1)
        xi1 = sys.family.basis_matrix(a1) @ c1
        xih = 0.5 * (xi0 + xi1)
        mu1 = sys.mu(xi1, a1)
        muh = sys.mu(xih, ah)
        Bh = sys.family.basis_matrix(ah)
        # increment form: keeps the roundoff floor at eps*|mu| for any dt
        r_mu = Bh.T @ ((mu1 - mu0) - dt * (sys.algebra.ad_star(xih, muh)
                                           + sys.diamond_force(xih, ah)))
        if m == 0:
            return r_mu
        if advection == "exact":
            # a(t) = exp(t rho'(xi))^T a0 solves adot = -xi a for frozen xi
            r_a = a1 - _expm(dt * sys.rep.rho(xih)).T @ a0
        else:
            r_a = (a1 - a0) - dt * sys.advection_rate(xih, ah)
        return np.concatenate([r_mu, r_a])

    c0 = sys.constrained_coords(xi0, a0)
    z0 = np.concatenate([c0, a0])
    if sys.lagrangian.inertia is not None:
        # explicit Euler predictor
        xidot, adot, _, _ = eps_rhs(sys, xi0, a0)
        a_pred = a0 + dt * adot
        c_pred = sys.constrained_coords(xi0 + dt * xidot, a_pred)
        z0 = np.concatenate([c_pred, a_pred])
    z = _newton(residual, z0)
    a1 = z[d:]
    xi1 = sys.family.basis_matrix(a1) @ z[:d]
    return ReducedState(t=state.t + dt, xi=xi1, a=a1)


def lps_step(sys: ReducedSystem, ham: HamiltonianSpec, state: ReducedState,
             dt: float) -> ReducedState:
    """Implicit midpoint for the Lie-Poisson-Suslov equations, with mu as the
    primary unknown and the constraint reaction as an explicit multiplier."""
    n, m = sys.algebra.dim, sys.fiber_dim
    a0, xi0 = state.a, state.xi
    mu0 = sys.mu(xi0, a0)
    N0 = sys.family.annihilator(a0).columns
    k = N0.shape[1]

    def residual(z):
        mu1, lam, a1 = z[:n], z[n:n + k], z[n + k:]
        ah = 0.5 * (a0 + a1)
        muh = 0.5 * (mu0 + mu1)
        xih = np.asarray(ham.dh_dmu(muh, ah), float)
        Nh = sys.family.annihilator(ah).columns
        force = np.zeros(n)
        if m:
            force = sys.rep.diamond(ham.dh_da(muh, ah), ah)
        r_mu = ((mu1 - mu0) - dt * (sys.algebra.ad_star(xih, muh) - force
                                    + (Nh @ lam if k else 0.0)))
        parts = [r_mu]
        if k:
            xi1 = np.asarray(ham.dh_dmu(mu1, a1), float)
            N1 = sys.family.annihilator(a1).columns
            parts.append(N1.T @ xi1)
        if m:
            xia = sys.rep.dual_action(xih, ah)
            parts.append((a1 - a0) + dt * xia)
        return np.concatenate(parts)

    z0 = np.concatenate([mu0, np.zeros(k), a0])
    if sys.lagrangian.inertia is not None:
        _, adot, mudot, lam0 = eps_rhs(sys, xi0, a0)
        lam_c = linalg.solve_linear(N0.T @ N0, N0.T @ lam0) if k else np.zeros(0)
        z0 = np.concatenate([mu0 + dt * mudot, lam_c, a0 + dt * adot])
    z = _newton(residual, z0)
    mu1, a1 = z[:n], z[n + k:]
    xi1 = np.asarray(ham.dh_dmu(mu1, a1), float)
    return ReducedState(t=state.t + dt, xi=xi1, a=a1)


def _alloc_trajectory(sys, n_samples):
    n, m = sys.algebra.dim, sys.fiber_dim
    return Trajectory(
        times=np.zeros(n_samples), xi=np.zeros((n_samples, n)),
        mu=np.zeros((n_samples, n)), a=np.zeros((n_samples, m)),
        energy=np.zeros(n_samples), res_constraint=np.zeros(n_samples),
        res_dirac=np.zeros(n_samples), res_advection=np.zeros(n_samples))


def _fill_sample(sys, traj, k, state):
    traj.times[k] = state.t
    traj.xi[k] = state.xi
    traj.mu[k] = sys.mu(state.xi, state.a)
    traj.a[k] = state.a


def _fill_diagnostics_fast(sys: ReducedSystem, traj: Trajectory,
                           a0_norm: float):
    """Vectorized diagnostics for kernel-encoded models: evaluates the same
    quantities as the generic loop with batched linear algebra."""
    fd = sys.fast_data
    # samples at a degenerate contact (possible in partial trajectories)
    # produce NaN diagnostics rather than raising
    with np.errstate(divide="ignore", invalid="ignore"):
        _fill_diagnostics_fast_inner(sys, traj, a0_norm, fd)


def _fill_diagnostics_fast_inner(sys, traj, a0_norm, fd):
    ct, rep, M = fd["ct"], fd["rep"], fd["M"]
    n, m, d = M.shape[0], fd["rep"].shape[1], fd["d"]
    xi, a, mu = traj.xi, traj.a, traj.mu
    k = len(traj)

    # energy = kinetic + potential
    kin = 0.5 * np.einsum("kn,kn->k", xi, mu)
    if fd["pot_kind"] == 1:
        pot = -a @ fd["pot_vec"]
    elif fd["pot_kind"] == 2:
        u = a - np.outer(a @ fd["e3"], fd["e3"])
        pot = fd["pot_coeff"] * fd["pot_r"] * np.linalg.norm(u, axis=1)
    else:
        pot = 0.0
    traj.energy[:] = kin + pot

    # right-hand side, advection, and dl/da, batched
    rhs = np.einsum("ki,ijl,kl->kj", xi, ct, mu)
    if m:
        if fd["pot_kind"] == 1:
            dlda = np.broadcast_to(fd["pot_vec"], (k, m))
        elif fd["pot_kind"] == 2:
            u = a - np.outer(a @ fd["e3"], fd["e3"])
            nu = np.linalg.norm(u, axis=1)
            dlda = -(fd["pot_coeff"] * fd["pot_r"] / nu)[:, None] * u
        else:
            dlda = np.zeros((k, m))
        rhs = rhs + np.einsum("kb,ibc,kc->ki", a, rep, dlda)
        adot = np.einsum("ki,icb,kc->kb", xi, rep, a)
        traj.res_advection[:] = np.abs(np.linalg.norm(a, axis=1) - a0_norm)

    # constraint basis, its time derivative, and the projected solve, batched
    if fd["con_kind"] == 0:
        B = np.broadcast_to(np.eye(n), (k, n, n))
        Bdot_c_term = np.zeros((k, n))
        c = xi.copy()
    else:
        if fd["con_kind"] == 1:
            B = np.broadcast_to(fd["B_fixed"], (k, n, d))
            phid = None
        else:
            if fd["con_kind"] == 2:
                phi = a @ fd["F"].T + fd["gvec"]
                phid = adot @ fd["F"].T
            else:
                e3 = fd["e3"]
                u = a - np.outer(a @ e3, e3)
                ud = adot - np.outer(adot @ e3, e3)
                nu = np.linalg.norm(u, axis=1)
                phi = (fd["con_r"] / nu)[:, None] * u
                phid = fd["con_r"] * (
                    ud / nu[:, None]
                    - u * (np.einsum("kc,kc->k", u, ud) / nu ** 3)[:, None])
            B = np.zeros((k, n, d))
            B[:, :d, :] = np.eye(d)
            B[:, d:, :] = np.einsum("jbc,kc->kbj", rep[:d], phi)
        G = np.einsum("knd,kne->kde", B, B)
        c = np.linalg.solve(G, np.einsum("knd,kn->kd", B, xi)[..., None])[..., 0]
        if phid is None:
            Bdot_c_term = np.zeros((k, n))
        else:
            Bdot = np.zeros((k, n, d))
            Bdot[:, d:, :] = np.einsum("jbc,kc->kbj", rep[:d], phid)
            Bdot_c_term = np.einsum("knd,kd->kn", Bdot, c)
    A2 = np.einsum("knd,nl,kle->kde", B, M, B)
    b2 = np.einsum("knd,kn->kd", B, rhs - Bdot_c_term @ M.T)
    cdot = np.linalg.solve(A2, b2[..., None])[..., 0]
    xidot = np.einsum("knd,kd->kn", B, cdot) + Bdot_c_term
    mudot = xidot @ M.T
    multiplier = mudot - rhs

    Q = np.linalg.qr(np.ascontiguousarray(B))[0]
    proj_xi = np.einsum("knd,kd->kn", Q, np.einsum("knd,kn->kd", Q, xi))
    traj.res_constraint[:] = np.linalg.norm(xi - proj_xi, axis=1)
    # the reaction force must annihilate g^Delta(a): its projection onto the
    # constraint subspace is the Dirac defect
    proj_mult = np.einsum("knd,kd->kn", Q,
                          np.einsum("knd,kn->kd", Q, multiplier))
    traj.res_dirac[:] = np.maximum(traj.res_constraint,
                                   np.linalg.norm(proj_mult, axis=1))


def _fill_diagnostics(sys: ReducedSystem, traj: Trajectory, a0_norm: float):
    """Per-sample energy, constraint distance, Dirac residual, advection norm
    drift.  The Dirac residual uses mudot from the explicit assembly."""
    if sys.fast_data is not None:
        _fill_diagnostics_fast(sys, traj, a0_norm)
        return
    const_ann = sys.family.annihilator(traj.a[0]) if sys.family.is_constant else None
    const_basis = sys.family.basis(traj.a[0]) if sys.family.is_constant else None
    for k in range(len(traj)):
        xi, a = traj.xi[k], traj.a[k]
        traj.energy[k] = sys.energy(xi, a)
        basis = const_basis if const_basis is not None else sys.family.basis(a)
        ann = const_ann if const_ann is not None else sys.family.annihilator(a)
        traj.res_constraint[k] = linalg.distance_to(basis, xi)
        if sys.lagrangian.inertia is not None:
            _, _, mudot, _ = eps_rhs(sys, xi, a)
            pt = diracgeom.lagrangian_test_point(
                xi, mudot, sys.lagrangian.dl_da(xi, a) if sys.fiber_dim else 0.0,
                sys.rep, a)
            force = pt.beta + pt.rho - sys.algebra.ad_star(xi, traj.mu[k])
            r3 = linalg.distance_to(ann, force)
            traj.res_dirac[k] = max(traj.res_constraint[k], r3)
        if sys.fiber_dim:
            traj.res_advection[k] = abs(np.linalg.norm(a) - a0_norm)


def fill_diagnostics(sys: ReducedSystem, traj: Trajectory) -> Trajectory:
    """(Re)compute the per-sample diagnostics of a trajectory in place."""
    _fill_diagnostics(sys, traj, float(np.linalg.norm(traj.a[0])))
    return traj


def integrate(sys: ReducedSystem, state0: ReducedState, t_final: float,
              dt: float, stepper=None, diagnostics: bool = True,
              use_fast: bool = True, advection: str = "ode") -> Trajectory:
    """Integrate to t_final with uniform step dt, filling diagnostics.

    On NewtonDiverged / SingularContact / RankDrop the partial trajectory is
    attached to the exception as `exc.partial`.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    n_steps = int(round(t_final / dt)) if t_final > 0 else 0
    traj = _alloc_trajectory(sys, n_steps + 1)
    _fill_sample(sys, traj, 0, state0)
    a0_norm = float(np.linalg.norm(state0.a))

    if (stepper is None and use_fast and sys.fast_data is not None
            and advection == "ode" and n_steps > 0):
        from . import _fastpath
        try:
            xis, avs = _fastpath.midpoint_run(sys.fast_data, state0.xi,
                                              state0.a, dt, n_steps)
        except (NewtonDiverged, SingularContact, RankDrop) as exc:
            arrays = getattr(exc, "partial_arrays", None)
            if arrays is not None:
                k = len(arrays[0])
                traj = _slice_trajectory(traj, k)
                traj.times[:] = state0.t + dt * np.arange(k)
                traj.xi[:] = arrays[0]
                traj.a[:] = arrays[1]
                for i in range(1, k):
                    traj.mu[i] = sys.mu(traj.xi[i], traj.a[i])
                if diagnostics:
                    try:
                        _fill_diagnostics(sys, traj, a0_norm)
                    except (SingularContact, RankDrop,
                            np.linalg.LinAlgError):
                        pass  # e.g. a run that is singular from t=0
            exc.partial = traj
            raise
        traj.times[:] = state0.t + dt * np.arange(n_steps + 1)
        traj.xi[:] = xis
        traj.a[:] = avs
        for k in range(1, n_steps + 1):
            traj.mu[k] = sys.mu(traj.xi[k], traj.a[k])
    else:
        if stepper is not None:
            do_step = stepper
        else:
            def do_step(s, st, h):
                return step(s, st, h, advection=advection)
        state = state0
        for k in range(1, n_steps + 1):
            try:
                state = do_step(sys, state, dt)
            except (NewtonDiverged, SingularContact, RankDrop) as exc:
                traj = _slice_trajectory(traj, k)
                if diagnostics:
                    try:
                        _fill_diagnostics(sys, traj, a0_norm)
                    except (SingularContact, RankDrop,
                            np.linalg.LinAlgError):
                        pass
                exc.partial = traj
                raise
            _fill_sample(sys, traj, k, state)
    if diagnostics:
        _fill_diagnostics(sys, traj, a0_norm)
    return traj


def _slice_trajectory(traj, k):
    return Trajectory(
        times=traj.times[:k], xi=traj.xi[:k], mu=traj.mu[:k], a=traj.a[:k],
        energy=traj.energy[:k], res_constraint=traj.res_constraint[:k],
        res_dirac=traj.res_dirac[:k], res_advection=traj.res_advection[:k])


def lps_integrate(sys: ReducedSystem, ham: HamiltonianSpec,
                  state0: ReducedState, t_final: float, dt: float,
                  diagnostics: bool = True) -> Trajectory:
    """Hamiltonian-side integration (mu as primary unknown)."""
    return integrate(sys, state0, t_final, dt,
                     stepper=lambda s, st, h: lps_step(s, ham, st, h),
                     diagnostics=diagnostics, use_fast=False)


def oracle_rk4(sys: ReducedSystem, state0: ReducedState, t_final: float,
               dt_fine: float = 1e-5, store_every: int = 1,
               use_fast: bool = True) -> Trajectory:
    """Classical RK4 at a fine step; the reference oracle for derived values.

    Stores every `store_every`-th sample; no diagnostics are filled.
    """
    n_steps = int(round(t_final / dt_fine)) if t_final > 0 else 0
    n_kept = n_steps // store_every
    traj = _alloc_trajectory(sys, n_kept + 1)
    _fill_sample(sys, traj, 0, state0)

    if use_fast and sys.fast_data is not None and n_steps > 0:
        from . import _fastpath
        xis, avs, times = _fastpath.rk4_run(sys.fast_data, state0.xi, state0.a,
                                            dt_fine, n_steps, store_every)
        traj.times[:] = state0.t + times
        traj.xi[:] = xis
        traj.a[:] = avs
        for k in range(1, n_kept + 1):
            traj.mu[k] = sys.mu(traj.xi[k], traj.a[k])
        return traj

    xi, a, t = state0.xi.copy(), state0.a.copy(), state0.t
    kept = 0
    for k in range(1, n_steps + 1):
        k1 = eps_rhs(sys, xi, a)
        k2 = eps_rhs(sys, xi + 0.5 * dt_fine * k1[0], a + 0.5 * dt_fine * k1[1])
        k3 = eps_rhs(sys, xi + 0.5 * dt_fine * k2[0], a + 0.5 * dt_fine * k2[1])
        k4 = eps_rhs(sys, xi + dt_fine * k3[0], a + dt_fine * k3[1])
        xi = xi + (dt_fine / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        a = a + (dt_fine / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        t += dt_fine
        if k % store_every == 0:
            kept += 1
            _fill_sample(sys, traj, kept, ReducedState(t=t, xi=xi, a=a))
    return _slice_trajectory(traj, kept + 1)


def reconstruct(traj: Trajectory, g0: Optional[GroupState] = None,
                reorthonormalize_every: int = 100) -> list:
    """Group trajectory from the reduced velocities:

        g_{n+1} = g_n exp(dt * xi_{n+1/2}),  xi_{n+1/2} = (xi_n + xi_{n+1})/2.
    """
    g = GroupState() if g0 is None else g0
    out = [g]
    from .liealg import reorthonormalize as _reorth
    for k in range(1, len(traj)):
        dt = traj.times[k] - traj.times[k - 1]
        xih = 0.5 * (traj.xi[k - 1] + traj.xi[k])
        g = g.exp_step(xih, dt)
        if k % reorthonormalize_every == 0:
            g = GroupState(_reorth(g.rotation), g.translation)
        out.append(g)
    traj.group_states = out
    return out


def certify_trajectory(sys: ReducedSystem, traj: Trajectory,
                       tol: float = 1e-8, stage_two: bool = False):
    """Per-sample Dirac membership residuals along a trajectory.

    Returns an array of max residuals; with stage_two=True the semidirect
    five-clause condition (including the advection clause) is tested instead.
    """
    out = np.zeros(len(traj))
    ham = legendre(sys.lagrangian) if stage_two else None
    for k in range(len(traj)):
        xi, a, mu = traj.xi[k], traj.a[k], traj.mu[k]
        _, adot, mudot, _ = eps_rhs(sys, xi, a)
        if stage_two:
            if sys.sdp is None:
                raise ValueError("stage-two check needs an advected parameter")
            w = np.asarray(ham.dh_da(mu, a), float)
            pt = diracgeom.hamiltonian_sdp_test_point(xi, w, mudot, adot)
            rep = diracgeom.sdp_reduced_membership(sys.sdp, mu, a,
                                                   sys.family, pt, tol)
        else:
            pt = diracgeom.lagrangian_test_point(
                xi, mudot, sys.lagrangian.dl_da(xi, a) if sys.fiber_dim else 0.0,
                sys.rep, a)
            rep = diracgeom.reduced_membership(sys.algebra, mu, sys.family,
                                               a, pt, tol)
        out[k] = rep.max_residual
    return out
