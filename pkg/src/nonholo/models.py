"""Built-in reduced systems: heavy top, Suslov top, rolling ball with offset
center (and the centered sphere), and the rolling disk.

Every constructor wires analytic derivative callbacks (checked against finite
differences of l at construction), a constraint family, the advection
representation, and a compiled-kernel encoding.  The initial momentum is
always derived from the initial velocity through dl/dxi, never supplied
independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _fastpath, constraints, liealg
from .dynamics import LagrangianSpec, ReducedState, ReducedSystem

UNIT_TOL = 1e-10


def _as_inertia(I) -> np.ndarray:
    I = np.asarray(I, dtype=float)
    if I.ndim == 1 and I.size == 3:
        I = np.diag(I)
    if I.shape != (3, 3):
        raise ValueError("inertia must be a 3-vector (diagonal) or 3x3 matrix")
    if np.max(np.abs(I - I.T)) > 1e-12:
        raise ValueError("inertia must be symmetric")
    if np.any(np.linalg.eigvalsh(I) <= 0):
        raise ValueError("inertia must be positive definite")
    return I


def _unit(v, name) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must be a unit vector")
    return v


def se3_on_r3() -> liealg.Representation:
    """Action of se(3) on R^3 through its rotational part (translations act
    trivially); this is the advection action for the rolling models."""
    mats = np.zeros((6, 3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        mats[i] = liealg.hat(e)
    return liealg.Representation(liealg.se3(), mats)


# ---------------------------------------------------------------- heavy top

@dataclass
class HeavyTopParams:
    inertia: np.ndarray
    m: float = 1.0
    g: float = 9.81
    l: float = 1.0
    chi: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    gamma0: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        self.inertia = _as_inertia(self.inertia)
        self.chi = _unit(self.chi, "chi")
        self.gamma0 = _unit(self.gamma0, "gamma0")

    @property
    def mgl(self) -> float:
        # the gravity torque coefficient; carried as the single product
        return self.m * self.g * self.l


def heavy_top(p: HeavyTopParams) -> ReducedSystem:
    """Spinning rigid body with a fixed point in gravity, on so(3) with the
    advected vertical direction Gamma:

        Pi = I Omega,  Pidot = Pi x Omega - mgl chi x Gamma,
        Gammadot = Gamma x Omega.
    """
    alg = liealg.so3()
    rep = liealg.so3_on_r3()
    I, mgl, chi = p.inertia, p.mgl, p.chi
    lag = LagrangianSpec(
        l=lambda xi, a: 0.5 * float(xi @ I @ xi) - mgl * float(a @ chi),
        dl_dxi=lambda xi, a: I @ xi,
        dl_da=lambda xi, a: -mgl * chi,
        inertia=lambda a: I)
    fast = _fastpath.encode(alg.ct, rep.matrices, I, d=3,
                            pot_kind=1, pot_vec=-mgl * chi)
    return ReducedSystem(alg, lag, constraints.unconstrained(alg), rep,
                         name="heavy_top", fast_data=fast)


# ---------------------------------------------------------------- Suslov top

@dataclass
class SuslovParams:
    inertia: np.ndarray
    e: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        self.inertia = _as_inertia(self.inertia)
        self.e = _unit(self.e, "e")


def suslov_top(p: SuslovParams) -> ReducedSystem:
    """Rigid body with the linear velocity constraint Omega . e = 0; no
    advected parameter, kinetic energy is conserved."""
    alg = liealg.so3()
    I = p.inertia
    lag = LagrangianSpec(
        l=lambda xi, a: 0.5 * float(xi @ I @ xi),
        dl_dxi=lambda xi, a: I @ xi,
        dl_da=lambda xi, a: np.zeros(0),
        inertia=lambda a: I)
    fam = constraints.suslov(alg, [p.e])
    B_fixed = fam.basis_matrix(np.zeros(0))
    fast = _fastpath.encode(alg.ct, np.zeros((3, 0, 0)), I,
                            d=2, con_kind=1, B_fixed=B_fixed)
    return ReducedSystem(alg, lag, fam, rep=None, name="suslov_top",
                         fast_data=fast)


# ------------------------------------------------------------- rolling ball

@dataclass
class ChaplyginBallParams:
    inertia: np.ndarray
    m: float = 1.0
    g: float = 9.81
    r: float = 1.0
    l: float = 0.0
    chi: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    gamma0: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        self.inertia = _as_inertia(self.inertia)
        self.chi = _unit(self.chi, "chi")
        self.gamma0 = _unit(self.gamma0, "gamma0")
        if self.r <= 0:
            raise ValueError("radius must be positive")
        if self.l < 0:
            raise ValueError("center offset must be nonnegative")


def _rolling_system(I, m, rolling_phi, dphi, potential, dpotential, name,
                    fast_pot, fast_con) -> ReducedSystem:
    """Common se(3) wiring for the rolling models.

    xi = (Omega, X); l = Omega.I Omega/2 + m|X|^2/2 - U(Gamma) with
    U = potential and dpotential = dU/dGamma; the rolling constraint is
    X = Omega x phi(Gamma).
    """
    sdp = liealg.se3()
    rep = se3_on_r3()
    M = np.zeros((6, 6))
    M[:3, :3] = I
    M[3:, 3:] = m * np.eye(3)
    lag = LagrangianSpec(
        l=lambda xi, a: (0.5 * float(xi[:3] @ I @ xi[:3])
                         + 0.5 * m * float(xi[3:] @ xi[3:]) - potential(a)),
        dl_dxi=lambda xi, a: M @ xi,
        dl_da=lambda xi, a: -dpotential(a),
        inertia=lambda a: M)
    fam = constraints.rolling_type_ii(sdp, rolling_phi, dphi)
    fast = _fastpath.encode(sdp.ct, rep.matrices, M, d=3,
                            **fast_pot, **fast_con)
    return ReducedSystem(sdp, lag, fam, rep, name=name, fast_data=fast,
                         check=False)


def chaplygin_ball(p: ChaplyginBallParams) -> ReducedSystem:
    """Ball of radius r with center of mass offset l.chi, rolling without
    slipping on a horizontal plane; contact vector phi(Gamma) = r Gamma +
    l chi, potential m g l Gamma.chi."""
    mgl = p.m * p.g * p.l
    r, lc = p.r, p.l * p.chi
    chi = p.chi
    sys = _rolling_system(
        p.inertia, p.m,
        rolling_phi=lambda a: r * a + lc,
        dphi=lambda a, adot: r * adot,
        potential=lambda a: mgl * float(a @ chi),
        dpotential=lambda a: mgl * chi,
        name="chaplygin_ball",
        fast_pot=dict(pot_kind=1, pot_vec=-mgl * chi),
        fast_con=dict(con_kind=2, F=r * np.eye(3), gvec=lc))
    sys.lagrangian.check_derivatives(6, 3)
    return sys


def chaplygin_sphere(p: ChaplyginBallParams) -> ReducedSystem:
    """Centered ball (l = 0): the gravity torque drops out and the energy
    Omega.I Omega/2 + m|X|^2/2 is conserved."""
    q = ChaplyginBallParams(inertia=p.inertia, m=p.m, g=p.g, r=p.r, l=0.0,
                            chi=p.chi, gamma0=p.gamma0)
    sys = chaplygin_ball(q)
    sys.name = "chaplygin_sphere"
    return sys


# ------------------------------------------------------------- rolling disk

@dataclass
class EulerDiskParams:
    m: float = 1.0
    g: float = 9.81
    r: float = 1.0
    e3: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    gamma0: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    inertia: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("radius must be positive")
        self.e3 = _unit(self.e3, "e3")
        self.gamma0 = _unit(self.gamma0, "gamma0")
        if self.inertia is None:
            # homogeneous flat disk about its symmetry axis e3
            c = self.m * self.r ** 2
            self.inertia = np.diag([c / 4.0, c / 4.0, c / 2.0])
        self.inertia = _as_inertia(self.inertia)
        u = self.gamma0 - (self.gamma0 @ self.e3) * self.e3
        if np.linalg.norm(u) <= constraints.SINGULAR_EPS:
            raise constraints.SingularContact(
                "gamma0 parallel to the disk axis: contact point undefined")


def euler_disk(p: EulerDiskParams) -> ReducedSystem:
    """Flat disk rolling on its rim.  The contact vector s(Gamma) points from
    the center to the lowest rim point; the potential is the center height
    m g Gamma.s(Gamma) = m g r |Gamma - (Gamma.e3) e3|."""
    r, e3, mg = p.r, p.e3, p.m * p.g

    def s(a):
        return constraints.euler_disk_contact(a, r, e3)

    def ds(a, adot):
        return constraints.euler_disk_contact_derivative(a, adot, r, e3)

    sys = _rolling_system(
        p.inertia, p.m,
        rolling_phi=s, dphi=ds,
        # U = mg Gamma.s(Gamma) = mg r |P Gamma|, so dU/dGamma = mg s(Gamma)
        potential=lambda a: mg * float(a @ s(a)),
        dpotential=lambda a: mg * s(a),
        name="euler_disk",
        fast_pot=dict(pot_kind=2, pot_r=r, pot_coeff=mg, e3=e3),
        fast_con=dict(con_kind=3, con_r=r))
    sys.lagrangian.check_derivatives(6, 3)
    return sys


# ----------------------------------------------------------------- registry

@dataclass
class ModelInfo:
    """CLI-facing wiring: build a system and its initial state from a flat
    parameter table (already-parsed config values)."""

    name: str
    build: "callable"
    summary: str
    params: dict


def _vec(table, key, default):
    v = table.get(key, default)
    return np.asarray(v, dtype=float)


def _build_heavy_top(table):
    p = HeavyTopParams(
        inertia=_vec(table, "inertia", [1.0, 1.0, 1.0]),
        m=float(table.get("m", 1.0)), g=float(table.get("g", 9.81)),
        l=float(table.get("l", 1.0)),
        chi=_vec(table, "chi", [0.0, 0.0, 1.0]),
        gamma0=_vec(table, "gamma0", [0.0, 0.0, 1.0]))
    sys = heavy_top(p)
    omega0 = _vec(table, "omega0", [0.0, 0.0, 0.0])
    return sys, ReducedState(t=0.0, xi=omega0, a=p.gamma0)


def _build_suslov_top(table):
    p = SuslovParams(inertia=_vec(table, "inertia", [1.0, 2.0, 3.0]),
                     e=_vec(table, "e", [0.0, 0.0, 1.0]))
    sys = suslov_top(p)
    omega0 = _vec(table, "omega0", [1.0, 0.0, 0.0])
    return sys, sys.initial_state(omega0, np.zeros(0))


def _ball_params(table, force_l=None):
    return ChaplyginBallParams(
        inertia=_vec(table, "inertia", [1.0, 1.0, 1.0]),
        m=float(table.get("m", 1.0)), g=float(table.get("g", 9.81)),
        r=float(table.get("r", 1.0)),
        l=float(table.get("l", 0.0)) if force_l is None else force_l,
        chi=_vec(table, "chi", [0.0, 0.0, 1.0]),
        gamma0=_vec(table, "gamma0", [0.0, 0.0, 1.0]))


def _rolling_state(sys, table, gamma0):
    omega0 = _vec(table, "omega0", [0.0, 0.0, 1.0])
    xi0 = sys.family.basis_matrix(gamma0) @ omega0
    return ReducedState(t=0.0, xi=xi0, a=gamma0)


def _build_chaplygin_ball(table):
    p = _ball_params(table)
    sys = chaplygin_ball(p)
    return sys, _rolling_state(sys, table, p.gamma0)


def _build_chaplygin_sphere(table):
    p = _ball_params(table, force_l=0.0)
    sys = chaplygin_sphere(p)
    return sys, _rolling_state(sys, table, p.gamma0)


def _build_euler_disk(table):
    p = EulerDiskParams(
        m=float(table.get("m", 1.0)), g=float(table.get("g", 9.81)),
        r=float(table.get("r", 1.0)),
        e3=_vec(table, "e3", [0.0, 0.0, 1.0]),
        gamma0=_vec(table, "gamma0", [1.0, 0.0, 0.0]),
        inertia=np.asarray(table["inertia"], float)
                if "inertia" in table else None)
    sys = euler_disk(p)
    return sys, _rolling_state(sys, table, p.gamma0)


_COMMON = {"inertia": "principal moments (3 values) or full 3x3 row-major",
           "omega0": "initial body angular velocity (3 values)"}

REGISTRY = {
    "heavy_top": ModelInfo(
        "heavy_top", _build_heavy_top,
        "Rigid body with a fixed point in gravity on so(3) with advected "
        "vertical: Π̇ = Π×Ω − mgl χ×Γ, "
        "Γ̇ = Γ×Ω, Π = IΩ.",
        {**_COMMON, "m": "mass", "g": "gravity", "l": "pivot-to-center length",
         "chi": "unit body vector to the center of mass",
         "gamma0": "initial vertical direction in body frame (unit)"}),
    "suslov_top": ModelInfo(
        "suslov_top", _build_suslov_top,
        "Rigid body with the nonholonomic constraint Ω·e = 0: "
        "Π̇ − Π×Ω ∈ span{e}; kinetic energy "
        "½Ω·IΩ is conserved.",
        {**_COMMON, "e": "unit constraint normal in the body frame"}),
    "chaplygin_ball": ModelInfo(
        "chaplygin_ball", _build_chaplygin_ball,
        "Ball rolling without slipping, center of mass offset lχ: "
        "rolling constraint X = Ω×(rΓ+lχ) on se(3) with "
        "advected Γ.",
        {**_COMMON, "m": "mass", "g": "gravity", "r": "radius",
         "l": "center-of-mass offset", "chi": "offset direction (unit)",
         "gamma0": "initial vertical in body frame (unit)"}),
    "chaplygin_sphere": ModelInfo(
        "chaplygin_sphere", _build_chaplygin_sphere,
        "Centered rolling ball (offset l = 0); energy "
        "½Ω·IΩ + ½m|X|² is conserved.",
        {**_COMMON, "m": "mass", "g": "gravity", "r": "radius",
         "gamma0": "initial vertical in body frame (unit)"}),
    "euler_disk": ModelInfo(
        "euler_disk", _build_euler_disk,
        "Flat disk rolling on its rim: X = Ω×s(Γ) with "
        "s(Γ) = r(E3×(Γ×E3))/|E3×(Γ×E3)|; "
        "aborts with SingularContact when Γ ∥ E3.",
        {**_COMMON, "m": "mass", "g": "gravity", "r": "radius",
         "e3": "disk symmetry axis (unit)",
         "gamma0": "initial vertical, not parallel to e3 (unit)"}),
}
