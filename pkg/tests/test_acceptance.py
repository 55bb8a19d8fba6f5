"""End-to-end acceptance suite.

Each test covers one headline guarantee, prints a single PASS/FAIL line with
the measured numbers, and asserts the stated tolerance.  Timed tests warm the
compiled kernels first so they measure the integrator, not compilation.
"""

import time

import numpy as np
import pytest

from nonholo import cli, constraints, diracgeom, dynamics, liealg, linalg, models
from nonholo.dynamics import ReducedState

E1, E2, E3 = np.eye(3)


def _report(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'}: {name} ({detail})", flush=True)
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module", autouse=True)
def _warm_kernels():
    # first call per model triggers JIT compilation; do it outside the timers
    for name in models.REGISTRY:
        sys, st = models.REGISTRY[name].build({})
        dynamics.integrate(sys, st, 2e-3, 1e-3)
    ball, st = models.REGISTRY["chaplygin_ball"].build({})
    dynamics.oracle_rk4(ball, st, 1e-3, dt_fine=1e-3)


def test_dirac_axiom_suite():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst_accept = 0.0
    for n in (2, 3, 4, 6):
        for _ in range(25):
            omega = rng.standard_normal((n, n))
            omega = omega - omega.T
            k = int(rng.integers(1, n + 1))
            delta = linalg.SubspaceBasis(n, linalg.orthonormalize(
                rng.standard_normal((n, k))))
            ok, res = diracgeom.is_dirac(
                diracgeom.induced_dirac_basis(omega, delta))
            assert ok
            worst_accept = max(worst_accept, res)
    best_reject = np.inf
    rejected = 0
    for _ in range(100):
        n = int(rng.choice([2, 3, 4, 6]))
        cols = rng.standard_normal((2 * n, n))
        ok, res = diracgeom.is_dirac(linalg.SubspaceBasis(2 * n, cols),
                                     tol=1e-6)
        if not ok and res > 1e-6:
            rejected += 1
            best_reject = min(best_reject, res)
    elapsed = time.perf_counter() - start
    ok = (worst_accept <= 1e-10 and rejected == 100 and elapsed < 5.0)
    _report("Dirac axiom suite", ok,
            f"accept residual {worst_accept:.2e}, rejected {rejected}/100 "
            f"with pairing residual >= {best_reject:.2e}, {elapsed:.2f} s")


def test_pairing_definition_equivalence():
    rng = np.random.default_rng(7)
    worst = 0.0
    for alg in (liealg.so3(), liealg.se3()):
        for _ in range(1000):
            xi, mu, zeta = rng.standard_normal((3, alg.dim))
            lhs = alg.pair(alg.ad_star(xi, mu), zeta)
            rhs = alg.pair(mu, alg.bracket(xi, zeta))
            worst = max(worst, abs(lhs - rhs))
    for rep in (liealg.so3_on_r3(), models.se3_on_r3()):
        dim, m = rep.matrices.shape[0], rep.fiber_dim
        for _ in range(1000):
            xi = rng.standard_normal(dim)
            v, a = rng.standard_normal((2, m))
            worst = max(worst, abs(np.dot(rep.diamond(v, a), xi)
                                   - np.dot(a, rep.act(xi, v))))
            worst = max(worst, abs(np.dot(rep.dual_action(xi, a), v)
                                   + np.dot(a, rep.act(xi, v))))
    sdp = liealg.se3()  # so(3) acting on R^3
    for _ in range(1000):
        z, w, y = rng.standard_normal((3, 6))
        lhs = np.dot(sdp.sdp_ad_star(z, w), y)
        rhs = np.dot(w, sdp.bracket(z, y))
        worst = max(worst, abs(lhs - rhs))
    ok = worst <= 1e-12
    _report("pairing-definition equivalence", ok, f"max residual {worst:.2e}")


def test_heavy_top():
    sys = models.heavy_top(models.HeavyTopParams(
        inertia=np.array([2.0, 2.0, 1.0]), m=1.0, g=9.81, l=0.3))
    # upright spin: Omega, Gamma and chi all along e3
    eq = ReducedState(0.0, 5.0 * E3, E3.copy())
    traj = dynamics.integrate(sys, eq, 1.0, 1e-2, diagnostics=False)
    step_change = max(
        np.max(np.abs(np.diff(traj.xi, axis=0))),
        np.max(np.abs(np.diff(traj.a, axis=0))))
    # generic tilted run
    st = ReducedState(0.0, np.array([0.2, -0.1, 2.0]),
                      np.array([0.0, np.sin(0.4), np.cos(0.4)]))
    start = time.perf_counter()
    traj = dynamics.integrate(sys, st, 10.0, 1e-3)
    gs = dynamics.reconstruct(traj)
    elapsed = time.perf_counter() - start
    e = traj.energy
    drift = np.max(np.abs(e - e[0])) / max(1.0, abs(e[0]))
    gnorm = np.linalg.norm(traj.a, axis=1)
    gamma_drift = np.max(np.abs(gnorm - gnorm[0]))
    recon = max(np.max(np.abs(g.rotation.T @ st.a - traj.a[k]))
                for k, g in enumerate(gs))
    ok = (step_change <= 1e-13 and drift <= 1e-8 and gamma_drift <= 1e-10
          and recon <= 1e-4 and elapsed < 2.0)
    _report("heavy top", ok,
            f"equilibrium step change {step_change:.2e}, energy drift "
            f"{drift:.2e}, |Gamma| drift {gamma_drift:.2e}, reconstruction "
            f"{recon:.2e}, {elapsed:.2f} s")


def test_suslov_top():
    sys = models.suslov_top(models.SuslovParams(
        inertia=np.array([[2.0, 0.4, 0.1], [0.4, 1.5, 0.0], [0.1, 0.0, 1.0]])))
    st = sys.initial_state(np.array([1.0, -0.6, 0.0]), np.zeros(0))
    traj = dynamics.integrate(sys, st, 10.0, 1e-3)
    con = np.max(np.abs(traj.xi[:, 2]))  # Omega . e with e = e3
    e = traj.energy
    drift = np.max(np.abs(e - e[0]))
    dirac = np.max(dynamics.certify_trajectory(sys, traj))
    ok = con == 0.0 and drift <= 1e-9 and dirac <= 1e-8
    _report("Suslov top", ok,
            f"constraint residual {con:.1e}, kinetic energy drift "
            f"{drift:.2e}, Dirac residual {dirac:.2e}")


def test_chaplygin_ball():
    p = models.ChaplyginBallParams(inertia=np.array([1.0, 2.0, 3.0]),
                                   m=2.0, g=9.81, r=0.8, l=0.3)
    sys = models.chaplygin_ball(p)
    gamma0 = np.array([0.0, 0.6, 0.8])
    xi0 = sys.family.basis_matrix(gamma0) @ np.array([0.4, -0.2, 1.5])
    st = ReducedState(0.0, xi0, gamma0)
    start = time.perf_counter()
    mid = dynamics.integrate(sys, st, 5.0, 1e-3)
    ref = dynamics.oracle_rk4(sys, st, 5.0, dt_fine=1e-5, store_every=100)
    elapsed = time.perf_counter() - start
    # reference stores every 100 fine steps, so samples line up with dt=1e-3
    assert len(ref) == len(mid)
    gap = max(np.max(np.abs(mid.xi - ref.xi)), np.max(np.abs(mid.a - ref.a)))
    # pointwise residual of the rearranged rolling-ball momentum balance
    closed = 0.0
    for k in range(0, len(mid), 100):
        gamma, xi = mid.a[k], mid.xi[k]
        omega, X = xi[:3], xi[3:]
        phi = p.r * gamma + p.l * p.chi
        xidot, adot, _, _ = dynamics.eps_rhs(sys, xi, gamma)
        dphi = p.r * adot
        lhs = (p.inertia @ xidot[:3] + np.cross(dphi, p.m * X)
               + np.cross(phi, p.m * xidot[3:])
               + np.cross(omega, p.inertia @ omega + np.cross(phi, p.m * X)))
        rhs = (-p.m * p.g * p.l * np.cross(p.chi, gamma)
               + np.cross(dphi, p.m * X))
        closed = max(closed, float(np.max(np.abs(lhs - rhs))))
    ok = closed <= 1e-8 and gap <= 1e-5 and elapsed < 30.0
    _report("Chaplygin ball", ok,
            f"closed-form residual {closed:.2e}, midpoint-vs-RK4 gap "
            f"{gap:.2e}, {elapsed:.2f} s")


def test_euler_disk():
    p = models.EulerDiskParams(m=1.0, g=9.81, r=1.0)
    sys = models.euler_disk(p)
    B = sys.family.basis_matrix(p.gamma0)
    st = ReducedState(0.0, B @ np.array([0.05, 0.1, 3.0]), p.gamma0)
    traj = dynamics.integrate(sys, st, 2.0, 1e-4)
    contact = max(abs(np.linalg.norm(
        constraints.euler_disk_contact(a, p.r, p.e3)) - p.r)
        for a in traj.a[::50])
    e = traj.energy
    drift = np.max(np.abs(e - e[0])) / max(1.0, abs(e[0]))
    flat_raises = 0
    for _ in range(2):  # deterministic: flat start always refused
        try:
            models.EulerDiskParams(m=1.0, g=9.81, r=1.0, gamma0=E3)
        except constraints.SingularContact:
            flat_raises += 1
    ok = contact <= 1e-12 and drift <= 1e-7 and flat_raises == 2
    _report("Euler disk", ok,
            f"| |s|-r | {contact:.2e}, energy drift {drift:.2e}, "
            f"flat start raised {flat_raises}/2")


def test_legendre_equivalence():
    worst = 0.0
    ht = models.heavy_top(models.HeavyTopParams(
        inertia=np.array([2.0, 2.0, 1.0]), l=0.3))
    st = ReducedState(0.0, np.array([0.2, -0.1, 2.0]),
                      np.array([0.0, np.sin(0.3), np.cos(0.3)]))
    cs = models.chaplygin_sphere(models.ChaplyginBallParams(
        inertia=np.array([1.0, 2.0, 3.0]), m=2.0, g=9.81, r=0.8))
    xi0 = cs.family.basis_matrix(E3) @ np.array([0.5, 0.3, 2.0])
    st2 = ReducedState(0.0, xi0, E3.copy())
    for sys, s0 in ((ht, st), (cs, st2)):
        ham = dynamics.legendre(sys.lagrangian)
        eps = dynamics.integrate(sys, s0, 5.0, 1e-3, diagnostics=False)
        lps = dynamics.lps_integrate(sys, ham, s0, 5.0, 1e-3)
        worst = max(worst, np.max(np.abs(eps.xi - lps.xi)),
                    np.max(np.abs(eps.a - lps.a)))
    ok = worst <= 1e-6
    _report("Legendre equivalence", ok, f"max pointwise gap {worst:.2e}")


def test_stage_two_certification():
    worst = 0.0
    for name in ("heavy_top", "chaplygin_ball", "chaplygin_sphere",
                 "euler_disk"):
        sys, st = models.REGISTRY[name].build({"omega0": [0.3, 0.2, 1.5]})
        traj = dynamics.integrate(sys, st, 1.0, 1e-3)
        worst = max(worst, np.max(
            dynamics.certify_trajectory(sys, traj, stage_two=True)))
    ok = worst <= 1e-8
    _report("stage-two Dirac certification", ok,
            f"max five-clause residual {worst:.2e}")


def test_derivative_checks():
    rng = np.random.default_rng(99)
    systems = [
        models.heavy_top(models.HeavyTopParams(
            inertia=np.array([1.0, 2.0, 3.0]), l=0.4)),
        models.suslov_top(models.SuslovParams(
            inertia=np.array([[2.0, 0.3, 0.0], [0.3, 1.5, 0.0],
                              [0.0, 0.0, 1.0]]))),
        models.chaplygin_ball(models.ChaplyginBallParams(
            inertia=np.array([1.0, 2.0, 3.0]), m=2.0, r=0.8, l=0.2)),
        models.chaplygin_sphere(models.ChaplyginBallParams(
            inertia=np.array([1.0, 2.0, 3.0]), m=2.0, r=0.8)),
        models.euler_disk(models.EulerDiskParams(m=1.5, g=9.81, r=0.5)),
    ]
    checked = 0
    for sys in systems:
        sys.lagrangian.check_derivatives(sys.algebra.dim, sys.fiber_dim,
                                         rng=rng, n_points=100, tol=1e-5)
        checked += 1
    ok = checked == len(systems)
    _report("derivative checks", ok,
            f"{checked} models x 100 random points at 1e-5")


def test_cli_determinism(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("""\
[model]
name = "heavy_top"
inertia = [2.0, 2.0, 1.0]
l = 0.3
omega0 = [0.2, -0.1, 2.0]
gamma0 = [0.0, 0.38941834230865, 0.921060994002885]

[integrator]
dt = 1e-3
t_final = 1.0
""")
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    c1 = cli.main(["run", str(cfg), "--output", str(out1)])
    c2 = cli.main(["run", str(cfg), "--output", str(out2)])
    identical = out1.read_bytes() == out2.read_bytes()
    ok = c1 == c2 == cli.EXIT_OK and identical
    _report("CLI determinism", ok,
            f"exit codes {c1},{c2}, byte-identical={identical}")
