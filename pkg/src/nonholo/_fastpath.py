"""Compiled integration kernels for the built-in models.

The generic steppers in `dynamics` accept arbitrary Python callbacks; that is
too slow for long runs.  Built-in models additionally carry an array encoding
of their right-hand side (structure constants, representation matrices,
constant inertia, a potential tag, a constraint tag) that these numba kernels
consume.  The kernels implement exactly the same equations as the generic
path; the test suite checks agreement between the two.

Potential tags: 0 none, 1 constant dl/da = pot_vec, 2 contact-point potential
with dl/da = -coeff * r * u/|u|, u = a - (a.e3) e3.
Constraint tags: 0 unconstrained, 1 fixed basis, 2 affine rolling
phi(a) = F a + g, 3 contact-point rolling phi(a) = r u/|u|.
"""

import numpy as np
from numba import njit

from .constraints import SingularContact
from .dynamics import NEWTON_MAX_ITER, NEWTON_TOL, NewtonDiverged

STATUS_OK = 0
STATUS_NEWTON = 1
STATUS_CONTACT = 2


@njit(cache=True)
def _contact_norm(e3, a):
    u = a - np.dot(a, e3) * e3
    return np.sqrt(np.dot(u, u))


@njit(cache=True)
def _dl_da(pot_kind, pot_vec, pot_r, pot_coeff, e3, a):
    out = np.zeros(a.shape[0])
    if pot_kind == 1:
        out[:] = pot_vec
    elif pot_kind == 2:
        u = a - np.dot(a, e3) * e3
        nu = np.sqrt(np.dot(u, u))
        out[:] = -(pot_coeff * pot_r / nu) * u
    return out


@njit(cache=True)
def _basis(con_kind, B_fixed, F, gvec, con_r, e3, rep, a, n, d):
    B = np.zeros((n, d))
    if con_kind == 0:
        for i in range(n):
            B[i, i] = 1.0
    elif con_kind == 1:
        B[:, :] = B_fixed
    else:
        if con_kind == 2:
            phi = F @ a + gvec
        else:
            u = a - np.dot(a, e3) * e3
            nu = np.sqrt(np.dot(u, u))
            phi = (con_r / nu) * u
        for i in range(d):
            B[i, i] = 1.0
            B[d:, i] = rep[i] @ phi
    return B


@njit(cache=True)
def _dbasis(con_kind, F, con_r, e3, rep, a, adot, n, d):
    Bd = np.zeros((n, d))
    if con_kind == 2:
        phid = F @ adot
    elif con_kind == 3:
        u = a - np.dot(a, e3) * e3
        ud = adot - np.dot(adot, e3) * e3
        nu = np.sqrt(np.dot(u, u))
        phid = con_r * (ud / nu - u * (np.dot(u, ud) / nu ** 3))
    else:
        return Bd
    for i in range(d):
        Bd[d:, i] = rep[i] @ phid
    return Bd


@njit(cache=True)
def _ad_star(ct, xi, mu):
    n = xi.shape[0]
    out = np.zeros(n)
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(n):
                s += ct[i, j, k] * mu[k]
            out[j] += xi[i] * s
    return out


@njit(cache=True)
def _diamond(rep, v, a):
    n = rep.shape[0]
    out = np.zeros(n)
    for i in range(n):
        out[i] = np.dot(a, rep[i] @ v)
    return out


@njit(cache=True)
def _adot(rep, xi, a):
    out = np.zeros(a.shape[0])
    for i in range(xi.shape[0]):
        out += xi[i] * (rep[i].T @ a)
    return out


@njit(cache=True)
def _contact_ok(con_kind, pot_kind, e3, a):
    if con_kind == 3 or pot_kind == 2:
        return _contact_norm(e3, a) > 1e-8
    return True


@njit(cache=True)
def _force(ct, rep, pot_kind, pot_vec, pot_r, pot_coeff, e3, xi, mu, a, m):
    rhs = _ad_star(ct, xi, mu)
    if m > 0 and pot_kind > 0:
        rhs = rhs + _diamond(rep, _dl_da(pot_kind, pot_vec, pot_r, pot_coeff,
                                         e3, a), a)
    return rhs


@njit(cache=True)
def _deriv(ct, rep, M, pot_kind, pot_vec, pot_r, pot_coeff,
           con_kind, B_fixed, F, gvec, con_r, e3, d, xi, a, n, m):
    """Explicit projected equations: (xidot, adot, c, cdot)."""
    B = _basis(con_kind, B_fixed, F, gvec, con_r, e3, rep, a, n, d)
    c = np.linalg.solve(B.T @ B, B.T @ xi)
    if m > 0:
        adot = _adot(rep, xi, a)
    else:
        adot = np.zeros(0)
    mu = M @ xi
    rhs = _force(ct, rep, pot_kind, pot_vec, pot_r, pot_coeff, e3, xi, mu, a, m)
    Bd = _dbasis(con_kind, F, con_r, e3, rep, a, adot, n, d)
    cdot = np.linalg.solve(B.T @ (M @ B), B.T @ (rhs - M @ (Bd @ c)))
    xidot = B @ cdot + Bd @ c
    return xidot, adot, c, cdot


@njit(cache=True)
def _mid_residual(ct, rep, M, pot_kind, pot_vec, pot_r, pot_coeff,
                  con_kind, B_fixed, F, gvec, con_r, e3, d,
                  xi0, a0, dt, z, n, m):
    r = np.zeros(d + m)
    c1 = z[:d]
    a1 = z[d:]
    ah = 0.5 * (a0 + a1)
    if not (_contact_ok(con_kind, pot_kind, e3, a1)
            and _contact_ok(con_kind, pot_kind, e3, ah)):
        return r, False
    B1 = _basis(con_kind, B_fixed, F, gvec, con_r, e3, rep, a1, n, d)
    xi1 = B1 @ c1
    xih = 0.5 * (xi0 + xi1)
    Bh = _basis(con_kind, B_fixed, F, gvec, con_r, e3, rep, ah, n, d)
    muh = M @ xih
    rhs = _force(ct, rep, pot_kind, pot_vec, pot_r, pot_coeff, e3,
                 xih, muh, ah, m)
    # increment form: keeps the roundoff floor at eps*|mu| for any dt
    r[:d] = Bh.T @ ((M @ xi1 - M @ xi0) - dt * rhs)
    if m > 0:
        r[d:] = (a1 - a0) - dt * _adot(rep, xih, ah)
    return r, True


@njit(cache=True)
def _midpoint_kernel(ct, rep, M, pot_kind, pot_vec, pot_r, pot_coeff,
                     con_kind, B_fixed, F, gvec, con_r, e3, d,
                     xi0, a0, dt, n_steps, tol, max_iter):
    n = xi0.shape[0]
    m = a0.shape[0]
    nz = d + m
    xis = np.zeros((n_steps + 1, n))
    avs = np.zeros((n_steps + 1, m))
    xis[0] = xi0
    avs[0] = a0
    xi = xi0.copy()
    a = a0.copy()
    for k in range(1, n_steps + 1):
        if not _contact_ok(con_kind, pot_kind, e3, a):
            return xis, avs, STATUS_CONTACT, k - 1
        xidot, adot, c, cdot = _deriv(
            ct, rep, M, pot_kind, pot_vec, pot_r, pot_coeff,
            con_kind, B_fixed, F, gvec, con_r, e3, d, xi, a, n, m)
        z = np.empty(nz)
        z[:d] = c + dt * cdot
        z[d:] = a + dt * adot
        r, ok = _mid_residual(ct, rep, M, pot_kind, pot_vec, pot_r, pot_coeff,
                              con_kind, B_fixed, F, gvec, con_r, e3, d,
                              xi, a, dt, z, n, m)
        if not ok:
            return xis, avs, STATUS_CONTACT, k - 1
        converged = False
        for _ in range(max_iter):
            if np.max(np.abs(r)) <= tol:
                converged = True
                break
            J = np.empty((nz, nz))
            for j in range(nz):
                h = 1e-7 * (1.0 + abs(z[j]))
                zp = z.copy()
                zp[j] += h
                rp, okp = _mid_residual(
                    ct, rep, M, pot_kind, pot_vec, pot_r, pot_coeff,
                    con_kind, B_fixed, F, gvec, con_r, e3, d,
                    xi, a, dt, zp, n, m)
                if not okp:
                    return xis, avs, STATUS_CONTACT, k - 1
                J[:, j] = (rp - r) / h
            z = z + np.linalg.solve(J, -r)
            r, ok = _mid_residual(
                ct, rep, M, pot_kind, pot_vec, pot_r, pot_coeff,
                con_kind, B_fixed, F, gvec, con_r, e3, d,
                xi, a, dt, z, n, m)
            if not ok:
                return xis, avs, STATUS_CONTACT, k - 1
            if not np.all(np.isfinite(r)):
                return xis, avs, STATUS_NEWTON, k - 1
        if not converged and np.max(np.abs(r)) > tol:
            return xis, avs, STATUS_NEWTON, k - 1
        a = z[d:].copy()
        B1 = _basis(con_kind, B_fixed, F, gvec, con_r, e3, rep, a, n, d)
        xi = B1 @ z[:d]
        xis[k] = xi
        avs[k] = a
    return xis, avs, STATUS_OK, n_steps


@njit(cache=True)
def _rk4_kernel(ct, rep, M, pot_kind, pot_vec, pot_r, pot_coeff,
                con_kind, B_fixed, F, gvec, con_r, e3, d,
                xi0, a0, dt, n_steps, store_every):
    n = xi0.shape[0]
    m = a0.shape[0]
    n_kept = n_steps // store_every
    xis = np.zeros((n_kept + 1, n))
    avs = np.zeros((n_kept + 1, m))
    times = np.zeros(n_kept + 1)
    xis[0] = xi0
    avs[0] = a0
    xi = xi0.copy()
    a = a0.copy()
    kept = 0
    for k in range(1, n_steps + 1):
        if not (_contact_ok(con_kind, pot_kind, e3, a)):
            return xis, avs, times, STATUS_CONTACT, kept
        k1x, k1a, _, _ = _deriv(ct, rep, M, pot_kind, pot_vec, pot_r,
                                pot_coeff, con_kind, B_fixed, F, gvec,
                                con_r, e3, d, xi, a, n, m)
        k2x, k2a, _, _ = _deriv(ct, rep, M, pot_kind, pot_vec, pot_r,
                                pot_coeff, con_kind, B_fixed, F, gvec,
                                con_r, e3, d, xi + 0.5 * dt * k1x,
                                a + 0.5 * dt * k1a, n, m)
        k3x, k3a, _, _ = _deriv(ct, rep, M, pot_kind, pot_vec, pot_r,
                                pot_coeff, con_kind, B_fixed, F, gvec,
                                con_r, e3, d, xi + 0.5 * dt * k2x,
                                a + 0.5 * dt * k2a, n, m)
        k4x, k4a, _, _ = _deriv(ct, rep, M, pot_kind, pot_vec, pot_r,
                                pot_coeff, con_kind, B_fixed, F, gvec,
                                con_r, e3, d, xi + dt * k3x,
                                a + dt * k3a, n, m)
        xi = xi + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        a = a + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        if k % store_every == 0:
            kept += 1
            xis[kept] = xi
            avs[kept] = a
            times[kept] = k * dt
    return xis, avs, times, STATUS_OK, kept


def _unpack(fd):
    return (fd["ct"], fd["rep"], fd["M"], fd["pot_kind"], fd["pot_vec"],
            fd["pot_r"], fd["pot_coeff"], fd["con_kind"], fd["B_fixed"],
            fd["F"], fd["gvec"], fd["con_r"], fd["e3"], fd["d"])


def encode(ct, rep, M, d, pot_kind=0, pot_vec=None, pot_r=0.0, pot_coeff=0.0,
           con_kind=0, B_fixed=None, F=None, gvec=None, con_r=0.0, e3=None):
    """Array encoding of a built-in model, consumable by the kernels."""
    n = M.shape[0]
    m = rep.shape[1] if rep.ndim == 3 else 0
    fd = {
        "ct": np.ascontiguousarray(ct, dtype=float),
        "rep": np.ascontiguousarray(rep, dtype=float).reshape(n, m, m),
        "M": np.ascontiguousarray(M, dtype=float),
        "pot_kind": int(pot_kind),
        "pot_vec": np.zeros(m) if pot_vec is None else np.asarray(pot_vec, float),
        "pot_r": float(pot_r),
        "pot_coeff": float(pot_coeff),
        "con_kind": int(con_kind),
        "B_fixed": np.zeros((n, d)) if B_fixed is None
                   else np.ascontiguousarray(B_fixed, dtype=float),
        "F": np.zeros((m, m)) if F is None else np.asarray(F, float),
        "gvec": np.zeros(m) if gvec is None else np.asarray(gvec, float),
        "con_r": float(con_r),
        "e3": np.zeros(m) if e3 is None else np.asarray(e3, float),
        "d": int(d),
    }
    return fd


def _raise_for(status, k, dt, partial=None):
    if status == STATUS_OK:
        return
    if status == STATUS_CONTACT:
        exc = SingularContact(f"contact direction degenerate at t={k * dt:.6g}")
    else:
        exc = NewtonDiverged(f"midpoint solve failed at t={k * dt:.6g}")
    exc.partial_arrays = partial
    raise exc


def midpoint_run(fast_data, xi0, a0, dt, n_steps,
                 tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    args = _unpack(fast_data)
    xis, avs, status, k = _midpoint_kernel(
        *args, np.asarray(xi0, float), np.asarray(a0, float), float(dt),
        int(n_steps), float(tol), int(max_iter))
    _raise_for(status, k + 1, dt, (xis[:k + 1], avs[:k + 1]))
    return xis, avs


def rk4_run(fast_data, xi0, a0, dt, n_steps, store_every=1):
    args = _unpack(fast_data)
    xis, avs, times, status, kept = _rk4_kernel(
        *args, np.asarray(xi0, float), np.asarray(a0, float), float(dt),
        int(n_steps), int(store_every))
    _raise_for(status, kept * store_every + 1, dt)
    return xis, avs, times


def derivative(fast_data, xi, a):
    """(xidot, adot) from the compiled explicit assembly (for tests)."""
    args = _unpack(fast_data)
    n = len(xi)
    xidot, adot, _, _ = _deriv(*args, np.asarray(xi, float),
                               np.asarray(a, float), n, len(a))
    return xidot, adot
