"""Galerkin shallow-water system: fluxes, source, Jacobians, wave speeds.

State vector Uhat = (hhat, qxhat, qyhat) of length 3K.  The nonlinear terms
(qx)^2/h, (qy)^2/h and qx qy/h are closed with Galerkin division; the mixed
term is closed asymmetrically -- the x-flux uses P(qx) P^-1(h) qy while the
y-flux uses P(qy) P^-1(h) qx -- which is what makes the system hyperbolic
whenever P(h) is positive definite.
"""

import numpy as np

from .galerkin import galerkin_divide, galerkin_product, p_matrix


class NonHyperbolicStateError(RuntimeError):
    """A state failed a hyperbolicity requirement the scheme should maintain.

    Reaching this during a solver run is a bug signal, not a recoverable
    condition: the time stepping is designed so certified states stay
    certified.
    """


def velocity_pce(tensor, h, q):
    """Velocity coefficients u = P^-1(h) q (raises if P(h) is near singular)."""
    return galerkin_divide(tensor, h, q)


def flux_x(tensor, h, qx, qy, g):
    """x-direction flux (qx; P(qx)P^-1(h)qx + g/2 P(h)h; P(qx)P^-1(h)qy)."""
    u = galerkin_divide(tensor, h, qx)
    v = galerkin_divide(tensor, h, qy)
    f2 = galerkin_product(tensor, qx, u) + 0.5 * g * galerkin_product(tensor, h, h)
    f3 = galerkin_product(tensor, qx, v)
    return np.concatenate([np.asarray(qx), f2, f3], axis=-1)


def flux_y(tensor, h, qx, qy, g):
    """y-direction flux (qy; P(qy)P^-1(h)qx; P(qy)P^-1(h)qy + g/2 P(h)h)."""
    u = galerkin_divide(tensor, h, qx)
    v = galerkin_divide(tensor, h, qy)
    g2 = galerkin_product(tensor, qy, u)
    g3 = galerkin_product(tensor, qy, v) + 0.5 * g * galerkin_product(tensor, h, h)
    return np.concatenate([np.asarray(qy), g2, g3], axis=-1)


def source(tensor, h, bx, by, g):
    """Topography source (0; -g P(h) bx; -g P(h) by) for bottom slopes bx, by."""
    s2 = -g * galerkin_product(tensor, h, bx)
    s3 = -g * galerkin_product(tensor, h, by)
    return np.concatenate([np.zeros_like(s2), s2, s3], axis=-1)


def _jacobian_blocks(tensor, h, q_dir):
    """Blocks shared by both Jacobians: P(h) and P(q)P^-1(h)."""
    ph = p_matrix(tensor, h)
    pq = p_matrix(tensor, q_dir)
    # P(q) P^-1(h) = (P^-1(h) P(q))^T since both factors are symmetric
    qp = np.linalg.solve(ph, pq).T
    return ph, qp


def jacobian_x(tensor, h, qx, qy, g):
    """Flux Jacobian dF/dU as a 3K x 3K matrix (single state)."""
    k = np.asarray(h).shape[-1]
    u = galerkin_divide(tensor, h, qx)
    v = galerkin_divide(tensor, h, qy)
    ph, qp = _jacobian_blocks(tensor, h, qx)
    pu = p_matrix(tensor, u)
    pv = p_matrix(tensor, v)
    eye = np.eye(k)
    zero = np.zeros((k, k))
    return np.block([
        [zero, eye, zero],
        [g * ph - qp @ pu, qp + pu, zero],
        [-qp @ pv, pv, qp],
    ])


def jacobian_y(tensor, h, qx, qy, g):
    """Flux Jacobian dG/dU as a 3K x 3K matrix (single state)."""
    k = np.asarray(h).shape[-1]
    u = galerkin_divide(tensor, h, qx)
    v = galerkin_divide(tensor, h, qy)
    ph, qp = _jacobian_blocks(tensor, h, qy)
    pu = p_matrix(tensor, u)
    pv = p_matrix(tensor, v)
    eye = np.eye(k)
    zero = np.zeros((k, k))
    return np.block([
        [zero, zero, eye],
        [-qp @ pu, qp, pu],
        [g * ph - qp @ pv, zero, qp + pv],
    ])


def _real_eigenvalues(mat, label):
    lam = np.linalg.eigvals(mat)
    scale = max(1.0, np.abs(lam.real).max())
    if np.abs(lam.imag).max() > 1e-9 * scale:
        raise NonHyperbolicStateError(
            f"complex eigenvalues in {label}: state is not hyperbolic"
        )
    return lam.real


def wave_speed_bounds(tensor, h, qx, qy, g, direction):
    """Extreme eigenvalues of the directional flux Jacobian.

    Uses the block reduction: the full 3K x 3K Jacobian shares its spectrum
    with the leading 2K x 2K block plus the K x K corner block P(q)P^-1(h),
    so only those two are eigensolved.  Agrees with a full-matrix eigensolve
    to roundoff on certified states.
    """
    k = np.asarray(h).shape[-1]
    if direction == "x":
        q_dir, vel = qx, galerkin_divide(tensor, h, qx)
    elif direction == "y":
        q_dir, vel = qy, galerkin_divide(tensor, h, qy)
    else:
        raise ValueError("direction must be 'x' or 'y'")
    ph, qp = _jacobian_blocks(tensor, h, q_dir)
    pvel = p_matrix(tensor, vel)
    eye = np.eye(k)
    zero = np.zeros((k, k))
    leading = np.block([
        [zero, eye],
        [g * ph - qp @ pvel, qp + pvel],
    ])
    lam = np.concatenate([
        _real_eigenvalues(leading, f"{direction}-Jacobian leading block"),
        _real_eigenvalues(qp, f"{direction}-Jacobian corner block"),
    ])
    return float(lam.min()), float(lam.max())


def symmetrized_jacobian(tensor, h, qx, qy, n, g):
    """Symmetric matrix similar to n_x dF/dU + n_y dG/dU.

    Requires P(h) strictly positive definite; its existence proves the
    directional Jacobian has a real spectrum.
    """
    nx, ny = float(n[0]), float(n[1])
    ph = p_matrix(tensor, h)
    w, vecs = np.linalg.eigh(ph)
    if w.min() <= 0.0:
        raise ValueError("P(h) is not positive definite")
    e_mat = np.sqrt(g) * (vecs * np.sqrt(w)) @ vecs.T
    e_inv = (vecs / np.sqrt(g * w)) @ vecs.T
    u = galerkin_divide(tensor, h, qx)
    v = galerkin_divide(tensor, h, qy)
    a_t = e_inv @ (g * p_matrix(tensor, qx)) @ e_inv
    c_t = e_inv @ (g * p_matrix(tensor, qy)) @ e_inv
    b_t = p_matrix(tensor, u)
    d_t = p_matrix(tensor, v)
    j11 = 2.0 * e_mat + nx * (b_t + a_t) + ny * (d_t + c_t)
    j13 = nx * (b_t - a_t) + ny * (d_t - c_t)
    j22 = 2.0 * (nx * a_t + ny * c_t)
    j33 = -2.0 * e_mat + nx * (b_t + a_t) + ny * (d_t + c_t)
    k = ph.shape[-1]
    zero = np.zeros((k, k))
    return 0.5 * np.block([
        [j11, zero, j13],
        [zero, j22, zero],
        [j13, zero, j33],
    ])


__all__ = [
    "NonHyperbolicStateError",
    "flux_x",
    "flux_y",
    "jacobian_x",
    "jacobian_y",
    "source",
    "symmetrized_jacobian",
    "velocity_pce",
    "wave_speed_bounds",
]
