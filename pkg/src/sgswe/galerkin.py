"""Galerkin algebra on PCE coefficient vectors.

A field z in P_Lambda is identified with its coefficient vector zhat of
length K.  Multiplication by z, projected back onto P_Lambda, is the linear
map P(zhat) = sum_k zhat_k M_k built from the triple-product tensor
(M_k)_{lm} = <phi_k, phi_l phi_m>.  These operators are the algebraic
backbone of the Galerkin shallow-water system: products, ratios (linear
solves), matrix square roots, and the positive-definiteness certificate for
the water-height operator.
"""

from dataclasses import dataclass

import numpy as np

from .basis import p3_exact_rule


class SingularOperatorError(np.linalg.LinAlgError):
    """A Galerkin operator P(a) is singular or numerically rank deficient."""


def triple_product_tensor(basis, rule=None):
    """Tensor c[k, l, m] = <phi_k, phi_l phi_m> as a (K, K, K) array.

    Computed by quadrature with a rule exact on triple products, so the
    entries are exact up to roundoff.  Fully symmetric in all three indices;
    c[0] is the identity because phi_1 == 1.
    """
    if rule is None:
        rule = p3_exact_rule(basis)
    phi = basis.evaluate(rule.nodes)  # (M, K)
    tensor = np.einsum("mk,ml,mn,m->kln", phi, phi, phi, rule.weights)
    # symmetrize the trailing axes exactly; mathematically the tensor is
    # fully symmetric, but float products are not associative
    return 0.5 * (tensor + tensor.transpose(0, 2, 1))


def p_matrix(tensor, z):
    """Galerkin multiplication operator P(z) = sum_k z_k M_k.

    ``z`` may be batched with shape (..., K); the result has shape (..., K, K)
    and is symmetric in its trailing axes.
    """
    return np.einsum("...k,klm->...lm", np.asarray(z), tensor)


def galerkin_product(tensor, a, b):
    """Coefficients of the pseudo-spectral product, P(a) b = P(b) a."""
    return np.einsum("...k,...l,klm->...m", np.asarray(a), np.asarray(b), tensor,
                     optimize=True)


def galerkin_divide(tensor, a, b, cond_cutoff=1e-12):
    """Solve P(a) x = b, the K-term closure for the ratio b / a.

    Raises
    ------
    SingularOperatorError
        If P(a) is singular or has condition number beyond 1 / cond_cutoff.
        Callers inside the finite-volume scheme must use the desingularized
        velocity path instead of catching this.
    """
    pa = p_matrix(tensor, a)
    w = np.linalg.eigvalsh(pa)
    wmax = np.abs(w).max(axis=-1)
    wmin = np.abs(w).min(axis=-1)
    if np.any(wmax == 0.0) or np.any(wmin <= cond_cutoff * wmax):
        raise SingularOperatorError("P(a) is singular or near-singular")
    return np.linalg.solve(pa, np.asarray(b)[..., None])[..., 0]


def sqrt_pd(mat):
    """Unique symmetric positive definite square root of an SPD matrix."""
    mat = np.asarray(mat)
    w, v = np.linalg.eigh(mat)
    if np.any(w <= 0.0):
        raise ValueError("matrix is not positive definite")
    root = (v * np.sqrt(w)[..., None, :]) @ np.swapaxes(v, -1, -2)
    return 0.5 * (root + np.swapaxes(root, -1, -2))


@dataclass(frozen=True)
class HyperbolicityCertificate:
    """Positive-definiteness and pointwise-positivity certificates for h.

    ``pointwise`` (h positive at all quadrature nodes) implies ``pd``
    (P(h) positive definite) whenever the rule is exact on triple products.
    """

    pd: bool
    min_eigenvalue: float
    pointwise: bool
    min_node_value: float


def certify_hyperbolic(tensor, basis, rule, h):
    """Certify positive definiteness of P(h) and node positivity of h."""
    h = np.asarray(h)
    w = np.linalg.eigvalsh(p_matrix(tensor, h))
    phi = basis.evaluate(rule.nodes)  # (M, K)
    node_vals = phi @ h
    min_eig = float(w.min())
    min_node = float(node_vals.min())
    return HyperbolicityCertificate(
        pd=min_eig > 0.0,
        min_eigenvalue=min_eig,
        pointwise=min_node > 0.0,
        min_node_value=min_node,
    )
