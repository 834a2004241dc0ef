"""Coefficient algebra: products, ratios, and the hyperbolicity certificate.

A field z(xi) truncated to the basis is just a coefficient vector zhat;
multiplying two fields and re-projecting is the linear map P(ahat) bhat.
Ratios invert that map, and positive definiteness of P(hhat) is exactly what
keeps the Galerkin shallow-water system hyperbolic.
"""

import numpy as np

from sgswe import (
    DistributionSpec,
    build_basis,
    certify_hyperbolic,
    galerkin_divide,
    galerkin_product,
    p3_exact_rule,
    p_matrix,
    tensor_index_set,
    triple_product_tensor,
)

basis = build_basis(DistributionSpec.uniform(), tensor_index_set([3]))
rule = p3_exact_rule(basis)
tensor = triple_product_tensor(basis, rule)

rng = np.random.default_rng(1)
a = np.array([1.5, 0.3, -0.1, 0.05])
b = rng.standard_normal(4)

# The product operator is symmetric in its arguments.
ab = galerkin_product(tensor, a, b)
ba = galerkin_product(tensor, b, a)
print("P(a) b == P(b) a:", np.abs(ab - ba).max())

# Division is the inverse problem: solve P(a) x = b.
x = galerkin_divide(tensor, a, ab)
print("divide(a, a*b) recovers b to", np.abs(x - b).max())

# P of a constant field is that constant times the identity.
print("P((2,0,0,0)) =\n", p_matrix(tensor, np.array([2.0, 0, 0, 0])))

# Hyperbolicity certificate: water height positive at the quadrature nodes
# forces P(h) positive definite (and in particular a positive mean).
h_good = np.array([1.0, 0.2, 0.1, -0.05])
h_bad = np.array([0.3, 0.9, 0.0, 0.0])  # dips negative for small xi
for h in (h_good, h_bad):
    cert = certify_hyperbolic(tensor, basis, rule, h)
    print(
        f"h = {h}: node-positive = {cert.pointwise} "
        f"(min node value {cert.min_node_value:+.4f}), "
        f"P(h) > 0 = {cert.pd} (min eigenvalue {cert.min_eigenvalue:+.4f})"
    )
