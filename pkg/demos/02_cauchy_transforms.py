"""Cauchy transforms, densities and the complex Burgers equation.

Run: python3 demos/02_cauchy_transforms.py
"""
import numpy as np

from freeito import catalog, cauchy_transform, cdf, density, pde_residual, quantiles, verify_functional_relation
from freeito.transforms import pde_convergence

semi, mp = catalog("semicircular"), catalog("free_poisson")

print("formal check G(1/z + R(z)) = z:", verify_functional_relation(semi, 12), verify_functional_relation(mp, 12))

z = np.array([3j, 1 + 1j, -2 + 0.5j])
print("G_semi:", np.round(cauchy_transform(semi, z), 6))

xs = np.linspace(-2.5, 2.5, 11)
print("semicircle density:", np.round(density(semi, xs), 5))
xs = np.linspace(0.25, 4.25, 9)
print("Marchenko-Pastur density:", np.round(density(mp, xs), 5))

# the distribution function comes from a contour integral, so atoms are seen
half = catalog("free_poisson", rate=0.5)
print("free Poisson(1/2): F(-0.01), F(0.01) =", np.round(cdf(half, np.array([-0.01, 0.01])), 4))

print("quantiles of the semicircle, N=8:", np.round(quantiles(semi, 8), 5))

# G_t(z) solves d_t G + R(G) d_z G = 0; central differences are O(h^2)
print("semicircle PDE residual at z=2i, t=1:", f"{pde_residual(semi, 2j, 1.0, 1e-4):.2e}")
steps, residuals, orders = pde_convergence(mp, 1 + 1j, 1.0, 1e-2)
for h, res in zip(steps, residuals):
    print(f"  free Poisson h={h:.4f} residual {res:.3e}")
print("  observed orders:", np.round(orders, 3))
