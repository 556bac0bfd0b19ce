"""Free stochastic integrals in a random-matrix model.

Increments are independent GUE (semicircular base) or Haar-rotated
quantile matrices (other bases), which become free as N grows.

Run: python3 demos/04_matrix_lab.py   (about a minute)
"""
import numpy as np

from freeito import MatrixModelConfig, OperatorTensor, SimpleBiprocess, catalog
from freeito.biprocess import ONE
from freeito.ito import ito_coeff_closed, ito_coeff_recursive
from freeito.lab import (
    verify_diagonal_measure,
    verify_functional_ito,
    verify_ito_isometry,
    verify_product_formula,
    verify_trace_formula,
)

N = 128
one = SimpleBiprocess([(0, 1, OperatorTensor.identity(N))])

semi = MatrixModelConfig(N=N, steps=32, base=catalog("semicircular"), trials=10, master_seed=1)
poisson = MatrixModelConfig(N=N, steps=32, base=catalog("free_poisson"), trials=10, master_seed=1)

print(verify_ito_isometry(semi, one, one).line())
print(verify_ito_isometry(poisson, one, one).line())
print(verify_trace_formula(poisson, one).line())
print(verify_diagonal_measure(semi, 2).line())

# two-sided integrands: v = 1 (x) diag(b), u = diag(c) (x) 1
v = SimpleBiprocess([(0, 1, OperatorTensor.elementary(ONE, np.linspace(-1, 1, N)))])
u = SimpleBiprocess([(0, 1, OperatorTensor.elementary(np.linspace(0, 1, N), ONE))])
rep = verify_product_formula(semi, 1, 1, v, u)
print(rep.line(), "raw identity error", f"{rep.details['raw_identity_error']:.1e}")
print(verify_functional_ito(semi, [0, 0, 0, 1], one).line())

# the algebra behind the functional formula: closed form against recursion
rng = np.random.default_rng(0)
M = rng.standard_normal((3, 3))
U = [OperatorTensor.elementary(rng.standard_normal((3, 3)), rng.standard_normal((3, 3))) for _ in range(2)]
rec = ito_coeff_recursive(4, U, M)
gap = max(np.abs(ito_coeff_closed(4, m, U, M).dense() - rec[m].dense()).max() for m in range(1, 9))
print("closed form vs recursion, n=4:", f"{gap:.1e}")
