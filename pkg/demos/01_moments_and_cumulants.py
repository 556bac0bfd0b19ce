"""Noncrossing partitions and the moment-cumulant correspondence.

Run: python3 demos/01_moments_and_cumulants.py
"""
from fractions import Fraction

from freeito import (
    CumulantSequence,
    catalan,
    catalog,
    cumulants_from_moments,
    enumerate_noncrossing,
    moments_from_cumulants,
    semigroup_cumulants,
)

# NC(4): fourteen partitions, the one crossing partition {1,3},{2,4} is absent
for p in enumerate_noncrossing(4):
    print(p)
print("counts:", [len(enumerate_noncrossing(n)) for n in range(1, 9)])
print("Catalan:", [catalan(n) for n in range(1, 9)])

# a semicircular law has only r_2; its even moments are Catalan numbers
semi = catalog("semicircular")
print("semicircle moments:", [str(m) for m in moments_from_cumulants(semi, 10)])

# free Poisson: every cumulant equals the rate
for rate in (Fraction(1, 2), 1, 2):
    m = moments_from_cumulants(catalog("free_poisson", rate=rate), 5)
    print(f"free Poisson rate {rate}:", [str(x) for x in m])

# the semigroup mu_t just scales cumulants, so m_4(t) / t tends to r_4
r = catalog("free_poisson", rate=3)
for e in (2, 6, 10):
    t = Fraction(1, 2**e)
    m4 = moments_from_cumulants(semigroup_cumulants(r, t), 4)[4]
    print(f"t = 2^-{e}: m_4(t)/t = {float(m4 / t):.8f}")

# exact roundtrip with arbitrary rationals
r = CumulantSequence([Fraction(1, 3), -2, Fraction(5, 7), 0, 1])
back = cumulants_from_moments(moments_from_cumulants(r, 5), 5)
print("roundtrip exact:", back.take(5) == r.take(5))
