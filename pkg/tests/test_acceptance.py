"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.  Criterion 8 is the
slow one (several minutes on one core).
"""

import json
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from freeito import cli
from freeito.biprocess import ONE, OperatorTensor, distance, scale_of
from freeito.cumulants import (
    CumulantSequence,
    catalog,
    cumulants_from_moments,
    moments_from_cumulants,
)
from freeito.ito import ito_coeff_closed, ito_coeff_recursive
from freeito.lab import (
    MatrixModelConfig,
    SimpleBiprocess,
    convergence_trend,
    verify_diagonal_measures,
    verify_functional_ito,
    verify_ito_isometry,
    verify_product_formula,
    verify_trace_formula,
)
from freeito.partitions import catalan, enumerate_noncrossing, iter_noncrossing_rgs
from freeito.scalar import (
    StepFunction,
    bdg_check,
    integral_moments,
    lp_power,
    moment_flow,
    mu_norm,
    mu_norm_power,
)
from freeito.transforms import pde_convergence, pde_residual, verify_functional_relation

import oracles

SEMI = catalog("semicircular")
POISSON = catalog("free_poisson")


@pytest.fixture
def report(capsys):
    """Print one status line straight to the terminal, then assert."""

    def emit(number, ok, message, seconds):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {message} [{seconds:.1f} s]"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def random_rational(rng, lo=-3, hi=3, den=7):
    return Fraction(rng.randint(lo * den, hi * den), rng.randint(1, den))


def random_step(rng, nonnegative=False, pieces=4, span=3):
    k = rng.randint(1, pieces)
    cuts = sorted(rng.sample(range(0, 4 * span + 1), k + 1))
    lo = 0 if nonnegative else -2
    return StepFunction([Fraction(c, 4) for c in cuts], [Fraction(rng.randint(lo * 4, 8), 4) for _ in range(k)])


def identity_on(a, b, N):
    return SimpleBiprocess([(a, b, OperatorTensor.identity(N))])


def test_criterion_01_combinatorics(report):
    start = time.time()
    counts_ok = all(len(enumerate_noncrossing(n)) == oracles.catalan(n) for n in range(1, 13))
    counts_ok &= all(sum(1 for _ in iter_noncrossing_rgs(n)) == oracles.catalan(n) for n in (13, 14))
    rng = random.Random(1)
    roundtrips = 0
    for _ in range(100):
        n = rng.randint(1, 12)
        r = CumulantSequence([random_rational(rng) for _ in range(n)])
        roundtrips += cumulants_from_moments(moments_from_cumulants(r, n), n).take(n) == r.take(n)
    elapsed = time.time() - start
    ok = counts_ok and roundtrips == 100 and elapsed < 60
    report(1, ok, f"|NC(n)| = C_n for n <= 14: {counts_ok}; exact roundtrips {roundtrips}/100", elapsed)


def test_criterion_02_functional_relation(report):
    start = time.time()
    laws = [SEMI] + [catalog("free_poisson", rate=lam) for lam in (Fraction(1, 2), 1, 2)]
    rng = random.Random(2)
    laws += [CumulantSequence([random_rational(rng, 0, 3) for _ in range(12)]) for _ in range(20)]
    passed = sum(verify_functional_relation(r, 12) for r in laws)
    elapsed = time.time() - start
    report(2, passed == len(laws) and elapsed < 30, f"G(1/z + R(z)) = z through order 12 for {passed}/{len(laws)} laws", elapsed)


def test_criterion_03_scalar_integral_equivalence(report):
    start = time.time()
    bases = [SEMI, POISSON, catalog("free_compound_poisson", rate=2, jumps={"-1/2": "1/2", "1": "1/2"})]
    rng = random.Random(3)
    worst = 0.0
    for _ in range(10):
        f = random_step(rng)
        T = float(f.breakpoints[-1]) + 0.5
        for r in bases:
            exact = integral_moments(f, r, 8)
            flow = moment_flow(f, r, 8, T, 10_000)
            # odd moments may vanish, so errors are relative to the natural scale m_2^(n/2)
            m2 = float(exact[2])
            for n in range(1, 9):
                scale = max(abs(float(exact[n])), m2 ** (n / 2), 1e-300)
                worst = max(worst, abs(flow[n - 1] - float(exact[n])) / scale)
    elapsed = time.time() - start
    report(3, worst < 1e-8 and elapsed < 120,
           f"moment ODE vs cumulant route, 10 step functions x 3 bases, n <= 8: worst rel err {worst:.2e}", elapsed)


def test_criterion_04_mu_norm_identities(report):
    start = time.time()
    f = StepFunction([0, 1, 2, Fraction(7, 2)], [2, Fraction(-1, 3), 1])
    catalan_ok = all(mu_norm_power(f, SEMI, 2 * n) == catalan(n) * lp_power(f, 2) ** n for n in range(1, 7))
    indicator_ok = True
    for r in (SEMI, POISSON, catalog("free_poisson", rate=Fraction(2, 3))):
        m = moments_from_cumulants(r, 10)
        indicator_ok &= all(mu_norm_power(StepFunction.indicator(), r, n) == m[n] for n in range(2, 11, 2))
    rng = random.Random(4)
    laws = [SEMI, POISSON, catalog("free_compound_poisson", rate=3, jumps={"1/2": "1/3", "2": "2/3"})]
    holds, worst_slack = 0, float("inf")
    for i in range(200):
        f, g = random_step(rng, True), random_step(rng, True)
        r = laws[i % 3]
        n = 2 * rng.randint(1, 5)
        slack = mu_norm(f, r, n) + mu_norm(g, r, n) - mu_norm(f + g, r, n)
        holds += slack >= -1e-12
        worst_slack = min(worst_slack, slack)
    elapsed = time.time() - start
    ok = catalan_ok and indicator_ok and holds == 200
    report(4, ok, f"Catalan identity {catalan_ok}, indicator = moment {indicator_ok}, "
                  f"triangle inequality {holds}/200 (min slack {worst_slack:.3g})", elapsed)


def test_criterion_05_bdg(report):
    start = time.time()
    rng = random.Random(5)
    holds, slacks = 0, []
    for _ in range(100):
        k = rng.randint(1, 3)
        n = 2 * rng.randint(1, 3)
        r = CumulantSequence([Fraction(rng.randint(0, 12), 4) for _ in range(n * k)])
        f = random_step(rng, True)
        lhs, rhs, ok = bdg_check(f, r, k, n)
        holds += ok
        slacks.append(rhs - lhs)
    elapsed = time.time() - start
    report(5, holds == 100, f"BDG-type inequality on {holds}/100 instances; slack min {min(slacks):.3g}, "
                            f"median {float(np.median(slacks)):.3g}", elapsed)


def test_criterion_06_pde_residual(report):
    start = time.time()
    zs = [x + 1j * y for x, y in zip((-2.0, -0.7, 0.0, 1.1, 2.5), (0.5, 1.0, 2.0, 0.8, 3.0))]
    ts = (0.25, 0.5, 1.0, 2.0, 4.0)
    worst = max(pde_residual(SEMI, z, t, 1e-4) for z in zs for t in ts)
    orders = []
    for z, t in ((1 + 1j, 1.0), (3j, 0.5), (-0.5 + 0.7j, 2.0)):
        _, residuals, obs = pde_convergence(POISSON, z, t, 1e-2, levels=3)
        orders.extend(obs)
    second_order = all(1.8 < p < 2.2 for p in orders)
    elapsed = time.time() - start
    report(6, worst < 1e-6 and second_order,
           f"semicircle residual max {worst:.2e} on 5x5 grid; free Poisson orders {[round(p, 2) for p in orders]}",
           elapsed)


def test_criterion_07_ito_coefficients(report):
    start = time.time()
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        N = int(rng.integers(2, 5))
        K = int(rng.integers(1, 4))

        def rand():
            return rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))

        U = [OperatorTensor.elementary(rand(), rand(), N=N) for _ in range(K)]
        M = rand()
        for n in range(1, 6):
            rec = ito_coeff_recursive(n, U, M)
            for m in range(1, min(5, n * K) + 1):
                closed = ito_coeff_closed(n, m, U, M)
                worst = max(worst, distance(closed, rec[m]) / max(1.0, scale_of(rec[m])))
    elapsed = time.time() - start
    report(7, worst < 1e-10 and elapsed < 60,
           f"closed form vs recursion, 50 seeds, N in 2..4, n, m <= 5: worst rel diff {worst:.2e}", elapsed)


def test_criterion_08_product_and_functional(report):
    start = time.time()
    # pure algebra first: the uncontracted identity at small N, full matrices
    small = MatrixModelConfig(N=6, steps=12, base=POISSON, trials=3, master_seed=80)
    raw = verify_product_formula(small, 1, 2, identity_on(0, 1, 6), identity_on(0, 1, 6), mode="full", tol=1e9)
    raw_err = raw.details["raw_identity_norm_error"]

    base = MatrixModelConfig(N=512, steps=256, base=SEMI, trials=20, master_seed=8)

    def v_of(N):
        return SimpleBiprocess([(0, 1, OperatorTensor.elementary(ONE, np.linspace(-1, 1, N)))])

    def u_of(N):
        return SimpleBiprocess([(0, 1, OperatorTensor.elementary(np.linspace(0, 1, N), ONE))])

    def product(cfg):
        return verify_product_formula(cfg, 1, 1, v_of(cfg.N), u_of(cfg.N))

    def functional(cfg):
        return verify_functional_ito(cfg, [0, 0, 0, 1], identity_on(0, 1, cfg.N))

    # per-seed errors are heavy tailed, so a 20-seed median wobbles by about 30%;
    # the cheap sizes get more seeds (20 * 256 / N) to keep the comparison honest
    sizes = (64, 128, 256, 512)
    seeds = {n: max(20, 20 * 256 // n) for n in sizes}
    prod_512 = product(base)
    prod_trend = convergence_trend(product, base, sizes, {512: prod_512}, seeds)
    func_512 = functional(base)
    func_trend = convergence_trend(functional, base, sizes, {512: func_512}, seeds)
    elapsed = time.time() - start
    ok = (raw_err < 1e-10 and prod_512.passed and func_512.passed and prod_trend.passed and func_trend.passed
          and elapsed < 600)
    fmt = lambda xs: "[" + ", ".join(f"{x:.1e}" for x in xs) + "]"
    report(8, ok,
           f"raw identity {raw_err:.1e}; N=512 max trace err product "
           f"{max(prod_512.details['contracted_errors']):.1e}, functional {max(func_512.details['errors']):.1e}; "
           f"medians product {fmt(prod_trend.details['median_errors'])}, "
           f"functional {fmt(func_trend.details['median_errors'])}", elapsed)


def test_criterion_09_diagonal_measures(report):
    start = time.time()
    results = []
    for base, steps in ((SEMI, 256), (POISSON, 128)):
        config = MatrixModelConfig(N=512, steps=steps, base=base, trials=3, master_seed=9)
        for rep in verify_diagonal_measures(config, (1, 2, 3), tol=0.05):
            results.append((rep.passed, rep.estimate, rep.predicted))
    elapsed = time.time() - start
    shown = ", ".join(f"{e:.4f}/{p:g}" for _, e, p in results)
    report(9, all(ok for ok, _, _ in results), f"phi[Delta_k(1)] vs r_k (semicircular k=1..3, free Poisson k=1..3): {shown}",
           elapsed)


def test_criterion_10_isometry_and_trace(report):
    start = time.time()
    N = 128
    semi = MatrixModelConfig(N=N, steps=16, base=SEMI, trials=20, master_seed=10)
    poisson = MatrixModelConfig(N=N, steps=16, base=POISSON, trials=20, master_seed=10)
    rng = np.random.default_rng(10)
    A, B = rng.standard_normal((N, N)), rng.standard_normal((N, N))
    AB = SimpleBiprocess([(0, 1, OperatorTensor.elementary(A, B))])
    reports = [
        verify_ito_isometry(semi, identity_on(0, 1, N), identity_on(0, 1, N)),
        verify_ito_isometry(semi.with_(T=Fraction(2)), identity_on(0, 1, N), identity_on(1, 2, N)),
        verify_ito_isometry(poisson, identity_on(0, 1, N), identity_on(0, 1, N)),
        verify_trace_formula(semi, identity_on(0, 1, N)),
        verify_trace_formula(poisson, identity_on(0, 1, N)),
        verify_trace_formula(poisson, AB),
    ]
    elapsed = time.time() - start
    shown = "; ".join(f"{r.estimate:.4f}+-{r.stderr:.1e} vs {r.predicted:.4f}" for r in reports)
    report(10, all(r.passed for r in reports), f"isometry x3, trace formula x3 within 3 stderr: {shown}", elapsed)


def test_criterion_11_determinism(report, tmp_path, capsys):
    start = time.time()
    N = 32
    config = MatrixModelConfig(N=N, steps=8, base=POISSON, trials=6, master_seed=2024)
    runs = [verify_ito_isometry(config.with_(workers=w), identity_on(0, 1, N), identity_on(0, 1, N)).dumps()
            for w in (1, 1, 3)]
    lib_ok = len(set(runs)) == 1
    payloads = []
    for name in ("a.json", "b.json"):
        cli.main(["verify", "trace_formula", "--out", str(tmp_path / name)])
        payloads.append(json.dumps(json.loads((tmp_path / name).read_text())["report"], indent=2, sort_keys=True))
    capsys.readouterr()
    cli_ok = payloads[0] == payloads[1]
    elapsed = time.time() - start
    report(11, lib_ok and cli_ok, f"library reports identical across reruns and worker counts: {lib_ok}; "
                                  f"CLI report payloads byte-identical: {cli_ok}", elapsed)
