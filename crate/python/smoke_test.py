"""Smoke test for the stirsim extension module.

Build and install it first, e.g. `maturin build --release -m crates/py/Cargo.toml`
followed by `pip install` of the wheel, then run `python python/smoke_test.py`.
"""

import math
import statistics

import stirsim


def main():
    # Limit variance at t = 1 for d = 1, k = 1, p = 1/2.
    var = stirsim.limit_covariance(1, 1, [0.5], 1.0, 1.0, 0, 0)
    assert math.isclose(var, 0.1880631945159188, rel_tol=1e-9), var

    c = stirsim.theory_constants(1, 2, [0.3, 0.2])
    a = c["A"]
    assert math.isclose(a[0][0], 0.21) and math.isclose(a[0][1], -0.06)
    root = c["A_sqrt"]
    sq = sum(root[0][i] * root[i][1] for i in range(2))
    assert math.isclose(sq, -0.06, abs_tol=1e-12), sq

    total = sum(stirsim.qhat_torus(1, 16, 2, 3.0, [x]) for x in range(16))
    assert math.isclose(total, 1.0, abs_tol=1e-12), total

    counts = stirsim.sample_stationary(1, 50, 2, [0.3, 0.2], seed=7)
    assert len(counts) == 50 * 3 and all(sum(counts[3 * x:3 * x + 3]) == 2 for x in range(50))

    times, beta = stirsim.simulate(1, 64, 1, [0.5], 16.0, [4.0, 8.0, 16.0], 60, seed=3, jobs=2)
    assert times == [0.0, 4.0, 8.0, 16.0] and len(beta) == 60
    finals = [r[0][-1] for r in beta]
    assert abs(statistics.fmean(finals)) < 4 * statistics.stdev(finals) / math.sqrt(len(finals))

    try:
        stirsim.limit_covariance(1, 1, [0.7, 0.6], 1.0, 1.0, 0, 0)
    except ValueError:
        pass
    else:
        raise AssertionError("densities summing above 1 accepted")

    ok, line = stirsim.acceptance("A2")
    assert ok, line
    print("smoke test passed")


if __name__ == "__main__":
    main()
