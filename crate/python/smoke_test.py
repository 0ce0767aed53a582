"""Smoke test for the `brwp` extension module.

Build and run from the repository root:

    cargo build --release -p brwp-python
    cp target/release/libbrwp.so python/brwp.so
    python3 python/smoke_test.py
"""

import math
import sys

import brwp


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    q = brwp.Potential.quadratic(1.0, 1)
    assert q.alpha == 1.0 and q.dim == 1
    close(q.value([2.0]), 2.0, 1e-15)
    close(q.gradient([3.0])[0], 3.0, 1e-15)

    star = brwp.GridDensity.target(q)
    close(star.mass(), 1.0, 1e-12)
    close(star.kl(q), 0.0, 1e-10)

    # N(0, 2) against N(0, 1): (2 - 1 - ln 2) / 2
    wide = brwp.GridDensity.gaussian([0.0], 2.0)
    close(wide.kl(q), (1.0 - math.log(2.0)) / 2.0, 1e-6)

    # one proximal step contracts toward the target
    step = brwp.prox_step(wide, q, 0.1)
    close(step.mass(), 1.0, 1e-6)
    assert step.kl(q) < wide.kl(q)

    mix = brwp.Potential.preset("gaussian_mixture")
    rec = brwp.sample(mix, h=0.02, n_particles=500, n_steps=50, seed=3)
    assert rec.method == "brwp_successive"
    assert len(rec.kl) == 51 and rec.iters[-1] == 50
    assert 0.3 <= rec.mode_balance() <= 0.7
    assert len(rec.particles) == 500

    again = brwp.sample(mix, method="ula", h=0.02, n_steps=20, seed=9)
    assert again.particles == brwp.sample(mix, method="ula", h=0.02, n_steps=20, seed=9).particles

    close(brwp.optimal_stepsize(1.0), 1.0 / 3.0, 1e-15)
    assert brwp.sampling_complexity(0.01, 1.0) == 24
    close(brwp.w2_1d([0.0, 1.0], [1.0, 2.0]), 1.0, 1e-15)
    assert brwp.kl_k_bound(20, 1.0, 0.1, 1.0, 1.0, 1.0) > 0.0

    k = brwp.kde([0.7] * 40, bandwidth=0.5)
    close(k.mass(), 1.0, 1e-9)

    try:
        brwp.Potential.quadratic(-1.0, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("negative curvature accepted")

    try:
        brwp.sample(q, n_steps=3, init_var=4.0, backend="particle")
    except ValueError:
        pass
    else:
        raise AssertionError("grid method ran on the particle backend")

    print("brwp", brwp.__version__, "smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
