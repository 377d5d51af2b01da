"""Base and broad decomposition certificates over a few random fields; prints slack per certificate."""
import argparse
import sys

from decoupling_lab.bg_engine import Constants, base_step, broad_step
from decoupling_lab.geometry import Ambient, origin_cube
from decoupling_lab.lab import Ensemble, generate
from decoupling_lab.norms import NormParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--D", type=int, default=4)
    ap.add_argument("--D0", type=int, default=2)
    ap.add_argument("--A", type=int, default=16)
    ap.add_argument("--M", type=int, default=4)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--budget", type=int, default=50_000)
    a = ap.parse_args()

    C = Constants()
    U = origin_cube(3, float(a.D * a.D))
    failures = 0
    for seed in range(a.seeds):
        F = generate(Ensemble("random-phase", Ambient(2, a.D, D0=a.D0), density=2, seed=seed))
        P = NormParams(p=4.0, k=2, sample_budget=a.budget, seed=seed, search_mode="auto")
        for cert in (base_step(F, U, a.A, 4.0, a.M, P, C),
                     broad_step(F, U, 2, a.A, a.M, 4.0, P, C, D=a.D, D0=a.D0)):
            failures += not cert.passed
            print(f"seed {seed} {cert.name:12s} lhs={cert.lhs:.4g} rhs={cert.rhs:.4g} "
                  f"slack={cert.slack:.3g} {'pass' if cert.passed else 'FAIL'}")
    sys.exit(2 if failures else 0)


if __name__ == "__main__":
    main()
