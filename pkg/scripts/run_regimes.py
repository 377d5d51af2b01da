"""Print which regime the multiscale dichotomy picks over a (mu, gamma) grid."""
import argparse

from decoupling_lab.bg_engine import regime_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--p", type=float, default=4.0)
    ap.add_argument("--D", type=float, default=16.0)
    ap.add_argument("--octaves", type=int, default=20)
    a = ap.parse_args()
    for mu in (1.0, 4.0, 16.0):
        for gamma in (0.01, 0.1, 1.0):
            rows = regime_sweep(a.n, a.k, a.p, a.D, mu, gamma, a.octaves)
            kinds = sorted({r.regime for _, r in rows})
            flagged = sum(1 for _, r in rows if r.flagged)
            print(f"mu={mu:5g} gamma={gamma:5g}: regimes {kinds}, flagged {flagged}/{len(rows)}")


if __name__ == "__main__":
    main()
