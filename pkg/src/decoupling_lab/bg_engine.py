"""Broad-narrow decomposition steps and multiscale estimates as certificates.

Each step evaluates both sides of an inequality numerically and records the
result as an :class:`InequalityCertificate`; a failing certificate is still a
valid record.  All unspecified constants live in :class:`Constants`.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field as dc_field, replace

import numpy as np

from .geometry import DyadicCube, GeometryError, Subspace, dilate, dyadic_cubes, is_dyadic, largest_dyadic_at_most
from .norms import (
    CANDIDATE_MIN,
    CANDIDATE_SUP,
    NormParams,
    broad_norm,
    decoupling_norm,
    local_level_broad_norm,
    lp_norm,
    max_cap_norm,
    xi,
)
from .wave_packets import gamma_cubes, localize, mu_buckets, packet_cube_incidence, packets_near_subspace, redecompose


@dataclass(frozen=True)
class Constants:
    C_semi: float = 3.0
    C_broadstep: float = 10.0
    C_base: float = 10.0
    C_re0: float = 16.0
    C_75: float = 32.0
    C_dec: float = 10.0


DEFAULT_CONSTANTS = Constants()


@dataclass
class Term:
    label: str
    coefficient: float
    value: float
    approx: str = "exact"

    @property
    def contribution(self) -> float:
        return self.coefficient * self.value


@dataclass
class InequalityCertificate:
    name: str
    lhs: float
    rhs_terms: list
    params: dict = dc_field(default_factory=dict)
    labels: list = dc_field(default_factory=list)
    lhs_approx: str = "exact"
    notes: list = dc_field(default_factory=list)
    tol: float = 1e-12

    @property
    def rhs(self) -> float:
        return float(sum(t.contribution for t in self.rhs_terms))

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tol * max(1.0, abs(self.rhs), abs(self.lhs))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "lhs_approx": self.lhs_approx,
            "rhs_terms": [asdict(t) for t in self.rhs_terms],
            "rhs": self.rhs,
            "slack": self.slack,
            "pass": self.passed,
            "params": self.params,
            "labels": self.labels,
            "notes": self.notes,
        }


def fmt17(x) -> str:
    return format(float(x), ".17g")


def certificates_csv(certs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "lhs", "rhs", "slack", "pass"])
    for c in certs:
        w.writerow([c.name, fmt17(c.lhs), fmt17(c.rhs), fmt17(c.slack), "true" if c.passed else "false"])
    return buf.getvalue()


def certificates_json(certs) -> str:
    return json.dumps([c.to_json() for c in certs], indent=2, sort_keys=True)


# -- scale ladder ----------------------------------------------------------

@dataclass(frozen=True)
class ScaleLadder:
    R: int
    eps: float
    L: float
    K: tuple
    A: tuple
    overridden: bool = False


def ladder(R: int, eps: float, L: float, n: int = 2, K=None, A=None) -> ScaleLadder:
    """K_1 <= R^(eps^(L/2)) < 2 K_1, K_j the first dyadic above K_{j-1}^(eps^(-sqrt(L)/2));
    A_1 = round(R^(eps^L)), A_j = round(A_1^(2^(1-j))), all clipped below at 1."""
    if not is_dyadic(R) or R < 4:
        raise GeometryError("R must be dyadic and >= 4")
    if K is not None or A is not None:
        if K is None or A is None:
            raise GeometryError("override both K and A")
        K, A = tuple(int(x) for x in K), tuple(int(x) for x in A)
        if len(K) != n or len(A) != n + 1:
            raise GeometryError(f"need {n} scales K and {n + 1} counts A")
        if not all(is_dyadic(k) and k >= 2 for k in K):
            raise GeometryError("override scales must be dyadic and >= 2")
        if any(b <= a for a, b in zip(K, K[1:])):
            raise GeometryError(f"override K={K} is not increasing")
        if any(a < 1 for a in A) or any(b > a for a, b in zip(A, A[1:])):
            raise GeometryError(f"override A={A} is not decreasing")
        return ScaleLadder(R, eps, L, K, A, True)
    if not eps > 0:
        raise GeometryError("eps must be positive")
    k1 = R ** (eps ** (L / 2))
    if k1 < 2:
        raise GeometryError(f"ladder collapsed: R^(eps^(L/2)) = {k1:.4g} < 2")
    Ks = [largest_dyadic_at_most(k1)]
    expo = eps ** (-math.sqrt(L) / 2)
    for _ in range(1, n):
        target = Ks[-1] ** expo
        nxt = 2 ** (math.floor(math.log2(target)) + 1)
        Ks.append(int(nxt))
    a1 = max(1, int(round(R ** (eps ** L))))
    As = [a1] + [max(1, int(round(a1 ** (2.0 ** (1 - j))))) for j in range(2, n + 2)]
    return ScaleLadder(R, eps, L, tuple(Ks), tuple(As), False)


# -- single decomposition steps ------------------------------------------

def _params(params: NormParams | None, **kw) -> NormParams:
    base = params or NormParams(search_mode="auto")
    return replace(base, **kw)


def broad_step(F, U: DyadicCube, k: int, A: int, M: int, p: float, params: NormParams | None = None,
               constants: Constants = DEFAULT_CONSTANTS, D: int | None = None, D0: int | None = None):
    """Certificate for BL_{k,A,D0}(U) <= D^n BL_{k+1,A/M,D}(U) + (A/M)^C Xi_{k,p}(M/2, D, U)."""
    n = F.amb.n
    D = D or F.amb.D
    D0 = D0 or (params.D0 if params and params.D0 else F.amb.D0)
    if M * M > A:
        raise GeometryError(f"need M^2 <= A (M={M}, A={A})")
    if U.side < D * D - 1e-9:
        raise GeometryError(f"U side {U.side} is smaller than D^2 = {D * D}")
    if not 2 <= k <= n:
        raise GeometryError(f"k={k} must lie in 2..n={n} so that k+1 <= n+1")
    AM = max(1, A // M)
    lhs = broad_norm(F, U, _params(params, p=p, k=k, A=A, D=D0, D0=None))
    t1 = broad_norm(F, U, _params(params, p=p, k=k + 1, A=AM, D=D, D0=None))
    t2 = xi(F, k, p, max(1, M // 2), U, _params(params, D=D, D0=D0))
    return InequalityCertificate(
        name=f"broad_step[k={k},A={A},M={M},D={D},D0={D0}]",
        lhs=lhs.value,
        rhs_terms=[Term(f"D^n BL_(k+1,A/M,D)", float(D) ** n, t1.value, CANDIDATE_MIN),
                   Term("(A/M)^C Xi_(k,p)(M/2,D,U)", float(A / M) ** constants.C_broadstep, t2.value, CANDIDATE_SUP)],
        params={"k": k, "A": A, "M": M, "D": D, "D0": D0, "p": p, "n": n, "U": U.to_json(),
                "C": constants.C_broadstep, "search": [lhs.search_mode, t1.search_mode]},
        labels=["heuristic certificate"],
        lhs_approx=CANDIDATE_MIN,
    )


def base_step(F, U: DyadicCube, A: int, p: float, D: int | None = None, params: NormParams | None = None,
              constants: Constants = DEFAULT_CONSTANTS):
    """Certificate for ||F||_p(U) <= D^n BL_{2,A,D}(U) + C A ||max_theta |F_theta| ||_p(U)."""
    n = F.amb.n
    D = D or F.amb.D
    P = _params(params, p=p, k=2, A=A, D=D, D0=None)
    lhs = lp_norm(F, U, p, P)
    t1 = broad_norm(F, U, P)
    t2 = max_cap_norm(F, U, p, D, P)
    return InequalityCertificate(
        name=f"base_step[A={A},D={D}]",
        lhs=lhs.value,
        rhs_terms=[Term("D^n BL_(2,A,D)", float(D) ** n, t1.value, CANDIDATE_MIN),
                   Term("C A ||max|F_theta|||_p", constants.C_base * A, t2.value)],
        params={"A": A, "D": D, "p": p, "n": n, "U": U.to_json(), "C": constants.C_base,
                "stderr": [lhs.stderr, t2.stderr]},
        labels=["heuristic certificate"],
    )


def recursion(F, U: DyadicCube, m: int, lad: ScaleLadder, p: float, params: NormParams | None = None,
              constants: Constants = DEFAULT_CONSTANTS) -> list:
    """Base step at K_1 followed by broad steps j = 2..m, plus the composite bound."""
    n = F.amb.n
    if not 2 <= m <= n:
        raise GeometryError(f"m={m} must lie in 2..n={n}")
    if lad.K[m - 1] > F.amb.D:
        raise GeometryError(f"K_m={lad.K[m - 1]} exceeds the field scale {F.amb.D}")
    K, A = lad.K, lad.A
    certs = [base_step(F, U, A[0], p, K[0], params, constants)]
    xis, top = [], None
    for j in range(2, m + 1):
        c = broad_step(F, U, j, A[j - 2], A[j - 1], p, params, constants, D=K[j - 1], D0=K[j - 2])
        certs.append(c)
        xis.append((j, c.rhs_terms[1].value))
        top = c.rhs_terms[0].value
    base = certs[0]
    eps = lad.eps
    terms = [Term("C A_1 ||max|F_theta|||_p", constants.C_base * A[0], base.rhs_terms[1].value),
             Term(f"K_m^(2n) BL_(m+1,A_m,K_m)", float(K[m - 1]) ** (2 * n), top, CANDIDATE_MIN)]
    for j, v in xis:
        terms.append(Term(f"K_{j}^(eps^10) Xi_({j},p)(A_{j}/2,K_{j},U)", float(K[j - 1]) ** (eps ** 10), v, CANDIDATE_SUP))
    certs.append(InequalityCertificate(
        name=f"recursion[m={m}]",
        lhs=base.lhs,
        rhs_terms=terms,
        params={"m": m, "K": list(K), "A": list(A), "p": p, "n": n, "overridden": lad.overridden},
        labels=["heuristic certificate", "composite"],
    ))
    return certs


# -- multiscale estimates -------------------------------------------------

def localized_bucket(F, V: Subspace | None, mu: float, B: DyadicCube):
    """S_{K,V,mu,B}: packets near V, of dyadic mass class mu, whose T* meets B."""
    pk = list(F.packets)
    if V is not None:
        pk = packets_near_subspace(pk, V, F.amb.D)
    buckets = mu_buckets(pk, profile=F.profile)
    chosen = buckets[mu].packets if mu in buckets else []
    return localize(chosen, B, F.amb.D0)


def gamma_of(packets, Q: DyadicCube, D0: int) -> float:
    from .wave_packets import dyadic_ceil
    c = int(packet_cube_incidence(packets, [Q], D0).sum())
    return dyadic_ceil(float(c)) if c else 0.0


def multiscale_checks(F, V: Subspace | None, B: DyadicCube, Q: DyadicCube, D: int, mu: float, lam: float,
                      gamma: float, p: float, k: int, A: int = 1, params: NormParams | None = None,
                      constants: Constants = DEFAULT_CONSTANTS, with_bgamma: bool = True,
                      redecompose_spacing: float = 0.125) -> list:
    """re0 per mu' bucket, the gamma-cube estimate on Q and its sum over B_gamma."""
    from .field import synthesize

    K, n = F.amb.D, F.amb.n
    if D * D > K:
        raise GeometryError(f"need D <= sqrt(K) (D={D}, K={K})")
    pk = 2 * k / (k - 1)
    if not 2 <= p <= pk + 1e-12:
        raise GeometryError(f"need 2 <= p <= p_k = {pk}")
    S = localized_bucket(F, V, mu, B)
    g = gamma_of(S, Q, F.amb.D0)
    if S and g != gamma:
        raise GeometryError(f"Q is not a gamma-cube for gamma={gamma} (its class is {g})")
    certs = []
    # (a) re0 from the scale-D re-decomposition of F_{K,V,mu,Q}
    SQ = localize(S, Q, F.amb.D0)
    FQ = synthesize(F.amb, SQ, F.profile)
    rd = redecompose(FQ, Q, D, D0=min(F.amb.D0, D), spacing=redecompose_spacing)
    rhs_val = float(K) ** -1 * mu * mu * gamma
    if len(rd.packets):
        from .wave_packets import WavePacket
        proxies = [WavePacket(pk_.tile, 1.0) for pk_ in rd.packets]
        buckets = mu_buckets(proxies, masses=list(rd.masses))
    else:
        buckets = {}
    for mup, bk in buckets.items():
        certs.append(InequalityCertificate(
            name=f"re0[mu'={mup:.6g}]",
            lhs=mup * mup * len(bk.packets),
            rhs_terms=[Term("C K^-1 mu^2 gamma", constants.C_re0, rhs_val)],
            params={"K": K, "D": D, "mu": mu, "gamma": gamma, "mu_prime": mup, "count": len(bk.packets), "n": n},
            notes=[f"re-decomposition residual {rd.residual:.3g}"],
        ))
    if not buckets:
        certs.append(InequalityCertificate("re0[empty]", 0.0, [Term("C K^-1 mu^2 gamma", constants.C_re0, rhs_val)],
                                           params={"K": K, "D": D, "mu": mu, "gamma": gamma}))
    # (b) gamma-cube estimate on Q (left side raised to p)
    K0 = (params.D0 if params and params.D0 else F.amb.D0)
    Fmu = synthesize(F.amb, S, F.profile)
    P = _params(params, p=p, k=k, A=A, D0=K0)
    coef = constants.C_75 * (mu * math.sqrt(gamma) / (lam * K ** ((n + 2) / 2))) ** (pk - p) \
        * float(D) ** ((k - 1) * (p / 2 - 1))
    lq = local_level_broad_norm(Fmu, Q, P, lam).value ** p
    rq = decoupling_norm(Fmu, dilate(Q, K0), p, scale=D, params=P).value ** p
    certs.append(InequalityCertificate(
        name="gamma_cube_Q", lhs=lq,
        rhs_terms=[Term("C (mu gamma^1/2/(lam K^((n+2)/2)))^(p_k-p) D^((k-1)(p/2-1)) ||F||^p_(p,D,Q*)", coef, rq)],
        params={"K": K, "D": D, "mu": mu, "lam": lam, "gamma": gamma, "p": p, "k": k, "A": A, "K0": K0},
        labels=["heuristic certificate"], lhs_approx=CANDIDATE_MIN,
        notes=["left side compared as its p-th power"],
    ))
    if with_bgamma:
        cubes = gamma_cubes(B, S, K, F.amb.D0).get(gamma, []) if S else []
        lb = 0.0
        for i, q in enumerate(cubes):
            lb += local_level_broad_norm(Fmu, q, replace(P, seed=P.seed + i), lam).value ** p
        rb = decoupling_norm(Fmu, dilate(B, K0), p, scale=D, params=P).value ** p
        certs.append(InequalityCertificate(
            name="gamma_cubes_B", lhs=lb,
            rhs_terms=[Term("C (mu gamma^1/2/(lam K^((n+2)/2)))^(p_k-p) D^((k-1)(p/2-1)) ||F||^p_(p,D,B*)", coef, rb)],
            params={"K": K, "D": D, "mu": mu, "lam": lam, "gamma": gamma, "p": p, "k": k, "A": A,
                    "K0": K0, "n_gamma_cubes": len(cubes)},
            labels=["heuristic certificate"], lhs_approx=CANDIDATE_MIN,
            notes=["left side compared as its p-th power"],
        ))
    return certs


# -- level-set regimes -----------------------------------------------------

@dataclass
class Regime:
    regime: str                 # small-lambda | large-lambda | both | gap
    small: bool
    large: bool
    lam_small: float | None     # upper threshold of the small-lambda condition
    lam_large: float | None     # lower threshold of the large-lambda condition
    flagged: bool = False
    note: str = ""


def dichotomy_p_threshold(n: int, k: int) -> float:
    h = (k - 1) / 2
    return 2 * (n + 1 - h) / (n - h) if n - h > 0 else math.inf


def regime_classify(n: int, k: int, p: float, D: float, mu: float, lam: float, gamma: float,
                    rtol: float = 1e-9) -> Regime:
    """Which of the small-lambda / large-lambda conditions hold for ``lam``.

    The comparison is done on log2 scale with relative tolerance ``rtol``.
    A gap is flagged as an anomaly when the dichotomy is expected to hold
    (p at or above the threshold and gamma <= D^(k-1)).
    """
    pk = 2 * k / (k - 1)
    if not 2 <= p <= pk + 1e-12:
        raise GeometryError(f"need 2 <= p <= p_k = {pk}")
    lg = math.log2
    base = lg(mu) - (n + 2) / 2 * lg(D)
    expected = p >= dichotomy_p_threshold(n, k) - 1e-12 and gamma <= D ** (k - 1) * (1 + 1e-12)
    tol = rtol * max(1.0, abs(lg(lam)), abs(base))
    if p == 2:
        # the small-lambda exponent is singular; only the large-lambda path applies
        l2 = base + (lg(gamma) / (k - 1) - (2 * n - 2 * (n + 1)) * lg(D)) / (pk - p)
        large = lg(lam) >= l2 - tol
        return Regime("large-lambda" if large else "gap", False, large, None, 2 ** l2,
                      flagged=False, note="p=2: small-lambda condition undefined")
    l1 = base + (p * n - 2 * (n + 1)) / (p - 2) * lg(D)
    small = lg(lam) <= l1 + tol
    if abs(p - pk) < 1e-12:
        return Regime("large-lambda" if not small else "both", small, True, 2 ** l1, None,
                      note="endpoint p=p_k: gamma bound used instead of the lambda condition")
    l2 = base + (lg(gamma) / (k - 1) - (n * p - 2 * (n + 1)) * lg(D)) / (pk - p)
    large = lg(lam) >= l2 - tol
    if small and large:
        reg = "both"
    elif small:
        reg = "small-lambda"
    elif large:
        reg = "large-lambda"
    else:
        reg = "gap"
    flagged = reg == "gap" and expected
    note = "" if reg != "gap" else ("anomaly: dichotomy expected here" if expected
                                     else "gap outside the dichotomy's hypotheses")
    return Regime(reg, small, large, 2 ** l1, 2 ** l2, flagged, note)


def regime_sweep(n: int, k: int, p: float, D: float, mu: float, gamma: float, octaves: int = 20):
    """Classify dyadic lambdas over ``octaves`` octaves centred on the two thresholds."""
    r = regime_classify(n, k, p, D, mu, 1.0, gamma)
    refs = [math.log2(x) for x in (r.lam_small, r.lam_large) if x]
    mid = round(sum(refs) / len(refs)) if refs else 0
    lams = [2.0 ** (mid - octaves // 2 + i) for i in range(octaves + 1)]
    return [(lam, regime_classify(n, k, p, D, mu, lam, gamma)) for lam in lams]


def dyadic_cube_count(B: DyadicCube, side: float) -> int:
    return len(dyadic_cubes(B, side))


__all__ = [
    "Constants", "DEFAULT_CONSTANTS", "InequalityCertificate", "Term", "ScaleLadder", "ladder",
    "broad_step", "base_step", "recursion", "multiscale_checks", "regime_classify", "regime_sweep",
    "certificates_csv", "certificates_json", "dichotomy_p_threshold", "localized_bucket", "gamma_of",
]
