"""L^p, decoupling and k-broad norms of fields.

Every norm is assembled from one primitive: the cap pieces F_theta sampled at
the points of a :class:`QuadratureRule`, reduced per stratum.  Coarse caps
(scale s <= D) group the scale-D caps by which coarse cell holds their
centre.

The min over (k-1)-planes is taken over a finite candidate set, so broad
values are candidate-set minima (upper bounds on the continuum minimum) and
Xi values are candidate-set suprema (lower bounds).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy import sparse

from .geometry import (
    DyadicCube,
    GeometryError,
    Subspace,
    candidate_subspaces,
    capset,
    dilate,
    dyadic_cubes,
    is_dyadic,
    near_mask,
)
from .quadrature import FULL_GRID_MAX, GridSpec, QuadratureRule, stderr_from_moments

EXACT_LIMIT = 10 ** 6
CANDIDATE_MIN = "candidate-set minimum"
CANDIDATE_SUP = "candidate-set supremum"


@dataclass(frozen=True)
class NormParams:
    p: float = 4.0
    k: int = 2
    A: int = 1
    D: int | None = None          # cap scale of the broad norm; default: the field's D
    D0: int | None = None         # coarse scale of restricted parts; default: the field's D0
    candidate_strategy: str = "mixed"
    candidate_budget: int = 256
    candidate_samples: int = 16
    search_mode: str = "exact"    # exact | greedy | auto
    seed: int = 0
    spacing: float = 0.125
    quad_mode: str = "auto"
    sample_budget: int = 200_000
    full_grid_max: int = FULL_GRID_MAX
    exact_limit: int = EXACT_LIMIT
    local_passes: int = 4

    def __post_init__(self):
        if self.p < 2:
            raise GeometryError("p must be >= 2")
        if self.A < 1:
            raise GeometryError("A must be >= 1")
        if self.k < 2:
            raise GeometryError("k must be >= 2")
        if self.search_mode not in ("exact", "greedy", "auto"):
            raise GeometryError(f"unknown search mode {self.search_mode!r}")
        if self.D is not None and self.D0 is not None and self.D0 > self.D:
            raise GeometryError("D0 must not exceed D")

    @property
    def p_k(self) -> float:
        return 2 * self.k / (self.k - 1)

    def grid(self, region: DyadicCube) -> GridSpec:
        return GridSpec(region, self.spacing, self.quad_mode, self.sample_budget, self.seed,
                        self.full_grid_max)


@dataclass
class NormValue:
    value: float
    stderr: float = 0.0
    mode: str = "full-grid"
    n_points: int = 0

    def __float__(self):
        return float(self.value)


def _root(I: float, se: float, p: float) -> NormValue:
    v = max(I, 0.0) ** (1 / p)
    # delta method for the p-th root
    dse = (1 / p) * max(I, 1e-300) ** (1 / p - 1) * se if I > 0 else 0.0
    return NormValue(v, dse)


# -- grouping caps ---------------------------------------------------------

def coarse_grouping(F, scale: int):
    """Map the field's active caps to scale-``scale`` caps.

    Returns ``(coarse_positions, column_of)`` where ``column_of[j]`` is the
    column (into ``coarse_positions``) of the j-th active fine cap.
    """
    n, D = F.amb.n, F.amb.D
    if not is_dyadic(scale) or scale > D:
        raise GeometryError(f"coarse scale {scale} must be dyadic and <= {D}")
    if scale == D:
        pos = np.asarray(F.cap_positions)
        return pos, np.arange(len(pos))
    parent = capset(n, scale).parent_of(capset(n, D))[np.asarray(F.cap_positions, dtype=int)]
    coarse, col = np.unique(parent, return_inverse=True)
    return coarse, col


ENTRY_BLOCK = 1 << 22      # complex entries per temporary in grouped reductions


def abs_pow(z: np.ndarray, p: float) -> np.ndarray:
    a2 = z.real * z.real + z.imag * z.imag
    if p == 2:
        return a2
    if p == 4:
        return a2 * a2
    return a2 ** (p / 2)


def _group(vals: np.ndarray, col: np.ndarray, ncol: int) -> np.ndarray:
    """Sum the columns of ``vals`` into ``ncol`` groups given by ``col``."""
    S = sparse.csr_matrix((np.ones(len(col)), (col, np.arange(len(col)))), shape=(ncol, len(col)))
    return (S @ vals.T).T


def _rule(region: DyadicCube, params: NormParams, stratum_side: float | None = None) -> QuadratureRule:
    if not region.side > 0:
        raise GeometryError("degenerate region")
    return QuadratureRule(params.grid(region), stratum_side)


def cell_integrals(F, rule: QuadratureRule, integrand):
    """Per-cell weighted sums of ``integrand(cap_values, chunk) -> (N, m)`` and of their squares."""
    def reduce(chunk):
        vals = F.cap_values(chunk.points)
        f = np.asarray(integrand(vals, chunk), dtype=float)
        w = chunk.weights[:, None]
        return chunk.cell_sums(w * f), chunk.cell_sums((w * f) ** 2)
    c1, c2 = rule.map_cells(reduce)
    return c1, c2


def _total(F, rule, integrand, p) -> NormValue:
    c1, c2 = cell_integrals(F, rule, integrand)
    out = _root(float(rule.to_strata(c1).sum()), stderr_from_moments(c1[:, 0], c2[:, 0], rule), p)
    out.mode, out.n_points = rule.mode, rule.n_points
    return out


# -- plain norms -----------------------------------------------------------

def lp_norm(F, U: DyadicCube, p: float, params: NormParams | None = None) -> NormValue:
    if p < 1:
        raise GeometryError("p must be >= 1")
    params = params or NormParams()
    rule = _rule(U, params)
    if len(F.cap_positions) == 0:
        return NormValue(0.0, 0.0, rule.mode, rule.n_points)
    return _total(F, rule, lambda v, c: np.abs(v.sum(axis=1))[:, None] ** p, p)


def max_cap_norm(F, U: DyadicCube, p: float, scale: int | None = None,
                 params: NormParams | None = None) -> NormValue:
    """|| max_theta |F_theta| ||_{L^p(U)} with caps at ``scale``."""
    params = params or NormParams()
    rule = _rule(U, params)
    if len(F.cap_positions) == 0:
        return NormValue(0.0, 0.0, rule.mode, rule.n_points)
    coarse, col = coarse_grouping(F, scale or F.amb.D)

    def integrand(v, c):
        return np.abs(_group(v, col, len(coarse))).max(axis=1)[:, None] ** p
    return _total(F, rule, integrand, p)


def decoupling_norm(F, U: DyadicCube, p: float, scale: int | None = None,
                    params: NormParams | None = None, stratum_side: float | None = None) -> NormValue:
    """(sum_theta ||F_theta||_{L^p(U)}^p)^{1/p} over caps at ``scale``.

    ``stratum_side`` reproduces the sample points of a broad norm on the same
    region (same seed), so the two can be compared point for point.
    """
    params = params or NormParams()
    rule = _rule(U, params, stratum_side)
    if len(F.cap_positions) == 0:
        return NormValue(0.0, 0.0, rule.mode, rule.n_points)
    coarse, col = coarse_grouping(F, scale or F.amb.D)

    def integrand(v, c):
        return (np.abs(_group(v, col, len(coarse))) ** p).sum(axis=1)[:, None]
    return _total(F, rule, integrand, p)


# -- cap weights per cube --------------------------------------------------

@dataclass
class CapWeights:
    """W[q, c] = integral over cube q of |F_c|^p, c running over coarse caps."""

    cubes: list
    positions: np.ndarray          # coarse cap positions in capset(n, scale)
    W: np.ndarray                  # (Q, C)
    W2: np.ndarray                 # per-cube second moments (for standard errors)
    scale: int
    n: int
    mode: str = "full-grid"

    @property
    def normals(self) -> np.ndarray:
        return capset(self.n, self.scale).normals[self.positions]


def cap_weights(F, U: DyadicCube, p: float, scale: int, params: NormParams,
                levels=None) -> CapWeights | list[CapWeights]:
    """Per-cube cap weights at ``scale``; cubes are the ``scale^2`` dyadic subcubes of U.

    With ``levels`` (a list of dyadic lambdas) returns one table per level,
    each integrating only where lambda/2 < |F_c| <= lambda.
    """
    side = float(scale) ** 2
    if U.side < side - 1e-9:
        raise GeometryError(f"region side {U.side} is smaller than the cube side {side}")
    rule = _rule(U, params, side)
    coarse, col = coarse_grouping(F, scale) if len(F.cap_positions) else (np.zeros(0, int), None)
    C = len(coarse)
    Q = rule.n_strata
    if C == 0:
        empty = CapWeights(rule.strata, coarse, np.zeros((Q, 0)), np.zeros((Q, 0)), scale, F.amb.n, rule.mode)
        return [empty for _ in levels] if levels is not None else empty

    if levels is None:
        def integrand(v, c):
            return abs_pow(_group(v, col, C), p)
        c1, c2 = cell_integrals(F, rule, integrand)
        return CapWeights(rule.strata, coarse, rule.to_strata(c1), rule.to_strata(c2), scale, F.amb.n, rule.mode)

    lv = np.asarray(levels, dtype=float)

    def integrand(v, c):
        g = np.abs(_group(v, col, C))
        parts = [np.where((g > lam / 2) & (g <= lam), g ** p, 0.0) for lam in lv]
        return np.concatenate(parts, axis=1)
    c1, c2 = cell_integrals(F, rule, integrand)
    s1, s2 = rule.to_strata(c1), rule.to_strata(c2)
    return [CapWeights(rule.strata, coarse, s1[:, i * C:(i + 1) * C], s2[:, i * C:(i + 1) * C],
                       scale, F.amb.n, rule.mode) for i in range(len(lv))]


# -- min-max search --------------------------------------------------------

@dataclass
class Search:
    values: np.ndarray           # (Q,) min over tuples of max surviving weight
    tuples: list                 # per cube: tuple of candidate indices
    attaining: np.ndarray        # (Q,) column of the attaining cap, -1 if none survive
    mode: str


def capture_matrix(normals: np.ndarray, candidates: list[Subspace], scale: int) -> np.ndarray:
    """(K, C) boolean: candidate K captures cap C (dist(e, V) <= 1/scale)."""
    if not candidates:
        return np.zeros((0, normals.shape[0]), dtype=bool)
    return np.array([near_mask(normals, V, scale) for V in candidates], dtype=bool)


def _surviving_max(W: np.ndarray, surv: np.ndarray):
    """Max over surviving caps (empty max = 0) and its lowest-index argmax (-1 if none)."""
    masked = np.where(surv, W, -1.0)
    arg = np.argmax(masked, axis=-1)
    val = np.take_along_axis(masked, arg[..., None], axis=-1)[..., 0]
    none = val < 0
    return np.where(none, 0.0, val), np.where(none, -1, arg)


def _unique_patterns(cap: np.ndarray) -> np.ndarray:
    """Indices of candidates with distinct capture patterns (first occurrence kept)."""
    seen, keep = set(), []
    for i, row in enumerate(cap):
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return np.array(keep, dtype=int)


def n_tuples(K: int, A: int) -> int:
    return 1 if K <= A else math.comb(K, A)


def exact_search(W: np.ndarray, cap: np.ndarray, A: int, limit: int = EXACT_LIMIT) -> Search:
    """Enumerate every A-subset of candidates (distinct capture patterns only).

    Ties go to the first tuple in lexicographic order of candidate indices.
    """
    Qn, C = W.shape
    keep = _unique_patterns(cap) if cap.shape[0] else np.zeros(0, int)
    K = len(keep)
    total = n_tuples(K, A)
    if total > limit:
        raise GeometryError(f"exact search needs {total} tuples (C({K},{A})), limit is {limit}")
    if K <= A:
        combos = [tuple(keep)]
    else:
        combos = None
    best = np.full(Qn, np.inf)
    best_t = [()] * Qn
    best_a = np.full(Qn, -1)
    it = iter(combos) if combos is not None else (tuple(keep[list(c)]) for c in itertools.combinations(range(K), A))
    block = max(1, 200_000 // max(1, Qn * max(C, 1)))
    while True:
        chunk = list(itertools.islice(it, block))
        if not chunk:
            break
        surv = np.ones((len(chunk), C), dtype=bool)
        for r, t in enumerate(chunk):
            if len(t):
                surv[r] = ~cap[list(t)].any(axis=0)
        vals, args = _surviving_max(W[:, None, :], surv[None, :, :])   # (Q, B)
        j = np.argmin(vals, axis=1)
        v = vals[np.arange(Qn), j]
        better = v < best
        for q in np.nonzero(better)[0]:
            best[q] = v[q]
            best_t[q] = tuple(int(x) for x in chunk[j[q]])
            best_a[q] = args[q, j[q]]
    if Qn and not np.all(np.isfinite(best)):
        raise AssertionError("exact search produced no tuple")
    return Search(best, best_t, best_a, "exact")


def greedy_search(W: np.ndarray, cap: np.ndarray, A: int, passes: int = 4) -> Search:
    """Grow tuples one subspace at a time, then improve by single swaps.

    The tuple for A extends the (improved) tuple for A-1, so the value is
    nonincreasing in A.
    """
    Qn, C = W.shape
    K = cap.shape[0]
    if K == 0:
        v, a = _surviving_max(W, np.ones((Qn, C), dtype=bool))
        return Search(v, [()] * Qn, a, "greedy")
    tuples = np.zeros((Qn, 0), dtype=int)
    rows = np.arange(Qn)
    capf = cap.astype(float)

    def survivors(tup):
        if tup.shape[1] == 0:
            return np.ones((Qn, C), dtype=bool)
        return ~cap[tup].any(axis=1)

    for _ in range(min(A, K)):
        surv = survivors(tuples)
        covered = (W * surv) @ capf.T                 # (Q, K) newly captured weight
        pick = np.argmax(covered, axis=1)             # first max: lowest index
        tuples = np.column_stack([tuples, pick])
        cur, _ = _surviving_max(W, survivors(tuples))
        for _ in range(passes):
            improved = False
            for slot in range(tuples.shape[1]):
                others = np.delete(tuples, slot, axis=1)
                base = survivors(others)                              # (Q, C)
                trial = base[:, None, :] & ~cap[None, :, :]           # (Q, K, C)
                tv, _ = _surviving_max(W[:, None, :], trial)
                j = np.argmin(tv, axis=1)
                v = tv[rows, j]
                upd = v < cur - 1e-15 * np.maximum(cur, 1.0)
                if np.any(upd):
                    tuples[upd, slot] = j[upd]
                    cur = np.where(upd, v, cur)
                    improved = True
            if not improved:
                break
    val, arg = _surviving_max(W, survivors(tuples))
    return Search(val, [tuple(sorted(int(x) for x in t)) for t in tuples], arg, "greedy")


def minmax_search(W, cap, A: int, mode: str = "exact", limit: int = EXACT_LIMIT, passes: int = 4) -> Search:
    if mode == "auto":
        K = len(_unique_patterns(cap)) if cap.shape[0] else 0
        mode = "exact" if n_tuples(K, A) <= limit else "greedy"
    if mode == "exact":
        return exact_search(W, cap, A, limit)
    return greedy_search(W, cap, A, passes)


# -- broad norms -----------------------------------------------------------

@dataclass
class CubeRecord:
    cube: DyadicCube
    tuple: list            # Subspace objects
    attaining: tuple | None  # cap index at the norm's scale, None when nothing survives
    weight: float

    def to_json(self):
        return {
            "cube": self.cube.to_json(),
            "tuple": [V.to_json() for V in self.tuple],
            "attaining_cap": None if self.attaining is None else list(self.attaining),
            "weight": self.weight,
        }


@dataclass
class BroadNormResult:
    value: float
    per_cube: list
    search_mode: str
    p: float
    k: int
    A: int
    scale: int
    label: str = CANDIDATE_MIN
    n_candidates: int = 0
    stderr: float = 0.0
    notes: list = dc_field(default_factory=list)

    def to_json(self):
        return {
            "value": self.value,
            "p": self.p, "k": self.k, "A": self.A, "scale": self.scale,
            "search_mode": self.search_mode, "label": self.label,
            "n_candidates": self.n_candidates, "stderr": self.stderr, "notes": self.notes,
            "per_cube": [r.to_json() for r in self.per_cube],
        }


def default_candidates(normals: np.ndarray, d: int, params: NormParams, weights=None) -> list[Subspace]:
    if normals.shape[0] == 0:
        return []
    return candidate_subspaces(normals, d, params.candidate_strategy, params.seed,
                               params.candidate_budget, params.candidate_samples, weights)


def broad_from_weights(cw: CapWeights, params: NormParams, candidates=None) -> BroadNormResult:
    """Min-max over candidate (k-1)-planes for precomputed cap weights."""
    p, k, A = params.p, params.k, params.A
    normals = cw.normals
    if candidates is None:
        candidates = default_candidates(normals, k - 1, params, cw.W.sum(axis=0) if cw.W.size else None)
    cap = capture_matrix(normals, candidates, cw.scale)
    if cw.W.shape[1] == 0:
        recs = [CubeRecord(q, [], None, 0.0) for q in cw.cubes]
        return BroadNormResult(0.0, recs, params.search_mode, p, k, A, cw.scale,
                               n_candidates=len(candidates), notes=["no caps"])
    s = minmax_search(cw.W, cap, A, params.search_mode, params.exact_limit, params.local_passes)
    caps = capset(cw.n, cw.scale).caps
    recs = []
    for q in range(len(cw.cubes)):
        att = None if s.attaining[q] < 0 else caps[cw.positions[s.attaining[q]]].index
        recs.append(CubeRecord(cw.cubes[q], [candidates[i] for i in s.tuples[q]], att, float(s.values[q])))
    total = float(np.sum(s.values))
    return BroadNormResult(total ** (1 / p), recs, s.mode, p, k, A, cw.scale, n_candidates=len(candidates))


def broad_norm(F, U: DyadicCube, params: NormParams, candidates=None) -> BroadNormResult:
    """||F||_{BL^p_{k,A,s}(U)} with s = params.D (default: the field's scale)."""
    s = params.D or F.amb.D
    if params.k > F.amb.n + 1:
        raise GeometryError(f"k={params.k} exceeds n+1={F.amb.n + 1}")
    cw = cap_weights(F, U, params.p, s, params)
    return broad_from_weights(cw, params, candidates)


def restricted_field(F, V: Subspace):
    from .field import restrict_to_subspace_caps
    return restrict_to_subspace_caps(F, V)


def restricted_broad_norm(F, V: Subspace, B: DyadicCube, params: NormParams, candidates=None) -> BroadNormResult:
    """||F_{D,V}||_{BL^p_{k,A,D0}(B)}."""
    D = F.amb.D
    if V.dim != params.k:
        raise GeometryError(f"V has dimension {V.dim}, expected k={params.k}")
    if abs(B.side - D * D) > 1e-9:
        raise GeometryError(f"B must have side D^2 = {D * D}")
    D0 = params.D0 or F.amb.D0
    G = restricted_field(F, V)
    return broad_norm(G, B, replace(params, D=D0, D0=None), candidates)


def dyadic_levels(cw_max: float, octaves: int = 40) -> list[float]:
    """Dyadic lambdas from the ceiling of ``cw_max`` downwards."""
    if cw_max <= 0:
        return []
    top = 2.0 ** math.ceil(math.log2(cw_max))
    return [top / 2 ** i for i in range(octaves)]


def local_level_broad_norm(F, U: DyadicCube, params: NormParams, lam, candidates=None):
    """nu-based local broad norm at level(s) ``lam`` (scalar or list) on cubes of side D0^2."""
    D0 = params.D0 or F.amb.D0
    scalar = np.isscalar(lam)
    levels = [float(lam)] if scalar else [float(x) for x in lam]
    for x in levels:
        if not is_dyadic(x):
            raise GeometryError(f"lambda {x} is not dyadic")
    cws = cap_weights(F, U, params.p, D0, params, levels=levels)
    sub = replace(params, D=D0, D0=None)
    if candidates is None and len(cws) and cws[0].W.shape[1]:
        candidates = default_candidates(cws[0].normals, params.k - 1, sub)
    out = [broad_from_weights(cw, sub, candidates) for cw in cws]
    return out[0] if scalar else out


# -- Xi --------------------------------------------------------------------

@dataclass
class XiResult:
    value: float
    per_block: list            # (B, best V, restricted broad value)
    label: str = CANDIDATE_SUP
    n_candidates: int = 0

    def to_json(self):
        return {"value": self.value, "label": self.label, "n_candidates": self.n_candidates,
                "per_block": [{"B": B.to_json(), "V": None if V is None else V.to_json(), "value": v}
                              for B, V, v in self.per_block]}


def xi(F, k: int, p: float, M: int, U: DyadicCube, params: NormParams,
       candidates_k=None, candidates_inner=None) -> XiResult:
    """Xi_{k,p}(M, D, U): sum over B in Q_{D^2}(U) of sup_V ||F_{D,V}||^p_{BL^p_{k,M,D0}(B)}.

    Caps of F sit at the field scale D; candidate k-planes V that select the
    same set Theta_{D,V} are evaluated once.
    """
    D = params.D or F.amb.D
    D0 = params.D0 or F.amb.D0
    M = max(1, int(M))
    inner = replace(params, p=p, k=k, A=M, D=D0, D0=None)
    blocks = dyadic_cubes(U, float(D * D))
    if len(F.cap_positions) == 0:
        return XiResult(0.0, [(B, None, 0.0) for B in blocks])
    # Theta_{D,V} is decided at scale D; fine caps inherit their scale-D parent's verdict
    mid, midcol = coarse_grouping(F, D)
    normals = capset(F.amb.n, D).normals[mid]
    if candidates_k is None:
        candidates_k = candidate_subspaces(normals, k, params.candidate_strategy, params.seed,
                                           params.candidate_budget, params.candidate_samples)
    # group candidate planes by the set of active caps they select
    sets: dict[bytes, tuple[int, np.ndarray]] = {}
    for i, V in enumerate(candidates_k):
        m = near_mask(normals, V, D)[midcol]
        if m.any():
            sets.setdefault(m.tobytes(), (i, m))
    groups = list(sets.values())
    if not groups:
        return XiResult(0.0, [(B, None, 0.0) for B in blocks], n_candidates=len(candidates_k))
    coarse, col = coarse_grouping(F, D0)
    C = len(coarse)
    cnormals = capset(F.amb.n, D0).normals[coarse]
    if candidates_inner is None:
        candidates_inner = default_candidates(cnormals, k - 1, inner)
    cap = capture_matrix(cnormals, candidates_inner, D0)
    G = len(groups)
    side = float(D0) ** 2
    # sparse (fine cap) -> (group, coarse cap) summation matrix
    rows, cols = [], []
    for g, (_, m) in enumerate(groups):
        js = np.nonzero(m)[0]
        rows.append(js)
        cols.append(g * C + col[js])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    S = sparse.csc_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(col), G * C))

    def reduce(chunk):
        v = F.cap_values(chunk.points)
        w = chunk.weights[:, None]
        width = max(C, (ENTRY_BLOCK // max(1, v.shape[0])) // C * C)
        res = []
        for c0 in range(0, G * C, width):
            acc = (S[:, c0:c0 + width].T @ v.T).T
            res.append(chunk.cell_sums(abs_pow(acc, p) * w))
        return (np.concatenate(res, axis=1),)

    total = 0.0
    per_block = []
    for bi, B in enumerate(blocks):
        rule = _rule(B, replace(params, seed=params.seed + bi), side)
        (s1,) = rule.map_strata(reduce)
        best, bestV = 0.0, None
        for g in range(G):
            W = s1[:, g * C:(g + 1) * C]
            s = minmax_search(W, cap, M, inner.search_mode, inner.exact_limit, inner.local_passes)
            v = float(np.sum(s.values))
            if v > best:
                best, bestV = v, candidates_k[groups[g][0]]
        per_block.append((B, bestV, best ** (1 / p)))
        total += best
    return XiResult(total ** (1 / p), per_block, n_candidates=len(candidates_k))


# -- weak Minkowski display ------------------------------------------------

def minmax_value(w: np.ndarray, cap: np.ndarray, A: int) -> float:
    """min over A-subsets of candidates of the max surviving weight (exhaustive)."""
    return float(exact_search(np.asarray(w, dtype=float)[None, :], cap, A, limit=10 ** 9).values[0])


def weak_triangle_check(w1, w2, A: int, A1: int, cap: np.ndarray) -> tuple[bool, float]:
    """min_A max(w1 + w2) <= min_{A1} max w1 + min_{A-A1} max w2 (exhaustive)."""
    if not 1 <= A1 <= A:
        raise GeometryError("need 1 <= A' <= A")
    w1, w2 = np.asarray(w1, dtype=float), np.asarray(w2, dtype=float)
    lhs = minmax_value(w1 + w2, cap, A)
    rhs = minmax_value(w1, cap, A1) + minmax_value(w2, cap, A - A1)
    slack = rhs - lhs
    return bool(slack >= -1e-12 * max(1.0, abs(rhs))), slack


def ball_weights_region(B: DyadicCube, D0: int) -> DyadicCube:
    """B* : the D0-dilation of B."""
    return dilate(B, D0)
