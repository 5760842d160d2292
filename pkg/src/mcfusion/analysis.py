"""Exact false-alarm / miss probabilities, ROC curves and calibration.

The per-sensor slot sum is a Poisson mixture across the sensing grid; its
PMF, truncated at a controlled tail mass, drives three analytic routes:

* joint enumeration over per-sensor sums for the statistics that add one
  term per sensor (optimal DTM, max-log, plug-in CV, and the affine
  ideal-sensor statistic as a cross-check);
* closed forms via the Poisson upper tail for the count-thresholding rules
  (shared-molecule optimal rule and total-count combining);
* the local-vote binomial form for the two-stage rule.

Probabilities from enumeration carry an additive truncation uncertainty of
at most M * eps; the closed forms use untruncated tails.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy import stats

from .channel import ChannelParams
from .detectors import COUNT_KINDS, DetectorKind, per_sensor_llr
from .sensing import SensingModel, SumSensingPMF, sum_pmf

__all__ = [
    "CountPMF",
    "PerfPoint",
    "poisson_tail",
    "per_sensor_count_pmf",
    "count_pmf_pair",
    "exact_perf_llr_sum",
    "total_statistic_distribution",
    "stm_perf_closed_form",
    "mrc_perf_closed_form",
    "two_stage_perf",
    "roc_curve",
    "calibrate_threshold",
]

DEFAULT_EPS = 1e-12
ENUMERATION_M_CAP = 6
# Above this many joint support points the exact total-statistic
# distribution is abandoned for a fixed threshold grid.
_DISTRIBUTION_CAP = 2_000_000
_GRID_FALLBACK_SIZE = 512


def poisson_tail(x: float, lam: float) -> float:
    """P(Poisson(lam) > x) via the regularized lower incomplete gamma.

    Defined for any real x (only the integer part matters): x < 0 gives 1,
    a zero mean gives 0 for x >= 0.
    """
    if lam < 0.0:
        raise ValueError("the Poisson mean must be nonnegative")
    if x < 0.0:
        return 1.0
    if lam == 0.0:
        return 0.0
    return float(special.gammainc(math.floor(x) + 1.0, lam))


def _poisson_tail_vec(x: float, lams: np.ndarray) -> np.ndarray:
    """poisson_tail against an array of means, for the closed forms."""
    lams = np.asarray(lams, dtype=float)
    if x < 0.0:
        return np.ones_like(lams)
    out = special.gammainc(math.floor(x) + 1.0, lams)
    return np.where(lams == 0.0, 0.0, out)


@dataclass(frozen=True)
class CountPMF:
    """Truncated PMF of one sensor's slot sum under one hypothesis.

    ``mass[w]`` is the probability of slot sum w for w = 0..W; ``tail_bound``
    bounds the truncated mass beyond W.
    """

    mass: np.ndarray
    tail_bound: float
    support: np.ndarray = field(init=False)

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float)
        if mass.ndim != 1 or mass.size == 0:
            raise ValueError("mass must be a non-empty 1-D array")
        if np.any(mass < 0.0):
            raise ValueError("mass contains negative entries")
        if not 0.0 <= self.tail_bound <= 1.0:
            raise ValueError("tail_bound must lie in [0, 1]")
        total = float(mass.sum()) + self.tail_bound
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"mass + tail must account for 1 (got {total!r})")
        support = np.arange(mass.size)
        mass.flags.writeable = False
        support.flags.writeable = False
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "support", support)

    @property
    def W(self) -> int:
        return self.mass.size - 1


@dataclass(frozen=True)
class PerfPoint:
    """One operating point: threshold(s) with exact error probabilities.

    ``uncertainty`` is the additive truncation allowance of the evaluation
    route (zero for the untruncated closed forms); ``method`` records the
    route that produced the point.
    """

    threshold: object
    pfa: float
    pd: float
    method: str = "analytic"
    uncertainty: float = 0.0

    def __post_init__(self):
        slack = self.uncertainty + 1e-12
        for name, v in (("pfa", self.pfa), ("pd", self.pd)):
            if not -slack <= v <= 1.0 + slack:
                raise ValueError(f"{name} out of [0, 1] beyond uncertainty: {v!r}")

    @property
    def pm(self) -> float:
        return 1.0 - self.pd


def _slot_sum_means(grid: np.ndarray, params: ChannelParams) -> np.ndarray:
    return params.N * (np.asarray(grid) * params.A + params.J)


def _truncation_point(means: np.ndarray, n_components: int, eps: float) -> int:
    # Per-component quantile at 1 - eps/L keeps the mixture tail under eps
    # regardless of the mixing weights.
    q = stats.poisson.ppf(1.0 - eps / n_components, np.maximum(means, 0.0))
    return int(np.max(np.where(means > 0.0, q, 0.0)))


def _mixture_mass(weights: np.ndarray, means: np.ndarray, W: int) -> np.ndarray:
    support = np.arange(W + 1)
    comp = stats.poisson.pmf(support[None, :], means[:, None])
    # A zero mean is a point mass at zero counts.
    zero = means == 0.0
    if np.any(zero):
        comp[zero] = 0.0
        comp[zero, 0] = 1.0
    return weights @ comp


def per_sensor_count_pmf(model: SensingModel, params: ChannelParams,
                         hypothesis: int, eps: float = DEFAULT_EPS) -> CountPMF:
    """Truncated slot-sum PMF of one sensor under one hypothesis.

    The truncation point is the smallest W whose residual mixture tail is at
    most ``eps`` (bounded via per-component Poisson quantiles, then trimmed).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    weights = model.pmf(hypothesis)
    means = _slot_sum_means(model.grid, params)
    W = _truncation_point(means, model.L, eps)
    mass = _mixture_mass(weights, means, W)
    cum = np.cumsum(mass)
    keep = np.nonzero(1.0 - cum <= eps)[0]
    if keep.size and keep[0] < W:
        W = int(keep[0])
        mass = mass[: W + 1]
    tail = max(0.0, 1.0 - float(mass.sum()))
    return CountPMF(mass=mass, tail_bound=tail)


def count_pmf_pair(model: SensingModel, params: ChannelParams,
                   eps: float = DEFAULT_EPS) -> tuple[CountPMF, CountPMF]:
    """Both hypotheses' slot-sum PMFs on one shared support.

    The mixture components (the per-grid-point Poissons) coincide across
    hypotheses, so a common truncation keeps both tails under ``eps``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    means = _slot_sum_means(model.grid, params)
    W = _truncation_point(means, model.L, eps)
    out = []
    for hyp in (0, 1):
        mass = _mixture_mass(model.pmf(hyp), means, W)
        out.append(CountPMF(mass=mass, tail_bound=max(0.0, 1.0 - float(mass.sum()))))
    return out[0], out[1]


def _statistic_table(llr, W: int) -> np.ndarray:
    vals = np.asarray(llr(np.arange(W + 1)), dtype=float)
    if np.isnan(vals).any():
        raise ValueError("statistic table contains NaN")
    if np.isneginf(vals).all():
        raise ValueError("statistic is -inf on the whole truncated support")
    return vals


def exact_perf_llr_sum(llr, model: SensingModel, params: ChannelParams,
                       gamma: float, eps: float = DEFAULT_EPS,
                       m_cap: int = ENUMERATION_M_CAP) -> PerfPoint:
    """Exact (Pfa, Pd) of thresholding a sum of per-sensor statistics.

    Enumerates joint per-sensor slot-sum vectors over the truncated support,
    depth-first with two prunes: a subtree whose best reachable total cannot
    exceed ``gamma`` is dropped, one whose worst total already exceeds it is
    absorbed in closed form.  Exact up to an additive M * eps truncation.
    """
    M = params.M
    if M < 1:
        raise ValueError("need at least one sensor")
    if M > m_cap:
        raise ValueError(f"joint enumeration is capped at M = {m_cap}")
    pmf0, pmf1 = count_pmf_pair(model, params, eps)
    vals = _statistic_table(llr, pmf0.W)

    order = np.argsort(-vals, kind="stable")
    v = vals[order]
    l0 = pmf0.mass[order]
    l1 = pmf1.mass[order]
    keep = (l0 > 0.0) | (l1 > 0.0)
    v, l0, l1 = v[keep], l0[keep], l1[keep]

    all_finite = bool(np.isfinite(v).all())
    vmax, vmin = float(v[0]), float(v[-1])
    t0, t1 = float(l0.sum()), float(l1.sum())
    K = v.size
    acc0 = acc1 = 0.0

    # Iterative DFS; stack entries are (depth, finite sum, #+inf, #-inf,
    # H0 path mass, H1 path mass).
    stack = [(0, 0.0, 0, 0, 1.0, 1.0)]
    while stack:
        depth, fin, npos, nneg, p0, p1 = stack.pop()
        rem = M - depth
        if rem == 0:
            if npos and nneg:
                total = 0.0
            elif npos:
                total = math.inf
            elif nneg:
                total = -math.inf
            else:
                total = fin
            if total > gamma:
                acc0 += p0
                acc1 += p1
            continue
        if all_finite:
            if fin + rem * vmax <= gamma:
                continue
            if fin + rem * vmin > gamma:
                acc0 += p0 * t0 ** rem
                acc1 += p1 * t1 ** rem
                continue
        for k in range(K):
            vk = float(v[k])
            if all_finite and fin + vk + (rem - 1) * vmax <= gamma:
                break  # sorted descending: no later value can recover
            q0, q1 = p0 * float(l0[k]), p1 * float(l1[k])
            if q0 == 0.0 and q1 == 0.0:
                continue
            if math.isinf(vk):
                if vk > 0:
                    stack.append((depth + 1, fin, npos + 1, nneg, q0, q1))
                else:
                    stack.append((depth + 1, fin, npos, nneg + 1, q0, q1))
            else:
                stack.append((depth + 1, fin + vk, npos, nneg, q0, q1))

    return PerfPoint(threshold=gamma, pfa=min(acc0, 1.0), pd=min(acc1, 1.0),
                     method="analytic", uncertainty=M * eps)


def _resolve_totals(fin: np.ndarray, npos: np.ndarray, nneg: np.ndarray) -> np.ndarray:
    out = np.where(npos > 0, np.inf, fin)
    out = np.where(nneg > 0, -np.inf, out)
    return np.where((npos > 0) & (nneg > 0), 0.0, out)


def total_statistic_distribution(llr, model: SensingModel, params: ChannelParams,
                                 eps: float = DEFAULT_EPS):
    """Exact distribution of the summed per-sensor statistic.

    Returns (totals, p0, p1) with totals ascending and the joint probability
    mass each total carries under either hypothesis, or None when the joint
    support is too large to tabulate.
    """
    M = params.M
    pmf0, pmf1 = count_pmf_pair(model, params, eps)
    vals = _statistic_table(llr, pmf0.W)
    if (pmf0.W + 1) ** M > _DISTRIBUTION_CAP:
        return None
    fin = np.where(np.isfinite(vals), vals, 0.0)
    pos = np.isposinf(vals).astype(np.int64)
    neg = np.isneginf(vals).astype(np.int64)
    tf, tp, tn = fin, pos, neg
    q0, q1 = pmf0.mass, pmf1.mass
    for _ in range(M - 1):
        tf = (tf[:, None] + fin[None, :]).ravel()
        tp = (tp[:, None] + pos[None, :]).ravel()
        tn = (tn[:, None] + neg[None, :]).ravel()
        q0 = (q0[:, None] * pmf0.mass[None, :]).ravel()
        q1 = (q1[:, None] * pmf1.mass[None, :]).ravel()
    totals = _resolve_totals(tf, tp, tn)
    order = np.argsort(totals, kind="stable")
    totals, q0, q1 = totals[order], q0[order], q1[order]
    uniq, start = np.unique(totals, return_index=True)
    p0 = np.add.reduceat(q0, start)
    p1 = np.add.reduceat(q1, start)
    return uniq, p0, p1


def stm_perf_closed_form(spmf: SumSensingPMF, params: ChannelParams,
                         gamma: int) -> PerfPoint:
    """(Pfa, Pd) of the shared-molecule total-count rule at integer gamma.

    Mixes the untruncated Poisson upper tail over the summed-sensed-value
    grid; the noise mean J enters once.
    """
    gamma = _check_count_threshold(gamma)
    if spmf.M != params.M:
        raise ValueError("sum PMF and channel params disagree on M")
    means = params.N * (spmf.grid * params.A + params.J)
    tails = _poisson_tail_vec(gamma, means)
    return PerfPoint(threshold=gamma, pfa=float(spmf.G0 @ tails),
                     pd=float(spmf.G1 @ tails), method="analytic")


def mrc_perf_closed_form(spmf: SumSensingPMF, params: ChannelParams,
                         gamma: int) -> PerfPoint:
    """(Pfa, Pd) of the total-count combining rule at integer gamma.

    Identical in form to the shared-molecule rule except that every sensor
    contributes its own noise mean: J is replaced by M * J.
    """
    gamma = _check_count_threshold(gamma)
    if spmf.M != params.M:
        raise ValueError("sum PMF and channel params disagree on M")
    means = params.N * (spmf.grid * params.A + params.M * params.J)
    tails = _poisson_tail_vec(gamma, means)
    return PerfPoint(threshold=gamma, pfa=float(spmf.G0 @ tails),
                     pd=float(spmf.G1 @ tails), method="analytic")


def two_stage_perf(model: SensingModel, params: ChannelParams,
                   gamma_local: int, gamma_global: int) -> PerfPoint:
    """(Pfa, Pd) of local count votes fused by a global vote threshold.

    Each sensor's vote is a Bernoulli with the local exceedance probability;
    the fused decision is a binomial upper tail over M sensors.
    """
    gamma_local = _check_count_threshold(gamma_local)
    if not 0 <= gamma_global <= params.M:
        raise ValueError("gamma_global must lie in 0..M")
    means = _slot_sum_means(model.grid, params)
    tails = _poisson_tail_vec(gamma_local, means)
    vote0 = float(model.g0 @ tails)
    vote1 = float(model.g1 @ tails)
    pfa = float(stats.binom.sf(gamma_global, params.M, vote0))
    pd = float(stats.binom.sf(gamma_global, params.M, vote1))
    return PerfPoint(threshold=(gamma_local, gamma_global), pfa=pfa, pd=pd,
                     method="analytic")


def _check_count_threshold(gamma) -> int:
    g = float(gamma)
    if not g.is_integer() or g < -1:
        raise ValueError("count thresholds must be integers >= -1")
    return int(g)


def _count_threshold_range(model: SensingModel, params: ChannelParams,
                           kind: DetectorKind) -> range:
    spmf = sum_pmf(model, params.M)
    j_scale = params.M if kind is DetectorKind.MRC else 1
    top = params.N * (spmf.grid[-1] * params.A + j_scale * params.J)
    hi = int(stats.poisson.ppf(1.0 - 1e-14, max(top, 1e-9))) + 1
    return range(-1, hi + 1)


def _llr_operating_points(kind: DetectorKind, model: SensingModel,
                          params: ChannelParams, eps: float):
    """All achievable operating points of a summed-statistic rule.

    Thresholds are the achievable totals themselves (plus -inf); returned
    sorted by increasing Pfa.
    """
    llr = per_sensor_llr(kind, model, params)
    dist = total_statistic_distribution(llr, model, params, eps)
    uncertainty = params.M * eps
    if dist is not None:
        totals, p0, p1 = dist
        # P(total > totals[k]) is the mass strictly above index k.
        suf0 = np.concatenate([np.cumsum(p0[::-1])[::-1], [0.0]])[1:]
        suf1 = np.concatenate([np.cumsum(p1[::-1])[::-1], [0.0]])[1:]
        pts = [PerfPoint(threshold=-math.inf, pfa=min(float(p0.sum()), 1.0),
                         pd=min(float(p1.sum()), 1.0), uncertainty=uncertainty)]
        for k in range(totals.size):
            pts.append(PerfPoint(threshold=float(totals[k]),
                                 pfa=min(float(suf0[k]), 1.0),
                                 pd=min(float(suf1[k]), 1.0),
                                 uncertainty=uncertainty))
        return pts
    # Joint support too large to tabulate: fall back to a fixed grid of
    # thresholds across the reachable finite range.
    pmf0, _ = count_pmf_pair(model, params, eps)
    vals = _statistic_table(llr, pmf0.W)
    finite = vals[np.isfinite(vals)]
    lo, hi = params.M * float(finite.min()), params.M * float(finite.max())
    grid = [-math.inf, *np.linspace(lo, hi, _GRID_FALLBACK_SIZE)]
    return [exact_perf_llr_sum(llr, model, params, g, eps) for g in grid]


def _pareto_staircase(points: list[PerfPoint]) -> list[PerfPoint]:
    """Keep the undominated operating points, sorted by increasing Pfa.

    Walking in increasing Pfa, a point is dominated exactly when some
    smaller-Pfa point already achieves at least its Pd.
    """
    best = {}
    for p in points:
        cur = best.get(p.pfa)
        if cur is None or p.pd > cur.pd:
            best[p.pfa] = p
    out = []
    top = -math.inf
    for pfa in sorted(best):
        p = best[pfa]
        if p.pd > top:
            out.append(p)
            top = p.pd
    return out


def roc_curve(kind: DetectorKind, model: SensingModel, params: ChannelParams,
              thresholds=None, eps: float = DEFAULT_EPS) -> list[PerfPoint]:
    """Operating points of one detector, sorted by increasing Pfa.

    With ``thresholds`` omitted, count rules walk every integer threshold,
    summed-statistic rules every achievable total, and the two-stage rule
    the undominated (local, global) pairs.
    """
    kind = DetectorKind(kind)
    if kind in COUNT_KINDS:
        closed = stm_perf_closed_form if kind is DetectorKind.OPT_STM else mrc_perf_closed_form
        spmf = sum_pmf(model, params.M)
        gammas = _count_threshold_range(model, params, kind) if thresholds is None else thresholds
        pts = [closed(spmf, params, g) for g in gammas]
    elif kind is DetectorKind.TWO_STAGE:
        if thresholds is None:
            locs = _count_threshold_range(model, params, DetectorKind.OPT_STM)
            pairs = [(gl, gg) for gg in range(params.M) for gl in locs]
            pts = _pareto_staircase(
                [two_stage_perf(model, params, gl, gg) for gl, gg in pairs])
        else:
            pts = [two_stage_perf(model, params, gl, gg) for gl, gg in thresholds]
    else:
        if thresholds is None:
            pts = _llr_operating_points(kind, model, params, eps)
        else:
            llr = per_sensor_llr(kind, model, params)
            pts = [exact_perf_llr_sum(llr, model, params, g, eps) for g in thresholds]
    return sorted(pts, key=lambda p: (p.pfa, p.pd))


def calibrate_threshold(kind: DetectorKind, model: SensingModel,
                        params: ChannelParams, target_pfa: float,
                        eps: float = DEFAULT_EPS):
    """Smallest threshold whose exact Pfa does not exceed the target.

    Count rules return an integer, summed-statistic rules a real statistic
    level, the two-stage rule the feasible (local, global) pair of smallest
    miss probability.  Conservative: the achieved Pfa never exceeds the
    target.
    """
    if not 0.0 < target_pfa <= 1.0:
        raise ValueError("target_pfa must lie in (0, 1]")
    kind = DetectorKind(kind)
    if kind in COUNT_KINDS:
        closed = stm_perf_closed_form if kind is DetectorKind.OPT_STM else mrc_perf_closed_form
        spmf = sum_pmf(model, params.M)
        g = -1
        while True:  # Pfa decreases in g and underflows to exactly 0
            if closed(spmf, params, g).pfa <= target_pfa:
                return g
            g += 1
    if kind is DetectorKind.TWO_STAGE:
        return _calibrate_two_stage(model, params, target_pfa)
    # Points run in ascending threshold order, so Pfa is nonincreasing and
    # the first fit is the smallest feasible threshold.
    for p in _llr_operating_points(kind, model, params, eps):
        if p.pfa <= target_pfa:
            return p.threshold
    raise ValueError("no feasible statistic threshold found")  # pragma: no cover


def _calibrate_two_stage(model: SensingModel, params: ChannelParams,
                         target_pfa: float) -> tuple[int, int]:
    """Feasible (gamma_local, gamma_global) pair minimizing the miss rate."""
    best = None
    for gg in range(params.M):
        for gl in _count_threshold_range(model, params, DetectorKind.OPT_STM):
            p = two_stage_perf(model, params, gl, gg)
            if p.pfa <= target_pfa:
                key = (p.pm, gg, gl)
                if best is None or key < best[0]:
                    best = (key, (gl, gg))
                break  # larger gl only raises the miss rate at this gg
    if best is None:  # pragma: no cover - the extreme pair is always feasible
        raise ValueError("no feasible two-stage threshold pair found")
    return best[1]
