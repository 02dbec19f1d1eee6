"""Brute-force and closed-form baselines.

Nothing here calls the iterative solver or the family projection code; the
projections used by the classical em reference are written out separately
with scipy root finders, so agreement with the solver is real evidence.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np
from scipy import optimize

from .solver import PsiOracle

INTERIOR_WEIGHT = 1e-9
MAX_FULL_GRID_N = 5
CHUNK = 20000


@dataclass(frozen=True)
class GridSpec:
    """Grid of step 1/resolution.

    ``mode`` selects the point set:

    * ``"simplex"``: all points of the simplex grid meeting the family
      constraints within ``constraint_tolerance`` (alphabet size at most 5);
    * ``"slice"``: a grid over the affine solution set of the constraints,
      with ``resolution`` steps per free direction;
    * ``"conditional"``: for marginal families, a product of simplex grids
      over the conditionals of each conditioning symbol.

    ``refine`` adds that many zoom levels: each one lays a finer box grid over
    the feasible directions around the incumbent, which resolves minimisers
    hugging the simplex boundary that a uniform grid steps over.
    """

    resolution: int
    constraint_tolerance: float = 1e-9
    mode: str = "simplex"
    refine: int = 0

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")
        if self.mode not in ("simplex", "slice", "conditional"):
            raise ValueError(f"unknown grid mode {self.mode!r}")
        if self.refine < 0:
            raise ValueError("refine must be non-negative")


@dataclass(frozen=True)
class GridResult:
    point: np.ndarray
    value: float
    lipschitz: float
    error_bound: float
    points_evaluated: int

    def __iter__(self):
        yield self.point
        yield self.value


def _compositions(n, m):
    """All integer vectors of length n summing to m, lexicographic order."""
    out = []
    for bars in itertools.combinations(range(m + n - 1), n - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(m + n - 2 - prev)
        out.append(row)
    return np.array(out, dtype=float)


def _mix(P):
    """Pull boundary points into the interior; interior points stay put."""
    n = P.shape[-1]
    P = np.array(P, dtype=float)
    edge = P.min(axis=-1) < INTERIOR_WEIGHT
    P[edge] = (1.0 - INTERIOR_WEIGHT) * P[edge] + INTERIOR_WEIGHT / n
    return P


def _feature_data(fam):
    F = np.asarray(getattr(fam, "features", np.zeros((0, fam.n))), dtype=float).reshape(-1, fam.n)
    a = np.asarray(getattr(fam, "targets", np.zeros(0)), dtype=float).reshape(-1)
    return F, a


def _simplex_points(fam, spec):
    if fam.n > MAX_FULL_GRID_N:
        raise ValueError(f"full grids are limited to {MAX_FULL_GRID_N} points; use slice or conditional mode")
    P = _compositions(fam.n, spec.resolution) / spec.resolution
    F, a = _feature_data(fam)
    if F.shape[0]:
        ok = np.all(np.abs(P @ F.T - a) <= spec.constraint_tolerance, axis=1)
        P = P[ok]
    return _mix(P)


def _slice_points(fam, spec):
    F, a = _feature_data(fam)
    n = fam.n
    A = np.vstack([np.ones((1, n)), F])
    b = np.concatenate([[1.0], a])
    p0 = np.linalg.lstsq(A, b, rcond=None)[0]
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > 1e-10 * s[0]))
    N = vt[rank:].T
    d = N.shape[1]
    if d == 0:
        P = p0[None, :]
    else:
        # bounding box of {t : p0 + N t >= 0} along each null direction
        lo, hi = np.empty(d), np.empty(d)
        for i in range(d):
            for sgn, store in ((1.0, lo), (-1.0, hi)):
                c = np.zeros(d)
                c[i] = sgn
                r = optimize.linprog(c, A_ub=-N, b_ub=p0, bounds=[(None, None)] * d, method="highs")
                if r.status != 0:
                    raise ValueError("could not bound the feasible slice")
                store[i] = sgn * r.fun
        axes = [np.linspace(lo[i], hi[i], spec.resolution + 1) for i in range(d)]
        T = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        P = p0 + T @ N.T
    P = P[np.all(P >= -1e-12, axis=1)]
    P = np.clip(P, 0.0, None)
    P /= P.sum(axis=1, keepdims=True)
    return _mix(P)


def _conditional_points(fam, spec):
    marginal = getattr(fam, "marginal", None)
    if marginal is None:
        raise ValueError("conditional mode needs a marginal family")
    marginal = np.asarray(marginal, dtype=float)
    n_cond = marginal.size
    n_out = fam.n // n_cond
    cond = _mix(_compositions(n_out, spec.resolution) / spec.resolution)
    if cond.shape[0] ** n_cond > 5_000_000:
        raise ValueError("conditional grid too large")
    idx = np.array(list(itertools.product(range(cond.shape[0]), repeat=n_cond)))
    # joint[out, c] = cond_c[out] * marginal[c], flattened out-major
    J = cond[idx] * marginal[None, :, None]
    return np.transpose(J, (0, 2, 1)).reshape(idx.shape[0], -1)


def _values(psi, P):
    fn = psi.batch
    vals = np.empty(P.shape[0])
    for s in range(0, P.shape[0], CHUNK):
        block = P[s:s + CHUNK]
        if fn is not None:
            vals[s:s + CHUNK] = np.sum(block * fn(block), axis=1)
        else:
            vals[s:s + CHUNK] = [float(p @ psi(p)) for p in block]
    return vals


def _constraint_rows(fam, mode):
    marginal = getattr(fam, "marginal", None)
    if mode == "conditional" and marginal is not None:
        n_cond = np.asarray(marginal).size
        return np.stack([(np.arange(fam.n) % n_cond == c).astype(float) for c in range(n_cond)])
    F, _ = _feature_data(fam)
    return np.vstack([np.ones((1, fam.n)), F])


def _best(P, vals, n):
    finite = np.isfinite(vals)
    if not finite.any():
        raise ValueError("objective is not finite at any grid point")
    best = np.min(vals[finite])
    ties = np.flatnonzero(finite & (vals == best))
    order = np.lexsort(P[ties].T[::-1])
    i = ties[order[0]]
    dist = np.abs(P - P[i]).sum(axis=1)
    dist[i] = np.inf
    near = np.argsort(dist)[: 2 * n]
    near = near[np.isfinite(dist[near]) & (dist[near] > 0) & finite[near]]
    slopes = np.abs(vals[near] - best) / dist[near] if near.size else np.zeros(1)
    lip = float(np.max(slopes)) if slopes.size else 0.0
    h = float(np.min(dist[near])) if near.size else 0.0
    return i, float(best), lip, h


def _zoom(psi, fam, spec, point, value, lip, h):
    A = _constraint_rows(fam, spec.mode)
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > 1e-10 * s[0]))
    N = vt[rank:].T
    d = N.shape[1]
    if d == 0:
        return point, value, lip, h, 0
    per_axis = max(4, min(spec.resolution, int(round(200_000 ** (1.0 / d)))))
    width = 2.0 / spec.resolution
    evaluated = 0
    for _ in range(spec.refine):
        axis = np.linspace(-width, width, per_axis + 1)
        T = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        P = point + T @ N.T
        P = P[np.all(P >= -1e-15, axis=1)]
        P = _mix(np.clip(P, 0.0, None) / np.clip(P, 0.0, None).sum(axis=1, keepdims=True))
        P = np.vstack([point[None, :], P])
        vals = _values(psi, P)
        evaluated += P.shape[0]
        i, best, lip_i, h_i = _best(P, vals, fam.n)
        if best <= value:
            point, value, lip, h = P[i].copy(), best, lip_i, h_i
        width = 4.0 * width / per_axis
    return point, value, lip, h, evaluated


def grid_minimize(psi, fam, spec):
    """Minimise G(P) = sum P Psi[P] over grid points of ``fam``.

    Ties go to the lexicographically smallest point.  ``lipschitz`` is the
    largest |dG|/||dP||_1 between the minimiser and its nearest grid
    neighbours, and ``error_bound`` is that slope times the grid spacing
    (of the finest zoom level when ``spec.refine`` is positive).
    """
    builders = {"simplex": _simplex_points, "slice": _slice_points, "conditional": _conditional_points}
    P = builders[spec.mode](fam, spec)
    if P.shape[0] == 0:
        raise ValueError("no grid point satisfies the family constraints")
    vals = _values(psi, P)
    i, best, lip, h = _best(P, vals, fam.n)
    point, count = P[i].copy(), int(P.shape[0])
    if spec.refine:
        point, best, lip, h, extra = _zoom(psi, fam, spec, point, best, lip, h)
        count += extra
    return GridResult(point, best, lip, lip * h, count)


def bsc_capacity(p):
    """Capacity of the binary symmetric channel in nats, for 0 < p < 1/2."""
    if not 0 < p < 0.5:
        raise ValueError("crossover probability must lie in (0, 1/2)")
    return math.log(2) + p * math.log(p) + (1 - p) * math.log1p(-p)


def _e_project_root(base, G, p):
    """Moment-matching e-projection of ``p`` from ``base`` with generators ``G`` (rows)."""
    target = G @ p
    logb = np.log(base)

    def member(theta):
        s = logb + G.T @ theta
        w = np.exp(s - s.max())
        return w / w.sum()

    def eqs(theta):
        q = member(theta)
        return G @ q - target

    def jac(theta):
        q = member(theta)
        m = G @ q
        return (G * q) @ G.T - np.outer(m, m)

    sol = optimize.root(eqs, np.zeros(G.shape[0]), jac=jac, method="hybr", tol=1e-15)
    q = member(sol.x)
    if not np.all(np.abs(G @ q - target) <= 1e-9):
        raise RuntimeError("e-projection root solve failed")
    return q


def _m_project_root(F, a, q):
    """m-projection of ``q`` onto {P : F P = a} via the exponential-tilt stationarity equations."""
    logq = np.log(q)

    def tilt(theta):
        s = logq + F.T @ theta
        w = np.exp(s - s.max())
        return w / w.sum()

    if F.shape[0] == 0:
        return q / q.sum()
    if F.shape[0] == 1:
        f = F[0]

        def g(t):
            return float(tilt(np.array([t])) @ f - a[0])

        lo, hi = -1.0, 1.0
        while g(lo) > 0:
            lo *= 2
        while g(hi) < 0:
            hi *= 2
        t = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        return tilt(np.array([t]))

    def eqs(theta):
        return F @ tilt(theta) - a

    def jac(theta):
        p = tilt(theta)
        m = F @ p
        return (F * p) @ F.T - np.outer(m, m)

    sol = optimize.root(eqs, np.zeros(F.shape[0]), jac=jac, method="hybr", tol=1e-15)
    p = tilt(sol.x)
    if not np.all(np.abs(F @ p - a) <= 1e-9):
        raise RuntimeError("m-projection root solve failed")
    return p


def _efam_data(efam):
    return np.asarray(efam.base, dtype=float), np.asarray(efam.generators, dtype=float).reshape(-1, len(efam.base))


def classical_em_reference(fam, efam, init, iters):
    """Alternate e-projection onto ``efam`` and m-projection onto ``fam``; returns ``[init, P1, ..., P_iters]``."""
    F, a = _feature_data(fam)
    init = np.asarray(init, dtype=float)
    if np.any(np.abs(F @ init - a) > 1e-8) or abs(init.sum() - 1) > 1e-12:
        raise ValueError("init is not in the mixture family")
    base, G = _efam_data(efam)
    out = [init.copy()]
    p = init
    for _ in range(iters):
        e = _e_project_root(base, G, p)
        p = _m_project_root(F, a, e)
        out.append(p)
    return out


def _batched_e_project(base, G, P, iters=200, tol=1e-12):
    """Vectorised damped Newton moment matching for many points at once.

    Each row minimises the convex dual ``ln sum b e^{theta.g} - theta.target``
    with its own Armijo backtracking.  Rows that fail to reach ``tol`` come
    back as NaN so callers never score an unconverged projection.
    """
    N = P.shape[0]
    k = G.shape[0]
    target = P @ G.T
    logb = np.log(base)

    def dual(theta):
        s = logb + theta @ G
        top = s.max(axis=1, keepdims=True)
        w = np.exp(s - top)
        z = w.sum(axis=1, keepdims=True)
        q = w / z
        val = (top + np.log(z))[:, 0] - np.einsum("nk,nk->n", theta, target)
        return val, q

    theta = np.zeros((N, k))
    val, q = dual(theta)
    r = q @ G.T - target
    for _ in range(iters):
        active = np.max(np.abs(r), axis=1) > tol
        if not active.any():
            break
        m = q @ G.T
        H = np.einsum("ni,ji,ki->njk", q, G, G) - m[:, :, None] * m[:, None, :]
        step = np.linalg.solve(H + 1e-15 * np.eye(k), r[:, :, None])[:, :, 0]
        slope = -np.einsum("nk,nk->n", r, step)
        t = np.where(active, 1.0, 0.0)
        pending = active.copy()
        for _ in range(60):
            cand = theta - t[:, None] * step
            v_c, q_c = dual(cand)
            ok = pending & np.isfinite(v_c) & (v_c <= val + 1e-4 * t * slope)
            flat = pending & np.isfinite(v_c) & (np.abs(v_c - val) <= 1e-14 * (1 + np.abs(val)))
            accept = ok | flat
            theta[accept] = cand[accept]
            val[accept] = v_c[accept]
            q[accept] = q_c[accept]
            pending &= ~accept
            if not pending.any():
                break
            t = np.where(pending, 0.5 * t, t)
        r = q @ G.T - target
    bad = np.max(np.abs(r), axis=1) > 1e-9
    q[bad] = np.nan
    return q


def em_divergence_oracle(efam):
    """Psi[P] = ln P - ln(e-projection of P) with an independent vectorised e-projection.

    Since the projection matches moments, sum P Psi[P] is D(P || e-projection).
    """
    base, G = _efam_data(efam)

    def batch(P):
        P = np.atleast_2d(P)
        return np.log(P) - np.log(_batched_e_project(base, G, P))

    def single(p):
        return batch(np.asarray(p, dtype=float)[None, :])[0]

    return PsiOracle(single, True, batch, "em-reference")
