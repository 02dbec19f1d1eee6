"""Mixture and exponential families on a finite alphabet and their projections.

Both projections reduce to the same convex problem: tilt a reference
distribution ``r`` by ``exp(F @ theta)`` and pick ``theta`` so that the tilted
distribution has prescribed feature expectations.  The m-projection of ``q``
onto ``{P : P[f_i] = a_i}`` is the tilt of ``q`` matching ``a``; the
e-projection of ``p`` onto ``{base * exp(g . theta - phi)}`` is the tilt of
``base`` matching ``p[g]``.
"""

from dataclasses import dataclass
import warnings

import numpy as np
from scipy.optimize import linprog

from .info import as_distribution

RANK_TOL = 1e-9
FEASIBILITY_TOL = 1e-6
DEFAULT_TOL = 1e-10
MAX_DUAL_ITER = 200
INTERIOR_TOL = 1e-12


class InfeasibleFamilyError(ValueError):
    """No full-support distribution satisfies the constraints."""


class ProjectionWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class DualSolveReport:
    theta: np.ndarray
    dual_value: float
    gradient_norm: float
    iterations: int
    converged: bool


def _as_feature_matrix(features, n=None):
    F = np.asarray(features, dtype=float)
    if F.size == 0:
        return np.zeros((0, n if n is not None else 0))
    F = np.atleast_2d(F)
    if n is not None and F.shape[1] != n:
        raise ValueError(f"features have length {F.shape[1]}, alphabet has {n} points")
    if not np.all(np.isfinite(F)):
        raise ValueError("feature values must be finite")
    return F


def _check_independent(F, what):
    n = F.shape[1]
    if F.shape[0] + 1 > n:
        raise ValueError(f"{F.shape[0]} {what} cannot be independent of the constant on {n} points")
    A = np.vstack([np.ones(n), F])
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= RANK_TOL * s[0]:
        raise ValueError(f"{what} are not linearly independent of each other and of the constant")


def independent_subset(features):
    """Greedy maximal subset of rows independent of each other and of the constant."""
    F = _as_feature_matrix(features)
    n = F.shape[1]
    basis = [np.ones(n) / np.sqrt(n)]
    keep = []
    for i, f in enumerate(F):
        r = f - sum((f @ b) * b for b in basis)
        norm = np.linalg.norm(r)
        if norm > RANK_TOL * max(1.0, np.linalg.norm(f)):
            basis.append(r / norm)
            keep.append(i)
    return F[keep]


def _tilt(logr, F, theta):
    s = logr + F.T @ theta
    m = s.max()
    w = np.exp(s - m)
    z = w.sum()
    return w / z, m + np.log(z)


def solve_dual(ref, features, targets, tol=DEFAULT_TOL, max_iter=MAX_DUAL_ITER, gap_tol=None):
    """Minimise ``ln sum_x ref(x) exp(theta . f(x)) - theta . targets`` over theta.

    Damped Newton with backtracking.  Stops when the residual
    ``max_i |Q_theta[f_i] - a_i|`` is at most ``tol``, or, when ``gap_tol`` is
    given, as soon as the Newton estimate of the dual suboptimality
    (half the squared Newton decrement) drops below ``gap_tol``.

    Returns the tilted distribution ``Q_theta`` and a :class:`DualSolveReport`.
    """
    ref = np.asarray(ref, dtype=float)
    F = _as_feature_matrix(features, ref.size)
    a = np.asarray(targets, dtype=float).reshape(-1)
    k = F.shape[0]
    logr = np.log(ref)
    theta = np.zeros(k)
    if k == 0:
        q = ref / ref.sum()
        return q, DualSolveReport(theta, float(np.log(ref.sum())), 0.0, 0, True)

    def evaluate(th):
        q, logz = _tilt(logr, F, th)
        return q, logz - th @ a, F @ q - a

    q, val, grad = evaluate(theta)
    best = (np.inf, theta, q, val)
    it = 0
    converged = False
    while True:
        res = float(np.abs(grad).max())
        if res < best[0]:
            best = (res, theta, q, val)
        if res <= tol and gap_tol is None:
            converged = True
            break
        if it >= max_iter:
            break
        mean = F @ q
        H = (F * q) @ F.T - np.outer(mean, mean)
        try:
            step = -np.linalg.solve(H, grad)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, grad, rcond=None)[0]
        decrement = float(-grad @ step)
        if gap_tol is not None and 0.5 * decrement <= gap_tol:
            converged = True
            break
        if k == 1 and (H[0, 0] <= 1e-14 or not np.isfinite(decrement)):
            theta, q, val, grad, extra = _bisect_1d(logr, F, a, theta, tol, max_iter - it)
            it += extra
            res = float(np.abs(grad).max())
            if res < best[0]:
                best = (res, theta, q, val)
            converged = res <= tol
            break
        t = 1.0
        slope = float(grad @ step)
        while True:
            cand = theta + t * step
            q_c, val_c, grad_c = evaluate(cand)
            if np.isfinite(val_c) and val_c <= val + 1e-4 * t * slope:
                break
            # value differences at rounding level: fall back to residual decrease
            if (np.isfinite(val_c) and abs(val_c - val) <= 1e-13 * (1.0 + abs(val))
                    and np.abs(grad_c).max() < np.abs(grad).max()):
                break
            t *= 0.5
            if t < 1e-12:
                break
        it += 1
        if t < 1e-12:
            # no further decrease at machine precision
            if k == 1:
                theta, q, val, grad, extra = _bisect_1d(logr, F, a, theta, tol, max_iter - it)
                it += extra
                res = float(np.abs(grad).max())
                if res < best[0]:
                    best = (res, theta, q, val)
                converged = res <= tol
            break
        theta, q, val, grad = cand, q_c, val_c, grad_c
    res, theta, q, val = best
    if gap_tol is not None and not converged:
        converged = res <= tol
    return q, DualSolveReport(theta, float(val), res, it, bool(converged))


def _bisect_1d(logr, F, a, theta, tol, budget):
    """Bisection on the monotone residual theta -> Q_theta[f] - a (single constraint)."""
    def resid(t):
        q, logz = _tilt(logr, F, np.array([t]))
        return float(F[0] @ q - a[0]), q, logz

    t0 = float(theta[0])
    r0 = resid(t0)[0]
    width = max(1.0, abs(t0))
    lo, hi = t0, t0
    if r0 > 0:
        while resid(lo)[0] > 0 and width < 1e300:
            lo = t0 - width
            width *= 2
    else:
        while resid(hi)[0] < 0 and width < 1e300:
            hi = t0 + width
            width *= 2
    it = 0
    mid = t0
    for it in range(1, max(budget, 1) + 1):
        mid = 0.5 * (lo + hi)
        r = resid(mid)[0]
        if abs(r) <= tol or hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
        if r > 0:
            hi = mid
        else:
            lo = mid
    th = np.array([mid])
    r, q, logz = resid(mid)
    return th, q, logz - mid * a[0], np.array([r]), it


def _interior_slack(F, a):
    """Largest s such that some P with P >= s meets the constraints (LP)."""
    k, n = F.shape
    # variables (p_1..p_n, s); maximise s
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_eq = np.zeros((k + 1, n + 1))
    A_eq[:k, :n] = F
    A_eq[k, :n] = 1.0
    b_eq = np.append(a, 1.0)
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * n + [(None, 1.0)], method="highs")
    if res.status != 0:
        return -np.inf
    return float(-res.fun)


class MixtureFamily:
    """Distributions P on ``n`` points with P[f_i] = a_i for each constraint.

    ``features`` is a (k, n) array whose rows are the constraint functions and
    ``targets`` the prescribed expectations.  ``k = 0`` is the whole simplex.
    Construction checks linear independence and that some full-support
    distribution meets the constraints.
    """

    def __init__(self, n, features=(), targets=(), check_feasible=True):
        self.n = int(n)
        if self.n < 1:
            raise ValueError("alphabet size must be positive")
        F = _as_feature_matrix(features, self.n)
        a = np.asarray(targets, dtype=float).reshape(-1)
        if a.size != F.shape[0]:
            raise ValueError(f"{F.shape[0]} features but {a.size} targets")
        if F.shape[0]:
            _check_independent(F, "constraint features")
        F.setflags(write=False)
        a.setflags(write=False)
        self.features = F
        self.targets = a
        self._uniform_member = None
        if check_feasible and self.k:
            if _interior_slack(F, a) <= INTERIOR_TOL:
                raise InfeasibleFamilyError(
                    f"targets {a.tolist()} are not attained by any full-support distribution"
                )
            member, rep = solve_dual(np.full(self.n, 1.0 / self.n), F, a, tol=DEFAULT_TOL)
            if rep.gradient_norm > FEASIBILITY_TOL or np.any(member <= 0):
                raise InfeasibleFamilyError(
                    f"no full-support distribution meets targets {a.tolist()} "
                    f"(residual {rep.gradient_norm:.3g})"
                )
            self._uniform_member = member

    @classmethod
    def simplex(cls, n):
        return cls(n)

    @property
    def k(self):
        return self.features.shape[0]

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, k={self.k})"

    def coordinates(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n,):
            raise ValueError(f"dimension mismatch: distribution of length {p.size}, family on {self.n}")
        return self.features @ p

    def residual(self, p):
        if self.k == 0:
            return 0.0
        return float(np.abs(self.coordinates(p) - self.targets).max())

    def is_member(self, p, tol=1e-8):
        return self.residual(p) <= tol

    def m_project(self, q, tol=DEFAULT_TOL, gap_tol=None):
        """argmin over members P of D(P||q), as (P, DualSolveReport)."""
        q = np.asarray(q, dtype=float)
        if q.shape != (self.n,):
            raise ValueError(f"dimension mismatch: distribution of length {q.size}, family on {self.n}")
        if self.k == 0:
            return q.copy(), DualSolveReport(np.zeros(0), 0.0, 0.0, 0, True)
        return solve_dual(q, self.features, self.targets, tol=tol, gap_tol=gap_tol)

    def tilt(self, q, theta):
        """Member ``Q_theta`` of the exponential family through ``q`` orthogonal to this family."""
        q = np.asarray(q, dtype=float)
        return _tilt(np.log(q), self.features, np.asarray(theta, dtype=float))[0]

    def default_member(self):
        """m-projection of the uniform distribution."""
        if self.k == 0:
            return np.full(self.n, 1.0 / self.n)
        if self._uniform_member is None:
            self._uniform_member = self.m_project(np.full(self.n, 1.0 / self.n))[0]
        return self._uniform_member.copy()

    def with_constraint(self, feature, target):
        F = np.vstack([self.features, np.asarray(feature, dtype=float).reshape(1, -1)])
        a = np.append(self.targets, float(target))
        return MixtureFamily(self.n, F, a)

    def recentered(self):
        """Same family written with zero targets (features shifted by their targets)."""
        F = self.features - self.targets[:, None]
        return MixtureFamily(self.n, F, np.zeros(self.k), check_feasible=False)


class MarginalFamily(MixtureFamily):
    """Joint distributions on (out, cond) with a fixed marginal on the ``cond`` axis.

    Points are laid out row-major as ``index = out * n_cond + cond``.  The
    m-projection is the closed form ``Q_{out|cond} * marginal``.
    """

    def __init__(self, n_out, marginal):
        marginal = as_distribution(marginal, "marginal")
        self.n_out = int(n_out)
        self.n_cond = marginal.size
        self.marginal = marginal
        n = self.n_out * self.n_cond
        F = np.zeros((self.n_cond - 1, n))
        for x in range(self.n_cond - 1):
            F[x, x::self.n_cond] = 1.0
        super().__init__(n, F, marginal[:-1], check_feasible=False)

    def m_project(self, q, tol=DEFAULT_TOL, gap_tol=None):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.n,):
            raise ValueError(f"dimension mismatch: distribution of length {q.size}, family on {self.n}")
        joint = q.reshape(self.n_out, self.n_cond)
        qx = joint.sum(axis=0)
        out = (joint / qx * self.marginal).reshape(-1)
        # natural parameters of the tilt relative to the last conditioning point
        lr = np.log(self.marginal / qx)
        theta = lr[:-1] - lr[-1]
        resid = float(np.abs(self.features @ out - self.targets).max()) if self.k else 0.0
        dual = float(np.log(np.sum(q * np.exp(self.features.T @ theta))) - theta @ self.targets)
        return out, DualSolveReport(theta, dual, resid, 0, True)

    def default_member(self):
        return np.repeat(self.marginal[None, :] / self.n_out, self.n_out, axis=0).reshape(-1)


class ExponentialFamily:
    """Distributions ``base(x) exp(sum_j theta_j g_j(x) - phi(theta))``."""

    def __init__(self, base, generators=()):
        base = as_distribution(base, "base")
        G = _as_feature_matrix(generators, base.size)
        if G.shape[0]:
            _check_independent(G, "generators")
        base.setflags(write=False)
        G.setflags(write=False)
        self.base = base
        self.generators = G

    @property
    def n(self):
        return self.base.size

    @property
    def m(self):
        return self.generators.shape[0]

    def __repr__(self):
        return f"ExponentialFamily(n={self.n}, m={self.m})"

    def member(self, theta):
        return _tilt(np.log(self.base), self.generators, np.asarray(theta, dtype=float))[0]

    def e_project(self, p, tol=DEFAULT_TOL):
        """argmin over members Q of D(p||Q): the member matching p's generator moments."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n,):
            raise ValueError(f"dimension mismatch: distribution of length {p.size}, family on {self.n}")
        return solve_dual(self.base, self.generators, self.generators @ p, tol=tol)


def mixture_coordinates(p, fam):
    return fam.coordinates(p)


def dual_potential(q, fam, theta):
    """Log-partition ``ln sum_x q(x) e^{theta . f(x)}`` over the family's features and its gradient."""
    q = np.asarray(q, dtype=float)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != fam.k:
        raise ValueError(f"theta has {theta.size} entries, family has {fam.k} constraints")
    if q.shape != (fam.n,):
        raise ValueError("dimension mismatch")
    tilted, logz = _tilt(np.log(q), fam.features, theta)
    return float(logz), fam.features @ tilted


def m_projection(p, fam, tol=DEFAULT_TOL):
    out, rep = fam.m_project(p, tol=tol)
    if not rep.converged:
        warnings.warn(
            f"m-projection stopped at residual {rep.gradient_norm:.3g} after {rep.iterations} iterations",
            ProjectionWarning,
            stacklevel=2,
        )
    return out, rep


def e_projection(p, efam, tol=DEFAULT_TOL):
    out, rep = efam.e_project(p, tol=tol)
    if not rep.converged:
        warnings.warn(
            f"e-projection stopped at residual {rep.gradient_norm:.3g} after {rep.iterations} iterations",
            ProjectionWarning,
            stacklevel=2,
        )
    return out, rep
