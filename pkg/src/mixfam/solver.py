"""Iterative minimisation of G(P) = sum_x P(x) Psi[P](x) over a mixture family.

One step of the exact algorithm is ``P <- m-projection of F3[P]`` where
``F3[Q] = Q exp(-Psi[Q] / gamma) / kappa[Q]``; ``gamma`` is the acceleration
parameter.  Smaller ``gamma`` takes longer steps but only keeps the descent
guarantee while ``D_Psi(P'||Q) <= gamma D(P'||Q)`` along the path.
"""

from dataclasses import dataclass, field
import csv
import enum
import io
import math
from typing import Callable, Optional
import warnings

import numpy as np

from .family import DualSolveReport, MixtureFamily, ProjectionWarning
from .info import as_distribution

TRACE_COLUMNS = ("iter", "objective", "step_kl", "kappa", "dual_iters", "dual_residual", "selection_score")


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    ITER_CAP = "IterCap"
    DESCENT_VIOLATION = "DescentViolation"


class DivergenceError(RuntimeError):
    """The multiplier sequence of the gradient-combination loop blew up."""


@dataclass(frozen=True)
class PsiOracle:
    """Maps a distribution P to the vector Psi[P](x).

    ``batch`` optionally evaluates many distributions at once (rows of an
    (N, n) array); the grid oracle uses it when present.  Evaluation must be
    free of side effects so solves can run concurrently.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    domain_is_full_simplex: bool = True
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "psi"

    def __call__(self, p):
        return np.asarray(self.eval(p), dtype=float)

    def objective(self, p):
        return float(p @ self(p))


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 1.0
    max_iter: int = 10000
    stop_tol: float = 1e-10
    projection_tol: float = 1e-13
    approx_tol: float = 1e-10
    descent_tol: float = 1e-12
    b_cap: float = 1e8

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be a positive real, got {self.gamma!r}")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        for name in ("stop_tol", "projection_tol", "approx_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def replace(self, **changes):
        d = dict(self.__dict__)
        d.update(changes)
        return SolverConfig(**d)


class IterationTrace:
    """Per-step record.  Row ``t`` describes the iterate ``P^t`` and the step to ``P^{t+1}``;
    the final row holds the last iterate with NaN step fields."""

    def __init__(self):
        self.objective = []
        self.step_kl = []
        self.log_kappa = []
        self.dual_iters = []
        self.dual_residual = []
        self.selection_score = []
        self.iterates = []
        self.dual_reports = []
        self.aux = {}

    def __len__(self):
        return len(self.objective)

    def record(self, p, objective, step_kl=math.nan, log_kappa=math.nan, dual=None, selection_score=math.nan):
        if not math.isfinite(objective):
            raise FloatingPointError(f"non-finite objective {objective!r}")
        self.iterates.append(np.array(p, dtype=float))
        self.objective.append(float(objective))
        self.step_kl.append(float(step_kl))
        self.log_kappa.append(float(log_kappa))
        self.dual_reports.append(dual)
        self.dual_iters.append(dual.iterations if dual is not None else 0)
        self.dual_residual.append(dual.gradient_norm if dual is not None else math.nan)
        self.selection_score.append(float(selection_score))

    @property
    def objectives(self):
        return np.array(self.objective)

    @property
    def kappa(self):
        with np.errstate(over="ignore"):
            return np.exp(np.array(self.log_kappa))

    def rows(self):
        kappa = self.kappa
        for t in range(len(self)):
            yield (t + 1, self.objective[t], self.step_kl[t], float(kappa[t]),
                   self.dual_iters[t], self.dual_residual[t], self.selection_score[t])

    def to_csv(self, target=None):
        """Write the trace as CSV (17 significant digits); returns the text when ``target`` is None."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self.rows():
            w.writerow([row[0]] + [_fmt(v) for v in row[1:4]] + [row[4]] + [_fmt(v) for v in row[5:]])
        text = buf.getvalue()
        if target is None:
            return text
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(v):
    return format(float(v), ".17g")


@dataclass
class SolveResult:
    minimizer: np.ndarray
    objective: float
    trace: IterationTrace
    status: Status
    config: SolverConfig
    info: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return max(len(self.trace) - 1, 0)

    def to_dict(self):
        return {
            "minimizer": [float(v) for v in self.minimizer],
            "objective": float(self.objective),
            "status": self.status.value,
            "iterations": self.iterations,
            "config": {k: (float(v) if isinstance(v, float) else v) for k, v in self.config.__dict__.items()},
        }


def _kl(p, q):
    return float(np.sum(p * (np.log(p) - np.log(q))))


def _f3(q, psi_q, gamma):
    s = np.log(q) - psi_q / gamma
    m = s.max()
    w = np.exp(s - m)
    z = w.sum()
    return w / z, float(m + np.log(z))


def f3_map(q, psi, gamma):
    """F3[q] = q exp(-Psi[q]/gamma) / kappa[q].  Returns ``(F3[q], ln kappa[q])``.

    The normaliser is returned as a logarithm so large ``|Psi| / gamma`` cannot overflow.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    q = as_distribution(q, "q")
    return _f3(q, psi(q), gamma)


def extended_objective(p, q, psi, gamma):
    """J_gamma(p, q) = gamma D(p||q) + sum_x p(x) Psi[q](x)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return gamma * _kl(p, q) + float(p @ psi(q))


def d_psi(p, q, psi):
    """Signed D_Psi(p||q) = sum_x p(x) (Psi[p](x) - Psi[q](x))."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(p @ (psi(p) - psi(q)))


def _initial(fam, init, cfg):
    if init is None:
        return fam.default_member()
    p = as_distribution(init, "init")
    if p.size != fam.n:
        raise ValueError(f"init has {p.size} entries, family is on {fam.n} points")
    if not fam.is_member(p, max(cfg.projection_tol, 1e-8)):
        warnings.warn("initial point is not in the family; projecting it first", ProjectionWarning, stacklevel=3)
        p, _ = fam.m_project(p, tol=cfg.projection_tol)
    return p


def _warn_projection(rep):
    if not rep.converged:
        warnings.warn(
            f"m-projection stopped at residual {rep.gradient_norm:.3g} after {rep.iterations} iterations",
            ProjectionWarning,
            stacklevel=3,
        )


def solve_exact(psi, fam, init=None, cfg=None):
    """Iterate ``P^{t+1} = m-projection of F3[P^t]`` until ``gamma D(P^t||P^{t+1}) <= stop_tol``.

    Aborts with ``Status.DESCENT_VIOLATION`` as soon as the objective rises by
    more than ``cfg.descent_tol``; that means ``gamma`` is too small for this
    problem and should be increased.  The returned minimiser is then the last
    iterate before the rise.
    """
    cfg = cfg or SolverConfig()
    p = _initial(fam, init, cfg)
    trace = IterationTrace()
    psi_p = psi(p)
    g = float(p @ psi_p)
    status = Status.ITER_CAP
    best = p
    for _ in range(cfg.max_iter):
        f3, log_kappa = _f3(p, psi_p, cfg.gamma)
        nxt, rep = fam.m_project(f3, tol=cfg.projection_tol)
        _warn_projection(rep)
        step = _kl(p, nxt)
        trace.record(p, g, step, log_kappa, rep)
        psi_n = psi(nxt)
        g_n = float(nxt @ psi_n)
        if g_n > g + cfg.descent_tol:
            status = Status.DESCENT_VIOLATION
            best, g_best = p, g
            p, g = nxt, g_n
            break
        p, psi_p, g = nxt, psi_n, g_n
        if cfg.gamma * step <= cfg.stop_tol:
            status = Status.CONVERGED
            break
    trace.record(p, g)
    if status is Status.DESCENT_VIOLATION:
        return SolveResult(best, g_best, trace, status, cfg,
                           {"advice": f"objective increased at gamma={cfg.gamma}; retry with a larger gamma"})
    return SolveResult(p, g, trace, status, cfg)


def solve_approx(psi, fam, init=None, cfg=None, audit=True):
    """Exact algorithm with an inexact dual solve, followed by a selection rule.

    Each step solves the projection dual only until its estimated suboptimality
    is below ``cfg.projection_tol`` (the tolerance eps1), giving an auxiliary
    point ``Pbar^{t+1}`` outside the family; ``P^{t+1}`` is the high-accuracy
    projection of ``Pbar^{t+1}`` back onto the family and must satisfy
    ``D(Pbar^{t+1}||P^{t+1}) <= cfg.approx_tol`` (eps2; the dual solve is
    tightened until it does).  ``cfg.max_iter`` plays the role of ``t1``.  The
    output is ``P^{t2}`` with ``t2 = argmin_{t>=2} G(P^t) - gamma D(P^t||Pbar^t)``.

    With ``audit`` the realised eps1 ``D(Gamma[F3[Pbar^t]] || Pbar^{t+1})`` is
    measured by an extra exact projection each step.
    """
    cfg = cfg or SolverConfig()
    if not psi.domain_is_full_simplex:
        raise ValueError("approximate iteration evaluates Psi outside the family; this oracle is family-only")
    if cfg.max_iter < 1:
        raise ValueError("selection needs at least two iterates (max_iter >= 1)")
    p = _initial(fam, init, cfg)
    pbar = p.copy()
    gamma = cfg.gamma
    trace = IterationTrace()
    bars = [pbar]
    g = psi.objective(p)
    eps1, eps2 = [], []
    status = Status.ITER_CAP
    score = math.nan
    for _ in range(cfg.max_iter):
        f3, log_kappa = _f3(pbar, psi(pbar), gamma)
        gap = cfg.projection_tol
        for _tighten in range(8):
            pbar_next, rep = fam.m_project(f3, tol=cfg.projection_tol, gap_tol=gap)
            nxt, rep_fix = fam.m_project(pbar_next, tol=min(cfg.projection_tol, 1e-12))
            e2 = _kl(pbar_next, nxt)
            if e2 <= cfg.approx_tol:
                break
            gap *= 0.1
        eps2.append(e2)
        if audit:
            exact, _ = fam.m_project(f3, tol=1e-13)
            eps1.append(max(_kl(exact, pbar_next), 0.0))
        step = _kl(p, nxt)
        trace.record(p, g, step, log_kappa, rep, score)
        p, pbar = nxt, pbar_next
        bars.append(pbar)
        g = psi.objective(p)
        score = g - gamma * _kl(p, pbar)
        if gamma * step <= cfg.stop_tol:
            status = Status.CONVERGED
            break
    trace.record(p, g, selection_score=score)
    scores = np.array(trace.selection_score[1:])
    t2 = int(np.argmin(scores)) + 2
    trace.aux["pbar"] = bars
    info = {
        "t1": len(trace),
        "t2": t2,
        "eps1": max(eps1) if eps1 else math.nan,
        "eps2": max(eps2),
        "eps1_per_step": eps1,
        "eps2_per_step": eps2,
    }
    return SolveResult(trace.iterates[t2 - 1], trace.objective[t2 - 1], trace, status, cfg, info)


def penalized_oracle(psi, features, b):
    """Psi[P] - sum_i b_i f_i, the potential whose unconstrained minimiser defines Q_b."""
    F = np.asarray(features, dtype=float)
    b = np.asarray(b, dtype=float)
    shift = F.T @ b
    batch = None
    if psi.batch is not None:
        batch = lambda P: psi.batch(P) - shift  # noqa: E731
    return PsiOracle(lambda p: psi(p) - shift, psi.domain_is_full_simplex, batch, psi.name + "-penalized")


def estimate_lipschitz(psi, fam, b=None, cfg=None, h=1e-3, directions=4, seed=0, safety=2.0):
    """Finite-difference estimate of the curvature of b -> sup_P b.P[f] - G(P).

    Its gradient at ``b`` is ``Q_b[f]`` with ``Q_b`` the unconstrained
    minimiser of the penalised objective; the estimate is the largest
    centred-difference slope of that map along a few random unit directions,
    times ``safety``.
    """
    cfg = cfg or SolverConfig()
    fam0 = fam.recentered()
    F = fam0.features
    k = F.shape[0]
    if k == 0:
        return 1.0
    b = np.zeros(k) if b is None else np.asarray(b, dtype=float)
    simplex = MixtureFamily.simplex(fam.n)
    inner = cfg.replace(max_iter=20000, stop_tol=1e-14)

    def grad(bb):
        res = solve_exact(penalized_oracle(psi, F, bb), simplex, None, inner)
        return F @ res.minimizer

    rng = np.random.default_rng(seed)
    dirs = [np.eye(k)[i] for i in range(k)] + [u / np.linalg.norm(u) for u in rng.normal(size=(directions, k))]
    slope = max(np.linalg.norm(grad(b + h * u) - grad(b - h * u)) / (2 * h) for u in dirs)
    return safety * max(slope, 1e-8)


def solve_gradient_combo(psi, fam, init=None, b_init=None, lipschitz=None, cfg=None, residual_tol=None):
    """Alternate one penalised F3 step with a gradient step on the multipliers.

    ``P^{t+1} = F3^{b_t}[P^t]`` uses the potential ``Psi[P] - sum_i b_i f_i``
    with the constraints recentred to zero targets; then
    ``b_{t+1} = b_t - P^{t+1}[f] / L``.  No projection is ever computed.
    Converges when the recentred constraint expectations are within
    ``residual_tol`` (default ``cfg.projection_tol``) of zero and
    ``gamma D(P^t||P^{t+1}) <= cfg.stop_tol``.
    """
    cfg = cfg or SolverConfig()
    residual_tol = cfg.projection_tol if residual_tol is None else residual_tol
    fam0 = fam.recentered()
    F = fam0.features
    k = F.shape[0]
    b = np.zeros(k) if b_init is None else np.array(b_init, dtype=float).reshape(k)
    L = estimate_lipschitz(psi, fam, b, cfg) if lipschitz is None else float(lipschitz)
    if not L > 0:
        raise ValueError("lipschitz constant must be positive")
    p = _initial(fam, init, cfg)
    trace = IterationTrace()
    psi_p = psi(p)
    g = float(p @ psi_p)
    status = Status.ITER_CAP
    for _ in range(cfg.max_iter):
        nxt, log_kappa = _f3(p, psi_p - F.T @ b, cfg.gamma)
        coords = F @ nxt
        b = b - coords / L
        step = _kl(p, nxt)
        resid = float(np.abs(coords).max()) if k else 0.0
        rep = DualSolveReport(b.copy(), math.nan, resid, 0, resid <= residual_tol)
        trace.record(p, g, step, log_kappa, rep)
        if np.linalg.norm(b) > cfg.b_cap:
            raise DivergenceError(f"multiplier norm {np.linalg.norm(b):.3g} exceeds cap {cfg.b_cap:.3g}")
        p = nxt
        psi_p = psi(p)
        g = float(p @ psi_p)
        if resid <= residual_tol and cfg.gamma * step <= cfg.stop_tol:
            status = Status.CONVERGED
            break
    trace.record(p, g)
    info = {"b": b, "lipschitz": L, "residual": fam.residual(p)}
    return SolveResult(p, g, trace, status, cfg, info)


def random_member(fam, rng):
    """Dirichlet(1) draw pushed onto the family by m-projection."""
    r = rng.dirichlet(np.ones(fam.n))
    r = np.clip(r, 1e-300, None)
    r /= r.sum()
    if fam.k == 0:
        return r
    return fam.m_project(r)[0]


def solve_with_restarts(psi, fam, cfg=None, restarts=1, seed=0, algorithm="exact", init=None, **kw):
    """Best of ``restarts`` runs; the first starts from ``init`` (or the default member),
    the rest from random members drawn with ``seed``."""
    cfg = cfg or SolverConfig()
    solve = {"exact": solve_exact, "approx": solve_approx, "gradient": solve_gradient_combo}[algorithm]
    rng = np.random.default_rng(seed)
    results = []
    for r in range(max(restarts, 1)):
        start = init if r == 0 else random_member(fam, rng)
        results.append(solve(psi, fam, start, cfg=cfg, **kw))
    best = min(results, key=lambda res: res.objective)
    best.info = dict(best.info, restart_objectives=[res.objective for res in results])
    return best


@dataclass
class ConditionReport:
    """Worst sampled margins; non-negative margins are evidence, not proof."""

    a1_margin: float
    a2_margin: float
    beta: float
    samples: int

    @property
    def a1_holds(self):
        return self.a1_margin >= -1e-10

    @property
    def a2_holds(self):
        return self.a2_margin >= -1e-10


def sample_neighborhood(fam, center, delta, samples, rng):
    """Members Q of the family with D(center||Q) <= delta, mixed toward random members."""
    out = []
    for _ in range(samples):
        r = random_member(fam, rng)
        if math.isinf(delta):
            lam_max = 1.0
        else:
            lo, hi = 0.0, 1.0
            if _kl(center, (1 - hi) * center + hi * r) > delta:
                for _b in range(60):
                    mid = 0.5 * (lo + hi)
                    if _kl(center, (1 - mid) * center + mid * r) <= delta:
                        lo = mid
                    else:
                        hi = mid
                lam_max = lo
            else:
                lam_max = 1.0
        lam = lam_max * (1.0 - rng.random())
        q = (1 - lam) * center + lam * r
        out.append(q / q.sum())
    return out


def check_conditions(psi, fam, center, delta=math.inf, gamma=1.0, samples=50, seed=0):
    """Sample Q near ``center`` and report the worst margins of the descent and alignment conditions.

    * descent (A1): min of gamma D(F2[Q]||Q) - D_Psi(F2[Q]||Q), F2[Q] the next exact iterate
    * alignment (A2): min of D_Psi(center||Q)
    * strong alignment (A3): inf of D_Psi(center||Q) / D(center||Q), reported as ``beta``
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    center = np.asarray(center, dtype=float)
    rng = np.random.default_rng(seed)
    a1 = a2 = beta = math.inf
    psi_c = psi(center)
    for q in sample_neighborhood(fam, center, delta, samples, rng):
        psi_q = psi(q)
        f3, _ = _f3(q, psi_q, gamma)
        nxt, _ = fam.m_project(f3, tol=1e-12)
        a1 = min(a1, gamma * _kl(nxt, q) - float(nxt @ (psi(nxt) - psi_q)))
        dpsi = float(center @ (psi_c - psi_q))
        a2 = min(a2, dpsi)
        dkl = _kl(center, q)
        if dkl > 1e-12:
            beta = min(beta, dpsi / dkl)
    return ConditionReport(a1, a2, beta, samples)


@dataclass
class IdentityReport:
    """Absolute residuals of the exact-step identities at one (q, probe) pair."""

    pythagorean: float
    projection_value: float
    projection_split: float
    extended_chain: float
    tilt_identity: float
    tilt_identity_objective: float

    @property
    def max_residual(self):
        return max(abs(v) for v in self.__dict__.values())


def verify_iteration_identities(psi, fam, q, probe, gamma, theta_offset=0.1):
    """Evaluate both sides of the one-step identities and return the residuals.

    ``probe`` must be a member of the family.  The auxiliary tilt ``Q_theta``
    is taken at ``theta* + theta_offset`` so the inexact-projection term in
    the last two identities is non-zero.
    """
    q = np.asarray(q, dtype=float)
    p0 = np.asarray(probe, dtype=float)
    if not fam.is_member(p0, 1e-8):
        raise ValueError("probe must be a member of the family")
    psi_q = psi(q)
    f3, log_kappa = _f3(q, psi_q, gamma)
    proj, rep = fam.m_project(f3, tol=1e-13)
    q_theta = fam.tilt(f3, rep.theta + theta_offset) if fam.k else f3

    def J(p):
        return gamma * _kl(p, q) + float(p @ psi_q)

    g0 = psi.objective(p0)
    dpsi0 = float(p0 @ (psi(p0) - psi_q))
    lhs = _kl(p0, q) - _kl(p0, q_theta)
    d_proj_theta = _kl(proj, q_theta)
    tilt_identity = J(proj) / gamma - g0 / gamma + dpsi0 / gamma - d_proj_theta
    tilt_identity_objective = (psi.objective(proj) / gamma - g0 / gamma + _kl(proj, q)
           - float(proj @ (psi(proj) - psi_q)) / gamma + dpsi0 / gamma - d_proj_theta)
    return IdentityReport(
        pythagorean=_kl(p0, f3) - _kl(p0, proj) - _kl(proj, f3),
        projection_value=J(proj) - (gamma * _kl(proj, f3) - gamma * log_kappa),
        projection_split=J(p0) - J(proj) - gamma * _kl(p0, proj),
        extended_chain=J(p0) - (gamma * _kl(p0, f3) - gamma * log_kappa),
        tilt_identity=lhs - tilt_identity,
        tilt_identity_objective=lhs - tilt_identity_objective,
    )
