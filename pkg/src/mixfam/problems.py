"""Psi oracles for information-theoretic problems.

Every builder returns a :class:`ProblemInstance` bundling the oracle, the
mixture family to search, the acceleration parameter under which descent is
known (or assumed) to hold, and how the minimised objective maps to the
quantity of interest.  Oracles accept a single distribution or a stack of
them (leading batch axes); the stacked form feeds the grid baseline.

Joint layouts are row-major: ``(v, x)`` for wiretap inputs, ``(t, x)`` for
bottleneck encoders, ``(x, y)`` and ``(x, y, z)`` for channel joints.
"""

from dataclasses import dataclass, field, replace
import enum
import math
from typing import Callable

import numpy as np

from .family import (
    ExponentialFamily,
    MarginalFamily,
    MixtureFamily,
    independent_subset,
)
from .solver import PsiOracle, SolverConfig, Status, solve_with_restarts

MAX_DOUBLED_GAMMA = 64.0


class Sign(str, enum.Enum):
    MINIMIZE = "Minimize"
    MAXIMIZE = "MaximizeViaNegation"


class Channel:
    """Row-stochastic matrix W[x, y] = W(y|x).

    All-zero output columns are dropped at construction (they carry no mass
    under any input), which keeps W.P strictly positive for full-support P.
    """

    def __init__(self, matrix, tol=1e-12):
        W = np.array(matrix, dtype=float)
        if W.ndim != 2 or W.size == 0:
            raise ValueError("channel matrix must be a non-empty 2-d array")
        if not np.all(np.isfinite(W)) or np.any(W < 0):
            raise ValueError("channel entries must be finite and non-negative")
        sums = W.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
        if bad.size:
            raise ValueError(f"row {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
        self.full_matrix = W
        self.kept_columns = np.flatnonzero(W.sum(axis=0) > 0)
        self.matrix = W[:, self.kept_columns]
        self.matrix.setflags(write=False)

    @classmethod
    def bsc(cls, p):
        return cls([[1 - p, p], [p, 1 - p]])

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @property
    def n_x(self):
        return self.matrix.shape[0]

    @property
    def n_y(self):
        return self.matrix.shape[1]

    def output(self, p):
        return np.asarray(p) @ self.matrix

    def joint(self, p):
        """W x P as a flat vector over (x, y)."""
        return (np.asarray(p)[:, None] * self.full_matrix).reshape(-1)

    def restrict_inputs(self, inputs):
        return Channel(self.full_matrix[list(inputs)])

    def __repr__(self):
        return f"Channel({self.n_x}x{self.full_matrix.shape[1]})"


@dataclass(frozen=True)
class JointSource:
    """Joint distribution P_XY (shape (n_x, n_y)) and the encoder alphabet size |T|."""

    joint: np.ndarray
    t_size: int

    def __post_init__(self):
        J = np.array(self.joint, dtype=float)
        if J.ndim != 2 or np.any(J < 0) or abs(J.sum() - 1.0) > 1e-12:
            raise ValueError("joint must be a 2-d probability table")
        if np.any(J.sum(axis=1) <= 0) or np.any(J.sum(axis=0) <= 0):
            raise ValueError("both marginals of the joint must have full support")
        if self.t_size < 1:
            raise ValueError("t_size must be positive")
        J.setflags(write=False)
        object.__setattr__(self, "joint", J)

    @property
    def p_x(self):
        return self.joint.sum(axis=1)

    @property
    def p_y_given_x(self):
        return self.joint / self.p_x[:, None]


@dataclass(frozen=True)
class ProblemInstance:
    name: str
    psi: PsiOracle
    family: MixtureFamily
    recommended_gamma: float
    sign: Sign
    report_transform: Callable[[float], dict]
    description: str
    multi_restart: bool = False
    gamma_policy: str = "fixed"
    meta: dict = field(default_factory=dict)

    def headline(self, objective):
        return self.report_transform(float(objective))


def _xlogx_rows(W):
    return np.where(W > 0, W * np.log(np.where(W > 0, W, 1.0)), 0.0).sum(axis=1)


def _capacity_psi(W):
    neg_ent = _xlogx_rows(W)

    def psi(P):
        out = P @ W
        return -(neg_ent - np.log(out) @ W.T)

    return psi


def channel_capacity(w):
    """G(P) = -I(P, W); capacity is -min G.  At gamma = 1 each step is the classical Arimoto-Blahut update."""
    psi = _capacity_psi(w.matrix)
    return ProblemInstance(
        name="capacity",
        psi=PsiOracle(psi, True, psi, "capacity"),
        family=MixtureFamily.simplex(w.n_x),
        recommended_gamma=1.0,
        sign=Sign.MAXIMIZE,
        report_transform=lambda g: {"capacity_nats": -g},
        description="capacity = -objective (nats)",
    )


def renyi_center(w, p, alpha):
    """Output distribution proportional to (sum_x P(x) W(y|x)^alpha)^(1/alpha)."""
    Wa = np.where(w.matrix > 0, w.matrix, 0.0) ** alpha
    s = np.asarray(p) @ Wa
    q = s ** (1.0 / alpha)
    return q / q.sum(axis=-1, keepdims=True)


def _exponent_psi(W, alpha, sign):
    Wa = W ** alpha

    def psi(P):
        s = P @ Wa
        q = s ** (1.0 / alpha)
        q = q / q.sum(axis=-1, keepdims=True)
        # exp((alpha-1) D_alpha(W_x || q)) = sum_y W(y|x)^alpha q(y)^(1-alpha)
        return sign * (q ** (1.0 - alpha)) @ Wa.T

    return psi


def _exponent_report(alpha, g_raw):
    return {
        "g_raw": g_raw,
        "e_term": g_raw ** (1.0 / alpha),
        "exponent_scale": math.log(g_raw) / alpha,
        "renyi_mutual_information": math.log(g_raw) / (alpha - 1.0),
    }


def reliability_exponent(w, alpha, gamma=1.0):
    """Minimise sum_x P(x) exp((alpha-1) D_alpha(W_x || Q_{alpha,P})) for alpha in [1/2, 1).

    ``g_raw`` is the minimised G, ``e_term = G^(1/alpha)`` the minimum of
    exp(((alpha-1)/alpha) I_alpha), ``exponent_scale`` its logarithm.
    """
    if not 0.5 <= alpha < 1:
        raise ValueError("alpha must lie in [1/2, 1)")
    psi = _exponent_psi(w.matrix, alpha, 1.0)
    return ProblemInstance(
        name="reliability",
        psi=PsiOracle(psi, True, psi, "reliability"),
        family=MixtureFamily.simplex(w.n_x),
        recommended_gamma=gamma,
        sign=Sign.MINIMIZE,
        report_transform=lambda g: _exponent_report(alpha, g),
        description="g_raw = objective; e_term = objective**(1/alpha)",
        gamma_policy="doubling",
        meta={"alpha": alpha},
    )


def strong_converse_exponent(w, alpha, gamma=1.0):
    """Maximise sum_x P(x) exp((alpha-1) D_alpha(W_x || Q_{alpha,P})) for alpha > 1 (minimise its negative)."""
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    psi = _exponent_psi(w.matrix, alpha, -1.0)
    return ProblemInstance(
        name="strong-converse",
        psi=PsiOracle(psi, True, psi, "strong-converse"),
        family=MixtureFamily.simplex(w.n_x),
        recommended_gamma=gamma,
        sign=Sign.MAXIMIZE,
        report_transform=lambda g: _exponent_report(alpha, -g),
        description="g_raw = -objective; e_term = g_raw**(1/alpha)",
        gamma_policy="doubling",
        meta={"alpha": alpha},
    )


def _output_kl(A, B):
    return np.sum(A * (np.log(A) - np.log(B)), axis=-1)


def wiretap_general(w_y, w_z, v_size, form="gradient"):
    """G(P_VX) = I(V;Z) - I(V;Y) over joints on (v, x); secrecy capacity is -min G.

    Two potentials give the same G.  ``form="marginal"`` uses
    ``D(W_Z.P_{X|v} || W_Z.P_X) - D(W_Y.P_{X|v} || W_Y.P_X)``, which does not
    depend on x, so the iteration only reweights P_V and keeps each
    conditional P_{X|v} at its starting value.  The default
    ``form="gradient"`` uses
    ``sum_z W_Z(z|x) ln(P_{Z|v}/P_Z) - sum_y W_Y(y|x) ln(P_{Y|v}/P_Y)``,
    the gradient of G, which moves the conditionals too.

    Descent and global convergence are not guaranteed, so the instance asks
    for multiple restarts.  Capturing the full secrecy capacity needs
    ``v_size`` large enough; ``v_size >= n_x`` can express V = X.
    """
    if w_y.n_x != w_z.n_x:
        raise ValueError(f"input alphabets differ: {w_y.n_x} vs {w_z.n_x}")
    if v_size < 1:
        raise ValueError("v_size must be positive")
    if form not in ("gradient", "marginal"):
        raise ValueError(f"unknown form {form!r}")
    Wy, Wz = w_y.matrix, w_z.matrix
    nx = w_y.n_x

    def psi(P):
        P = np.asarray(P)
        J = P.reshape(P.shape[:-1] + (v_size, nx))
        pv = J.sum(axis=-1)
        cond = J / pv[..., None]
        px = J.sum(axis=-2)
        oy, oz = cond @ Wy, cond @ Wz
        my, mz = (px @ Wy)[..., None, :], (px @ Wz)[..., None, :]
        if form == "marginal":
            out = np.broadcast_to((_output_kl(oz, mz) - _output_kl(oy, my))[..., None], J.shape)
        else:
            out = (np.log(oz) - np.log(mz)) @ Wz.T - (np.log(oy) - np.log(my)) @ Wy.T
        return out.reshape(P.shape)

    return ProblemInstance(
        name="wiretap",
        psi=PsiOracle(psi, True, psi, "wiretap"),
        family=MixtureFamily.simplex(v_size * nx),
        recommended_gamma=1.0,
        sign=Sign.MAXIMIZE,
        report_transform=lambda g: {"secrecy_capacity_nats": -g},
        description="secrecy capacity = -objective when the run reaches the global minimum",
        multi_restart=True,
        meta={"v_size": v_size, "n_x": nx, "form": form},
    )


def _safe_log(a):
    return np.log(np.where(a > 0, a, 1.0))


def wiretap_degraded(w_yz, z_size):
    """G(P_X) = -I(X;Y|Z) for a joint-output channel with columns laid out (y, z)."""
    W = w_yz.full_matrix
    nx = W.shape[0]
    if W.shape[1] % z_size:
        raise ValueError(f"{W.shape[1]} output columns are not divisible by z_size={z_size}")
    ny = W.shape[1] // z_size
    W3 = W.reshape(nx, ny, z_size)
    pzx = W3.sum(axis=1)
    const = _xlogx_rows(W) - _xlogx_rows(pzx)

    def psi(P):
        P = np.asarray(P)
        pyz = (P @ W).reshape(P.shape[:-1] + (ny, z_size))
        pz = pyz.sum(axis=-2)
        log_y_given_z = _safe_log(pyz) - _safe_log(pz)[..., None, :]
        flat = log_y_given_z.reshape(P.shape[:-1] + (ny * z_size,))
        return -(const - flat @ W.T)

    return ProblemInstance(
        name="wiretap-degraded",
        psi=PsiOracle(psi, True, psi, "wiretap-degraded"),
        family=MixtureFamily.simplex(nx),
        recommended_gamma=1.0,
        sign=Sign.MAXIMIZE,
        report_transform=lambda g: {"secrecy_capacity_nats": -g},
        description="secrecy capacity max I(X;Y|Z) = -objective",
        meta={"y_size": ny, "z_size": z_size},
    )


def with_cost_constraint(base, cost, budget):
    """Restrict ``base`` to inputs with expected cost equal to ``budget``.

    The step projection is no longer closed form, so the instance prefers the
    approximate or gradient-combination algorithms.
    """
    cost = np.asarray(cost, dtype=float).reshape(-1)
    if cost.size != base.family.n:
        raise ValueError(f"cost has {cost.size} entries, inputs have {base.family.n}")
    fam = base.family.with_constraint(cost, budget)
    meta = dict(base.meta, cost=cost.tolist(), budget=float(budget), preferred_algorithm="approx")
    return replace(base, name=base.name + "+cost", family=fam, meta=meta)


def _em_psi(efam, tol):
    def psi(p):
        p = np.asarray(p, dtype=float)
        if p.ndim > 1:
            return np.stack([psi(row) for row in p.reshape(-1, p.shape[-1])]).reshape(p.shape)
        proj, _ = efam.e_project(p, tol=tol)
        return np.log(p) - np.log(proj)

    return psi


def em_problem(fam, efam, tol=1e-13):
    """min over the mixture family of D(P || e-projection of P onto the exponential family)."""
    if fam.n != efam.n:
        raise ValueError(f"families live on {fam.n} and {efam.n} points")
    psi = _em_psi(efam, tol)
    return ProblemInstance(
        name="em",
        psi=PsiOracle(psi, True, None, "em"),
        family=fam,
        recommended_gamma=1.0,
        sign=Sign.MINIMIZE,
        report_transform=lambda g: {"min_divergence_nats": g},
        description="minimum divergence between the families = objective",
        multi_restart=True,
        meta={"efam": efam},
    )


def em_f3_closed_form(efam, q, gamma, tol=1e-13):
    """F3 for the em potential: q^((gamma-1)/gamma) * Gamma_e[q]^(1/gamma), normalised."""
    q = np.asarray(q, dtype=float)
    proj, _ = efam.e_project(q, tol=tol)
    s = (gamma - 1.0) / gamma * np.log(q) + np.log(proj) / gamma
    w = np.exp(s - s.max())
    return w / w.sum()


def reverse_em(fam, efam, tol=1e-13):
    """max over the mixture family of D(P || e-projection of P); solved as min of the negation."""
    inst = em_problem(fam, efam, tol)
    base = inst.psi

    def psi(p):
        return -base(p)

    return replace(
        inst,
        name="reverse-em",
        psi=PsiOracle(psi, True, None, "reverse-em"),
        sign=Sign.MAXIMIZE,
        report_transform=lambda g: {"max_divergence_nats": -g},
        description="maximum projected divergence = -objective",
        multi_restart=True,
    )


def reverse_em_condition_margins(efam, p0, q, gamma):
    """Margins of the descent and alignment conditions written for the reverse em potential.

    Returns ``((gamma+1) D(p0||q) - D(Ge[p0]||Ge[q]), D(Ge[p0]||Ge[q]) - D(p0||q))``.
    """
    e0, _ = efam.e_project(p0, tol=1e-13)
    eq, _ = efam.e_project(q, tol=1e-13)
    d = float(np.sum(p0 * np.log(p0 / q)))
    de = float(np.sum(e0 * np.log(e0 / eq)))
    return (gamma + 1.0) * d - de, de - d


def commitment_capacity(w):
    """G(P) = I(P, W) - H(P) = -H(X|Y); commitment capacity is -min G."""
    cap = _capacity_psi(w.matrix)

    def psi(P):
        return -cap(P) + np.log(P)

    return ProblemInstance(
        name="commitment",
        psi=PsiOracle(psi, True, psi, "commitment"),
        family=MixtureFamily.simplex(w.n_x),
        recommended_gamma=1.0,
        sign=Sign.MAXIMIZE,
        report_transform=lambda g: {"commitment_capacity_nats": -g},
        description="commitment capacity max H(X|Y) = -objective (nats)",
    )


def channel_input_family(w):
    """The mixture family {W x P_X} over (x, y) pairs (requires W without zero entries)."""
    W = w.full_matrix
    if np.any(W <= 0):
        raise ValueError("the joint-input family needs a channel with full support")
    nx, ny = W.shape
    rows = []
    for x in range(nx):
        for y in range(ny - 1):
            f = np.zeros((nx, ny))
            f[x, :] = -W[x, y]
            f[x, y] += 1.0
            rows.append(f.reshape(-1))
    return MixtureFamily(nx * ny, np.array(rows), np.zeros(len(rows)))


def _indicator_generators(shape, axes):
    gens = []
    for idx in np.ndindex(*[shape[a] for a in axes]):
        g = np.zeros(shape)
        sl = [slice(None)] * len(shape)
        for a, i in zip(axes, idx):
            sl[a] = i
        g[tuple(sl)] = 1.0
        gens.append(g.reshape(-1))
    return gens


def output_times_uniform_family(nx, ny):
    """{Q_Y x uniform_X} over (x, y) pairs."""
    gens = independent_subset(_indicator_generators((nx, ny), [1]))
    return ExponentialFamily(np.full(nx * ny, 1.0 / (nx * ny)), gens)


def product_family(nx, ny):
    """Independent pairs P_X x Q_Y over (x, y)."""
    gens = independent_subset(_indicator_generators((nx, ny), [0]) + _indicator_generators((nx, ny), [1]))
    return ExponentialFamily(np.full(nx * ny, 1.0 / (nx * ny)), gens)


def markov_family(nx, ny, nz):
    """Joints on (x, y, z) of the form P(x, z) Q(y|z), i.e. X - Z - Y Markov chains."""
    shape = (nx, ny, nz)
    gens = independent_subset(_indicator_generators(shape, [0, 2]) + _indicator_generators(shape, [1, 2]))
    return ExponentialFamily(np.full(nx * ny * nz, 1.0 / (nx * ny * nz)), gens)


def commitment_em_route(w):
    """(mixture family, exponential family) whose em problem equals ln|X| minus the commitment capacity."""
    return channel_input_family(w), output_times_uniform_family(w.n_x, w.full_matrix.shape[1])


def information_bottleneck(src, alpha, beta):
    """Minimise alpha I(T;X) + (1-alpha) H(T) - beta I(T;Y) over encoders P_{T|X}.

    Distributions are joints on (t, x) with the X-marginal pinned to the
    source; the step projection is the closed-form conditional replacement.
    Descent holds at gamma = alpha, so ``alpha`` must be positive.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1] (gamma = alpha must be positive)")
    if not beta >= alpha:
        raise ValueError("beta must be at least alpha")
    px = src.p_x
    pyx = src.p_y_given_x
    nt, nx = src.t_size, px.size
    fam = MarginalFamily(nt, px)

    def psi(P):
        P = np.asarray(P)
        J = P.reshape(P.shape[:-1] + (nt, nx))
        px_ = J.sum(axis=-2)
        pt = J.sum(axis=-1)
        pty = J @ pyx
        py = pty.sum(axis=-2)
        out = (
            alpha * np.log(J)
            - alpha * np.log(px_)[..., None, :]
            + (beta - 1.0) * np.log(pt)[..., :, None]
            + beta * (np.log(py) @ pyx.T)[..., None, :]
            - beta * (np.log(pty) @ pyx.T)
        )
        return out.reshape(P.shape)

    return ProblemInstance(
        name="ib",
        psi=PsiOracle(psi, True, psi, "ib"),
        family=fam,
        recommended_gamma=float(alpha),
        sign=Sign.MINIMIZE,
        report_transform=lambda g: {"ib_objective_nats": g},
        description="alpha I(T;X) + (1-alpha) H(T) - beta I(T;Y) = objective",
        multi_restart=True,
        meta={"alpha": alpha, "beta": beta, "t_size": nt},
    )


def run_instance(inst, algorithm="exact", cfg=None, restarts=None, seed=0, init=None, **kw):
    """Solve ``inst`` and return ``(SolveResult, headline)``.

    ``restarts`` defaults to 10 for instances that flag local minima.  Under
    the doubling policy a descent violation doubles gamma (up to 64) and
    reruns from the same start.
    """
    cfg = cfg or SolverConfig(gamma=inst.recommended_gamma)
    if restarts is None:
        restarts = 10 if inst.multi_restart else 1
    while True:
        res = solve_with_restarts(inst.psi, inst.family, cfg, restarts, seed, algorithm, init, **kw)
        if (inst.gamma_policy == "doubling" and res.status is Status.DESCENT_VIOLATION
                and cfg.gamma * 2 <= MAX_DOUBLED_GAMMA):
            cfg = cfg.replace(gamma=cfg.gamma * 2)
            continue
        break
    headline = dict(inst.headline(res.objective), gamma_used=cfg.gamma)
    return res, headline

