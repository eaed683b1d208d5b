"""Direct minimization of a reduced action over group-valued fields.

The unknown is the group field ``s`` itself, so the reduced field
``sigma = reduce(s)`` is flat by construction.  Nodes within ``k - 1`` of the
boundary (``k`` nodes per face) carry the prescribed jet data and never move.

Perturbations are applied on the side opposite to the trivialization:
``exp(eps B) s`` for right trivialization, ``s exp(eps B)`` for left, so the
gradient lives in the same trivialization as the reduced equations.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets, matfun
from .connection import bracket_sign, edge_logs, sigma_from_edges
from .ep import reduced_jets
from .errors import LineSearchStalled, PreconditionError
from .jets import Grid, Lagrangian
from .lie import LieAlgebra

log = logging.getLogger(__name__)


# --------------------------------------------------------------------- data
def layer_mask(grid: Grid, k: int) -> np.ndarray:
    """Nodes whose index distance to the boundary is at most ``k - 1``."""
    return grid.boundary_distance() <= k - 1


@dataclass
class BoundaryData:
    values: np.ndarray  # grid + (d, d); only entries under ``mask`` are used
    mask: np.ndarray

    @classmethod
    def from_field(cls, s: np.ndarray, grid: Grid, k: int) -> "BoundaryData":
        return cls(np.array(s, dtype=float), layer_mask(grid, k))

    def apply(self, s: np.ndarray) -> np.ndarray:
        out = np.array(s, dtype=float)
        out[self.mask] = self.values[self.mask]
        return out

    def mismatch(self, s: np.ndarray) -> float:
        if not self.mask.any():
            return 0.0
        return float(np.max(np.abs(np.asarray(s)[self.mask] - self.values[self.mask])))


@dataclass
class SolverOptions:
    max_iters: int = 5000
    grad_tol: float = 1e-6
    method: str = "lbfgs"  # "lbfgs" | "gd"
    step_rule: str = "armijo"  # "armijo" | "fixed"
    armijo: float = 1e-4
    step: float = 1.0  # initial (armijo) or constant (fixed) step
    backtrack: float = 0.5
    min_step: float = 1e-20
    fd_eps: float = 1e-5
    memory: int = 12
    seed: int = 0
    on_stall: str = "raise"  # "raise" | "return"
    noise_tol: float = 1e-13  # relative resolution assumed for action values
    max_trials: int = 60

    def __post_init__(self):
        if self.grad_tol <= 0 or self.fd_eps <= 0 or self.step <= 0:
            raise ValueError("tolerances, fd_eps and step must be positive")
        if not 0 < self.armijo < 1:
            raise ValueError("Armijo constant must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if self.method not in ("lbfgs", "gd"):
            raise ValueError(f"unknown method '{self.method}'")
        if self.step_rule not in ("armijo", "fixed"):
            raise ValueError(f"unknown step rule '{self.step_rule}'")
        if self.on_stall not in ("raise", "return"):
            raise ValueError("on_stall must be 'raise' or 'return'")


@dataclass
class Trace:
    rows: list = field(default_factory=list)  # (iter, action, grad_norm, step)
    status: str = "running"
    noise_steps: int = 0  # steps accepted by the slope test below action resolution

    def add(self, it: int, action: float, gnorm: float, step: float) -> None:
        self.rows.append((it, float(action), float(gnorm), float(step)))

    @property
    def actions(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    @property
    def iterations(self) -> int:
        return self.rows[-1][0] if self.rows else 0


# ------------------------------------------------------------------ problem
class ActionProblem:
    """Caches everything needed to evaluate the discrete action and its gradient."""

    def __init__(self, alg: LieAlgebra, L: Lagrangian, grid: Grid, trivialization: str = "right",
                 mask: np.ndarray | None = None):
        self.alg = alg
        self.L = L
        self.grid = grid
        self.triv = trivialization
        self.sign = bracket_sign(trivialization)
        self.x = grid.coords()
        self.w = grid.trapezoid_weights()
        self.mask = layer_mask(grid, L.order) if mask is None else np.asarray(mask, dtype=bool)
        self.free = ~self.mask
        self.basis = alg._need_basis()
        # an interior perturbation changes the density within this many nodes
        self.radius = L.order + 2

    # transitions ------------------------------------------------------------
    def increments(self, s: np.ndarray) -> list[np.ndarray]:
        """``T - I`` for every edge, in difference form."""
        out = []
        for mu in range(self.grid.n):
            N = s.shape[mu]
            a = np.take(s, np.arange(N - 1), axis=mu)
            b = np.take(s, np.arange(1, N), axis=mu)
            inv = np.linalg.inv(a)
            out.append((b - a) @ inv if self.sign > 0 else inv @ (b - a))
        return out

    def density(self, sigma: np.ndarray) -> np.ndarray:
        return self.L.value(self.x, reduced_jets(sigma, self.grid, self.L.order))

    def sigma(self, s: np.ndarray) -> np.ndarray:
        E = self.increments(s)
        return sigma_from_edges([self.alg.log_near_identity(e) for e in E], self.grid)

    def action(self, s: np.ndarray) -> float:
        return float(self.action_ext(s))

    def action_ext(self, s: np.ndarray) -> np.longdouble:
        """Action evaluated in extended precision from the stored field.

        Near a minimizer the true decrease per step falls below the double
        resolution of the action; comparing extended-precision values keeps
        the accepted sequence monotone and its double rounding nonincreasing.
        """
        s = np.asarray(s, dtype=np.longdouble)
        pinv = self.alg._basis_pinv
        edges = []
        for mu in range(self.grid.n):
            N = s.shape[mu]
            a = np.take(s, np.arange(N - 1), axis=mu)
            b = np.take(s, np.arange(1, N), axis=mu)
            inv = matfun.inv_ext(a)
            e = (b - a) @ inv if self.sign > 0 else inv @ (b - a)
            res = matfun.log1pm_ext(e)
            edges.append(np.einsum("ak,...k->a...", pinv, res.reshape(res.shape[:-2] + (-1,))))
        sigma = sigma_from_edges(edges, self.grid)
        dens = self.density(sigma)
        return np.sum(self.w.astype(np.longdouble) * dens)

    def move(self, s: np.ndarray, direction: np.ndarray, t: float) -> np.ndarray:
        """``exp(t d) s`` (right) or ``s exp(t d)`` (left), nodewise."""
        G = self.alg.exp(t * direction)
        return G @ s if self.sign > 0 else s @ G

    # gradient ---------------------------------------------------------------
    def _box_sum(self, D: np.ndarray) -> np.ndarray:
        R = self.radius
        out = D
        for mu in range(self.grid.n):
            c = np.cumsum(out, axis=mu)
            pad_shape = list(c.shape)
            pad_shape[mu] = 1
            c = np.concatenate([np.zeros(pad_shape), c], axis=mu)
            N = out.shape[mu]
            hi = np.minimum(np.arange(N) + R + 1, N)
            lo = np.maximum(np.arange(N) - R, 0)
            out = np.take(c, hi, axis=mu) - np.take(c, lo, axis=mu)
        return out

    def gradient(self, s: np.ndarray, eps: float) -> np.ndarray:
        """Central-difference gradient ``(m,) + grid``; zero on boundary layers.

        Nodes of one colour (indices congruent modulo ``2R + 1``) are perturbed
        together: their influence windows are disjoint, so one pair of
        evaluations yields the gradient at all of them.
        """
        alg, grid = self.alg, self.grid
        n, m = grid.n, alg.dim
        E = self.increments(s)
        T = [e + np.eye(e.shape[-1]) for e in E]
        logs = [alg.log_near_identity(e) for e in E]
        sigma0 = sigma_from_edges(logs, grid)
        jets0 = reduced_jets(sigma0, grid, self.L.order)
        period = 2 * self.radius + 1
        idx = np.indices(grid.size)
        g = np.zeros((m,) + grid.size)
        colours = [c for c in itertools.product(range(period), repeat=n)]
        for colour in colours:
            sel = self.free.copy()
            for mu in range(n):
                sel &= (idx[mu] % period) == colour[mu]
            if not sel.any():
                continue
            heads, tails, touched = [], [], []
            for mu in range(n):
                N = grid.size[mu]
                head = np.take(sel, np.arange(1, N), axis=mu)
                tail = np.take(sel, np.arange(N - 1), axis=mu)
                heads.append(head)
                tails.append(tail)
                touched.append(head | tail)
            for a in range(m):
                D = []
                for sgn in (1.0, -1.0):
                    Qp = matfun.expm1m(sgn * eps * self.basis[a])
                    Qm = matfun.expm1m(-sgn * eps * self.basis[a])
                    dedges = []
                    for mu in range(n):
                        e, t = E[mu], T[mu]
                        tch = touched[mu]
                        dl = np.zeros_like(logs[mu])
                        if tch.any():
                            e2 = e[tch].copy()
                            th = heads[mu][tch]
                            tt = tails[mu][tch]
                            if self.sign > 0:
                                e2[th] += Qp @ t[tch][th]
                                e2[tt] += t[tch][tt] @ Qm
                            else:
                                e2[th] += t[tch][th] @ Qp
                                e2[tt] += Qm @ t[tch][tt]
                            new = alg.log_near_identity(e2)
                            dl[:, tch] = new - logs[mu][:, tch]
                        dedges.append(dl)
                    dsig = sigma_from_edges(dedges, grid)
                    djets = reduced_jets(dsig, grid, self.L.order)
                    table = {key: jets0[key] + djets[key] for key in jets0}
                    D.append(self.L.value(self.x, table))
                diff = self.w * (D[0] - D[1])
                g[a][sel] = self._box_sum(diff)[sel] / (2 * eps)
        return g


def action_value(alg: LieAlgebra, L: Lagrangian, s: np.ndarray, grid: Grid, trivialization: str = "right") -> float:
    """Composite-trapezoid action of ``L`` along the reduced field of ``s``."""
    return ActionProblem(alg, L, grid, trivialization).action(np.asarray(s, dtype=float))


def action_gradient(
    alg: LieAlgebra,
    L: Lagrangian,
    s: np.ndarray,
    grid: Grid,
    options: SolverOptions | None = None,
    trivialization: str = "right",
    mask: np.ndarray | None = None,
) -> np.ndarray:
    options = options or SolverOptions()
    prob = ActionProblem(alg, L, grid, trivialization, mask)
    return prob.gradient(np.asarray(s, dtype=float), options.fd_eps)


# ------------------------------------------------------------------ minimize
def _lbfgs_direction(g: np.ndarray, S: list, Y: list) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y in reversed(list(zip(S, Y))):
        rho = 1.0 / np.vdot(y, s)
        a = rho * np.vdot(s, q)
        q -= a * y
        alphas.append((a, rho, s, y))
    if S:
        gamma = np.vdot(S[-1], Y[-1]) / np.vdot(Y[-1], Y[-1])
        q *= gamma
    for a, rho, s, y in reversed(alphas):
        b = rho * np.vdot(y, q)
        q += (a - b) * s
    return -q


def minimize(
    alg: LieAlgebra,
    L: Lagrangian,
    s0: np.ndarray,
    grid: Grid,
    bc: BoundaryData,
    options: SolverOptions | None = None,
    trivialization: str = "right",
    callback: Callable | None = None,
) -> tuple[np.ndarray, Trace]:
    """Minimize the discrete action with fixed boundary layers.

    Returns the final group field and the trace of accepted iterates.  The
    action never increases along the trace: a trial point is accepted only
    if it satisfies the Armijo condition (or, for the fixed rule, does not
    increase the action).
    """
    options = options or SolverOptions()
    s = np.array(s0, dtype=float)
    if s.shape[: grid.n] != grid.size:
        raise PreconditionError(f"initial field shape {s.shape} does not match grid {grid.size}")
    bad = bc.mismatch(s)
    if bad > 1e-12 * max(1.0, float(np.max(np.abs(bc.values)))):
        raise PreconditionError(f"initial field violates the boundary data (max deviation {bad:.3e})")
    prob = ActionProblem(alg, L, grid, trivialization, bc.mask)
    free = prob.free
    S_val = prob.action_ext(s)
    g = prob.gradient(s, options.fd_eps)
    gnorm = float(np.max(np.abs(g)))
    trace = Trace()
    trace.add(0, S_val, gnorm, 0.0)
    Smem: list = []
    Ymem: list = []
    step = options.step
    rng = np.random.default_rng(options.seed)
    for it in range(1, options.max_iters + 1):
        if gnorm <= options.grad_tol:
            trace.status = "converged"
            break
        if options.method == "lbfgs":
            p = _lbfgs_direction(g, Smem, Ymem)
            slope = float(np.vdot(g, p))
            if slope >= 0:
                Smem.clear()
                Ymem.clear()
                p = -g
                slope = float(np.vdot(g, p))
            t = 1.0 if Smem else min(1.0, options.step / max(gnorm, 1e-300))
        else:
            p = -g
            slope = float(np.vdot(g, p))
            t = step
        p[:, ~free] = 0.0
        accepted = False
        g_new = None
        noise = options.noise_tol * max(1.0, abs(S_val))
        tries = 0
        t_ok = None
        while t >= options.min_step and tries < options.max_trials:
            tries += 1
            s_new = prob.move(s, p, t)
            S_new = prob.action_ext(s_new)
            if options.step_rule == "fixed":
                accepted = S_new <= S_val
            elif S_new <= S_val and S_new <= S_val + options.armijo * t * slope:
                accepted = True
            elif S_new <= S_val + noise and t_ok is None:
                # the decrease is below the resolution of the action; judge the
                # step by the slope at the trial point (Armijo for a quadratic)
                g_try = prob.gradient(s_new, options.fd_eps)
                if float(np.vdot(g_try, p)) <= (2 * options.armijo - 1) * slope:
                    t_ok = t
                    if S_new <= S_val:
                        accepted = True
                        g_new = g_try
                        trace.noise_steps += 1
            if accepted:
                break
            if t_ok is not None:
                break
            t *= options.backtrack
        if not accepted and t_ok is not None:
            # shorter steps keep the slope test on a convex model; draw step
            # lengths until the computed action does not exceed the current one
            for _ in range(options.max_trials):
                t = t_ok * (0.5 + 0.5 * rng.random())
                s_new = prob.move(s, p, t)
                S_new = prob.action_ext(s_new)
                if S_new <= S_val:
                    accepted = True
                    trace.noise_steps += 1
                    break
        if not accepted:
            if options.method == "lbfgs" and Smem:
                Smem.clear()
                Ymem.clear()
                continue
            trace.status = "stalled"
            if options.on_stall == "raise":
                err = LineSearchStalled(
                    f"line search stalled at iteration {it} (action {S_val:.16e}, grad {gnorm:.3e})"
                )
                err.result = (s, trace)
                raise err
            break
        if g_new is None:
            g_new = prob.gradient(s_new, options.fd_eps)
        if options.method == "lbfgs":
            sv = t * p
            yv = g_new - g
            if np.vdot(sv, yv) > 1e-12 * np.sqrt(np.vdot(sv, sv) * np.vdot(yv, yv)):
                Smem.append(sv)
                Ymem.append(yv)
                if len(Smem) > options.memory:
                    Smem.pop(0)
                    Ymem.pop(0)
        else:
            step = min(t * 2.0, 1e12) if options.step_rule == "armijo" else options.step
        s, S_val, g = s_new, S_new, g_new
        gnorm = float(np.max(np.abs(g)))
        trace.add(it, S_val, gnorm, t)
        if callback is not None:
            callback(it, s, S_val, gnorm)
    else:
        trace.status = "converged" if gnorm <= options.grad_tol else "max_iters"
    if trace.status == "running":
        trace.status = "converged" if gnorm <= options.grad_tol else "max_iters"
    return s, trace


# --------------------------------------------------------- boundary families
def hermite_chart(grid: Grid, y0, y1, v0, v1) -> np.ndarray:
    """Cubic Hermite blend in the exponential chart, shape ``(m, N)`` (one axis)."""
    if grid.n != 1:
        raise ValueError("the Hermite family is defined for one-dimensional grids")
    a, b = grid.extent[0]
    Lh = b - a
    u = (grid.axis(0) - a) / Lh
    h00 = 2 * u**3 - 3 * u**2 + 1
    h10 = u**3 - 2 * u**2 + u
    h01 = -2 * u**3 + 3 * u**2
    h11 = u**3 - u**2
    y0, y1, v0, v1 = (np.asarray(v, dtype=float)[:, None] for v in (y0, y1, v0, v1))
    return y0 * h00 + Lh * v0 * h10 + y1 * h01 + Lh * v1 * h11


def geodesic_chart(grid: Grid, y0, y1) -> np.ndarray:
    if grid.n != 1:
        raise ValueError("the geodesic family is defined for one-dimensional grids")
    a, b = grid.extent[0]
    u = (grid.axis(0) - a) / (b - a)
    return np.asarray(y0, dtype=float)[:, None] * (1 - u) + np.asarray(y1, dtype=float)[:, None] * u


def clamped_hermite(alg: LieAlgebra, grid: Grid, k: int, y0, y1, v0, v1) -> tuple[BoundaryData, np.ndarray]:
    """Boundary data from the Hermite chart path and the blend itself (initial guess)."""
    field_ = alg.exp(hermite_chart(grid, y0, y1, v0, v1))
    return BoundaryData.from_field(field_, grid, k), field_


def initial_guess(alg: LieAlgebra, grid: Grid, bc: BoundaryData, kind: str = "blend", chart=None) -> np.ndarray:
    """Group field respecting ``bc``.

    ``kind="blend"`` keeps the boundary field everywhere (the Hermite blend
    when ``bc`` came from :func:`clamped_hermite`); ``kind="geodesic"`` uses the
    straight chart line between the two end values on one-dimensional grids.
    """
    if kind == "blend":
        return bc.values.copy()
    if kind == "geodesic":
        y0 = alg.log(bc.values[0])
        y1 = alg.log(bc.values[-1])
        return bc.apply(alg.exp(geodesic_chart(grid, y0, y1)))
    if kind == "chart":
        return bc.apply(alg.exp(np.asarray(chart, dtype=float)))
    raise ValueError(f"unknown initial guess '{kind}'")
