"""Portfolio decision solvers over the long-only full-investment simplex.

Every oracle or baseline decision used anywhere in the project lives here:
vertex argmax, fee-penalized LP (epigraph + dense simplex), L2-regularized QP
(lifted Frank-Wolfe with away steps), mean-variance max-Sharpe (projected
gradient multi-start), the Euclidean simplex projection, and exact closed-form
batch oracles used by the training loops. All solvers are pure, deterministic,
and tie-break by lowest asset index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market_data import _frozen

MAX_RETURN = "max_return"
MAX_RETURN_FEE = "max_return_fee"
MAX_RETURN_FEE_L2 = "max_return_fee_l2"
PROBLEM_KINDS = (MAX_RETURN, MAX_RETURN_FEE, MAX_RETURN_FEE_L2)


class SolverError(RuntimeError):
    pass


class InfeasibleError(SolverError):
    pass


class UnboundedError(SolverError):
    pass


class ConvergenceError(SolverError):
    pass


@dataclass(frozen=True)
class Portfolio:
    """Long-only weights summing to one; tiny negative round-off is clamped."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if w.min(initial=0.0) < -1e-10:
            raise ValueError(f"negative weight {w.min()} below tolerance")
        w = np.maximum(w, 0.0)
        if abs(w.sum() - 1.0) > 1e-8:
            raise ValueError(f"weights sum to {w.sum()}, expected 1")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def n_assets(self) -> int:
        return self.weights.size

    @staticmethod
    def uniform(n: int) -> "Portfolio":
        return Portfolio(np.full(n, 1.0 / n))

    @staticmethod
    def vertex(n: int, i: int) -> "Portfolio":
        w = np.zeros(n)
        w[i] = 1.0
        return Portfolio(w)


@dataclass(frozen=True)
class DecisionProblem:
    """Oracle specification: objective kind, fee and ridge strengths, prior holdings."""

    kind: str = MAX_RETURN
    gamma: float = 0.0
    lam: float = 0.0
    w_prev: Portfolio | None = None

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.gamma < 0 or self.lam < 0:
            raise ValueError("gamma and lam must be >= 0")
        if self.kind == MAX_RETURN and (self.gamma != 0 or self.lam != 0):
            raise ValueError("max_return requires gamma = lam = 0")
        if self.kind == MAX_RETURN_FEE and self.lam != 0:
            raise ValueError("max_return_fee requires lam = 0")
        if self.kind == MAX_RETURN_FEE_L2 and self.lam <= 0:
            raise ValueError("max_return_fee_l2 requires lam > 0")
        if self.kind != MAX_RETURN and self.w_prev is None:
            raise ValueError(f"{self.kind} requires w_prev")

    def penalty(self, w: np.ndarray) -> float:
        """Prediction-independent concave part of the objective at w."""
        val = 0.0
        if self.gamma > 0:
            val -= self.gamma * np.abs(w - self.w_prev.weights).sum()
        if self.lam > 0:
            val -= self.lam * float(w @ w)
        return val


@dataclass(frozen=True)
class CovarianceEstimate:
    """Sample mean/covariance with explicit diagonal loading."""

    mean: np.ndarray
    sigma: np.ndarray
    ridge: float = 0.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=float)
        n = mean.size
        if sigma.shape != (n, n):
            raise ValueError("sigma shape must match mean")
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise ValueError("sigma must be symmetric")
        try:
            np.linalg.cholesky(sigma + self.ridge * np.eye(n))
        except np.linalg.LinAlgError:
            raise SolverError("covariance not positive definite after ridge loading") from None
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "sigma", _frozen(sigma))

    @property
    def loaded(self) -> np.ndarray:
        return self.sigma + self.ridge * np.eye(self.mean.size)


def estimate_covariance(returns: np.ndarray, ridge: float | None = None) -> CovarianceEstimate:
    """Sample mean and covariance (N-1 denominator) plus ridge loading.

    ridge=None uses the default 1e-6 * trace(sigma) / n, floored at 1e-12 so a
    flat (zero-variance) window still yields a positive-definite estimate.
    """
    x = np.asarray(returns, dtype=float)
    t, n = x.shape
    if t < n + 2:
        raise ValueError(f"covariance window of {t} rows too short for {n} assets (need >= {n + 2})")
    mean = x.mean(axis=0)
    xc = x - mean
    sigma = (xc.T @ xc) / (t - 1)
    if ridge is None:
        ridge = max(1e-6 * np.trace(sigma) / n, 1e-12)
    return CovarianceEstimate(mean=mean, sigma=sigma, ridge=float(ridge))


def project_simplex(v: np.ndarray) -> Portfolio:
    """Euclidean projection onto {w >= 0, sum w = 1} via sort-and-threshold."""
    return Portfolio(_project_simplex_raw(np.asarray(v, dtype=float).reshape(-1)))


def _project_simplex_raw(v: np.ndarray) -> np.ndarray:
    s = np.sort(v)[::-1]
    csum = np.cumsum(s)
    k = np.arange(1, v.size + 1)
    cond = s - (csum - 1.0) / k > 0
    rho = np.nonzero(cond)[0][-1]
    tau = (csum[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def solve_max_return(coeff: np.ndarray) -> Portfolio:
    """Vertex argmax of a linear objective; ties go to the lowest index."""
    coeff = np.asarray(coeff, dtype=float).reshape(-1)
    if not np.all(np.isfinite(coeff)):
        raise ValueError("objective coefficients must be finite")
    return Portfolio.vertex(coeff.size, int(np.argmax(coeff)))


# ---------------------------------------------------------------------------
# Dense tableau primal simplex with Bland's anti-cycling rule.
# ---------------------------------------------------------------------------

_LP_TOL = 1e-9
_LP_MAX_PIVOTS = 200_000


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])
    basis[row] = col


def solve_lp(
    objective: np.ndarray,
    a_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    a_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    maximize: bool = True,
):
    """Solve max/min objective . x subject to a_ub x <= b_ub, a_eq x = b_eq, x >= 0.

    Two-phase dense tableau primal simplex with Bland's rule; returns
    (solution, objective value) at an optimal basic solution.
    """
    c = np.asarray(objective, dtype=float).reshape(-1)
    n = c.size
    a_ub = np.zeros((0, n)) if a_ub is None else np.atleast_2d(np.asarray(a_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    a_eq = np.zeros((0, n)) if a_eq is None else np.atleast_2d(np.asarray(a_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    mu, me = a_ub.shape[0], a_eq.shape[0]
    m = mu + me

    cost = -c if maximize else c.copy()

    # Columns: structural | slack (one per <= row) | artificial (added as needed).
    a = np.zeros((m, n + mu))
    a[:mu, :n] = a_ub
    a[:mu, n : n + mu] = np.eye(mu)
    a[mu:, :n] = a_eq
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0

    basis = np.full(m, -1, dtype=int)
    for i in range(mu):
        if not flip[i]:
            basis[i] = n + i
    need_art = np.nonzero(basis < 0)[0]
    n_art = need_art.size
    tab = np.zeros((m, n + mu + n_art + 1))
    tab[:, : n + mu] = a
    tab[:, -1] = b
    for k, i in enumerate(need_art):
        tab[i, n + mu + k] = 1.0
        basis[i] = n + mu + k

    def reduced_costs(cost_full: np.ndarray) -> np.ndarray:
        cb = cost_full[basis]
        return cost_full - tab[:, :-1].T @ cb

    if n_art:
        phase1 = np.zeros(n + mu + n_art)
        phase1[n + mu :] = 1.0
        red = reduced_costs(phase1)
        _run_simplex(tab, basis, red)
        if phase1[basis] @ tab[:, -1] > 1e-7:
            raise InfeasibleError("LP is infeasible")
        # Pivot any degenerate artificials out of the basis; drop redundant rows.
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n + mu:
                cols = np.nonzero(np.abs(tab[i, : n + mu]) > _LP_TOL)[0]
                if cols.size:
                    _pivot(tab, basis, i, int(cols[0]))
                else:
                    keep[i] = False
        tab = tab[keep]
        basis = basis[keep]
        m = tab.shape[0]
        tab = np.delete(tab, np.s_[n + mu : n + mu + n_art], axis=1)

    cost_full = np.zeros(tab.shape[1] - 1)
    cost_full[:n] = cost
    red = cost_full - tab[:, :-1].T @ cost_full[basis]
    _run_simplex(tab, basis, red)

    x = np.zeros(tab.shape[1] - 1)
    x[basis] = tab[:, -1]
    x = x[:n]
    value = float(c @ x)
    return x, value


def _run_simplex(tab: np.ndarray, basis: np.ndarray, red: np.ndarray) -> None:
    m = tab.shape[0]
    for _ in range(_LP_MAX_PIVOTS):
        neg = np.nonzero(red < -_LP_TOL)[0]
        if neg.size == 0:
            return
        col = int(neg[0])
        column = tab[:, col]
        pos = column > _LP_TOL
        if not np.any(pos):
            raise UnboundedError("LP is unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[pos, -1] / column[pos]
        best = ratios.min()
        candidates = np.nonzero(ratios <= best + _LP_TOL)[0]
        row = int(candidates[np.argmin(basis[candidates])])
        mult = red[col]
        _pivot(tab, basis, row, col)
        red -= mult * tab[row, :-1]
        red[basis[row]] = 0.0
    raise SolverError("simplex pivot limit exceeded")


# ---------------------------------------------------------------------------
# Fee-penalized oracle: epigraph LP over (w, u).
# ---------------------------------------------------------------------------


def _fee_polytope(n: int, w_prev: np.ndarray, cap_u: bool):
    """Inequality/equality system for {w in simplex, |w - w_prev| <= u (<= 1)}."""
    rows = 2 * n + (n if cap_u else 0)
    a_ub = np.zeros((rows, 2 * n))
    b_ub = np.zeros(rows)
    eye = np.eye(n)
    a_ub[:n, :n] = eye
    a_ub[:n, n:] = -eye
    b_ub[:n] = w_prev
    a_ub[n : 2 * n, :n] = -eye
    a_ub[n : 2 * n, n:] = -eye
    b_ub[n : 2 * n] = -w_prev
    if cap_u:
        a_ub[2 * n :, n:] = eye
        b_ub[2 * n :] = 1.0
    a_eq = np.zeros((1, 2 * n))
    a_eq[0, :n] = 1.0
    b_eq = np.array([1.0])
    return a_ub, b_ub, a_eq, b_eq


def solve_fee(r_hat: np.ndarray, prob: DecisionProblem) -> Portfolio:
    """Maximize r_hat . w - gamma * ||w - w_prev||_1 over the simplex.

    Epigraph reformulation (aux u >= |w - w_prev|) solved as an LP.
    """
    if prob.kind != MAX_RETURN_FEE:
        raise ValueError(f"solve_fee requires kind={MAX_RETURN_FEE}, got {prob.kind}")
    r_hat = np.asarray(r_hat, dtype=float).reshape(-1)
    n = r_hat.size
    a_ub, b_ub, a_eq, b_eq = _fee_polytope(n, prob.w_prev.weights, cap_u=False)
    c = np.concatenate([r_hat, -prob.gamma * np.ones(n)])
    x, _ = solve_lp(c, a_ub, b_ub, a_eq, b_eq, maximize=True)
    return Portfolio(x[:n])


# ---------------------------------------------------------------------------
# L2-regularized oracle: lifted Frank-Wolfe with away steps, LP oracle.
# ---------------------------------------------------------------------------


def solve_fee_l2(
    r_hat: np.ndarray,
    prob: DecisionProblem,
    tol: float = 1e-7,
    max_iter: int = 10_000,
    full_output: bool = False,
    warm_start: bool = True,
):
    """Maximize r_hat . w - gamma * ||w - w_prev||_1 - lam * ||w||_2^2 over the simplex.

    Runs Frank-Wolfe with away steps on the lifted polytope
    {w in simplex, |w - w_prev| <= u <= 1}; the linear-minimization oracle is
    solve_lp. Stops when the FW duality gap certifies suboptimality <= tol.
    By default the iterate starts at the closed-form KKT point, which the first
    gap evaluation certifies (or refutes, falling back to genuine FW steps).
    """
    if prob.kind != MAX_RETURN_FEE_L2:
        raise ValueError(f"solve_fee_l2 requires kind={MAX_RETURN_FEE_L2}, got {prob.kind}")
    r_hat = np.asarray(r_hat, dtype=float).reshape(-1)
    n = r_hat.size
    lam, gamma = prob.lam, prob.gamma
    a_ub, b_ub, a_eq, b_eq = _fee_polytope(n, prob.w_prev.weights, cap_u=True)

    def grad(x):
        g = np.empty(2 * n)
        g[:n] = -r_hat + 2.0 * lam * x[:n]
        g[n:] = gamma
        return g

    def lmo(direction):
        s, _ = solve_lp(-direction, a_ub, b_ub, a_eq, b_eq, maximize=True)
        return s

    if warm_start:
        w0 = _fee_l2_argmax_batch(r_hat[None, :], gamma, lam, prob.w_prev.weights)[0]
        x = np.concatenate([w0, np.abs(w0 - prob.w_prev.weights)])
    else:
        x = lmo(grad(np.concatenate([prob.w_prev.weights, np.zeros(n)])))
    atoms = [x.copy()]
    alphas = [1.0]
    gap = np.inf
    for it in range(max_iter):
        g = grad(x)
        s = lmo(g)
        fw_dir = s - x
        gap = float(-g @ fw_dir)
        if gap <= tol:
            break
        scores = [g @ a for a in atoms]
        v_idx = int(np.argmax(scores))
        away_dir = x - atoms[v_idx]
        away_gap = float(g @ atoms[v_idx]) - float(g @ x)
        if gap >= away_gap or len(atoms) == 1:
            d, step_max, mode = fw_dir, 1.0, "fw"
        else:
            alpha_v = alphas[v_idx]
            d, step_max, mode = away_dir, alpha_v / (1.0 - alpha_v) if alpha_v < 1.0 else np.inf, "away"
        dw = d[:n]
        curv = 2.0 * lam * float(dw @ dw)
        lin = float(g @ d)
        if curv <= 0:
            step = step_max if lin < 0 else 0.0
        else:
            step = min(max(-lin / curv, 0.0), step_max)
        if not np.isfinite(step):
            step = 1.0
        x = x + step * d
        if mode == "fw":
            alphas = [a * (1.0 - step) for a in alphas]
            matched = _find_atom(atoms, s)
            if matched is None:
                atoms.append(s.copy())
                alphas.append(step)
            else:
                alphas[matched] += step
        else:
            alphas = [a * (1.0 + step) for a in alphas]
            alphas[v_idx] -= step
        atoms, alphas = _prune_atoms(atoms, alphas)
    else:
        raise ConvergenceError(
            f"Frank-Wolfe did not reach gap {tol:g} in {max_iter} iterations (gap={gap:.3g})"
        )
    w = np.clip(x[:n], 0.0, None)
    w = w / w.sum()
    port = Portfolio(w)
    if full_output:
        obj = float(r_hat @ w) + prob.penalty(w)
        return port, {"gap": gap, "iterations": it, "objective": obj}
    return port


def _find_atom(atoms, cand):
    for i, a in enumerate(atoms):
        if np.allclose(a, cand, atol=1e-11, rtol=0.0):
            return i
    return None


def _prune_atoms(atoms, alphas):
    # x stays the source of truth; dropped mass is below fp resolution.
    keep = [i for i, a in enumerate(alphas) if a > 1e-15]
    return [atoms[i] for i in keep], [max(alphas[i], 0.0) for i in keep]


# ---------------------------------------------------------------------------
# Max-Sharpe baseline: projected gradient ascent with multi-starts.
# ---------------------------------------------------------------------------

_PGA_STARTS = 8
_PGA_SEED = 1729


def _pga_maximize(objective, gradient, w0: np.ndarray, iters: int = 600) -> np.ndarray:
    w = w0.copy()
    f = objective(w)
    step = 1.0
    for _ in range(iters):
        g = gradient(w)
        improved = False
        trial = step
        for _ in range(40):
            cand = _project_simplex_raw(w + trial * g)
            fc = objective(cand)
            if fc > f + 1e-14:
                w, f = cand, fc
                step = trial * 1.5
                improved = True
                break
            trial *= 0.5
        if not improved:
            break
    return w


def solve_max_sharpe(est: CovarianceEstimate) -> Portfolio:
    """Maximize mean/sqrt(variance) over the simplex (projected gradient, 8 starts).

    Falls back to the minimum-variance portfolio when no simplex point has a
    positive expected return.
    """
    mean = est.mean
    sigma = est.loaded
    n = mean.size

    if mean.max() <= 0.0:
        def obj(w):
            return -float(w @ sigma @ w)

        def grad(w):
            return -2.0 * (sigma @ w)
    else:
        def obj(w):
            var = float(w @ sigma @ w)
            return float(mean @ w) / np.sqrt(var)

        def grad(w):
            var = float(w @ sigma @ w)
            a = float(mean @ w)
            return mean / np.sqrt(var) - a * (sigma @ w) / var**1.5

    rng = np.random.Generator(np.random.PCG64(_PGA_SEED))
    starts = [np.full(n, 1.0 / n), np.eye(n)[int(np.argmax(mean))]]
    while len(starts) < _PGA_STARTS:
        starts.append(rng.dirichlet(np.ones(n)))
    best_w, best_f = None, -np.inf
    for w0 in starts:
        w = _pga_maximize(obj, grad, w0)
        f = obj(w)
        if f > best_f + 1e-15:
            best_w, best_f = w, f
    return Portfolio(best_w)


# ---------------------------------------------------------------------------
# Exact closed-form batch oracles (training hot path).
#
# These solve the same three decision problems as the public solvers above but
# vectorized across many coefficient rows. The fee problem is a separable
# piecewise-linear minimization over the simplex (greedy segment fill); the
# fee+ridge problem has a one-dimensional dual root solved by bisection plus an
# exact polish. Tests pin them to solve_max_return / solve_fee / solve_fee_l2.
# ---------------------------------------------------------------------------


def argmax_batch(v_rows: np.ndarray, prob: DecisionProblem) -> np.ndarray:
    """Argmax_w of v . w + penalty(w) over the simplex, one row of w per row of v."""
    v = np.atleast_2d(np.asarray(v_rows, dtype=float))
    if prob.kind == MAX_RETURN:
        out = np.zeros_like(v)
        out[np.arange(v.shape[0]), np.argmax(v, axis=1)] = 1.0
        return out
    if prob.kind == MAX_RETURN_FEE:
        return _fee_argmax_batch(v, prob.gamma, prob.w_prev.weights)
    return _fee_l2_argmax_batch(v, prob.gamma, prob.lam, prob.w_prev.weights)


def penalty_batch(w_rows: np.ndarray, prob: DecisionProblem) -> np.ndarray:
    w = np.atleast_2d(w_rows)
    out = np.zeros(w.shape[0])
    if prob.gamma > 0:
        out -= prob.gamma * np.abs(w - prob.w_prev.weights).sum(axis=1)
    if prob.lam > 0:
        out -= prob.lam * (w * w).sum(axis=1)
    return out


def _fee_argmax_batch(v: np.ndarray, gamma: float, p: np.ndarray) -> np.ndarray:
    """Greedy segment fill for max v.w - gamma * ||w - p||_1 over the simplex.

    Each coordinate contributes two linear segments of the (convex, piecewise
    linear) cost: [0, p_i] at slope -v_i - gamma and [p_i, 1] at slope
    -v_i + gamma; mass 1 is poured into segments by ascending slope. Stable
    sort keeps ties at the lowest index and below-kink side first.
    """
    b, n = v.shape
    slopes = np.concatenate([-v - gamma, -v + gamma], axis=1)
    caps = np.broadcast_to(np.concatenate([p, 1.0 - p]), (b, 2 * n))
    order = np.argsort(slopes, axis=1, kind="stable")
    caps_sorted = np.take_along_axis(caps, order, axis=1)
    csum = np.cumsum(caps_sorted, axis=1)
    remaining_before = 1.0 - (csum - caps_sorted)
    fill_sorted = np.clip(remaining_before, 0.0, caps_sorted)
    fill = np.zeros_like(fill_sorted)
    np.put_along_axis(fill, order, fill_sorted, axis=1)
    return fill[:, :n] + fill[:, n:]


def _fee_l2_argmax_batch(v: np.ndarray, gamma: float, lam: float, p: np.ndarray) -> np.ndarray:
    """Exact maximizer of v.w - gamma*||w - p||_1 - lam*||w||^2 over the simplex.

    Coordinatewise KKT gives w_i(mu) as a clipped soft shift around the kink at
    p_i, nondecreasing in the simplex multiplier mu; the root of
    sum_i w_i(mu) = 1 is bracketed, bisected, then polished exactly on the
    final linear piece.
    """
    b, n = v.shape
    half_gap = gamma / (2.0 * lam)
    inv = 1.0 / (2.0 * lam)
    p_rows_all = np.broadcast_to(p, v.shape)

    def w_of(mu):
        z = (v + mu[:, None]) * inv
        lo = z - half_gap
        hi = z + half_gap
        w = np.where(lo > p, lo, np.where(hi < p, hi, p_rows_all))
        return np.maximum(w, 0.0)

    # ~48 halvings narrow the bracket below fp resolution of the polish below.
    mu_lo = -v.max(axis=1) - gamma - 2.0 * lam * (1.0 + np.abs(p).max())
    mu_hi = -v.min(axis=1) + gamma + 2.0 * lam * (1.0 + np.abs(p).max())
    for _ in range(48):
        mid = 0.5 * (mu_lo + mu_hi)
        too_low = w_of(mid).sum(axis=1) < 1.0
        mu_lo = np.where(too_low, mid, mu_lo)
        mu_hi = np.where(too_low, mu_hi, mid)
    mu = 0.5 * (mu_lo + mu_hi)

    # Exact polish: on the identified piece, linear coordinates move with
    # slope 1/(2 lam) while kink/zero coordinates are constant.
    z = (v + mu[:, None]) * inv
    lo, hi = z - half_gap, z + half_gap
    p_rows = p_rows_all
    on_lo = lo > p_rows
    below = (~on_lo) & (hi < p_rows)
    on_hi = below & (hi > 0)
    at_kink = ~on_lo & ~below  # w = p_i (includes p_i = 0)
    linear = on_lo | on_hi
    k = linear.sum(axis=1)
    fixed = np.where(at_kink, p_rows, 0.0).sum(axis=1)
    shift = np.where(on_lo, -gamma, np.where(on_hi, gamma, 0.0))
    lin_base = np.where(linear, v + shift, 0.0).sum(axis=1)
    mu_exact = (2.0 * lam * (1.0 - fixed) - lin_base) / np.maximum(k, 1)
    mu = np.where(k > 0, mu_exact, mu)
    w = w_of(mu)
    # Guard: if polish left tiny drift (piece misidentified at boundary), fall
    # back to the bisection midpoint and renormalize the residual.
    total = w.sum(axis=1)
    bad = np.abs(total - 1.0) > 1e-9
    if np.any(bad):
        w[bad] = w_of(0.5 * (mu_lo + mu_hi))[bad]
        w[bad] /= w[bad].sum(axis=1, keepdims=True)
    return w
