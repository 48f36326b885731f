"""Post-hoc stabilization of identified discrete-time models.

Unstable fits are repaired by minimizing an exact penalty function

    phi(Z) = f(Z) + mu * max(0, rho(A(Z)) - (1 - tau))

over the stacked system matrix Z = [A B; C D] with a quasi-Newton method.
The data-fit objective keeps the repaired model close to the regression
data it was identified from; the model-fit objective keeps it close to the
unstable model itself.  The spectral radius is nonsmooth, so the line
search only requires weak Wolfe conditions and secant pairs violating the
curvature guard are dropped.  Eigenvalue-modulus ties, where the single-
eigenvalue subgradient stops giving descent, are escaped with a min-norm
direction over the active eigenvalue gradients; if that also fails, a
direction that contracts the outer eigenvalue moduli through the Schur
form is tried before the penalty weight is escalated.
"""

from __future__ import annotations

from dataclasses import dataclass
import json
import pathlib

import numpy as np
import scipy.linalg

from .identify import StateSpaceModel
from .linalg import spectral_radius, spectral_radius_gradient
from .snapshot import SnapshotPairs

__all__ = [
    "StabilizeConfig",
    "StabilizeReport",
    "NotStabilizedError",
    "stabilize",
    "save_report_json",
]

_MODES = ("data_fit", "model_fit")

# rho must clear the boundary by this margin before an iterate counts as
# feasible; guards against returning a model that is stable only in exact
# arithmetic.
_FEASIBILITY_MARGIN = 1e-12

# give up escalating the penalty weight beyond this
_PENALTY_CAP = 1e16

# eigenvalues within this relative window of rho count as tied
_TIE_WINDOW = 1e-4


@dataclass
class StabilizeConfig:
    """Settings for the exact-penalty stabilization solve.

    memory=None runs full-memory BFGS (dense inverse Hessian, fine up to a
    few thousand variables); a positive integer k keeps only the k most
    recent secant pairs.
    """

    tau: float = 0.0
    objective_budget_factor: float = 1000.0
    opt_tol: float = 1e-8
    max_iterations: int = 2000
    memory: int | None = None
    mode: str = "data_fit"
    initial_penalty: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau < 1.0:
            raise ValueError("tau must lie in [0, 1)")
        if self.objective_budget_factor < 1.0:
            raise ValueError("objective_budget_factor must be >= 1")
        if self.opt_tol <= 0.0:
            raise ValueError("opt_tol must be positive")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.memory is not None and self.memory <= 0:
            raise ValueError("memory must be None (full) or a positive history length")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.initial_penalty <= 0.0:
            raise ValueError("initial_penalty must be positive")


@dataclass
class StabilizeReport:
    """Outcome summary of one stabilization solve."""

    iterations_total: int
    iterations_to_first_stable: int
    final_objective_ratio: float
    final_spectral_radius: float
    relative_model_change: float
    converged: bool


class NotStabilizedError(RuntimeError):
    """No iterate reached spectral radius below 1 - tau.

    Carries the best iterate seen (lowest spectral radius) and its report so
    callers can inspect how close the solve came.
    """

    def __init__(self, message: str, model: StateSpaceModel, report: StabilizeReport):
        super().__init__(message)
        self.model = model
        self.report = report


def _check_inputs(
    model: StateSpaceModel, pairs: SnapshotPairs | None, config: StabilizeConfig
) -> None:
    if model.time_domain != "discrete":
        raise ValueError("stabilization operates on discrete-time models")
    if config.mode == "data_fit":
        if pairs is None:
            raise ValueError("data_fit mode requires snapshot pairs")
        if pairs.n_states != model.order:
            raise ValueError(
                f"snapshot state dimension {pairs.n_states} does not match "
                f"model order {model.order}"
            )
        if pairs.u0 is None and model.n_inputs > 0:
            raise ValueError("model has inputs but pairs carry no input samples")
        if pairs.u0 is not None and pairs.u0.shape[0] != model.n_inputs:
            raise ValueError(
                f"input dimension {pairs.u0.shape[0]} does not match model "
                f"inputs {model.n_inputs}"
            )
        if pairs.y0 is None and model.n_outputs > 0:
            raise ValueError("model has outputs but pairs carry no output samples")
        if pairs.y0 is not None and pairs.y0.shape[0] != model.n_outputs:
            raise ValueError(
                f"output dimension {pairs.y0.shape[0]} does not match model "
                f"outputs {model.n_outputs}"
            )


class _Objective:
    """Smooth part f of the penalty together with its gradient."""

    def __init__(self, mode: str, z0: np.ndarray, pairs: SnapshotPairs | None, order: int):
        self.mode = mode
        self.z0 = z0
        if mode == "data_fit":
            assert pairs is not None
            blocks = [pairs.x0]
            if pairs.u0 is not None and pairs.u0.shape[0] > 0:
                blocks.append(pairs.u0)
            self.data = np.vstack(blocks)
            targets = [pairs.x1]
            if z0.shape[0] > order:
                targets.append(pairs.y0)
            self.target = np.vstack(targets)
        else:
            self.data = None
            self.target = None

    def value(self, z: np.ndarray) -> float:
        if self.mode == "data_fit":
            resid = z @ self.data - self.target
        else:
            resid = z - self.z0
        return float(np.sum(resid * resid))

    def gradient(self, z: np.ndarray) -> np.ndarray:
        if self.mode == "data_fit":
            return 2.0 * (z @ self.data - self.target) @ self.data.T
        return 2.0 * (z - self.z0)

    def along(self, z: np.ndarray, direction: np.ndarray) -> tuple[float, float, float]:
        """Coefficients (c0, c1, c2) of the quadratic t -> f(z + t*direction)."""
        if self.mode == "data_fit":
            r0 = z @ self.data - self.target
            rd = direction @ self.data
        else:
            r0 = z - self.z0
            rd = direction
        c0 = float(np.sum(r0 * r0))
        c1 = 2.0 * float(np.sum(r0 * rd))
        c2 = float(np.sum(rd * rd))
        return c0, c1, c2


def _penalty_terms(z: np.ndarray, order: int, boundary: float):
    """Spectral radius of the A block and its violation beyond the boundary."""
    rho = spectral_radius(z[:order, :order])
    return rho, max(0.0, rho - boundary)


def _penalty_gradient(z: np.ndarray, order: int) -> np.ndarray:
    grad = np.zeros_like(z)
    a = z[:order, :order]
    try:
        grad_a = spectral_radius_gradient(a).matrix
    except np.linalg.LinAlgError:
        # Defective dominant eigenvalue: the gradient does not exist there.
        # Break the degeneracy with a deterministic graded diagonal shift and
        # use the nearby gradient as a subgradient-like direction.
        scale = 1e-10 * max(1.0, float(np.linalg.norm(a, ord="fro")))
        shift = np.diag(np.linspace(scale, 2.0 * scale, order))
        grad_a = spectral_radius_gradient(a + shift).matrix
    grad[:order, :order] = grad_a
    return grad


def _tied_modulus_gradients(
    a: np.ndarray, rho: float, window: float
) -> list[np.ndarray] | None:
    """Gradients of |lambda_i| for every eigenvalue within the modulus window.

    Left eigenvectors come from the inverse of the right eigenvector matrix,
    which already carries the y^* x = 1 normalization row by row.  Returns
    None when the eigenbasis is too ill-conditioned to invert reliably.
    """
    lam, v = np.linalg.eig(a)
    try:
        vinv = np.linalg.inv(v)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(vinv)):
        return None
    mods = np.abs(lam)
    active = np.where(mods >= rho * (1.0 - window))[0]
    grads = []
    for i in active:
        if mods[i] == 0.0:
            continue
        outer = np.outer(vinv[i, :], v[:, i])
        grads.append(np.real((np.conj(lam[i]) / mods[i]) * outer))
    return grads or None


def _modulus_clip_shift(a: np.ndarray, target: float) -> np.ndarray | None:
    """Smallest-structure shift of A that rescales outer eigenvalue moduli.

    Works on the complex Schur diagonal: eigenvalues with modulus above the
    target are contracted onto it, conjugate pairs share one real factor, so
    the reassembled matrix stays real.  Returns the additive shift, or None
    when A is already inside the target radius.
    """
    t_mat, q = scipy.linalg.schur(a, output="complex")
    d = np.diag(t_mat)
    mods = np.abs(d)
    if not np.any(mods > target):
        return None
    factors = np.where(mods > target, target / np.maximum(mods, 1e-300), 1.0)
    t_new = t_mat.copy()
    np.fill_diagonal(t_new, d * factors)
    return np.real(q @ t_new @ q.conj().T) - a


def _penalty_slope(a: np.ndarray, direction_a: np.ndarray) -> float:
    """Directional derivative of the spectral radius along direction_a."""
    try:
        grad_a = spectral_radius_gradient(a).matrix
    except np.linalg.LinAlgError:
        scale = 1e-10 * max(1.0, float(np.linalg.norm(a, ord="fro")))
        shift = np.diag(np.linspace(scale, 2.0 * scale, a.shape[0]))
        grad_a = spectral_radius_gradient(a + shift).matrix
    return float(np.sum(grad_a * direction_a))


def _min_norm_in_hull(vectors: list[np.ndarray]) -> np.ndarray:
    """Minimum-norm convex combination, by Frank-Wolfe on the simplex."""
    g = np.stack([vec.ravel() for vec in vectors])
    gram = g @ g.T
    k = g.shape[0]
    w = np.full(k, 1.0 / k)
    for _ in range(200):
        grad_w = gram @ w
        j = int(np.argmin(grad_w))
        gap = float(w @ grad_w) - float(grad_w[j])
        if gap <= 1e-14 * max(1.0, float(w @ grad_w)):
            break
        d = -w.copy()
        d[j] += 1.0
        denom = float(d @ gram @ d)
        if denom <= 0.0:
            break
        step = min(1.0, gap / denom)
        w = w + step * d
    return (w @ g).reshape(vectors[0].shape)


class _InverseHessian:
    """Full-memory BFGS matrix or a limited secant history, same interface."""

    def __init__(self, n_vars: int, memory: int | None):
        self.memory = memory
        self.fresh = True
        if memory is None:
            self.h = np.eye(n_vars)
        else:
            self.pairs: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.scale = 1.0

    def reset(self) -> None:
        if self.memory is None:
            self.h = np.eye(self.h.shape[0])
        else:
            self.pairs = []
        self.scale = 1.0
        self.fresh = True

    def update(self, s: np.ndarray, y: np.ndarray) -> bool:
        sy = float(s @ y)
        if sy <= 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            return False
        if self.memory is None:
            if self.fresh:
                # size the initial matrix from the first secant pair so early
                # steps are not dominated by the identity scaling
                self.h *= sy / float(y @ y)
            hy = self.h @ y
            yhy = float(y @ hy)
            self.h += ((sy + yhy) / sy**2) * np.outer(s, s)
            cross = np.outer(hy, s) / sy
            self.h -= cross + cross.T
        else:
            self.pairs.append((s, y, sy))
            if len(self.pairs) > self.memory:
                self.pairs.pop(0)
            self.scale = sy / float(y @ y)
        self.fresh = False
        return True

    def apply(self, g: np.ndarray) -> np.ndarray:
        if self.memory is None:
            return self.h @ g
        # standard two-loop recursion over the retained secant pairs
        q = g.copy()
        alphas = []
        for s, y, sy in reversed(self.pairs):
            alpha = float(s @ q) / sy
            alphas.append(alpha)
            q -= alpha * y
        q *= self.scale
        for (s, y, sy), alpha in zip(self.pairs, reversed(alphas)):
            beta = float(y @ q) / sy
            q += (alpha - beta) * s
        return q


def _line_search(phi, slope_at, phi0, slope0, max_bisections=25):
    """Weak Wolfe search (Armijo + weak curvature) by expansion/bisection.

    Returns (t, phi_t, ok).  Nonsmooth kinks can defeat both Wolfe
    conditions; a backtracking pass then accepts any strict decrease.
    ok=False means no decrease was found at any tried step.
    """
    c1, c2 = 1e-4, 0.5
    lo, hi = 0.0, np.inf
    t = 1.0
    armijo_t, armijo_phi = None, None
    for _ in range(max_bisections):
        phi_t = phi(t)
        if not np.isfinite(phi_t) or phi_t > phi0 + c1 * t * slope0:
            hi = t
        else:
            if armijo_t is None or phi_t < armijo_phi:
                armijo_t, armijo_phi = t, phi_t
            if slope_at(t) < c2 * slope0:
                lo = t
            else:
                return t, phi_t, True
        t = 2.0 * lo if hi == np.inf else 0.5 * (lo + hi)
        if t <= 0.0 or (hi < np.inf and (hi - lo) <= 1e-16 * max(1.0, lo)):
            break
    if armijo_t is not None:
        return armijo_t, armijo_phi, True
    # Sufficient decrease can be unattainable near an eigenvalue-modulus tie
    # even though the penalty still drops slightly; take any strict decrease.
    t = 1.0
    for _ in range(45):
        phi_t = phi(t)
        if np.isfinite(phi_t) and phi_t < phi0:
            return t, phi_t, True
        t *= 0.5
    return 0.0, phi0, False


def stabilize(
    model: StateSpaceModel,
    pairs: SnapshotPairs | None = None,
    config: StabilizeConfig | None = None,
) -> tuple[StateSpaceModel, StabilizeReport]:
    """Shift the spectral radius of a discrete model below 1 - tau.

    Returns the repaired model and a report.  The returned model always
    satisfies rho(A) < 1 - tau; if no acceptable iterate is ever found,
    NotStabilizedError is raised with the closest attempt attached.
    """
    config = StabilizeConfig() if config is None else config
    _check_inputs(model, pairs, config)

    order = model.order
    z0 = model.blocks()
    boundary = 1.0 - config.tau
    rho0 = spectral_radius(z0[:order, :order])

    def wrap(z: np.ndarray) -> StateSpaceModel:
        return StateSpaceModel(
            a=z[:order, :order].copy(),
            b=z[:order, order:].copy(),
            c=z[order:, :order].copy(),
            d=z[order:, order:].copy(),
            time_domain="discrete",
            step_width=model.step_width,
            basis=model.basis,
        )

    if rho0 < boundary - _FEASIBILITY_MARGIN:
        report = StabilizeReport(
            iterations_total=0,
            iterations_to_first_stable=0,
            final_objective_ratio=1.0,
            final_spectral_radius=rho0,
            relative_model_change=0.0,
            converged=True,
        )
        return wrap(z0), report

    objective = _Objective(config.mode, z0, pairs, order)
    f0 = objective.value(z0)
    budget = config.objective_budget_factor * f0
    z0_norm = float(np.linalg.norm(z0))
    mu = config.initial_penalty

    def phi_and_parts(z: np.ndarray):
        f = objective.value(z)
        rho, violation = _penalty_terms(z, order, boundary)
        return f + mu * violation, f, rho, violation

    def grad_phi(z: np.ndarray) -> np.ndarray:
        g = objective.gradient(z)
        _, violation = _penalty_terms(z, order, boundary)
        if violation > 0.0:
            g = g + mu * _penalty_gradient(z, order)
        return g

    def tie_direction(z: np.ndarray, violation: float) -> np.ndarray | None:
        """Min-norm subgradient over tied eigenvalue pieces, negated.

        The modulus window widens with the violation so a whole shell of
        unstable eigenvalues is pushed coherently instead of one at a time.
        """
        if violation <= 0.0:
            return None
        rho = violation + boundary
        window = min(0.3, max(_TIE_WINDOW, violation / rho))
        grads_a = _tied_modulus_gradients(z[:order, :order], rho, window)
        if grads_a is None or len(grads_a) < 2:
            return None
        gf = objective.gradient(z)
        pieces = []
        for grad_a in grads_a:
            piece = gf.copy()
            piece[:order, :order] += mu * grad_a
            pieces.append(piece)
        return -_min_norm_in_hull(pieces)

    z_cur = z0.copy()
    phi_z, f_z, rho_z, violation_z = phi_and_parts(z_cur)
    g = grad_phi(z_cur)
    hessian = _InverseHessian(z_cur.size, config.memory)

    best_feasible: np.ndarray | None = None
    best_feasible_f = np.inf
    best_rho = rho_z
    best_rho_z = z_cur.copy()
    first_stable = -1
    stall_count = 0
    iterations = 0
    converged = False

    def escalate() -> None:
        # stationary but infeasible: the penalty weight was too small
        nonlocal mu, phi_z, g, stall_count
        mu *= 10.0
        stall_count = 0
        phi_z = f_z + mu * violation_z
        g = grad_phi(z_cur)

    def try_direction(p: np.ndarray, slope: float):
        c0, c1, c2 = objective.along(z_cur, p)
        p_a = p[:order, :order]

        def phi_at(t: float) -> float:
            zt = z_cur + t * p
            _, violation = _penalty_terms(zt, order, boundary)
            return c0 + t * (c1 + t * c2) + mu * violation

        def slope_at(t: float) -> float:
            # d f/dt from the cached quadratic; the penalty term needs only
            # the spectral radius gradient, not the full data gradient
            zt = z_cur + t * p
            value = c1 + 2.0 * c2 * t
            _, violation = _penalty_terms(zt, order, boundary)
            if violation > 0.0:
                value += mu * _penalty_slope(zt[:order, :order], p_a)
            return value

        return _line_search(phi_at, slope_at, phi_z, slope)

    for iteration in range(1, config.max_iterations + 1):
        iterations = iteration
        p = -hessian.apply(g.ravel()).reshape(z_cur.shape)
        slope = float(g.ravel() @ p.ravel())
        if not np.isfinite(slope) or slope >= 0.0:
            hessian.reset()
            p = -g
            slope = float(g.ravel() @ p.ravel())
            if slope >= 0.0:
                if violation_z > 0.0 and mu < _PENALTY_CAP:
                    escalate()
                    continue
                break

        t, phi_new, ok = try_direction(p, slope)
        if not ok:
            # The single-eigenvalue subgradient gives no descent at a
            # modulus tie; retry along the min-norm tie direction.
            p_tie = tie_direction(z_cur, violation_z)
            if p_tie is not None:
                slope = -float(np.sum(p_tie * p_tie))
                if slope < 0.0:
                    t, phi_new, ok = try_direction(p_tie, slope)
                    p = p_tie
        if not ok and violation_z > 0.0:
            # Last resort direction: contract the outer eigenvalue moduli
            # through the Schur diagonal.  Along it the violation falls to
            # zero at unit step, so sufficiently large mu must accept it.
            shift = _modulus_clip_shift(z_cur[:order, :order], 0.99 * boundary)
            if shift is not None:
                p_clip = np.zeros_like(z_cur)
                p_clip[:order, :order] = shift
                slope = -1e-12 * max(1.0, abs(phi_z))
                t, phi_new, ok = try_direction(p_clip, slope)
                p = p_clip
        if not ok:
            # no decrease in any tried direction: stationary for this mu
            if violation_z > 0.0 and mu < _PENALTY_CAP:
                escalate()
                continue
            break

        z_new = z_cur + t * p
        g_new = grad_phi(z_new)
        hessian.update(t * p.ravel(), (g_new - g).ravel())

        decrease = phi_z - phi_new
        z_cur, g = z_new, g_new
        phi_z, f_z, rho_z, violation_z = phi_and_parts(z_cur)

        if rho_z < best_rho:
            best_rho = rho_z
            best_rho_z = z_cur.copy()
        feasible = rho_z <= boundary - _FEASIBILITY_MARGIN
        if feasible:
            if first_stable < 0:
                first_stable = iteration
            if f_z < best_feasible_f:
                best_feasible_f = f_z
                best_feasible = z_cur.copy()
            if f_z <= budget:
                converged = True
                break

        if decrease <= config.opt_tol * max(1.0, abs(phi_z)):
            stall_count += 1
        else:
            stall_count = 0
        if stall_count >= 5:
            if violation_z > 0.0 and mu < _PENALTY_CAP:
                escalate()
                continue
            break

    # Final polish.  Boundary snap: iterates often terminate on or just
    # outside the stability boundary (the penalty kink); scaling the A block
    # contracts every eigenvalue by the same factor, turning such an iterate
    # into a strictly feasible candidate.  Segment pullback: f is a convex
    # quadratic along the ray back to z0 with its minimum at or before z0,
    # so blending a feasible candidate toward z0 as far as stability allows
    # reduces both the objective and the model change.
    rho_target = boundary * (1.0 - 1e-7)

    def pull_toward_start(z_s: np.ndarray) -> np.ndarray:
        shift = z_s - z0
        best = z_s
        lo_eta, hi_eta = 0.0, 1.0
        for _ in range(50):
            eta = 0.5 * (lo_eta + hi_eta)
            cand = z0 + eta * shift
            if spectral_radius(cand[:order, :order]) <= rho_target:
                hi_eta = eta
                best = cand
            else:
                lo_eta = eta
        return best

    candidates = [] if best_feasible is None else [best_feasible]
    for cand in (best_rho_z, z_cur):
        rho_c = spectral_radius(cand[:order, :order])
        if rho_c <= 0.0:
            continue
        snapped = cand.copy()
        snapped[:order, :order] *= rho_target / rho_c
        if spectral_radius(snapped[:order, :order]) > boundary - _FEASIBILITY_MARGIN:
            continue
        candidates.append(snapped)
    if candidates and first_stable < 0:
        first_stable = iterations
    for cand in candidates:
        pulled = pull_toward_start(cand)
        f_p = objective.value(pulled)
        if f_p < best_feasible_f:
            best_feasible_f = f_p
            best_feasible = pulled

    if best_feasible is None:
        best_z = best_rho_z
        report = StabilizeReport(
            iterations_total=iterations,
            iterations_to_first_stable=first_stable,
            final_objective_ratio=_ratio(objective.value(best_z), f0),
            final_spectral_radius=best_rho,
            relative_model_change=_relative_change(best_z, z0, z0_norm),
            converged=False,
        )
        raise NotStabilizedError(
            f"no iterate reached spectral radius below {boundary} "
            f"(best {best_rho:.6g} after {iterations} iterations)",
            wrap(best_z),
            report,
        )

    final_f = best_feasible_f
    final_rho = spectral_radius(best_feasible[:order, :order])
    report = StabilizeReport(
        iterations_total=iterations,
        iterations_to_first_stable=first_stable,
        final_objective_ratio=_ratio(final_f, f0),
        final_spectral_radius=final_rho,
        relative_model_change=_relative_change(best_feasible, z0, z0_norm),
        converged=converged or final_f <= budget,
    )
    return wrap(best_feasible), report


def _ratio(f: float, f0: float) -> float:
    if f0 > 0.0:
        return f / f0
    return 1.0 if f == 0.0 else np.inf


def _relative_change(z: np.ndarray, z0: np.ndarray, z0_norm: float) -> float:
    change = float(np.linalg.norm(z - z0))
    return change / z0_norm if z0_norm > 0.0 else change


def save_report_json(report: StabilizeReport, path: str | pathlib.Path) -> None:
    payload = {
        "iterations_total": report.iterations_total,
        "iterations_to_first_stable": report.iterations_to_first_stable,
        "final_objective_ratio": report.final_objective_ratio,
        "final_spectral_radius": report.final_spectral_radius,
        "relative_model_change": report.relative_model_change,
        "converged": report.converged,
    }
    pathlib.Path(path).write_text(json.dumps(payload, indent=1) + "\n")
