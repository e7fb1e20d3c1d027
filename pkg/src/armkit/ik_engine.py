"""Numerical inverse kinematics: damped least squares with limit clamping,
seed solutions, random restarts, best-fit results and two-stage tolerances.

The solver never fails to return a configuration: when tolerances cannot be
met within the iteration/restart/time budget it returns the best iterate
seen (weighted pose error, 1 rad counted as ORI_WEIGHT_M meters).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .arm_model import KinematicChain, Pose, _fk_raw, clamp_to_limits
from .geometry import (
    quat_conj,
    quat_from_matrix,
    quat_log_vector,
    quat_mul,
    quat_normalize,
    quat_to_matrix,
)

# Commensurates meters and radians in the best-fit comparison: 1 rad = 0.25 m
# at arm scale.
ORI_WEIGHT_M = 0.25

# Adaptive damping bounds and start value (Levenberg-style: double on error
# increase, halve on decrease).
_LAMBDA_MIN = 1e-4
_LAMBDA_MAX = 1.0

# An attempt is cut short when the best weighted error has not improved by at
# least this factor over the last _STAGNATION_WINDOW iterations.
_STAGNATION_WINDOW = 25
_STAGNATION_FACTOR = 0.999

# Per-iteration joint step clamp (radians) keeps near-singular updates sane.
_STEP_MAX = 0.5

EXACT = "Exact"
BEST_FIT = "BestFit"


@dataclass(frozen=True)
class IkConfig:
    """Solver budget and tolerances for one stage."""

    damping: float = 0.05
    max_iters: int = 150
    time_budget: float | None = None   # seconds; None = no wall-clock cap
    pos_tol: float = 1e-3
    ori_tol: float = 1e-2
    restarts: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.pos_tol > 0 and self.ori_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.damping > 0:
            raise ValueError("damping must be positive")


# Default stage tolerances: loose (5 mm, 0.05 rad), tight (1 mm, 0.01 rad).
DEFAULT_LOOSE = IkConfig(pos_tol=5e-3, ori_tol=5e-2)
DEFAULT_TIGHT = IkConfig(pos_tol=1e-3, ori_tol=1e-2)


@dataclass(frozen=True)
class IkResult:
    """Outcome of one solve: joints are always within chain limits."""

    joints: np.ndarray
    achieved: Pose
    pos_err: float
    ori_err: float
    status: str            # EXACT or BEST_FIT
    iterations: int
    elapsed: float
    pos_tol: float         # tolerances of the config that produced it
    ori_tol: float
    stage: int = 1         # which two-stage stage produced it (1 for plain solve)

    @property
    def exact(self) -> bool:
        return self.status == EXACT


def pose_error(target: Pose, actual: Pose) -> np.ndarray:
    """6-vector twist error: translation delta then shortest-arc axis-angle."""
    e = np.empty(6)
    e[:3] = target.position - actual.position
    rel = quat_mul(target.orientation, quat_conj(actual.orientation))
    e[3:] = quat_log_vector(quat_normalize(rel))
    return e


def weighted_error(pos_err: float, ori_err: float) -> float:
    return math.hypot(pos_err, ORI_WEIGHT_M * ori_err)


def solve(chain: KinematicChain, target: Pose, seed, cfg: IkConfig,
          on_iterate=None) -> IkResult:
    """Damped least squares IK from a seed with random restarts.

    Iterates dq = J^T (J J^T + lambda^2 I)^-1 e, clamping to limits each
    step. Returns EXACT as soon as both tolerances are met; on budget
    exhaustion returns the iterate with minimum weighted error seen across
    all attempts. Restarts draw uniform joints from the limits using
    cfg.rng_seed, so identical inputs give identical results.

    on_iterate, when given, is called (q, pos_err, ori_err) at every iterate
    visited; intended for tests.
    """
    q0 = clamp_to_limits(chain, seed)
    if not (np.all(np.isfinite(target.position)) and np.all(np.isfinite(target.orientation))):
        raise ValueError("target pose is not finite")

    rng = np.random.default_rng(cfg.rng_seed)
    lo = chain._lo
    hi = chain._hi
    p_t = target.position
    R_t = quat_to_matrix(target.orientation)
    start = time.perf_counter()

    best_q = None
    best_R = None
    best_p = None
    best_pos = math.inf
    best_ori = math.inf
    best_w = math.inf
    total_iters = 0
    n = len(chain)
    J = np.empty((6, n))
    e = np.empty(6)

    def evaluate(qv):
        p, R, P, Z = _fk_raw(chain, qv)
        e[:3] = p_t - p
        # rotation log of R_t R^T via the quaternion, shortest arc
        e[3:] = quat_log_vector(quat_from_matrix(R_t @ R.T))
        pos_err = math.sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
        ori_err = math.sqrt(e[3] * e[3] + e[4] * e[4] + e[5] * e[5])
        return p, R, P, Z, pos_err, ori_err, math.hypot(pos_err, ORI_WEIGHT_M * ori_err)

    def dls_step(lam):
        A = J @ J.T
        A.flat[::7] += lam * lam    # lambda^2 on the diagonal
        dq = J.T @ np.linalg.solve(A, e)
        np.clip(dq, -_STEP_MAX, _STEP_MAX, out=dq)
        q_cand = q + dq
        # joints pushed past a limit are saturated: clamp them, drop their
        # Jacobian columns and re-solve so the rest of the chain compensates
        sat = ((q_cand < lo) & (dq < 0)) | ((q_cand > hi) & (dq > 0))
        if sat.any() and not sat.all():
            Jf = J.copy()
            Jf[:, sat] = 0.0
            A = Jf @ Jf.T
            A.flat[::7] += lam * lam
            dq = Jf.T @ np.linalg.solve(A, e)
            np.clip(dq, -_STEP_MAX, _STEP_MAX, out=dq)
            q_cand = q + dq
        return np.clip(q_cand, lo, hi)

    n_attempts = 1 + max(0, int(cfg.restarts))
    for attempt in range(n_attempts):
        q = q0.copy() if attempt == 0 else rng.uniform(lo, hi)
        lam = cfg.damping
        window_best = math.inf
        window_start_best = math.inf

        p, R, P, Z, pos_err, ori_err, w = evaluate(q)
        if on_iterate is not None:
            on_iterate(q.copy(), pos_err, ori_err)
        if w < best_w:
            best_w, best_q, best_R, best_p = w, q.copy(), R, p
            best_pos, best_ori = pos_err, ori_err
        if pos_err <= cfg.pos_tol and ori_err <= cfg.ori_tol:
            return IkResult(
                joints=q.copy(), achieved=Pose(p, quat_from_matrix(R)),
                pos_err=pos_err, ori_err=ori_err, status=EXACT,
                iterations=total_iters, elapsed=time.perf_counter() - start,
                pos_tol=cfg.pos_tol, ori_tol=cfg.ori_tol)
        J[:3] = np.cross(Z, p[None, :] - P).T
        J[3:] = Z.T
        window_start_best = w

        for it in range(cfg.max_iters):
            if cfg.time_budget is not None and time.perf_counter() - start > cfg.time_budget:
                return _best_fit(best_q, best_p, best_R, best_pos, best_ori,
                                 total_iters, start, cfg)
            q_cand = dls_step(lam)
            pc, Rc, Pc, Zc, pos_c, ori_c, w_c = evaluate(q_cand)
            total_iters += 1
            if on_iterate is not None:
                on_iterate(q_cand.copy(), pos_c, ori_c)
            if w_c < best_w:
                best_w, best_q, best_R, best_p = w_c, q_cand.copy(), Rc, pc
                best_pos, best_ori = pos_c, ori_c
            if pos_c <= cfg.pos_tol and ori_c <= cfg.ori_tol:
                return IkResult(
                    joints=q_cand.copy(), achieved=Pose(pc, quat_from_matrix(Rc)),
                    pos_err=pos_c, ori_err=ori_c, status=EXACT,
                    iterations=total_iters, elapsed=time.perf_counter() - start,
                    pos_tol=cfg.pos_tol, ori_tol=cfg.ori_tol)

            if w_c < w:
                # accept: move, refresh Jacobian, relax damping
                q, p, R, pos_err, ori_err, w = q_cand, pc, Rc, pos_c, ori_c, w_c
                J[:3] = np.cross(Zc, pc[None, :] - Pc).T
                J[3:] = Zc.T
                lam = max(lam * 0.5, _LAMBDA_MIN)
            else:
                # reject: keep the current point, raise damping and retry
                lam = min(lam * 2.0, _LAMBDA_MAX)

            # stagnation cutoff keeps hopeless attempts cheap
            window_best = min(window_best, w_c)
            if it > 0 and it % _STAGNATION_WINDOW == 0:
                if window_best > window_start_best * _STAGNATION_FACTOR:
                    break
                window_start_best = window_best

    return _best_fit(best_q, best_p, best_R, best_pos, best_ori,
                     total_iters, start, cfg)


def _best_fit(best_q, best_p, best_R, best_pos, best_ori, iters, start, cfg) -> IkResult:
    status = EXACT if (best_pos <= cfg.pos_tol and best_ori <= cfg.ori_tol) else BEST_FIT
    return IkResult(
        joints=best_q.copy(),
        achieved=Pose(best_p, quat_from_matrix(best_R)),
        pos_err=best_pos, ori_err=best_ori, status=status, iterations=iters,
        elapsed=time.perf_counter() - start,
        pos_tol=cfg.pos_tol, ori_tol=cfg.ori_tol)


def solve_two_stage(chain: KinematicChain, target: Pose, seed,
                    loose: IkConfig, tight: IkConfig) -> IkResult:
    """Loose-tolerance solve, then tight refinement seeded by stage 1.

    If stage 2 meets the tight tolerances its result is returned; otherwise
    the stage-1 result is returned so a configuration is always available.
    """
    if loose.pos_tol < tight.pos_tol or loose.ori_tol < tight.ori_tol:
        raise ValueError("loose tolerances must be >= tight tolerances")
    start = time.perf_counter()
    r1 = solve(chain, target, seed, loose)
    r1 = replace(r1, stage=1, elapsed=time.perf_counter() - start)
    if not r1.exact:
        return r1
    r2 = solve(chain, target, r1.joints, tight)
    if r2.exact:
        return replace(r2, stage=2, elapsed=time.perf_counter() - start)
    return replace(r1, elapsed=time.perf_counter() - start)


def track(chain: KinematicChain, targets, loose: IkConfig, tight: IkConfig,
          seed=None) -> list[IkResult]:
    """Solve a pose sequence, seeding each solve with the previous result.

    Every target yields a result (best-fit for unreachable poses), so the
    output length always equals the input length and no command is skipped.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("target sequence is empty")
    q = np.zeros(len(chain)) if seed is None else np.asarray(seed, dtype=float)
    results = []
    for target in targets:
        r = solve_two_stage(chain, target, q, loose, tight)
        results.append(r)
        q = r.joints
    return results
