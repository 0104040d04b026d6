"""Preconditioned conjugate gradients and spectral estimates."""
import time
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["SolveReport", "NotSPDOperatorError", "pcg", "power_spectral_radius"]

TIMING_KEYS = ("T_ts", "T_cs", "T_sm", "T_pl", "T_rap", "T_p", "T_s", "T_t")


class NotSPDOperatorError(ArithmeticError):
    pass


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    true_residual: float = float("nan")
    timings: dict = field(default_factory=lambda: dict.fromkeys(TIMING_KEYS, 0.0))
    complexities: tuple = (1.0, 1.0, 0.0)
    n_levels: int = 1
    seed: int = None
    threads: int = 1

    def as_dict(self):
        d = asdict(self)
        d["residual_history"] = [float(v) for v in self.residual_history]
        c_gd, c_op, c_fs = self.complexities
        d["complexities"] = {"C_gd": c_gd, "C_op": c_op, "C_fs": c_fs}
        return d


def _as_callable(op):
    if op is None:
        return lambda r: r.copy()
    if callable(op):
        return op
    return lambda r: op @ r


def pcg(A, b, precond=None, rel_tol=1e-8, max_it=1000, x0=None):
    """Conjugate gradients preconditioned by the SPD operator ``precond``.

    Stops when ``|r_k|_2 <= rel_tol |b|_2``. ``residual_history`` holds the
    recursive residual norm after every iteration, so its length equals the
    iteration count.

    Returns
    -------
    x : ndarray
    report : SolveReport
    """
    t0 = time.perf_counter()
    M = _as_callable(precond)
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    target = rel_tol * bnorm
    history = []
    rnorm = np.linalg.norm(r)
    it = 0
    if rnorm > target:
        z = M(r)
        p = z.copy()
        rz = r @ z
        while it < max_it:
            q = A @ p
            pq = p @ q
            if not pq > 0.0:
                raise NotSPDOperatorError(f"operator not SPD: p^T A p = {pq:.3e} at iteration {it}")
            alpha = rz / pq
            x += alpha * p
            r -= alpha * q
            it += 1
            rnorm = np.linalg.norm(r)
            history.append(rnorm)
            if rnorm <= target:
                break
            z = M(r)
            rz_new = r @ z
            if not rz_new > 0.0:
                raise NotSPDOperatorError(f"preconditioner not SPD: r^T z = {rz_new:.3e}")
            p = z + (rz_new / rz) * p
            rz = rz_new
    true_res = np.linalg.norm(b - A @ x)
    report = SolveReport(
        iterations=it,
        residual_history=history,
        converged=bool(rnorm <= target and true_res <= 10.0 * target),
        true_residual=float(true_res),
    )
    report.timings["T_s"] = time.perf_counter() - t0
    return x, report


def power_spectral_radius(op, n, steps=200, seed=1234):
    """Power-iteration estimate of the spectral radius of a linear operator."""
    apply = _as_callable(op)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(steps):
        y = apply(x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        est = norm
        x = y / norm
    return float(est)
