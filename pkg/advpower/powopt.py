# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

"""Max-product SINR power allocation under per-cell sum-power budgets.

With x = log(rho) the objective sum_jk log(gamma_jk) is concave and the per-cell
budget log(sum_k exp(x_jk)) <= log(Pmax) is convex, so the problem is solved by
projected gradient ascent in the log domain.
"""

from dataclasses import dataclass
import warnings

import numpy as np
from scipy.special import lambertw

from .utils import InfeasibleInstanceError

# Lower bound on log-powers, keeps exp(x) away from exact zero.
_LOG_FLOOR = -80.0


@dataclass
class PowerAllocation:
    """Per-UE powers rho[j][k] in mW with solver metadata."""

    rho: np.ndarray
    objective: float
    iterations: int
    converged: bool


def equal_power(config):
    """Baseline allocation Pmax/K to every UE."""
    return np.full((config.n_cells, config.n_ues), config.p_max / config.n_ues)


def log_product_objective(gains, rho, config):
    """Sum of log SINRs in nats, -inf when any SINR is zero.

    Arguments:
        gains (GainTable): gain table of the snapshot
        rho (ndarray): (L, K) powers in mW
        config (NetworkConfig): network constants

    Returns:
        (float): objective value
    """
    rho = np.asarray(rho, dtype=np.float64)
    interference = np.einsum("li,lijk->jk", rho, gains.b) + config.noise_var
    gamma = rho * gains.a / interference
    if np.any(gamma <= 0):
        return -np.inf
    return float(np.sum(np.log(gamma)))


def _objective_and_gradient(x, a, b, noise_var):
    rho = np.exp(x)
    interference = np.einsum("li,lijk->jk", rho, b) + noise_var
    f = float(np.sum(x + np.log(a) - np.log(interference)))
    grad = 1.0 - rho * np.einsum("lijk,jk->li", b, 1.0 / interference)
    return f, grad


def _cell_sums(y, log_lam):
    return np.sum(np.exp(y - lambertw(np.exp(log_lam[:, None] + y)).real), axis=1)


def project_log_budget(y, p_max, rtol=1e-10, max_iter=200):
    """Euclidean projection of log-powers onto the per-cell budget set.

    For a cell over budget the projection is x_k = y_k - W(lam * exp(y_k)), with W the
    Lambert W function and lam > 0 chosen by bisection on log(lam) so that
    sum_k exp(x_k) hits Pmax from below within rtol * Pmax.

    Arguments:
        y (ndarray): (L, K) log-powers
        p_max (float): per-cell budget in mW
        rtol (float): relative tolerance on the cell sum
        max_iter (int): bisection cap

    Returns:
        (ndarray): projected log-powers, feasible in every cell
    """
    y = np.maximum(np.asarray(y, dtype=np.float64), _LOG_FLOOR)
    x = y.copy()
    over = np.exp(y).sum(axis=1) > p_max
    if not np.any(over):
        return x
    yo = y[over]

    # bracket: sums are decreasing in lam, lo infeasible, hi feasible
    hi = np.zeros(len(yo))
    while True:
        bad = _cell_sums(yo, hi) > p_max
        if not np.any(bad):
            break
        hi[bad] += 4.0
    lo = hi - 4.0
    while True:
        bad = _cell_sums(yo, lo) <= p_max
        if not np.any(bad):
            break
        lo[bad] -= 4.0

    for _ in range(max_iter):
        s_hi = _cell_sums(yo, hi)
        if np.all(p_max - s_hi <= rtol * p_max):
            break
        mid = (lo + hi) / 2
        s_mid = _cell_sums(yo, mid)
        feasible = s_mid <= p_max
        hi = np.where(feasible, mid, hi)
        lo = np.where(feasible, lo, mid)
        if np.all(hi - lo < 1e-15 * np.maximum(1.0, np.abs(hi))):
            break

    x[over] = yo - lambertw(np.exp(hi[:, None] + yo)).real
    return x


def maxprod_solve(gains, config, tol=1e-7, max_iter=10000, armijo=1e-4):
    """Maximize sum_jk log(gamma_jk) subject to sum_k rho_jk <= Pmax in every cell.

    Spectral projected gradient ascent in x = log(rho), started from equal powers.
    Each iteration projects a Barzilai-Borwein step onto the budget set and backtracks
    along the projected direction until the Armijo condition holds. Iteration stops
    when the projected gradient step ||P(x + g) - x|| falls below tol.

    Arguments:
        gains (GainTable): gain table of the snapshot
        config (NetworkConfig): network constants
        tol (float): stopping tolerance on the projected gradient step
        max_iter (int): iteration cap
        armijo (float): sufficient-increase constant of the line search

    Returns:
        (PowerAllocation): best iterate, flagged when not converged
    """
    a = gains.a
    if np.any(a <= 0):
        raise InfeasibleInstanceError(
            "Every UE needs a positive average channel gain, got a <= 0."
        )
    b = gains.b
    p_max = config.p_max

    x = np.log(equal_power(config))
    f, g = _objective_and_gradient(x, a, b, config.noise_var)
    best_x, best_f = x, f
    step = 1.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if np.linalg.norm(project_log_budget(x + g, p_max) - x) < tol:
            converged = True
            break

        d = project_log_budget(x + step * g, p_max) - x
        slope = float(np.sum(g * d))
        # floating point slack so steps at rounding level are still accepted
        slack = 64 * np.finfo(float).eps * max(1.0, abs(f))
        t = 1.0
        while True:
            x_new = x + t * d
            f_new, g_new = _objective_and_gradient(x_new, a, b, config.noise_var)
            if f_new >= f + armijo * t * slope - slack:
                break
            t *= 0.5
            if t < 1e-12:
                break
        if t < 1e-12:
            break

        s = x_new - x
        sy = float(np.sum(s * (g_new - g)))
        step = float(np.clip(np.sum(s * s) / -sy, 1e-8, 1e8)) if sy < 0 else 1e8
        x, f, g = x_new, f_new, g_new
        if f > best_f:
            best_x, best_f = x, f

    rho = np.exp(best_x)
    # enforce the budget against rounding in exp
    sums = rho.sum(axis=1, keepdims=True)
    rho = np.where(sums > p_max, rho * (p_max / sums), rho)
    if not converged:
        warnings.warn(
            f"maxprod_solve did not converge after {iterations} iterations; "
            "returning the best iterate.",
            RuntimeWarning,
        )
    return PowerAllocation(
        rho=rho,
        objective=log_product_objective(gains, rho, config),
        iterations=iterations,
        converged=converged,
    )


def maxprod_bruteforce(gains, config, grid_points, chunk_size=65536):
    """Exhaustive search of per-UE powers on the grid Pmax * {1..G} / G.

    All cells are searched jointly; only points within every cell budget are scored.

    Arguments:
        gains (GainTable): gain table of the snapshot
        config (NetworkConfig): network constants
        grid_points (int): G, grid levels per UE
        chunk_size (int): grid points scored per vectorized batch

    Returns:
        (PowerAllocation): best grid point
    """
    L, K = config.n_cells, config.n_ues
    n_vars = L * K
    if n_vars > 6:
        raise ValueError(
            f"Brute force is limited to L*K <= 6 power variables, got {n_vars}."
        )
    levels = config.p_max * np.arange(1, grid_points + 1) / grid_points
    total = grid_points**n_vars

    best_f, best_rho = -np.inf, None
    for start in range(0, total, chunk_size):
        flat = np.arange(start, min(start + chunk_size, total))
        idx = np.stack(np.unravel_index(flat, (grid_points,) * n_vars), axis=1)
        rho = levels[idx].reshape(-1, L, K)
        rho = rho[np.all(rho.sum(axis=2) <= config.p_max, axis=1)]
        if len(rho) == 0:
            continue
        interference = np.einsum("nli,lijk->njk", rho, gains.b) + config.noise_var
        f = np.sum(np.log(rho * gains.a / interference), axis=(1, 2))
        i = int(np.argmax(f))
        if f[i] > best_f:
            best_f, best_rho = float(f[i]), rho[i].copy()

    return PowerAllocation(
        rho=best_rho, objective=best_f, iterations=total, converged=True
    )
