"""Pure-numpy fallback for the optimizer hot path.

Implements the same API and the same quasi-Newton algorithm as the compiled
core so that results agree between the two builds; only the speed differs.
"""

from __future__ import annotations

import math

import numpy as np

ZERO_PROB = 1e-14
TIE_EPS = 1e-12


def _unitary_rows(theta: float, phi: float) -> np.ndarray:
    ct, st = math.cos(theta), math.sin(theta)
    ep = complex(math.cos(phi), math.sin(phi))
    em = ep.conjugate()
    return np.array([[ct * ep, st * em], [-st * ep, ct * em]])


def numu_cost(theta: float, phi: float, o: np.ndarray, t: np.ndarray) -> float:
    """Negated post-channel non-unitarity from overlaps and the trace tensor."""
    u = _unitary_rows(theta, phi)
    total = 0.0
    for j in range(2):
        uj = u[j]
        p = 0.0
        for k in range(2):
            for l in range(2):
                p += (uj[k].conjugate() * uj[l] * o[k, l]).real
        if p < ZERO_PROB:
            return math.inf
        tr4 = 0.0
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        tr4 += (
                            uj[a].conjugate() * uj[b] * uj[c].conjugate() * uj[d]
                            * t[a, b, c, d]
                        ).real
        total += tr4 / p
    return 2.0 - total


def _entropy_of_gram(g: np.ndarray, p: float) -> float:
    ev = np.linalg.eigvalsh(g)
    ev = ev[ev > 1e-18] / p
    if ev.size == 0:
        return 0.0
    return float(-(ev * np.log2(ev)).sum())


def geo2_cost_from_grams(
    theta: float, phi: float,
    o: np.ndarray, hl: np.ndarray, hr: np.ndarray, mode: int,
) -> float:
    """Probability-weighted post-channel entropy from precomputed Gram blocks.

    mode: 0 = left split only, 1 = right split only, 2 = average of both.
    """
    u = _unitary_rows(theta, phi)
    total = 0.0
    for j in range(2):
        uj = u[j]
        p = 0.0
        for k in range(2):
            for l in range(2):
                p += (uj[k].conjugate() * uj[l] * o[k, l]).real
        if p < ZERO_PROB:
            continue
        s_parts = []
        if mode in (0, 2):
            g = sum(
                uj[k].conjugate() * uj[l] * hl[k, l]
                for k in range(2) for l in range(2)
            )
            s_parts.append(_entropy_of_gram(g, p))
        if mode in (1, 2):
            g = sum(
                uj[k] * uj[l].conjugate() * hr[k, l]
                for k in range(2) for l in range(2)
            )
            s_parts.append(_entropy_of_gram(g, p))
        total += p * (sum(s_parts) / len(s_parts))
    return total


def _central_grad(f, x0: float, x1: float, h: float) -> tuple[float, float, bool]:
    fpp = f(x0 + h, x1)
    fmm = f(x0 - h, x1)
    gpp = f(x0, x1 + h)
    gmm = f(x0, x1 - h)
    if not all(map(math.isfinite, (fpp, fmm, gpp, gmm))):
        return 0.0, 0.0, False
    return (fpp - fmm) / (2.0 * h), (gpp - gmm) / (2.0 * h), True


def minimize_2d(f, seeds, max_iters: int, grad_step: float, tol: float):
    """Multi-start BFGS with central-difference gradients on a 2-D cost.

    Ties between starts are broken toward the earlier seed (strict
    improvement by more than TIE_EPS is required to replace the incumbent),
    so a flat cost surface returns the first grid seed.  Returns
    (theta, phi, cost, n_converged_starts).
    """
    best_x = (float(seeds[0][0]), float(seeds[0][1]))
    best_f = math.inf
    n_conv = 0
    for t0, p0 in seeds:
        x0, x1 = float(t0), float(p0)
        fx = f(x0, x1)
        converged = False
        if math.isfinite(fx):
            g0, g1, ok = _central_grad(f, x0, x1, grad_step)
            h00, h01, h11 = 1.0, 0.0, 1.0
            for _ in range(max_iters if ok else 0):
                d0 = -(h00 * g0 + h01 * g1)
                d1 = -(h01 * g0 + h11 * g1)
                gd = g0 * d0 + g1 * d1
                if gd > -1e-18:
                    d0, d1 = -g0, -g1
                    gd = -(g0 * g0 + g1 * g1)
                if -gd < 1e-18:
                    converged = True
                    break
                step = 1.0
                accepted = False
                for _ in range(40):
                    y0, y1 = x0 + step * d0, x1 + step * d1
                    fy = f(y0, y1)
                    if math.isfinite(fy) and fy <= fx + 1e-4 * step * gd:
                        accepted = True
                        break
                    step *= 0.5
                if not accepted:
                    converged = True
                    break
                gy0, gy1, ok = _central_grad(f, y0, y1, grad_step)
                if not ok:
                    x0, x1, fx = y0, y1, fy
                    break
                s0, s1 = y0 - x0, y1 - x1
                dg0, dg1 = gy0 - g0, gy1 - g1
                drop = fx - fy
                x0, x1, fx, g0, g1 = y0, y1, fy, gy0, gy1
                if drop <= tol:
                    converged = True
                    break
                sy = s0 * dg0 + s1 * dg1
                if sy > 1e-12:
                    rho = 1.0 / sy
                    # H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
                    a00 = 1.0 - rho * s0 * dg0
                    a01 = -rho * s0 * dg1
                    a10 = -rho * s1 * dg0
                    a11 = 1.0 - rho * s1 * dg1
                    b00 = a00 * h00 + a01 * h01
                    b01 = a00 * h01 + a01 * h11
                    b10 = a10 * h00 + a11 * h01
                    b11 = a10 * h01 + a11 * h11
                    h00 = b00 * a00 + b01 * a01 + rho * s0 * s0
                    h01 = b00 * a10 + b01 * a11 + rho * s0 * s1
                    h11 = b10 * a10 + b11 * a11 + rho * s1 * s1
        if converged:
            n_conv += 1
        if fx < best_f - TIE_EPS:
            best_x, best_f = (x0, x1), fx
    return best_x[0], best_x[1], best_f, n_conv


def numu_select_raw(o, t, seeds, max_iters, grad_step, tol):
    return minimize_2d(
        lambda th, ph: numu_cost(th, ph, o, t), seeds, max_iters, grad_step, tol
    )


def geo2_select_raw(o, hl, hr, mode, seeds, max_iters, grad_step, tol):
    return minimize_2d(
        lambda th, ph: geo2_cost_from_grams(th, ph, o, hl, hr, mode),
        seeds, max_iters, grad_step, tol,
    )
