"""Monodromy matrices, Floquet multipliers and periodic-orbit location.

The monodromy of a fire-period orbit is ``J(s_pre) @ Phi(tau)`` where ``Phi``
solves the variational equation ``Phi' = DF(orbit(t)) Phi`` along the orbit
(integrated jointly with the orbit by the fourth-order reference stepper) and
``J`` is the linearization of the fire map at the pre-fire state.  The orbit
is re-integrated on every call rather than interpolated from stored samples.

The spectral radius of the monodromy decides local stability of the savanna
orbit; the matching analytic multiplier formulas for the grassland orbit are
provided for cross-validation.  Note the analytic tree-block route evaluates
``exp`` of the period-averaged Jacobian, which is exact only for commuting
families; the variational monodromy computed here is the primary arbiter and
the two are reported side by side (see ``grassland_agreement``).
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import (
    ModelParams,
    NumericalError,
    VegState,
    _impulse,
    _rhs,
    fire_intensity,
    fire_intensity_slope,
    require_valid,
)
from .thresholds import ThresholdError, compute_thresholds, grassland_orbit_end

__all__ = [
    "FloquetReport", "OrbitResult", "jacobian", "jump_jacobian", "monodromy",
    "monodromy_full", "locate_savanna_orbit", "rho_tg", "cubic_eigenvalues",
    "grassland_multipliers_analytic", "grassland_agreement", "floquet_report",
]

DEFAULT_STEPS = 2048


# ---------------------------------------------------------------------------
# jacobians
# ---------------------------------------------------------------------------

def jacobian(s: VegState, p: ModelParams) -> np.ndarray:
    """Exact Jacobian of the flow at ``s``."""
    ts, tns, g = s.t_s, s.t_ns, s.g
    a1 = (p.gamma_S * (1.0 - (2.0 * ts + tns) / p.K_T)
          - p.gamma_NS / p.K_T * tns - p.sigma_G * g - p.mu_S - p.omega_S)
    a2 = (p.gamma_NS * (1.0 - (ts + 2.0 * tns) / p.K_T)
          - p.gamma_S / p.K_T * ts)
    a3 = p.gamma_G * (1.0 - 2.0 * g / p.K_G) - p.sigma_NS * tns - p.mu_G
    return np.array([
        [a1, a2, -p.sigma_G * ts],
        [p.omega_S, -p.mu_NS, 0.0],
        [0.0, -p.sigma_NS * g, a3],
    ])


def jump_jacobian(s: VegState, p: ModelParams) -> np.ndarray:
    """Linearization of the fire map at the pre-fire state ``s``.

    Includes the cross term d(T_S+)/dG = -eta_S w'(G) T_S from the
    grass-dependent burn fraction.
    """
    w = fire_intensity(s.g, p.fire)
    wp = fire_intensity_slope(s.g, p.fire)
    return np.array([
        [1.0 - p.eta_S * w, 0.0, -p.eta_S * wp * s.t_s],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0 - p.eta_G],
    ])


# ---------------------------------------------------------------------------
# flow + variational integration (RK4 on the augmented system)
# ---------------------------------------------------------------------------

def _df_floats(ts, tns, g, p):
    a1 = (p.gamma_S * (1.0 - (2.0 * ts + tns) / p.K_T)
          - p.gamma_NS / p.K_T * tns - p.sigma_G * g - p.mu_S - p.omega_S)
    a2 = (p.gamma_NS * (1.0 - (ts + 2.0 * tns) / p.K_T)
          - p.gamma_S / p.K_T * ts)
    a3 = p.gamma_G * (1.0 - 2.0 * g / p.K_G) - p.sigma_NS * tns - p.mu_G
    return np.array([[a1, a2, -p.sigma_G * ts],
                     [p.omega_S, -p.mu_NS, 0.0],
                     [0.0, -p.sigma_NS * g, a3]])


def _rk4(ts, tns, g, p, h):
    a1, b1, c1 = _rhs(ts, tns, g, p)
    a2, b2, c2 = _rhs(ts + 0.5 * h * a1, tns + 0.5 * h * b1, g + 0.5 * h * c1, p)
    a3, b3, c3 = _rhs(ts + 0.5 * h * a2, tns + 0.5 * h * b2, g + 0.5 * h * c2, p)
    a4, b4, c4 = _rhs(ts + h * a3, tns + h * b3, g + h * c3, p)
    sixth = h / 6.0
    return (ts + sixth * (a1 + 2.0 * (a2 + a3) + a4),
            tns + sixth * (b1 + 2.0 * (b2 + b3) + b4),
            g + sixth * (c1 + 2.0 * (c2 + c3) + c4))


def _flow_variational(p: ModelParams, anchor: VegState, n: int):
    """Returns (pre-fire state, Phi(tau), integral of trace DF along orbit)."""
    h = p.tau / n
    s = np.array([anchor.t_s, anchor.t_ns, anchor.g])
    phi = np.eye(3)
    q = 0.0

    def rhs(sv, pv, qv):
        del qv
        df = _df_floats(sv[0], sv[1], sv[2], p)
        return np.array(_rhs(sv[0], sv[1], sv[2], p)), df @ pv, np.trace(df)

    for _ in range(n):
        k1s, k1p, k1q = rhs(s, phi, q)
        k2s, k2p, k2q = rhs(s + 0.5 * h * k1s, phi + 0.5 * h * k1p, q + 0.5 * h * k1q)
        k3s, k3p, k3q = rhs(s + 0.5 * h * k2s, phi + 0.5 * h * k2p, q + 0.5 * h * k2q)
        k4s, k4p, k4q = rhs(s + h * k3s, phi + h * k3p, q + h * k3q)
        s = s + h / 6.0 * (k1s + 2.0 * (k2s + k3s) + k4s)
        phi = phi + h / 6.0 * (k1p + 2.0 * (k2p + k3p) + k4p)
        q = q + h / 6.0 * (k1q + 2.0 * (k2q + k3q) + k4q)
        if not np.all(np.isfinite(s)):
            raise NumericalError("orbit escaped during variational integration")
    pre = VegState(max(float(s[0]), 0.0), max(float(s[1]), 0.0), max(float(s[2]), 0.0))
    return pre, phi, q


@dataclass(frozen=True)
class MonodromyResult:
    matrix: np.ndarray
    pre_fire_state: VegState
    fundamental: np.ndarray       # Phi(tau), flow part only
    trace_integral: float         # integral of trace DF over one period


def monodromy_full(p: ModelParams, anchor: VegState,
                   n: int = DEFAULT_STEPS) -> MonodromyResult:
    require_valid(p)
    pre, phi, q = _flow_variational(p, anchor, n)
    m = jump_jacobian(pre, p) @ phi
    return MonodromyResult(matrix=m, pre_fire_state=pre, fundamental=phi,
                           trace_integral=q)


def monodromy(p: ModelParams, anchor: VegState, n: int = DEFAULT_STEPS) -> np.ndarray:
    """Monodromy matrix of the period map anchored at the post-fire state."""
    return monodromy_full(p, anchor, n).matrix


# ---------------------------------------------------------------------------
# 3x3 eigenvalues via the characteristic cubic
# ---------------------------------------------------------------------------

def _cubic_roots(c2: float, c1: float, c0: float) -> list[complex]:
    """Roots of x^3 + c2 x^2 + c1 x + c0 by the trigonometric/Cardano form."""
    shift = c2 / 3.0
    pp = c1 - c2 * c2 / 3.0
    qq = 2.0 * c2 ** 3 / 27.0 - c2 * c1 / 3.0 + c0
    disc = (qq / 2.0) ** 2 + (pp / 3.0) ** 3
    if abs(pp) < 1e-14 and abs(qq) < 1e-14:
        roots = [0.0 + 0.0j] * 3
    elif disc > 0.0:
        u = -qq / 2.0 + math.sqrt(disc)
        v = -qq / 2.0 - math.sqrt(disc)
        cu = math.copysign(abs(u) ** (1.0 / 3.0), u)
        cv = math.copysign(abs(v) ** (1.0 / 3.0), v)
        y0 = cu + cv
        # conjugate pair from the quadratic factor y^2 + y0 y + (y0^2 + pp)
        re = -y0 / 2.0
        im = math.sqrt(max(0.0, 3.0 * y0 * y0 / 4.0 + pp))
        roots = [complex(y0), complex(re, im), complex(re, -im)]
    else:
        # three real roots: trigonometric form avoids complex cube roots
        r = math.sqrt(-pp / 3.0)
        arg = max(-1.0, min(1.0, 3.0 * qq / (2.0 * pp * r) if pp != 0 else 0.0))
        theta = math.acos(arg)
        roots = [complex(2.0 * r * math.cos((theta - 2.0 * math.pi * k) / 3.0))
                 for k in range(3)]
    return [z - shift for z in roots]


def _polish_root(z: complex, c2: float, c1: float, c0: float) -> complex:
    """Newton polish that only accepts steps reducing |p(z)|.

    Near a multiple root both p and p' are rounding noise and a raw Newton
    step can throw an exact root far off; the descent guard rejects that.
    """
    def val(x):
        return ((x + c2) * x + c1) * x + c0

    fz = val(z)
    for _ in range(8):
        if fz == 0:
            break
        df = (3.0 * z + 2.0 * c2) * z + c1
        if df == 0:
            break
        step = fz / df
        cand = z - step
        fc = val(cand)
        if abs(fc) >= abs(fz):
            break
        z, fz = cand, fc
        if abs(step) < 1e-16 * max(1.0, abs(z)):
            break
    return z


def _eig_residual(m: np.ndarray, lam: complex) -> float:
    """Residual ||M v - lam v|| / ||v|| with v from the adjugate of M - lam I."""
    a = m.astype(complex) - lam * np.eye(3)
    candidates = [np.cross(a[0], a[1]), np.cross(a[0], a[2]), np.cross(a[1], a[2])]
    v = max(candidates, key=lambda c: np.linalg.norm(c))
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0  # doubly degenerate eigenvalue: any vector in the plane works
    v = v / nv
    return float(np.linalg.norm(m.astype(complex) @ v - lam * v))


def cubic_eigenvalues(m: np.ndarray, residual_tol: float = 1e-12) -> np.ndarray:
    """Eigenvalues of a real 3x3 matrix from its characteristic cubic.

    Closed-form roots are Newton-polished; if the worst eigenpair residual
    (relative to ||M||) still exceeds ``residual_tol`` the best root is
    deflated and the remaining quadratic re-solved.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError("expected a 3x3 matrix")
    c2 = -float(np.trace(m))
    c1 = 0.5 * (np.trace(m) ** 2 - np.trace(m @ m))
    c0 = -float(np.linalg.det(m))
    roots = [_polish_root(z, c2, c1, c0) for z in _cubic_roots(c2, c1, c0)]

    scale = max(1.0, float(np.linalg.norm(m)))
    if max(_eig_residual(m, z) for z in roots) / scale > residual_tol:
        best = min(roots, key=lambda z: abs(((z + c2) * z + c1) * z + c0))
        b1 = c2 + best
        b0 = c1 + best * b1
        disc = b1 * b1 - 4.0 * b0
        sq = cmath.sqrt(disc)
        roots = [best, (-b1 + sq) / 2.0, (-b1 - sq) / 2.0]
        roots = [_polish_root(z, c2, c1, c0) for z in roots]
    return np.array(sorted(roots, key=lambda z: (-abs(z), -z.real, -z.imag)))


# ---------------------------------------------------------------------------
# periodic-orbit location
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitResult:
    anchor: VegState
    converged: bool
    residual: float
    iterations: int
    newton_iterations: int
    boundary: str | None          # "desert"/"forest"/"grassland" if not interior

    @property
    def interior(self) -> bool:
        return self.boundary is None


def _period_map(p: ModelParams, x: np.ndarray, n: int) -> np.ndarray:
    ts, tns, g = x
    h = p.tau / n
    for _ in range(n):
        ts, tns, g = _rk4(ts, tns, g, p, h)
    if not (math.isfinite(ts) and math.isfinite(tns) and math.isfinite(g)):
        raise NumericalError("period map diverged")
    ts, tns, g = _impulse(max(ts, 0.0), max(tns, 0.0), max(g, 0.0), p)
    return np.array([ts, tns, g])


def _boundary_label(x: np.ndarray, p: ModelParams, rel: float = 1e-6) -> str | None:
    tree_zero = x[0] < rel * p.K_T and x[1] < rel * p.K_T
    grass_zero = x[2] < rel * p.K_G
    if tree_zero and grass_zero:
        return "desert"
    if tree_zero:
        return "grassland"
    if grass_zero:
        return "forest"
    return None


def locate_savanna_orbit(p: ModelParams, guess: VegState, tol: float = 1e-10,
                         max_iter: int = 600, n: int = DEFAULT_STEPS) -> OrbitResult:
    """Find a fixed point of the period map (flow over one period, then fire).

    Fixed-point iteration runs first; if it stalls, Newton steps using
    ``I - M`` (M = monodromy at the current point) polish the anchor.
    Convergence to a boundary solution is reported by name, not as an error.
    """
    require_valid(p)
    rep = compute_thresholds(p)
    if not rep.savanna_existence_condition:
        warnings.warn(
            "savanna existence condition fails (needs rho_g0 > 1, and r_g0 > 1"
            " when mu_G > 0); attempting orbit location anyway",
            stacklevel=2,
        )

    x = guess.as_array().astype(float)
    residual = math.inf
    newton_used = 0
    prev_residual = math.inf
    for it in range(1, max_iter + 1):
        px = _period_map(p, x, n)
        residual = float(np.linalg.norm(px - x))
        x = px
        if residual < tol:
            break
        stalled = residual > 0.95 * prev_residual and it >= 10
        prev_residual = residual
        if stalled and residual < 1e-2:
            # Newton refinement on P(x) - x = 0 with Jacobian M - I
            for _ in range(12):
                newton_used += 1
                m = monodromy(p, VegState.from_array(np.maximum(x, 0.0)), n)
                fx = _period_map(p, x, n) - x
                residual = float(np.linalg.norm(fx))
                if residual < tol:
                    break
                try:
                    delta = np.linalg.solve(np.eye(3) - m, fx)
                except np.linalg.LinAlgError:
                    break
                scale = 1.0
                while scale > 1e-4 and np.any(x + scale * delta < -1e-12):
                    scale *= 0.5
                x = np.maximum(x + scale * delta, 0.0)
            if residual < tol:
                break
    converged = residual < tol
    x = np.maximum(x, 0.0)
    return OrbitResult(
        anchor=VegState.from_array(x),
        converged=converged,
        residual=residual,
        iterations=it,
        newton_iterations=newton_used,
        boundary=_boundary_label(x, p),
    )


def rho_tg(p: ModelParams, anchor: VegState, n: int = DEFAULT_STEPS) -> float:
    """Spectral radius of the monodromy at ``anchor`` (< 1: locally stable)."""
    eigs = cubic_eigenvalues(monodromy(p, anchor, n))
    return float(np.max(np.abs(eigs)))


# ---------------------------------------------------------------------------
# analytic grassland multipliers and the agreement audit
# ---------------------------------------------------------------------------

def grassland_multipliers_analytic(p: ModelParams) -> tuple[complex, complex, float]:
    """Analytic multipliers of the grassland orbit from the averaged tree
    block: xi1 pairs the fire shrink factor with the larger-real-part root,
    xi2 is the bare second root, xi3 is the exact grass-direction multiplier.
    """
    rep = compute_thresholds(p)
    if not rep.grassland_exists:
        raise _grassland_missing(rep)
    shrink = 1.0 - p.eta_S * fire_intensity(grassland_orbit_end(p), p.fire)
    xi1 = shrink * cmath.exp(rep.lambda1)
    xi2 = cmath.exp(rep.lambda2)
    rate = p.gamma_G - p.mu_G
    xi3 = math.exp(-rate * p.tau) / (1.0 - p.eta_G)
    return xi1, xi2, xi3


def _grassland_missing(rep) -> ThresholdError:
    if rep.r_g0 is not None and rep.r_g0 <= 1.0:
        return ThresholdError(f"grassland orbit requires r_g0 > 1; got {rep.r_g0:.6g}")
    return ThresholdError(f"grassland orbit requires rho_g0 > 1; got {rep.rho_g0:.6g}")


def grassland_agreement(p: ModelParams, n: int = DEFAULT_STEPS) -> dict:
    """Compare the analytic tree-block stability verdict with the variational
    monodromy at the grassland anchor.  Disagreements are possible because the
    analytic route exponentiates a period average; callers log them.
    """
    rep = compute_thresholds(p)
    if not rep.grassland_exists:
        raise _grassland_missing(rep)
    anchor = VegState(0.0, 0.0, (1.0 - p.eta_G) * grassland_orbit_end(p))
    m = monodromy(p, anchor, n)
    eigs = cubic_eigenvalues(m)
    rate = p.gamma_G - p.mu_G
    xi3 = math.exp(-rate * p.tau) / (1.0 - p.eta_G)
    # the grass direction is exact in both routes; drop it from the tree pair
    tree_mods = sorted(abs(z) for z in eigs)
    tree_mods.remove(min(tree_mods, key=lambda v: abs(v - xi3)))
    numeric = max(tree_mods)
    return {
        "rho_t_analytic": rep.rho_t,
        "tree_multiplier_numeric": numeric,
        "xi3": xi3,
        "agree": (rep.rho_t - 1.0) * (numeric - 1.0) > 0.0
        or (abs(rep.rho_t - 1.0) < 1e-9 and abs(numeric - 1.0) < 1e-9),
    }


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FloquetReport:
    anchor: VegState
    monodromy: np.ndarray
    multipliers: np.ndarray
    rho_tg: float
    verdict: str
    residual: float
    boundary: str | None
    xi: tuple[complex, complex, float] | None
    diagnostics: dict

    CSV_FIELDS = (
        "anchor_t_s", "anchor_t_ns", "anchor_g",
        "m11", "m12", "m13", "m21", "m22", "m23", "m31", "m32", "m33",
        "mult1_mod", "mult2_mod", "mult3_mod", "rho_tg", "verdict",
    )

    def to_csv(self) -> str:
        mods = sorted((abs(z) for z in self.multipliers), reverse=True)
        vals = [self.anchor.t_s, self.anchor.t_ns, self.anchor.g]
        vals += [self.monodromy[i, j] for i in range(3) for j in range(3)]
        vals += mods + [self.rho_tg]
        row = ",".join(f"{v:.17g}" for v in vals) + f",{self.verdict}"
        return ",".join(self.CSV_FIELDS) + "\n" + row + "\n"


def _verdict(rho: float) -> str:
    if abs(rho - 1.0) < 1e-9:
        return "marginal"
    return "stable" if rho < 1.0 else "unstable"


def floquet_report(p: ModelParams, guess: VegState | None = None,
                   n: int = DEFAULT_STEPS) -> FloquetReport:
    """Locate an orbit from ``guess`` and package monodromy, multipliers and
    the stability verdict; at a grassland anchor the analytic multipliers are
    attached for cross-checking."""
    if guess is None:
        guess = VegState(0.1 * p.K_T, 0.1 * p.K_T, 0.5 * p.K_G)
    orbit = locate_savanna_orbit(p, guess, n=n)
    m = monodromy(p, orbit.anchor, n)
    eigs = cubic_eigenvalues(m)
    rho = float(np.max(np.abs(eigs)))
    xi = None
    diagnostics: dict = {
        "converged": orbit.converged,
        "iterations": orbit.iterations,
        "newton_iterations": orbit.newton_iterations,
    }
    if orbit.boundary == "grassland":
        try:
            xi = grassland_multipliers_analytic(p)
            diagnostics["agreement"] = grassland_agreement(p, n)
        except ValueError:
            pass
    return FloquetReport(
        anchor=orbit.anchor, monodromy=m, multipliers=eigs, rho_tg=rho,
        verdict=_verdict(rho), residual=orbit.residual, boundary=orbit.boundary,
        xi=xi, diagnostics=diagnostics,
    )
