"""Cycle-power optimization on the reduced (theta, l) dynamics.

The pattern is collapsed to the circular-orbit approximation: orientation
``psi(t)`` and winch speed ``l_dot(t)`` are the input functions, the azimuth
motion is free, and only the wind-window angle and tether length are
integrated.  Average cycle power

    P_bar = (rho C_R A / 2T) * integral l_dot(t) v_a(t)^2 dt

is maximized over piecewise-linear controls and the period T, subject to
periodic boundaries, the operational tether range (whose limits must be
reached), normalized winch-speed limits, and an orientation box.  The
winch-speed profile is pinned to one reel-out arc followed by one reel-in
arc (two roots per period).

Curve losses of real figure-eights are not modeled; the optimum is an upper
reference for the winch laws, not a flyable trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import InsufficientSamplesError
from .model import KiteParams, WindCondition


@dataclass(frozen=True)
class OptimizerConstraints:
    """Box and boundary constraints of the cycle optimization."""

    l_min: float = 130.0
    l_max: float = 270.0
    psi_max: float = 1.42
    alpha_limit_in: float = -0.5
    alpha_limit_out: float = 0.3
    theta_min: float = 0.05
    theta_max: float = 3.0
    t_min: float = 40.0
    t_max: float = 250.0
    periodicity_tol: float = 1e-6

    def __post_init__(self):
        if self.l_min >= self.l_max:
            raise ValueError("l_min must be below l_max")
        if not (self.alpha_limit_in < 0.0 < self.alpha_limit_out):
            raise ValueError("alpha limits must straddle zero")


@dataclass
class CycleDecision:
    """Piecewise-linear control profiles over one period.

    Node times are uniform on [0, T].  ``l_dot_nodes`` must describe one
    reel-out arc followed by one reel-in arc (exactly two roots per period).
    """

    psi_nodes: np.ndarray
    l_dot_nodes: np.ndarray
    T: float
    theta0: float

    @property
    def n(self) -> int:
        return len(self.psi_nodes)


@dataclass
class OptimalCycle:
    """Sampled reduced-cycle trajectory with its average power."""

    t: np.ndarray
    theta: np.ndarray
    l: np.ndarray
    psi: np.ndarray
    l_dot: np.ndarray
    v_a: np.ndarray
    force: np.ndarray
    power: np.ndarray
    p_bar: float
    p_loyd: float
    residual_theta: float
    residual_l: float
    iterations: int = 0
    converged: bool = True
    message: str = ""

    @property
    def ratio(self) -> float:
        return self.p_bar / self.p_loyd


def loyd_limit(wind: WindCondition, params: KiteParams) -> float:
    """Continuous-crosswind power bound P = (rho C_R A / 2)(4 E^2 / 27) v_w^3."""
    return (
        0.5
        * params.air_density
        * params.force_coefficient
        * params.area
        * (4.0 * params.glide_ratio**2 / 27.0)
        * wind.v_w**3
    )


def average_power(t: np.ndarray, l_dot: np.ndarray, v_a: np.ndarray, params: KiteParams) -> float:
    """Average mechanical power over one period, trapezoidal quadrature."""
    T = t[-1] - t[0]
    if T <= 0:
        raise ValueError("trajectory must span a positive duration")
    coef = 0.5 * params.air_density * params.force_coefficient * params.area
    return coef * float(np.trapezoid(l_dot * v_a * v_a, t)) / T


def _interp_matrix(n_nodes: int, s: np.ndarray) -> np.ndarray:
    """Weights W (n_nodes, len(s)) with u(s) = nodes @ W for piecewise-linear u."""
    x = s * (n_nodes - 1)
    j = np.minimum(x.astype(int), n_nodes - 2)
    w = x - j
    W = np.zeros((n_nodes, len(s)))
    cols = np.arange(len(s))
    W[j, cols] = 1.0 - w
    W[j + 1, cols] = w
    return W


class _ReducedDynamics:
    """Batched integrator of the reduced cycle in normalized time s = t/T."""

    def __init__(
        self,
        wind: WindCondition,
        params: KiteParams,
        n_nodes: int,
        substeps: int = 16,
        l0: float = 130.0,
    ):
        self.wind = wind
        self.params = params
        self.n_nodes = n_nodes
        self.substeps = substeps
        self.l0 = l0
        self.n_fine = (n_nodes - 1) * substeps + 1
        # controls are sampled on the half-step grid so every RK4 stage hits it
        self.s_half = np.linspace(0.0, 1.0, 2 * self.n_fine - 1)
        self.W = _interp_matrix(n_nodes, self.s_half)

    def _theta_dot(self, theta, l, psi, alpha):
        E = self.params.glide_ratio
        v_w = self.wind.v_w
        cp = np.cos(psi)
        return (v_w / l) * (E * np.cos(theta) * cp - np.sin(theta)) - (alpha * v_w / l) * E * cp

    def run(self, theta0, T, psi_nodes, alpha_nodes):
        """Integrate a batch of decisions.

        Args:
            theta0: (B,) initial window angles.
            T: (B,) periods.
            psi_nodes, alpha_nodes: (B, N) control nodes; alpha = l_dot / v_w.

        Returns:
            dict with theta/l/integrand at the fine grid plus P_bar per
            candidate.
        """
        psi_h = psi_nodes @ self.W        # (B, 2*n_fine-1)
        alpha_h = alpha_nodes @ self.W
        v_w = self.wind.v_w
        E = self.params.glide_ratio

        B = len(theta0)
        theta = theta0.astype(float).copy()
        l = np.full(B, self.l0)
        ds = 1.0 / (self.n_fine - 1)
        thetas = np.empty((B, self.n_fine))
        ls = np.empty((B, self.n_fine))
        thetas[:, 0] = theta
        ls[:, 0] = l

        for m in range(self.n_fine - 1):
            q = 2 * m
            psi_a, psi_b, psi_c = psi_h[:, q], psi_h[:, q + 1], psi_h[:, q + 2]
            al_a, al_b, al_c = alpha_h[:, q], alpha_h[:, q + 1], alpha_h[:, q + 2]
            h = ds * T

            k1 = self._theta_dot(theta, l, psi_a, al_a)
            l1 = al_a * v_w
            k2 = self._theta_dot(theta + 0.5 * h * k1, l + 0.5 * h * l1, psi_b, al_b)
            l2 = al_b * v_w
            k3 = self._theta_dot(theta + 0.5 * h * k2, l + 0.5 * h * l2, psi_b, al_b)
            l3 = l2
            k4 = self._theta_dot(theta + h * k3, l + h * l3, psi_c, al_c)
            l4 = al_c * v_w

            theta = theta + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            l = l + (h / 6.0) * (l1 + 2 * l2 + 2 * l3 + l4)
            thetas[:, m + 1] = theta
            ls[:, m + 1] = l

        alpha_f = alpha_h[:, ::2]
        v_a = E * v_w * (np.cos(thetas) - alpha_f)
        coef = 0.5 * self.params.air_density * self.params.force_coefficient * self.params.area
        integrand = coef * (alpha_f * v_w) * v_a * v_a
        s_fine = np.linspace(0.0, 1.0, self.n_fine)
        p_bar = np.trapezoid(integrand, s_fine, axis=1)  # (1/T) and T cancel
        return {
            "theta": thetas,
            "l": ls,
            "v_a": v_a,
            "alpha": alpha_f,
            "psi": psi_h[:, ::2],
            "power": integrand,
            "p_bar": p_bar,
            "s": s_fine,
        }


def simulate_reduced_cycle(
    decision: CycleDecision,
    constraints: OptimizerConstraints,
    wind: WindCondition,
    params: KiteParams,
    substeps: int = 16,
) -> OptimalCycle:
    """Integrate one cycle of the reduced dynamics for a given decision.

    Feasibility is reported, not enforced: the periodicity residuals land in
    the result and it is the caller's job to care.
    """
    dyn = _ReducedDynamics(wind, params, decision.n, substeps, l0=constraints.l_min)
    out = dyn.run(
        np.array([decision.theta0]),
        np.array([decision.T]),
        decision.psi_nodes[None, :],
        decision.l_dot_nodes[None, :] / wind.v_w,
    )
    t = out["s"] * decision.T
    theta = out["theta"][0]
    l = out["l"][0]
    v_a = out["v_a"][0]
    l_dot = out["alpha"][0] * wind.v_w
    force = 0.5 * params.air_density * params.force_coefficient * params.area * np.maximum(v_a, 0.0) ** 2
    return OptimalCycle(
        t=t,
        theta=theta,
        l=l,
        psi=out["psi"][0],
        l_dot=l_dot,
        v_a=v_a,
        force=force,
        power=l_dot * force,
        p_bar=float(out["p_bar"][0]),
        p_loyd=loyd_limit(wind, params),
        residual_theta=float(theta[-1] - theta[0]),
        residual_l=float(l[-1] - l[0]),
    )


class _Transcription:
    """Decision-vector packing, batched outputs and finite-difference jacobians.

    z = [theta0, T, psi_0..psi_{N-2}, alpha_1..alpha_{N-2}]; psi_{N-1} is
    tied to psi_0 (periodic) and the winch profile is pinned to zero at both
    ends with a sign switch at node ``k_switch`` (one reel-out arc, one
    reel-in arc).
    """

    def __init__(self, constraints, wind, params, n_nodes=40, substeps=8, switch_fraction=0.6):
        self.c = constraints
        self.wind = wind
        self.params = params
        self.n = n_nodes
        self.k = max(2, min(n_nodes - 3, round(switch_fraction * (n_nodes - 1))))
        self.dyn = _ReducedDynamics(wind, params, n_nodes, substeps, l0=constraints.l_min)
        self.dim = 2 + (n_nodes - 1) + (n_nodes - 2)
        self._cache_z = None
        self._cache_out = None
        self._cache_jac_z = None
        self._cache_jac = None
        # quadrature weights of the node trapezoid (links alpha nodes to reel length)
        w = np.full(n_nodes, 1.0 / (n_nodes - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        self.trapz_w = w

    def unpack(self, Z):
        Z = np.atleast_2d(Z)
        theta0 = Z[:, 0]
        T = Z[:, 1]
        psi = np.concatenate([Z[:, 2 : 2 + self.n - 1], Z[:, 2:3]], axis=1)
        alpha = np.zeros((Z.shape[0], self.n))
        alpha[:, 1 : self.n - 1] = Z[:, 2 + self.n - 1 :]
        return theta0, T, psi, alpha

    def pack(self, decision: CycleDecision) -> np.ndarray:
        alpha = decision.l_dot_nodes / self.wind.v_w
        return np.concatenate(
            [[decision.theta0, decision.T], decision.psi_nodes[: self.n - 1], alpha[1 : self.n - 1]]
        )

    def to_decision(self, z) -> CycleDecision:
        theta0, T, psi, alpha = self.unpack(z)
        return CycleDecision(
            psi_nodes=psi[0],
            l_dot_nodes=alpha[0] * self.wind.v_w,
            T=float(T[0]),
            theta0=float(theta0[0]),
        )

    def bounds(self):
        b = [(self.c.theta_min, self.c.theta_max), (self.c.t_min, self.c.t_max)]
        b += [(0.0, self.c.psi_max)] * (self.n - 1)
        for i in range(1, self.n - 1):
            if i < self.k:
                b.append((0.0, self.c.alpha_limit_out))
            else:
                b.append((self.c.alpha_limit_in, 0.0))
        return b

    def _outputs_batch(self, Z):
        theta0, T, psi, alpha = self.unpack(Z)
        out = self.dyn.run(theta0, T, psi, alpha)
        net_reel = alpha @ self.trapz_w                      # integral alpha ds
        out_reel = alpha[:, : self.k + 1] @ self.trapz_w[: self.k + 1]
        reach = T * self.wind.v_w * out_reel - (self.c.l_max - self.c.l_min)
        return {
            "p_bar": out["p_bar"],
            "theta_res": out["theta"][:, -1] - theta0,
            "net_reel": T * self.wind.v_w * net_reel,
            "reach": reach,
            "theta_lo": out["theta"].min(axis=1) - self.c.theta_min,
            "theta_hi": self.c.theta_max - out["theta"].max(axis=1),
        }

    def outputs(self, z):
        key = z.tobytes()
        if self._cache_z != key:
            self._cache_out = {k: v[0] for k, v in self._outputs_batch(z[None, :]).items()}
            self._cache_z = key
        return self._cache_out

    def jacobians(self, z):
        key = z.tobytes()
        if self._cache_jac_z != key:
            h = 1e-6 * np.maximum(1.0, np.abs(z))
            Z = np.repeat(z[None, :], 2 * self.dim, axis=0)
            idx = np.arange(self.dim)
            Z[idx, idx] += h
            Z[self.dim + idx, idx] -= h
            out = self._outputs_batch(Z)
            jac = {}
            for name, vals in out.items():
                jac[name] = (vals[: self.dim] - vals[self.dim :]) / (2.0 * h)
            self._cache_jac = jac
            self._cache_jac_z = key
        return self._cache_jac


def default_seed(
    constraints: OptimizerConstraints, wind: WindCondition, params: KiteParams, n_nodes: int = 40
) -> CycleDecision:
    """Feasible-ish starting decision: trapezoidal reel arcs, crosswind out, windward in."""
    n = n_nodes
    k = max(2, min(n - 3, round(0.6 * (n - 1))))
    s = np.linspace(0.0, 1.0, n)
    alpha = np.zeros(n)
    out_lvl = 0.8 * constraints.alpha_limit_out
    in_lvl = 0.8 * constraints.alpha_limit_in
    for i in range(1, n - 1):
        if i < k:
            ramp = min(1.0, (i / max(1, 0.15 * k)), (k - i) / max(1.0, 0.15 * k))
            alpha[i] = out_lvl * min(1.0, ramp)
        else:
            j = i - k
            span = n - 1 - k
            ramp = min(1.0, j / max(1.0, 0.2 * span), (span - j) / max(1.0, 0.2 * span))
            alpha[i] = in_lvl * min(1.0, ramp)

    # period such that the reel-out arc covers the tether range
    w = np.full(n, 1.0 / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    a_out = float(alpha[: k + 1] @ w[: k + 1])
    T = (constraints.l_max - constraints.l_min) / (wind.v_w * a_out)
    T = float(np.clip(T, constraints.t_min, constraints.t_max))
    # rescale the reel-in arc for a closed tether loop
    a_in = float(alpha[k:] @ w[k:])
    alpha[k:] *= -a_out / a_in if a_in != 0 else 1.0
    np.clip(alpha, constraints.alpha_limit_in, constraints.alpha_limit_out, out=alpha)

    psi = np.where(s < k / (n - 1.0), 0.9 * constraints.psi_max, 0.05 * constraints.psi_max)
    psi[-1] = psi[0]
    theta0 = 0.9
    return CycleDecision(
        psi_nodes=psi, l_dot_nodes=alpha * wind.v_w, T=T, theta0=theta0
    )


def optimize_cycle(
    constraints: OptimizerConstraints,
    wind: WindCondition,
    params: KiteParams,
    seed: CycleDecision | None = None,
    n_nodes: int = 40,
    substeps: int = 8,
    max_iterations: int = 250,
    switch_fraction: float = 0.6,
) -> OptimalCycle:
    """Maximize average cycle power over the reduced dynamics.

    Deterministic given the seed decision and settings (SLSQP on a direct
    single-shooting transcription, central-difference gradients evaluated in
    one vectorized batch).  On non-convergence the best feasible-ish point
    is returned with ``converged=False``.
    """
    if seed is None:
        seed = default_seed(constraints, wind, params, n_nodes)
    tr = _Transcription(
        constraints, wind, params, n_nodes=seed.n, substeps=substeps, switch_fraction=switch_fraction
    )
    z0 = tr.pack(seed)

    cons = [
        {
            "type": "eq",
            "fun": lambda z: np.array([tr.outputs(z)["theta_res"]]),
            "jac": lambda z: tr.jacobians(z)["theta_res"][None, :],
        },
        {
            "type": "eq",
            "fun": lambda z: np.array([tr.outputs(z)["net_reel"]]),
            "jac": lambda z: tr.jacobians(z)["net_reel"][None, :],
        },
        {
            "type": "eq",
            "fun": lambda z: np.array([tr.outputs(z)["reach"]]),
            "jac": lambda z: tr.jacobians(z)["reach"][None, :],
        },
        {
            "type": "ineq",
            "fun": lambda z: np.array([tr.outputs(z)["theta_lo"], tr.outputs(z)["theta_hi"]]),
            "jac": lambda z: np.stack(
                [tr.jacobians(z)["theta_lo"], tr.jacobians(z)["theta_hi"]]
            ),
        },
    ]
    scale = loyd_limit(wind, params)
    res = minimize(
        lambda z: -tr.outputs(z)["p_bar"] / scale,
        z0,
        jac=lambda z: -tr.jacobians(z)["p_bar"] / scale,
        bounds=tr.bounds(),
        constraints=cons,
        method="SLSQP",
        options={"maxiter": max_iterations, "ftol": 1e-10},
    )

    decision = tr.to_decision(res.x)
    cycle = simulate_reduced_cycle(decision, constraints, wind, params, substeps=16)
    cycle.iterations = int(res.nit)
    cycle.converged = bool(res.success)
    cycle.message = str(res.message)
    return cycle


CYCLE_CSV_COLUMNS = ["t", "theta", "l", "psi", "l_dot", "v_a", "F", "P"]


def write_cycle_csv(cycle: OptimalCycle, path) -> None:
    """Write the sampled cycle trajectory (fixed column set, 9 significant digits)."""
    cols = [cycle.t, cycle.theta, cycle.l, cycle.psi, cycle.l_dot, cycle.v_a, cycle.force, cycle.power]
    with open(path, "w") as fh:
        fh.write(",".join(CYCLE_CSV_COLUMNS) + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{v:.9g}" for v in row) + "\n")


def read_cycle_columns(path) -> dict[str, np.ndarray]:
    """Read a cycle or telemetry CSV into named columns (header required)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            parts = line.strip().split(",")
            rows.append([_maybe_float(p) for p in parts])
    data = list(zip(*rows)) if rows else [[] for _ in header]
    return {name: np.array(col) for name, col in zip(header, data)}


def _maybe_float(token: str):
    try:
        return float(token)
    except ValueError:
        return token


def cycle_summary(cycle: OptimalCycle) -> dict:
    """Summary record of an optimization result."""
    return {
        "P_bar": cycle.p_bar,
        "P_loyd": cycle.p_loyd,
        "ratio": cycle.ratio,
        "iterations": cycle.iterations,
        "converged": cycle.converged,
        "residual_theta": cycle.residual_theta,
        "residual_l": cycle.residual_l,
        "T": float(cycle.t[-1]),
    }


@dataclass
class WinchLawFit:
    """Linear fit of the normalized winch speed against the window angle."""

    theta0: float
    slope: float
    slope_lower: float
    slope_upper: float
    n_samples: int


def fit_winch_law(
    theta: np.ndarray,
    l_dot: np.ndarray,
    v_w: float,
    alpha_limit_in: float = -0.5,
    saturation_margin: float = 0.02,
) -> WinchLawFit:
    """Least-squares winch law from the reel-in branch of a cycle.

    Uses the samples where the winch is reeling in and still decelerating
    toward the reel-in limit (l_dot < 0, d(l_dot)/dt < 0), dropping the
    saturated plateau; fits l_dot / v_w = slope * (theta - theta0) and
    reports the pivot (zero crossing) plus per-side slopes.

    Raises:
        InsufficientSamplesError: fewer than 8 usable samples.
    """
    alpha = np.asarray(l_dot, dtype=float) / v_w
    theta = np.asarray(theta, dtype=float)
    dalpha = np.gradient(alpha)
    sel = (
        (dalpha < -1e-9)
        & (alpha < 0.0)
        & (alpha > alpha_limit_in + saturation_margin)
    )
    if int(sel.sum()) < 8:
        raise InsufficientSamplesError(
            f"only {int(sel.sum())} usable transfer-branch samples"
        )
    th, al = theta[sel], alpha[sel]
    slope, intercept = np.polyfit(th, al, 1)
    theta0 = -intercept / slope
    lower = th <= theta0
    upper = ~lower

    def side_slope(mask):
        if int(mask.sum()) < 3:
            return float(slope)
        m, b = np.polyfit(th[mask], al[mask], 1)
        return float(m)

    return WinchLawFit(
        theta0=float(theta0),
        slope=float(slope),
        slope_lower=side_slope(lower),
        slope_upper=side_slope(upper),
        n_samples=int(sel.sum()),
    )
