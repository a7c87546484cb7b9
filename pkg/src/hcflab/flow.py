"""Explicit time integration of the Hermitian curvature flow and its variants.

``HCF`` evolves ``dg/dt = -S + Q = -K``; ``HCF_normalized`` adds
``(1/n) (int k dV / int dV) g`` so the total volume is conserved; ``KRF``
evolves ``dg/dt = -S`` and is only accepted on Kähler initial data.

Steps are classical RK4 with

    dt = min(safety / max(K, eps0), cfl * h^2 * lambda_min(g)),

``K = max(sup|Omega|, sup|nabla T|, sup|T|^2)``, clipped so that output times
are hit exactly.  A step whose stages lose positivity is rejected and
retried with half the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import Q_COEFFS
from .fields import MetricField
from .kernels import Evaluation, FlowKernel, PositivityError, to_comp_first, to_grid_first

VARIANTS = ("HCF", "HCF_normalized", "KRF")
OUTCOMES = ("reached_tmax", "static_converged", "blowup", "max_steps")

#: sup|T| allowed at t = 0 for the KRF variant.
KRF_TORSION_TOL = 1e-6
HERMITIAN_TOL = 1e-12

ROW_FIELDS = ("step", "t", "dt", "sup_omega", "sup_T", "sup_nabla_T", "sup_nabla_omega",
              "sup_nabla2_T", "K_scale", "volume", "F_value", "static_tensor",
              "static_scalar", "sup_rhs", "min_eig")


class BlowUp(RuntimeError):
    """The step size fell below ``dt_min`` or the curvature scale passed ``K_max``."""


@dataclass(frozen=True)
class FlowSpec:
    """Integrator settings.

    Parameters
    ----------
    variant : {"HCF", "HCF_normalized", "KRF"}
    safety : float
        ``sigma_flow`` in ``(0, 1]``.
    cfl : float
        ``sigma_grid``, the parabolic step limit in units of ``h^2 lambda_min``.
    t_max : float
    max_steps : int
    stop_threshold : float
        Curvature scale ``K_max`` treated as blow-up.
    eps0 : float
        Floor on ``K`` so flat metrics get a finite step.
    dt_min : float
        Step sizes below this signal blow-up.
    static_tol : float
        Static-convergence threshold on both residuals and ``sup|rhs|``.
    output_interval : float or None
        Steps are clipped to land on multiples of this interval.
    second_torsion : bool
        Track ``sup|nabla^2 T|`` in every row (expensive).
    stop_on_static : bool
        End the run once the static test passes.
    q_coeffs : tuple
        Weights of ``Q1..Q4``; only changed for fault injection.
    """

    variant: str = "HCF"
    safety: float = 0.1
    cfl: float = 0.2
    t_max: float = 1.0
    max_steps: int = 100_000
    stop_threshold: float = 1e6
    eps0: float = 1e-8
    dt_min: float = 1e-12
    static_tol: float = 1e-9
    output_interval: float | None = None
    second_torsion: bool = False
    stop_on_static: bool = True
    q_coeffs: tuple = Q_COEFFS

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 0.0 < self.safety <= 1.0:
            raise ValueError("safety must lie in (0, 1]")
        for name in ("cfl", "t_max", "stop_threshold", "eps0", "dt_min", "static_tol"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.output_interval is not None and not self.output_interval > 0.0:
            raise ValueError("output_interval must be positive")


@dataclass(frozen=True, eq=False)
class FlowState:
    """Immutable snapshot of a run.

    ``G`` is the metric component-first, ``ev`` its evaluation (with
    diagnostics) and ``diag`` the row written for this state.  States kept
    in :attr:`EvolveResult.outputs` drop ``ev`` to bound memory.
    """

    t: float
    G: np.ndarray
    step: int
    dt: float
    lattice: object = field(repr=False)
    ev: Evaluation | None = field(repr=False)
    diag: dict = field(default_factory=dict)

    @property
    def g(self) -> MetricField:
        return MetricField(to_grid_first(self.G, 2), self.lattice, validate=False)

    def __post_init__(self):
        self.G.flags.writeable = False

    def light(self) -> "FlowState":
        """The same state without its evaluation."""
        return FlowState(self.t, self.G, self.step, self.dt, self.lattice, None, self.diag)


@dataclass
class EvolveResult:
    trajectory: list
    final: FlowState
    outcome: str
    outputs: list = field(default_factory=list)


def hermitize(X: np.ndarray) -> np.ndarray:
    """Exactly Hermitian part of a component-first (1,1) array."""
    return 0.5 * (X + np.conj(np.swapaxes(X, 0, 1)))


class Integrator:
    """RK4 driver for one lattice and one :class:`FlowSpec`."""

    def __init__(self, lattice, spec: FlowSpec):
        self.lattice = lattice
        self.spec = spec
        self.kernel = FlowKernel(lattice, spec.q_coeffs)
        self.n = lattice.n

    # -- speed -----------------------------------------------------------

    def speed(self, ev: Evaluation, sign: float = 1.0) -> np.ndarray:
        """Right-hand side of the chosen variant at an evaluated metric."""
        v = self.spec.variant
        if v == "KRF":
            X = -ev.S
        else:
            X = -ev.K
            if v == "HCF_normalized":
                vol = self.kernel.integrate(ev.det)
                mean = self.kernel.integrate(ev.k * ev.det) / vol
                X = X + (mean / self.n) * ev.G
        X = hermitize(X)
        return X if sign == 1.0 else sign * X

    def evaluate(self, G: np.ndarray, diagnostics: bool = False) -> Evaluation:
        return self.kernel.evaluate(G, diagnostics, diagnostics and self.spec.second_torsion)

    # -- step control ------------------------------------------------------

    def curvature_scale(self, ev: Evaluation) -> float:
        d = ev.diag
        return max(d["sup_omega"], d["sup_nabla_T"], d["sup_T"] ** 2)

    def min_eig(self, G: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(to_grid_first(G, 2)).min())

    def proposed_dt(self, ev: Evaluation, lam: float) -> float:
        s = self.spec
        dt_flow = s.safety / max(self.curvature_scale(ev), s.eps0)
        dt_grid = s.cfl * self.lattice.h ** 2 * lam
        return min(dt_flow, dt_grid)

    def _clip(self, t: float, dt: float) -> float:
        s = self.spec
        targets = [s.t_max]
        if s.output_interval is not None:
            nxt = (math.floor(t / s.output_interval + 1e-9) + 1) * s.output_interval
            targets.append(nxt)
        for target in targets:
            if t + dt >= target - 1e-12 * max(1.0, target):
                dt = target - t
        return dt

    def rk4(self, G: np.ndarray, dt: float, k1: np.ndarray, sign: float = 1.0) -> np.ndarray:
        """One classical RK4 step from ``G`` with first stage ``k1`` supplied."""
        k2 = self.speed(self.evaluate(G + 0.5 * dt * k1), sign)
        k3 = self.speed(self.evaluate(G + 0.5 * dt * k2), sign)
        k4 = self.speed(self.evaluate(G + dt * k3), sign)
        return G + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    # -- states ------------------------------------------------------------

    def make_state(self, G: np.ndarray, t: float, step: int, dt: float,
                   ev: Evaluation | None = None) -> FlowState:
        if ev is None or not ev.diag:
            ev = self.evaluate(G, diagnostics=True)
        row = self.row(ev, t, step, dt)
        return FlowState(t, G, step, dt, self.lattice, ev, row)

    def row(self, ev: Evaluation, t: float, step: int, dt: float) -> dict:
        n = self.n
        d = ev.diag
        vol = self.kernel.integrate(ev.det)
        kint = self.kernel.integrate(ev.k * ev.det)
        mean = kint / vol
        rhs = self.speed(ev)
        return {
            "step": step,
            "t": t,
            "dt": dt,
            "sup_omega": d["sup_omega"],
            "sup_T": d["sup_T"],
            "sup_nabla_T": d["sup_nabla_T"],
            "sup_nabla_omega": d["sup_nabla_omega"],
            "sup_nabla2_T": d.get("sup_nabla2_T", math.nan),
            "K_scale": self.curvature_scale(ev),
            "volume": vol,
            "F_value": kint / vol ** ((n - 1) / n),
            "static_tensor": float(np.max(np.abs(ev.K - (ev.k / n) * ev.G))),
            "static_scalar": float(np.max(np.abs(ev.k - mean))),
            "sup_rhs": float(np.max(np.abs(rhs))),
            "min_eig": self.min_eig(ev.G),
        }

    def is_static(self, row: dict) -> bool:
        tol = self.spec.static_tol
        return (row["static_tensor"] < tol and row["static_scalar"] < tol
                and row["sup_rhs"] < tol)

    def step(self, state: FlowState) -> FlowState:
        """Advance one accepted RK4 step, halving ``dt`` on loss of positivity.

        Raises
        ------
        BlowUp
            If ``dt`` drops below ``dt_min``.
        """
        s = self.spec
        G = np.asarray(state.G)
        k1 = self.speed(state.ev)
        dt = self._clip(state.t, self.proposed_dt(state.ev, state.diag["min_eig"]))
        while True:
            if dt < s.dt_min:
                raise BlowUp(f"step size {dt:.3e} fell below {s.dt_min:.1e} at t={state.t:.6g}")
            try:
                Gn = self.rk4(G, dt, k1)
                herm = float(np.max(np.abs(Gn - np.conj(np.swapaxes(Gn, 0, 1)))))
                if not herm <= HERMITIAN_TOL * max(1.0, float(np.max(np.abs(Gn)))):
                    raise PositivityError("Hermitian symmetry lost")
                ev = self.evaluate(Gn, diagnostics=True)
            except PositivityError:
                dt = 0.5 * dt
                continue
            t = state.t + dt
            if abs(t - s.t_max) <= 1e-12 * max(1.0, s.t_max):
                t = s.t_max
            return self.make_state(Gn, t, state.step + 1, dt, ev)


def _initial_G(g0) -> np.ndarray:
    G = g0.g if isinstance(g0, MetricField) else np.asarray(g0)
    return to_comp_first(np.asarray(G, dtype=complex), 2)


def check_krf_data(state: FlowState):
    if state.diag["sup_T"] > KRF_TORSION_TOL:
        raise ValueError(f"KRF needs Kähler data; sup|T| = {state.diag['sup_T']:.3e} "
                         f"exceeds {KRF_TORSION_TOL:.0e}")


def rhs(g: MetricField, variant: str = "HCF") -> np.ndarray:
    """Flow speed of ``variant`` at ``g`` as a grid-first Hermitian (1,1) array.

    Raises
    ------
    ValueError
        For ``KRF`` on data with ``sup|T| > 1e-6``.
    """
    integ = Integrator(g.lattice, FlowSpec(variant=variant))
    G = _initial_G(g)
    ev = integ.evaluate(G, diagnostics=variant == "KRF")
    if variant == "KRF" and ev.diag["sup_T"] > KRF_TORSION_TOL:
        raise ValueError(f"KRF needs Kähler data; sup|T| = {ev.diag['sup_T']:.3e}")
    return to_grid_first(integ.speed(ev), 2)


def initial_state(g0, spec: FlowSpec, lattice=None) -> tuple[Integrator, FlowState]:
    lattice = lattice if lattice is not None else g0.lattice
    integ = Integrator(lattice, spec)
    G = _initial_G(g0)
    try:
        state = integ.make_state(G, 0.0, 0, 0.0)
    except PositivityError as exc:
        raise ValueError("initial metric is not positive definite") from exc
    if spec.variant == "KRF":
        check_krf_data(state)
    return integ, state


def evolve(g0: MetricField, spec: FlowSpec, on_output=None) -> EvolveResult:
    """Run the flow from ``g0``.

    One diagnostics row is recorded per accepted state, starting at ``t = 0``.
    ``on_output(state)`` is called at ``t = 0``, at every multiple of
    ``spec.output_interval`` and at the final state; those states are also
    collected in ``outputs``.

    Returns
    -------
    EvolveResult
        ``outcome`` is one of ``reached_tmax``, ``static_converged``,
        ``blowup`` or ``max_steps``.
    """
    integ, state = initial_state(g0, spec)
    trajectory = [state.diag]
    outputs = []

    def emit(st):
        if outputs and outputs[-1].step == st.step:
            return
        outputs.append(st.light())
        if on_output is not None:
            on_output(st)

    emit(state)
    outcome = None
    iv = spec.output_interval
    while outcome is None:
        if spec.stop_on_static and integ.is_static(state.diag):
            outcome = "static_converged"
            break
        if state.t >= spec.t_max:
            outcome = "reached_tmax"
            break
        if state.step >= spec.max_steps:
            outcome = "max_steps"
            break
        if state.diag["K_scale"] > spec.stop_threshold:
            outcome = "blowup"
            break
        try:
            state = integ.step(state)
        except BlowUp:
            outcome = "blowup"
            break
        trajectory.append(state.diag)
        if iv is not None:
            r = state.t / iv
            if abs(r - round(r)) < 1e-9:
                emit(state)
    emit(state)
    return EvolveResult(trajectory, state, outcome, outputs)


def time_reversal_defect(g: MetricField, dt: float, variant: str = "HCF") -> float:
    """``sup|G'' - G|`` after one RK4 step forward and one with the negated speed."""
    integ = Integrator(g.lattice, FlowSpec(variant=variant))
    G = _initial_G(g)
    G1 = integ.rk4(G, dt, integ.speed(integ.evaluate(G)))
    G2 = integ.rk4(G1, dt, integ.speed(integ.evaluate(G1), -1.0), -1.0)
    return float(np.max(np.abs(G2 - G)))


def smoothing_monitor(trajectory: list) -> dict:
    """Shape check of the derivative estimates along a run.

    Tracks ``t^(1/2) sup|nabla Omega| / K0`` and ``t^(1/2) sup|nabla^2 T| / K0``
    where ``K0`` is the curvature scale of the first row.

    Returns
    -------
    dict
        ``ratio_omega`` / ``ratio_T2`` series, their running and overall
        maxima, and ``bounded_omega`` / ``bounded_T2``: False only when the
        series grows monotonically across the final half of the run.
    """
    K0 = trajectory[0]["K_scale"]
    ts = np.array([r["t"] for r in trajectory])
    out = {"K0": K0, "t": ts}
    for key, col in (("omega", "sup_nabla_omega"), ("T2", "sup_nabla2_T")):
        vals = np.array([r[col] for r in trajectory], dtype=float)
        ratio = np.sqrt(ts) * vals / K0 if K0 > 0.0 else np.zeros_like(vals)
        valid = np.isfinite(ratio)
        ratio = np.where(valid, ratio, np.nan)
        out[f"ratio_{key}"] = ratio
        if not valid.any():
            out[f"max_{key}"] = math.nan
            out[f"running_max_{key}"] = ratio
            out[f"bounded_{key}"] = None
            continue
        out[f"running_max_{key}"] = np.fmax.accumulate(np.where(valid, ratio, -np.inf))
        out[f"max_{key}"] = float(np.nanmax(ratio))
        tail = ratio[valid][len(ratio[valid]) // 2:]
        diffs = np.diff(tail)
        growing = tail.size > 1 and bool(np.all(diffs >= 0.0)) and tail[-1] > tail[0]
        out[f"bounded_{key}"] = not growing
    return out
