"""Strang split-step integration of the physical equation and of its
pseudo-conformal image with time-dependent coefficients.

Physical model:   i d_t psi + Lap psi = |psi|^{q-1} psi - |psi|^{p-1} psi.
Conformal model:  i d_tau phi + Lap phi =
    (1-tau)^{-delta(q)} |phi|^{q-1} phi - (1-tau)^{-delta(p)} |phi|^{p-1} phi.

The free group is U(t) = e^{i t Lap}, Fourier symbol e^{-i |k|^2 t}; the
nonlinear substep therefore rotates the phase by minus the integrated
coefficients.  Both substeps preserve |values| pointwise or spectrally,
so the mass is conserved to roundoff.
"""

import csv
import io
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import backend, spectral
from .functionals import (
    breakdown,
    correction_energy_terms,
    modified_energy_terms,
)
from .grid import Field

__all__ = [
    "EvolutionState",
    "DiagRecord",
    "Trajectory",
    "EvolveControls",
    "EvolutionError",
    "nonlinear_phase_weights",
    "StrangStepper",
    "step_strang",
    "evolve",
    "EnvelopeReport",
    "decay_envelopes",
    "aqp_condition_rhs",
    "aqp_condition_holds",
]


class EvolutionError(RuntimeError):
    """Step failure; carries the trajectory up to the last healthy record."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class EvolutionState:
    field: Field
    clock: float
    model: str
    params: object

    def __post_init__(self):
        if self.model not in ("physical", "conformal"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.model == "conformal" and not 0 <= self.clock < 1:
            raise ValueError(f"conformal clock must lie in [0, 1), got {self.clock}")
        if self.model == "physical" and self.clock < 0:
            raise ValueError(f"physical clock must be nonnegative, got {self.clock}")


def nonlinear_phase_weights(model, clock, dt, params):
    """Exact integrals of the nonlinear coefficients over [clock, clock+dt].

    Physical model: both coefficients are 1, so (dt, dt).  Conformal model:
    W_r = [(1-tau)^{1-delta(r)} - (1-tau-dt)^{1-delta(r)}] / (1-delta(r)).
    """
    if model == "physical":
        return dt, dt
    if clock + dt >= 1:
        raise ValueError(f"conformal step leaves [0, 1): tau={clock}, dt={dt}")
    out = []
    s0 = 1.0 - clock
    s1 = 1.0 - clock - dt
    for delta in (params.delta_q, params.delta_p):
        if not 0 < delta < 1:
            raise ValueError(f"conformal weights need delta in (0, 1), got {delta}")
        e = 1.0 - delta
        out.append((s0**e - s1**e) / e)
    return tuple(out)


class StrangStepper:
    """Symmetric splitting: exact half linear step, exact nonlinear phase
    with substep-integrated coefficients, exact half linear step.

    The linear multiplier is cached per dt; reverse=True negates both the
    linear phase and the weights, undoing a forward step exactly.
    """

    def __init__(self, grid, params, model, free_flow=False):
        self.grid = grid
        self.params = params
        self.model = model
        self.free_flow = free_flow
        self._qm1 = params.q - 1.0
        self._pm1 = params.p - 1.0
        self._dt = None
        self._half = None

    def _half_linear(self, dt):
        if dt != self._dt:
            self._half = np.exp(-0.5j * self.grid.k_sq * dt)
            self._dt = dt
        return self._half

    def step(self, values, clock, dt, reverse=False):
        """Advance values in place over [clock, clock+dt] (forward weights
        even when reverse, which then negates them)."""
        half = self._half_linear(dt)
        lin = np.conj(half) if reverse else half
        values[...] = np.fft.ifftn(np.fft.fftn(values) * lin)
        if not self.free_flow:
            wq, wp = nonlinear_phase_weights(self.model, clock, dt, self.params)
            if reverse:
                wq, wp = -wq, -wp
            backend.nonlinear_phase(values.reshape(-1), self._qm1, self._pm1, wq, wp)
        values[...] = np.fft.ifftn(np.fft.fftn(values) * lin)


def step_strang(state, dt, free_flow=False):
    """One Strang step; returns a new EvolutionState."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    stepper = StrangStepper(state.field.grid, state.params, state.model, free_flow)
    vals = state.field.values.copy()
    stepper.step(vals, state.clock, dt)
    if not np.all(np.isfinite(vals.view(np.float64))):
        raise EvolutionError(f"non-finite field after step at clock {state.clock}")
    return EvolutionState(
        field=Field(state.field.grid, vals),
        clock=state.clock + dt,
        model=state.model,
        params=state.params,
    )


@dataclass
class DiagRecord:
    clock: float
    mass: float
    momentum: np.ndarray
    kinetic: float
    nq: float
    np: float
    energy: float
    e_mod: dict
    r_mod: dict
    sound: bool
    snapshot: Field | None = None


@dataclass
class EvolveControls:
    dt_base: float = 1e-2
    c_adapt: float = 0.01
    adaptive: bool = True
    cadence: int = 1
    record_A: tuple = ()
    snapshot_clocks: tuple = ()
    free_flow: bool = False
    truncation_threshold: float = 1e-6

    def __post_init__(self):
        if self.dt_base <= 0 or self.c_adapt <= 0 or self.cadence < 1:
            raise ValueError("need dt_base > 0, c_adapt > 0, cadence >= 1")


@dataclass
class Trajectory:
    model: str
    params: object
    record_A: tuple
    records: list = dc_field(default_factory=list)

    @property
    def unsound_from(self):
        for i, r in enumerate(self.records):
            if not r.sound:
                return i
        return None

    @property
    def sound(self):
        return self.unsound_from is None

    def clocks(self):
        return np.array([r.clock for r in self.records])

    def series(self, attr):
        return np.array([getattr(r, attr) for r in self.records])

    def e_mod_series(self, A):
        return np.array([r.e_mod[A] for r in self.records])

    def r_mod_series(self, A):
        return np.array([r.r_mod[A] for r in self.records])

    def snapshots(self):
        return [(r.clock, r.snapshot) for r in self.records if r.snapshot is not None]

    def to_csv(self, coeffs_note=""):
        """Diagnostics CSV: fixed column order tau, mass, K, nq, np, E,
        E_A, R_A (first configured A), with a metadata header."""
        p = self.params
        a0 = self.record_A[0] if self.record_A else None
        buf = io.StringIO()
        buf.write(f"# model={self.model} d={p.d} q={p.q!r} p={p.p!r} A={a0!r}\n")
        buf.write("# coeffs=(1/2, 1/(q+1), 1/(p+1)) " + coeffs_note + "\n")
        buf.write(f"# momentum_convention={spectral.MOMENTUM_CONVENTION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "mass", "K", "nq", "np", "E", "E_A", "R_A"])
        for r in self.records:
            ea = r.e_mod.get(a0, "") if a0 is not None else ""
            ra = r.r_mod.get(a0, "") if a0 is not None else ""
            w.writerow(
                [f"{v:.17g}" if v != "" else "" for v in
                 (r.clock, r.mass, r.kinetic, r.nq, r.np, r.energy, ea, ra)]
            )
        return buf.getvalue()


def _record(state, controls, want_snapshot):
    b = breakdown(state.field, state.params)
    tau = state.clock if state.model == "conformal" else 0.0
    e_mod = {}
    r_mod = {}
    for a in controls.record_A:
        e_mod[a] = modified_energy_terms(tau, b, a, state.params)
        r_mod[a] = correction_energy_terms(tau, b, a, state.params)
    sound = spectral.truncation_fraction(state.field) < controls.truncation_threshold
    return DiagRecord(
        clock=state.clock,
        mass=b.mass,
        momentum=spectral.momentum(state.field),
        kinetic=b.kinetic,
        nq=b.nq,
        np=b.np,
        energy=b.total,
        e_mod=e_mod,
        r_mod=r_mod,
        sound=sound,
        snapshot=state.field.copy() if want_snapshot else None,
    )


def evolve(state, end_clock, controls):
    """Repeated Strang steps with cadence diagnostics.

    Conformal runs shrink dt like c_adapt * (1 - tau) so the coefficient
    blowup stays resolved; records land exactly on snapshot_clocks and on
    end_clock.  A truncation-monitor trip marks the trajectory unsound
    from that record onward (records keep accumulating).
    """
    if end_clock <= state.clock:
        raise ValueError("end_clock must exceed the current clock")
    if state.model == "conformal" and end_clock >= 1:
        raise ValueError("conformal end_clock must stay below 1")

    stops = sorted(set(float(c) for c in controls.snapshot_clocks if state.clock < c <= end_clock))
    if not stops or stops[-1] < end_clock:
        stops.append(end_clock)
    snapshot_set = set(float(c) for c in controls.snapshot_clocks)

    stepper = StrangStepper(state.field.grid, state.params, state.model, controls.free_flow)
    vals = state.field.values.copy()
    clock = state.clock
    params = state.params
    traj = Trajectory(model=state.model, params=params, record_A=tuple(controls.record_A))
    cur = EvolutionState(Field(state.field.grid, vals.copy()), clock, state.model, params)
    traj.records.append(_record(cur, controls, want_snapshot=clock in snapshot_set))

    steps = 0
    for stop in stops:
        while clock < stop - 1e-13:
            dt = controls.dt_base
            if state.model == "conformal" and controls.adaptive:
                dt = min(dt, controls.c_adapt * (1.0 - clock))
            dt = min(dt, stop - clock)
            stepper.step(vals, clock, dt)
            clock += dt
            steps += 1
            if not np.all(np.isfinite(vals.view(np.float64))):
                raise EvolutionError(f"non-finite field at clock {clock}", trajectory=traj)
            at_stop = clock >= stop - 1e-13
            if steps % controls.cadence == 0 or at_stop:
                if at_stop:
                    clock = stop
                cur = EvolutionState(Field(state.field.grid, vals.copy()), clock, state.model, params)
                traj.records.append(
                    _record(cur, controls, want_snapshot=at_stop and stop in snapshot_set)
                )
    return traj


@dataclass
class EnvelopeReport:
    """Decay products (1-tau)^A K, (1-tau)^{A-dq} nq, (1-tau)^{A-dp} np
    per record, with running suprema and ratios to the initial values."""

    A: float
    clocks: np.ndarray
    kinetic_product: np.ndarray
    nq_product: np.ndarray
    np_product: np.ndarray
    sup_ratios: tuple

    @property
    def max_ratio(self):
        return max(self.sup_ratios)


def decay_envelopes(trajectory, A):
    if trajectory.model != "conformal":
        raise ValueError("decay envelopes are defined for conformal trajectories")
    p = trajectory.params
    tau = trajectory.clocks()
    s = 1.0 - tau
    kin = s**A * trajectory.series("kinetic")
    nq = s ** (A - p.delta_q) * trajectory.series("nq")
    npw = s ** (A - p.delta_p) * trajectory.series("np")
    ratios = tuple(float(np.max(v) / v[0]) if v[0] > 0 else float("inf") for v in (kin, nq, npw))
    return EnvelopeReport(
        A=A, clocks=tau, kinetic_product=kin, nq_product=nq, np_product=npw, sup_ratios=ratios
    )


def aqp_condition_rhs(q, d):
    """Right side of the admissibility bound on A for the Cauchy-tail
    argument; exceeds 1 exactly in the short-range regime q > 1 + 2/d."""
    return (1 - q) / 2 * (2 - d * (q - 1) / 2) + (q + 1) / 2


def aqp_condition_holds(A, q, d):
    return A < aqp_condition_rhs(q, d)
