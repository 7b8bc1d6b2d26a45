"""Schrodinger evolution i d|psi>/dt = H(s(t)) |psi> under a schedule.

The state starts in the driver ground state (uniform superposition) and is
propagated with exactly unitary piecewise-constant steps: each substep applies
exp(-i H(s_mid) dt) through an eigendecomposition at the substep midpoint,
with s(t) the piecewise-linear interpolant of the schedule samples.  Accuracy
is certified by step-halving self-convergence of every reported probability.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import ising
from .errors import NumericalError, ResidualEnergyUndefined
from .schedule import Schedule
from .spectral import DEGENERACY_RTOL, distinct_levels, eigendecompose

#: |E_0| below this (units of J0) makes relative residual energy meaningless.
RESIDUAL_FLOOR = 1e-9


@dataclass(frozen=True)
class StepControl:
    """Integrator accuracy policy.

    Propagation runs with substeps_init substeps per schedule interval and
    doubles until every reported quantity (each ground-manifold probability
    and the residual-energy ratio) changes by at most prob_tol under halving.
    The midpoint exponential step is time-symmetric, so consecutive passes
    are Richardson-combined ((4 fine - coarse)/3, fourth order) and the
    combination is what gets compared and reported.  substeps_init=None picks
    a start from the Hamiltonian scale (phase per substep <= phase_budget
    radians) so long anneals do not waste passes far from convergence.
    max_doublings=0 runs a single raw pass without the self-check (test hook).
    """

    substeps_init: int | None = None
    prob_tol: float = 1e-6
    norm_tol: float = 1e-6
    max_doublings: int = 16
    phase_budget: float = 0.4


@dataclass(frozen=True)
class SolverReport:
    substeps_per_interval: int
    refinements: int
    max_prob_change: float | None
    prob_tol: float
    norm_tol: float


@dataclass(frozen=True)
class AnnealResult:
    """Outcome of one evolution.

    ground_prob_trace[k] is the population of the instantaneous ground
    manifold of H(s(t_k)) at the k-th schedule time; fidelity is its final
    entry; gap_trace[k] is g_{0,1}(s(t_k)) (NaN when a single cluster spans
    the spectrum).  residual_energy is |(<H_I> - E_0)/E_0| at the final state,
    NaN with residual_excluded=True when |E_0| is under the floor.
    """

    final_state: np.ndarray
    ground_prob_trace: np.ndarray
    gap_trace: np.ndarray
    residual_energy: float
    residual_excluded: bool
    fidelity: float
    norm_drift: float
    solver_report: SolverReport


def ground_manifold_probability(state: np.ndarray, hmat: np.ndarray,
                                tolerance: float = DEGENERACY_RTOL) -> float:
    """Population of the degenerate ground cluster of hmat in state."""
    w, v = eigendecompose(hmat)
    idx = distinct_levels(w, tolerance)[0]
    amps = v[:, idx].conj().T @ state
    return float(np.real(np.vdot(amps, amps)))


def residual_energy(final_state: np.ndarray, instance: "ising.IsingInstance") -> float:
    """Relative residual |(<H_I> - E_0)/E_0| of the final state.

    Raises ResidualEnergyUndefined when |E_0| < RESIDUAL_FLOOR; callers count
    such instances as excluded instead of reporting an unbounded ratio.
    """
    diag = ising.problem_diagonal(instance.h, instance.j)
    e0 = float(diag.min())
    if abs(e0) < RESIDUAL_FLOOR:
        raise ResidualEnergyUndefined(f"|E_0|={abs(e0):.3g} under the floor")
    prob = np.real(final_state.conj() * final_state)
    energy = float(diag @ prob)
    return abs((energy - e0) / e0)


def fidelity_bound_check(result: AnnealResult, epsilon: float) -> bool:
    """True iff the final ground-manifold probability is >= 1 - epsilon^2."""
    return bool(result.fidelity >= 1.0 - epsilon * epsilon)


def evolve(instance: "ising.IsingInstance", sched: Schedule,
           step_control: StepControl | None = None) -> AnnealResult:
    """Propagate the uniform superposition through the schedule.

    Reported probabilities (the per-sample ground-manifold trace, hence also
    the fidelity) are converged to step_control.prob_tol under step halving;
    failure to converge within max_doublings raises NumericalError, as does
    norm drift beyond norm_tol.
    """
    ctrl = step_control or StepControl()
    if ctrl.substeps_init is not None and ctrl.substeps_init < 1:
        raise ValueError("substeps_init must be at least 1")
    if ctrl.max_doublings != 0 and ctrl.max_doublings < 2:
        raise ValueError("max_doublings must be 0 (single raw pass) or >= 2")
    samples = np.asarray(sched.samples, dtype=float)
    if np.any(samples < 0.0) or np.any(samples > 1.0):
        raise ValueError("schedule samples must lie in [0, 1]")
    n_pts = len(samples)
    if n_pts < 2 or not np.isfinite(sched.t_f) or sched.t_f <= 0:
        raise ValueError("schedule must have t_f > 0 and at least two samples")
    times = np.asarray(sched.times, dtype=float)

    n = instance.n_spins
    dim = 2 ** n
    hx = ising.driver_matrix(n)
    hi_diag = ising.problem_diagonal(instance.h, instance.j)
    dt_intervals = np.diff(times)
    if np.any(dt_intervals <= 0):
        raise ValueError("schedule times must be strictly increasing")

    # Ground-cluster projectors and first gaps at every sample point are
    # shared by all refinement passes.
    w_all, v_all = np.linalg.eigh(_stack_h(samples, hx, hi_diag))
    ground_blocks = []
    gap_trace = np.empty(n_pts)
    for k in range(n_pts):
        clusters = distinct_levels(w_all[k], DEGENERACY_RTOL)
        ground_blocks.append(np.ascontiguousarray(v_all[k][:, clusters[0]]))
        gap_trace[k] = (w_all[k][clusters[1][0]] - w_all[k][clusters[0][0]]
                        if len(clusters) > 1 else np.nan)
    del w_all, v_all

    psi0 = np.full(dim, 1.0 / np.sqrt(dim), dtype=complex)
    diag = ising.problem_diagonal(instance.h, instance.j)
    e0 = float(diag.min())
    res_defined = abs(e0) >= RESIDUAL_FLOOR

    # Spectral-norm bound on H(s); sets the phase-budget starting resolution.
    h_norm = max(float(n), float(np.max(np.abs(hi_diag))))
    if ctrl.substeps_init is not None:
        substeps = ctrl.substeps_init
    else:
        dt_max = float(dt_intervals.max())
        substeps = max(1, int(np.ceil(dt_max * h_norm / ctrl.phase_budget)))

    def run(substeps: int) -> tuple[np.ndarray, np.ndarray]:
        # Midpoint s and dt for every substep of every interval, flattened in
        # propagation order; eigendecompositions go through LAPACK in chunks.
        # Returns the report vector (per-sample ground probabilities, then the
        # residual-energy ratio when defined) and the final state.
        offsets = (np.arange(substeps) + 0.5) / substeps
        s_flat = (samples[:-1, None]
                  + np.diff(samples)[:, None] * offsets[None, :]).ravel()
        dt_flat = np.repeat(dt_intervals / substeps, substeps)
        psi = psi0.copy()
        report_vec = np.empty(n_pts + 1 if res_defined else n_pts)
        report_vec[0] = _block_prob(ground_blocks[0], psi)
        chunk = max(1, _CHUNK_ELEMS // (dim * dim))
        pos = 0
        for lo in range(0, len(s_flat), chunk):
            w_c, v_c = np.linalg.eigh(_stack_h(s_flat[lo:lo + chunk], hx, hi_diag))
            phase_c = np.exp(-1j * w_c * dt_flat[lo:lo + chunk, None])
            for j in range(len(w_c)):
                v = v_c[j]
                psi = v @ (phase_c[j] * (v.T @ psi))
                pos += 1
                if pos % substeps == 0:
                    k = pos // substeps
                    report_vec[k] = _block_prob(ground_blocks[k], psi)
        if res_defined:
            energy = float(diag @ np.real(psi.conj() * psi))
            report_vec[n_pts] = abs((energy - e0) / e0)
        return report_vec, psi

    vec, psi = run(substeps)
    refinements = 0
    max_change: float | None = None
    if ctrl.max_doublings > 0:
        converged = False
        combo_prev = None
        for refinements in range(1, ctrl.max_doublings + 1):
            finer_vec, finer_psi = run(substeps * 2)
            combo = (4.0 * finer_vec - vec) / 3.0
            substeps, vec, psi = substeps * 2, finer_vec, finer_psi
            if combo_prev is not None:
                max_change = float(np.max(np.abs(combo - combo_prev)))
                if max_change <= ctrl.prob_tol:
                    combo_prev = combo
                    converged = True
                    break
            combo_prev = combo
        if not converged:
            raise NumericalError(
                f"probabilities did not self-converge to {ctrl.prob_tol:g} "
                f"within {ctrl.max_doublings} step halvings "
                f"(last change {max_change:g})")
        vec = combo_prev

    norm_drift = abs(float(np.linalg.norm(psi)) - 1.0)
    if norm_drift > ctrl.norm_tol:
        raise NumericalError(f"norm drift {norm_drift:g} exceeds {ctrl.norm_tol:g}")

    probs = np.clip(vec[:n_pts], 0.0, 1.0)
    if res_defined:
        res = float(vec[n_pts])
        excluded = False
    else:
        res = float("nan")
        excluded = True

    report = SolverReport(substeps, refinements, max_change,
                          ctrl.prob_tol, ctrl.norm_tol)
    return AnnealResult(psi, probs, gap_trace, res, excluded,
                        float(probs[-1]), norm_drift, report)


#: float64 budget per eigh chunk (~64 MB of stacked Hamiltonians).
_CHUNK_ELEMS = 8 * 1024 * 1024


def _stack_h(s_values: np.ndarray, hx: np.ndarray, hi_diag: np.ndarray) -> np.ndarray:
    """H(s) = (1-s) H_x + s diag(H_I) stacked over s_values."""
    sv = np.atleast_1d(np.asarray(s_values, dtype=float))
    hm = (1.0 - sv)[:, None, None] * hx
    idx = np.arange(hx.shape[0])
    hm[:, idx, idx] += sv[:, None] * hi_diag
    return hm


def _block_prob(block: np.ndarray, psi: np.ndarray) -> float:
    amps = block.conj().T @ psi
    return float(np.real(np.vdot(amps, amps)))


def result_to_json(result: AnnealResult, sched: Schedule | None = None,
                   include_trace: bool = True) -> str:
    obj = {
        "fidelity": result.fidelity,
        "residual_energy": None if result.residual_excluded else result.residual_energy,
        "residual_excluded": result.residual_excluded,
        "norm_drift": result.norm_drift,
        "solver": {
            "substeps_per_interval": result.solver_report.substeps_per_interval,
            "refinements": result.solver_report.refinements,
            "max_prob_change": result.solver_report.max_prob_change,
            "prob_tol": result.solver_report.prob_tol,
            "norm_tol": result.solver_report.norm_tol,
        },
    }
    if include_trace and sched is not None:
        obj["trace"] = {
            "t": [float(t) for t in sched.times],
            "s": [float(s) for s in sched.samples],
            "ground_prob": [float(p) for p in result.ground_prob_trace],
            "gap": [None if np.isnan(g) else float(g) for g in result.gap_trace],
        }
    return json.dumps(obj)


def trace_to_csv(result: AnnealResult, sched: Schedule, path) -> None:
    """Four-column t,s,ground_prob,gap file for figure reproduction."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "s", "ground_prob", "gap"])
        for t, s, p, g in zip(sched.times, sched.samples,
                              result.ground_prob_trace, result.gap_trace):
            writer.writerow([repr(float(t)), repr(float(s)), repr(float(p)),
                             "" if np.isnan(g) else repr(float(g))])
