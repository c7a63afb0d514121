import numpy as np
import pytest

from nls_lab import conformal, spectral
from nls_lab.evolution import EvolutionState, EvolveControls, evolve
from nls_lab.grid import AnalyticProfile, eval_profile


@pytest.fixture
def psi0(grid512):
    return eval_profile(grid512, AnalyticProfile(kind="gaussian", amplitude=1.0, width=2.0))


def test_time_maps():
    assert conformal.time_map(0.0) == 0.0
    assert conformal.time_map(1.0) == 0.5
    for t in (0.0, 0.3, 2.0, 50.0):
        assert conformal.inverse_time_map(conformal.time_map(t)) == pytest.approx(t, rel=1e-12)
    with pytest.raises(ValueError):
        conformal.time_map(-0.1)
    with pytest.raises(ValueError):
        conformal.inverse_time_map(1.0)


def test_pair_clock_consistency(psi0):
    phi, tau = conformal.to_conformal(psi0, 1.0)
    conformal.ConformalPair(psi=psi0, t=1.0, phi=phi, tau=tau)
    with pytest.raises(ValueError):
        conformal.ConformalPair(psi=psi0, t=1.0, phi=phi, tau=0.3)


def test_transform_at_t_zero_is_chirp(psi0):
    phi, tau = conformal.to_conformal(psi0, 0.0)
    assert tau == 0.0
    expect = conformal.chirp(psi0, -0.25)
    assert np.max(np.abs(phi.values - expect.values)) < 1e-12


def test_transform_roundtrip(psi0):
    phi, tau = conformal.to_conformal(psi0, 1.5)
    back, t = conformal.from_conformal(phi, tau)
    assert t == pytest.approx(1.5, rel=1e-12)
    assert np.max(np.abs(back.values - psi0.values)) < 1e-12


def test_j_norm_chirp_cancellation(psi0):
    """J(1)(e^{i|x|^2/4} u) = i e^{i|x|^2/4} grad u, so the J norm of the
    chirped state is the plain gradient norm of u."""
    chirped = conformal.chirp(psi0, 0.25)
    jn = conformal.j_norm(chirped, 0.0)
    assert jn == pytest.approx(np.sqrt(spectral.gradient_sq_norm(psi0)), rel=1e-10)


def test_j_norm_real_field_closed_form(psi0):
    """For real u the cross term vanishes:
    ||J(1+t) u||^2 = ||x u||^2 / 4 + (1+t)^2 ||grad u||^2."""
    for t in (0.0, 2.0):
        jn = conformal.j_norm(psi0, t)
        expect = np.sqrt(
            spectral.weighted_l2(psi0) ** 2 / 4
            + (1 + t) ** 2 * spectral.gradient_sq_norm(psi0)
        )
        assert jn == pytest.approx(expect, rel=1e-10)


def test_norm_identities_on_free_flow(psi0):
    for t in (0.0, 0.5, 3.0):
        psi_t = conformal.free_propagate(psi0, t) if t else psi0
        rep = conformal.verify_norm_identities(conformal.make_pair(psi_t, t))
        assert rep.max_residual() < 1e-12


def test_free_propagate_group_property(psi0):
    a = conformal.free_propagate(conformal.free_propagate(psi0, 0.4), 0.6)
    b = conformal.free_propagate(psi0, 1.0)
    assert np.max(np.abs(a.values - b.values)) < 1e-13


def _small_mass_trajectory(grid, params, rho=0.3, free_flow=False):
    phi0 = spectral.normalize(
        eval_profile(grid, AnalyticProfile(kind="gaussian", amplitude=1.0, width=2.0)), rho
    )
    state = EvolutionState(phi0, 0.0, "conformal", params)
    controls = EvolveControls(
        dt_base=1e-2,
        c_adapt=1e-2,
        cadence=10,
        snapshot_clocks=(0.9, 0.95, 0.99, 0.995, 0.999),
        free_flow=free_flow,
    )
    return evolve(state, 0.999, controls)


def test_scattering_probe_small_mass(grid512, sparams):
    traj = _small_mass_trajectory(grid512, sparams)
    rep = conformal.scattering_probe(traj)
    assert rep.verdict == "scattering_consistent"
    assert rep.finest_residual < rep.tol
    assert rep.psi_plus is not None
    assert rep.residuals.shape == (5, 5)
    assert np.allclose(rep.residuals, rep.residuals.T)


def test_scattering_probe_free_flow_is_exact(grid512, sparams):
    traj = _small_mass_trajectory(grid512, sparams, free_flow=True)
    rep = conformal.scattering_probe(traj)
    assert rep.verdict == "scattering_consistent"
    assert rep.residuals.max() < 1e-12


def test_scattering_probe_needs_snapshots(grid512, sparams):
    phi0 = eval_profile(grid512, AnalyticProfile(kind="gaussian", amplitude=1.0, width=2.0))
    state = EvolutionState(phi0, 0.0, "conformal", sparams)
    traj = evolve(state, 0.5, EvolveControls(dt_base=1e-2, cadence=10))
    with pytest.raises(ValueError):
        conformal.scattering_probe(traj)
