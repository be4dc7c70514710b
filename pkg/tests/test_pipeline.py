#!/usr/bin/env python3
"""
End-to-end tests for the extraction pipeline and the CLI

Small runs (a few seconds) check the exactness of the extracted maps; the
preset runs are marked slow.

Tests:
  1. Gaussian extraction: CPTP maps, Lambda(0) = 1, exact reconstruction
  2. Exact-diagonalization extraction of the Anderson impurity: reconstruction and symmetry
  3. Direct evolution: Slater mixtures on the Gaussian engine, interleaved runs
  4. Decay envelope of the map spectrum
  5. chain-coeffs / extract / predict / lb bundles on disk
  6. CLI exit codes
  7. (slow) Three-site chain presets: Landauer–Büttiker agreement and predictions
  8. (slow) Anderson impurity presets
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

import main
from src.core import pipeline
from src.core.pipeline import ExtractionPipeline
from src.models.layout import Ordering
from src.models.trajectory import TrajectoryRecord
from src.services.maps import trace_distance
from src.services.systems import InitialState, random_hs_state
from src.storage.bundle import LoadedBundle
from src.storage.models import load_config, validate_config
from src.utils.errors import ConfigError, UnsupportedModelError


def small_chain_run(engine="gaussian", **analysis):
    settings = {"quadrature_points": 400, "reconstruction_states": 3,
                "tau_m_generator": 1.0, "tau_m_map": 0.5}
    settings.update(analysis)
    lead = {"kind": "semi-elliptical", "gamma": 0.05, "D": 1.0, "beta": 1.0, "M": 2}
    return validate_config({
        "system": {"model": "fermi-chain", "L": 2, "t_c": 0.3, "initial_state": "totally-mixed"},
        "baths": [dict(lead, id="left", mu=0.2, side="left"), dict(lead, id="right", mu=-0.2, side="right")],
        "time": {"tau_max": 2.0, "dtau": 0.1},
        "analysis": settings,
        "engine": engine,
        "seed": 3,
    })


def small_siam_run(ordering="separated"):
    bath = {"kind": "smoothed-flat", "gamma": 0.2, "D": 1.0, "nu": 100.0, "beta": 10.0, "mu": 0.0, "M": 1}
    return validate_config({
        "system": {"model": "siam", "L": 2, "U": 0.8, "initial_state": "spin-up"},
        "baths": [dict(bath, id="up", side="left", system_mode=0),
                  dict(bath, id="down", side="right", system_mode=1)],
        "time": {"tau_max": 2.0, "dtau": 0.1},
        "analysis": {"quadrature_points": 400, "reconstruction_states": 2},
        "engine": "ed",
        "ordering": ordering,
        "seed": 5,
    })


def test_gaussian_extraction():
    run = small_chain_run()
    pipe = ExtractionPipeline(run)
    record = pipe.extract()

    assert len(record.maps) == 21 and record.chain_lengths == {"left": 2, "right": 2}
    assert pipe.layout.N == 12
    assert np.allclose(record.maps[0].matrix, np.eye(16), atol=1e-12), "Lambda(0) must be the identity"
    assert record.all_cptp, "Every extracted map must be CPTP"
    assert record.degenerate_points and record.degenerate_points[0][0] == 0.0, \
        "The identity map has no unique fixed point"
    assert all(g is not None for g in record.generators), "Weak coupling keeps every map invertible"

    rows, worst = pipe.reconstruction_check(record)
    assert len(rows) == 3 * 21
    assert {r["ensemble"] for r in rows} == {"hilbert-schmidt", "gaussian"}, "Both state ensembles are checked"
    assert worst < 1e-6, f"Maps must reproduce direct evolution, worst trace distance {worst:.3e}"


def test_custom_derivative_step():
    run = small_chain_run(derivative_step=0.01)
    pipe = ExtractionPipeline(run)
    taus = [0.0, 0.5, 1.0]
    lam = pipe.extract_maps(taus)
    generators, singular = pipe.generators(taus, lam)
    assert not singular
    assert generators[0].one_sided and not generators[1].one_sided


def test_ed_impurity_extraction():
    run = small_siam_run()
    pipe = ExtractionPipeline(run)
    record = pipe.extract()

    assert pipe.layout.N == 8
    assert record.all_cptp
    rows, worst = pipe.reconstruction_check(record)
    assert worst < 1e-6, f"ED maps must reproduce direct evolution, worst trace distance {worst:.3e}"

    symmetry = pipeline.symmetry_checks(record)["particle_hole"]
    assert symmetry["value"] < 1e-6, f"Symmetric impurity fixed point, deviation {symmetry['value']:.3e}"

    with pytest.raises(UnsupportedModelError):
        pipe.lb()


def test_direct_trajectory_needs_gaussian_state():
    pipe = ExtractionPipeline(small_chain_run())
    rho0, C0 = pipe.initial_density()
    states = pipe.direct_trajectory(rho0, C0, [0.0, 1.0])
    assert np.allclose(states[0], rho0, atol=1e-12), "Direct evolution starts from rho0"
    assert abs(np.trace(states[1]) - 1.0) < 1e-12


def test_gaussian_direct_evolution_of_hs_states():
    """Slater components evolved by the Gaussian engine agree with the dense engine"""
    rho = random_hs_state(2, np.random.default_rng(11))
    taus = [0.0, 0.7, 1.5]
    quasi_free = ExtractionPipeline(small_chain_run()).direct_trajectory(rho, taus=taus)
    exact = ExtractionPipeline(small_chain_run(engine="ed")).direct_trajectory(rho, taus=taus)
    assert np.allclose(quasi_free[0], rho, atol=1e-12)
    for tau, a, b in zip(taus, quasi_free, exact):
        distance = trace_distance(a, b)
        assert distance < 1e-8, f"Engines disagree at tau={tau}: {distance:.3e}"


def test_non_slater_state_is_rejected():
    run = validate_config({
        "system": {"model": "fermi-chain", "L": 4, "t_c": 0.3},
        "baths": [{"id": "lead", "gamma": 0.05, "beta": 1.0, "M": 1}],
        "time": {"tau_max": 1.0, "dtau": 0.5},
        "analysis": {"quadrature_points": 200},
    })
    pipe = ExtractionPipeline(run)
    psi = np.zeros(16, dtype=complex)
    psi[0b1100] = psi[0b0011] = 1.0 / np.sqrt(2.0)
    paired = np.outer(psi, psi.conj())
    assert pipe.slater_components(paired) is None, "Two-pair superposition is not a Slater determinant"
    with pytest.raises(ConfigError):
        pipe.direct_trajectory(paired, taus=[0.0, 0.5])

    single = np.zeros((16, 16), dtype=complex)
    single[0b1000, 0b1000] = single[0b0100, 0b0100] = 0.5
    components = pipe.slater_components(single)
    assert [p for p, _ in components] == pytest.approx([0.5, 0.5])


def test_interleaved_ordering_run():
    """An interleaved run goes through the P2 reordering and gives the same maps"""
    separated = ExtractionPipeline(small_siam_run())
    interleaved = ExtractionPipeline(small_siam_run(ordering="interleaved"))
    assert interleaved.layout.ordering is Ordering.INTERLEAVED
    taus = [0.0, 0.8, 1.6]
    for a, b in zip(separated.extract_maps(taus), interleaved.extract_maps(taus)):
        assert np.allclose(a.matrix, b.matrix, atol=1e-10), f"Orderings disagree at tau={a.tau}"

    rho = random_hs_state(2, np.random.default_rng(2))
    lam = interleaved.extract_maps([1.6])[0]
    direct = interleaved.direct_trajectory(rho, taus=[1.6])[0]
    assert trace_distance(lam(rho), direct) < 1e-8, "Interleaved direct evolution matches the map"


def test_decay_envelope():
    taus = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]

    def record_with(second):
        spectra = [np.array([1.0, s, 0.5 * s]) for s in second]
        return TrajectoryRecord(taus=taus, maps=[], map_eigenvalues=spectra)

    decaying = record_with([1.0] + [np.exp(-0.3 * t) * (1.0 + 0.01 * np.cos(9.0 * t)) for t in taus[1:]])
    assert pipeline.decay_envelope(decaying) == 0.0

    revival = record_with([1.0, 0.9, 0.8, 0.6, 0.5, 0.4, 0.7, 0.75, 0.7])
    rise = pipeline.decay_envelope(revival)
    assert rise == pytest.approx(0.7 - 0.6), "Third window rises above the second"
    assert not pipeline.spectral_checks(revival)["decay_envelope"]["passed"]

    short = TrajectoryRecord(taus=[0.0, 0.1], maps=[], map_eigenvalues=[np.ones(2), np.ones(2)])
    assert pipeline.decay_envelope(short) is None
    assert "decay_envelope" not in pipeline.spectral_checks(short), "Too few points to window"


def test_chain_coeffs_bundle(tmp_path):
    root = pipeline.run_chain_coeffs(small_chain_run(), str(tmp_path / "coeffs"))
    loaded = LoadedBundle(root)
    assert loaded.manifest["command"] == "chain-coeffs"
    assert loaded.manifest["chain_lengths"] == {"left": 2, "right": 2}
    rows = loaded.read_csv("series/chain_left_0.csv")
    assert [r["n"] for r in rows] == ["0", "1"]
    assert float(rows[0]["beta"]) > 0.0


def test_extract_and_predict(tmp_path):
    run = small_chain_run(steady_state_from=1.0)
    root = pipeline.run_extract(run, str(tmp_path / "extract"))
    loaded = LoadedBundle(root)
    assert loaded.verify() == []
    for name in ("map_spectrum", "generator_spectrum", "fixed_points", "cptp", "lb", "trajectory"):
        assert f"series/{name}.csv" in loaded.manifest["files"], f"{name}.csv missing"
    assert len(loaded.maps()) == 21
    assert loaded.manifest["checks"]["cptp_all"] is True

    agreement = loaded.manifest["lb_agreement"]
    assert agreement["branch"] == "generator" and agreement["window_points"] == 11
    assert loaded.manifest["checks"]["lb_relative_error"] == agreement["generator_mean_error"]
    assert agreement["map_max_error"] >= agreement["map_mean_error"]

    trajectory = loaded.read_csv("series/trajectory.csv")
    assert {row["method"] for row in trajectory} == {"direct", "slippage", "preb", "preb_stroboscopic"}
    preb = [row for row in trajectory if row["method"] == "preb"]
    assert [float(r["tau"]) for r in preb] == pytest.approx([0.5 + 0.1 * k for k in range(16)]), \
        "The PReB curve covers every grid time from the first refresh on"
    assert float(preb[0]["trace_distance"]) < 1e-10, "One refresh at tau_m_map is exact"
    strobe = [row for row in trajectory if row["method"] == "preb_stroboscopic"]
    assert [float(r["tau"]) for r in strobe] == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0])
    prediction = loaded.manifest["prediction"]
    assert prediction["tau_m_generator"] == pytest.approx(1.0)
    assert prediction["preb_repetitions"] == 4

    record = pipeline.load_record(loaded)
    assert np.array_equal(record.maps[7].matrix, loaded.maps()[7].matrix)

    predicted = pipeline.run_predict(run, str(root), str(tmp_path / "predict"), InitialState.VACUUM)
    result = LoadedBundle(predicted)
    assert result.manifest["initial_state"] == "vacuum"
    rows = result.read_csv("series/trajectory.csv")
    direct = [r for r in rows if r["method"] == "direct"]
    assert float(direct[0]["N_1"]) == pytest.approx(0.0, abs=1e-12), "Vacuum initial state"


def test_lb_bundle(tmp_path):
    root = pipeline.run_lb(small_chain_run(), str(tmp_path / "lb"))
    lb = LoadedBundle(root).manifest["lb"]
    assert lb["particle_current"] > 0.0, "Bias drives particles from left to right"
    assert lb["max_transmission"] <= 1.0 + 1e-9


def test_cli_exit_codes(tmp_path):
    assert main.main(["extract", "--preset", "no-such-preset"]) == main.EXIT_LIBRARY_ERROR
    assert main.main(["extract"]) == main.EXIT_LIBRARY_ERROR, "A config or preset is required"

    run_file = tmp_path / "run.yaml"
    run_file.write_text(
        "system: {model: fermi-chain, L: 1}\n"
        "baths:\n"
        "  - {id: lead, gamma: 0.05, beta: 1.0, M: 2}\n"
        "time: {tau_max: 0.3, dtau: 0.1}\n"
        "analysis: {quadrature_points: 200}\n"
    )
    out = tmp_path / "coeffs"
    assert main.main(["chain-coeffs", "--config", str(run_file), "--out", str(out)]) == main.EXIT_OK
    assert (out / "manifest.json").exists()


# =============================================================================
# PRESETS
# =============================================================================

@pytest.mark.slow
def test_fermi_chain_preset(tmp_path):
    """Three-site chain: CPTP maps, LB current in the steady window, slippage beats PReB"""
    run = load_config(preset="fermi-chain-fig5", overrides={"output_dir": str(tmp_path)})
    passed, root, checks = pipeline.run_validate(run)
    for name in ("cptp", "reconstruction", "unit_eigenvalue", "decay_envelope", "generator_stability", "lb_match"):
        assert checks[name]["passed"], f"Check {name} failed: {checks[name]}"
    assert passed, {name: c for name, c in checks.items() if not c["passed"]}

    extract_root = pipeline.run_extract(run)
    prediction = LoadedBundle(extract_root).manifest["prediction"]
    assert prediction["slippage_max_trace_distance"] < 1e-4, prediction
    assert prediction["preb_max_trace_distance"] > prediction["slippage_max_trace_distance"], prediction


@pytest.mark.slow
def test_interacting_chain_preset():
    """U = 0.05 chain on the dense engine: CPTP maps, slippage beats PReB just after the memory time"""
    run = load_config(preset="fermi-chain-fig6")
    pipe = ExtractionPipeline(run)
    assert pipe.layout.N == 14
    record = pipe.extract()
    assert record.all_cptp, "Every extracted map must be CPTP"

    rho0, C0 = pipe.initial_density()
    direct = pipe.direct_trajectory(rho0, C0, record.taus)
    rows, prediction = pipe.predictions(record, rho0, direct)
    assert prediction["tau_m_generator"] == pytest.approx(10.0) and prediction["tau_m_map"] == pytest.approx(10.0)
    assert prediction["slippage_max_trace_distance"] < prediction["preb_max_trace_distance"], prediction


@pytest.mark.slow
def test_siam_equilibrium_preset(tmp_path):
    run = load_config(preset="siam-eq", overrides={"output_dir": str(tmp_path)})
    passed, root, checks = pipeline.run_validate(run)
    assert checks["cptp"]["passed"] and checks["reconstruction"]["passed"]
    assert checks["particle_hole"]["passed"], checks["particle_hole"]


@pytest.mark.slow
def test_siam_high_temperature_preset(tmp_path):
    """Near-infinite temperature relaxes to the totally mixed state"""
    run = load_config(preset="siam-hot", overrides={"output_dir": str(tmp_path)})
    record = ExtractionPipeline(run).extract()
    rho_inf = record.fixed_points[-1].map_fixed_point
    assert np.max(np.abs(rho_inf - np.eye(4) / 4)) <= 1e-3, f"Fixed point diagonal {np.diag(rho_inf).real}"
