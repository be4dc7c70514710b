"""
Extraction pipeline: chain mapping, engine evolution, map extraction and analysis.

ExtractionPipeline holds everything resolved from one RunConfig; the run_*
functions below are what the CLI subcommands call.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.chain import ChainCoefficients
from ..models.hamiltonian import QuadraticHamiltonian
from ..models.layout import ModeLayout, Side
from ..models.states import CorrelationMatrix, DensityMatrix
from ..models.superoperator import MemoryTimes, NormKind, Superoperator, SuperoperatorKind
from ..models.trajectory import TrajectoryRecord
from ..models.transport import LBResult
from ..services import chainmap, edcore, gaussian, lattice, maps, systems, transport
from ..storage.bundle import LoadedBundle, ResultBundle
from ..storage.models import Engine, RunConfig
from ..utils.errors import BundleError, ConfigError, MultiplicityError, SingularMapError, UnsupportedModelError

logger = logging.getLogger(__name__)

RECONSTRUCTION_TOL = 1e-6
UNIT_EIGENVALUE_TOL = 1e-8
GENERATOR_TOL = 1e-6
LB_RELATIVE_TOL = 1e-3
SYMMETRY_TOL = 1e-8
ENVELOPE_TOL = 1e-6
ENVELOPE_WINDOWS = 4


class ExtractionPipeline:
    """Chains, layout, Hamiltonian and engine for one run configuration.

    Everything is built lazily on first use; grid points are evaluated on a
    thread pool and assembled in grid order.
    """

    def __init__(self, run: RunConfig):
        self.run = run
        self.L = run.system.L
        if run.system.model is systems.ModelPreset.SIAM:
            self.system_h, self.terms = systems.siam(run.system.U)
        else:
            self.system_h, self.terms = systems.fermi_chain(self.L, run.system.t_c, run.system.U)
        self.specs = {b.id: b.to_spec(self.L) for b in run.baths}
        self.chains: Dict[Tuple[str, int], ChainCoefficients] = {}
        self.chain_lengths: Dict[str, int] = {}
        self._layout: Optional[ModeLayout] = None
        self._hq: Optional[QuadraticHamiltonian] = None
        self._propagator: Optional[gaussian.GaussianPropagator] = None
        self._anticorrelated = None
        self._many_body = None
        self.observables = transport.observables(self.L)

        logger.info(
            f"Pipeline: model={run.system.model.value}, L={self.L}, engine={run.engine.value}, "
            f"baths={[b.id for b in run.baths]}, grid={run.time.steps + 1} points"
        )

    # =========================================================================
    # SETUP
    # =========================================================================

    def resolve_chains(self) -> Dict[str, int]:
        """Chain coefficients per bath and branch; M='auto' uses the Lieb–Robinson length"""
        if self.chain_lengths or not self.run.baths:
            return dict(self.chain_lengths)
        analysis = self.run.analysis
        for bath in self.run.baths:
            spec = self.specs[bath.id]
            if bath.M == "auto":
                M = chainmap.auto_chain_length(spec, self.run.time.tau_max, analysis.lr_safety,
                                               analysis.quadrature_points)
            else:
                M = bath.M
            empty, filled = chainmap.chains_for_bath(spec, M, analysis.quadrature_points)
            self.chains[(bath.id, 0)] = empty
            self.chains[(bath.id, 1)] = filled
            self.chain_lengths[bath.id] = M
            logger.info(f"Bath '{bath.id}': M={M} sites per branch, attached to mode {spec.coupled_system_mode}")
        return dict(self.chain_lengths)

    @property
    def layout(self) -> ModeLayout:
        if self._layout is None:
            self.resolve_chains()
            attachments = [b.attachment(self.L, self.chain_lengths[b.id]) for b in self.run.baths]
            self._layout = lattice.build_layout(self.L, attachments, self.run.ordering)
            logger.info(f"Layout: N={self._layout.N} modes, {self.run.ordering.value} ordering")
        return self._layout

    @property
    def hamiltonian(self) -> QuadraticHamiltonian:
        if self._hq is None:
            self._hq = lattice.assemble_quadratic(self.layout, self.system_h, self.chains)
        return self._hq

    def _prepare_engine(self):
        if self.run.engine is Engine.GAUSSIAN:
            if not self.terms.is_empty:
                raise UnsupportedModelError("The Gaussian engine cannot evolve interaction terms")
            if self._propagator is None:
                self._propagator = gaussian.GaussianPropagator(self.hamiltonian)
                self._anticorrelated = gaussian.initial_correlation(self.layout)
        elif self._many_body is None:
            self._many_body = lattice.build_interacting_hamiltonian(self.hamiltonian, self.terms)
            self._anticorrelated = edcore.prepare_psi_ac(self.layout)

    def _parallel(self, fn: Callable, items: Sequence) -> List:
        if self.run.threads <= 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.run.threads) as executor:
            return list(executor.map(fn, items))

    # =========================================================================
    # EXTRACTION
    # =========================================================================

    def choi_state(self, tau: float) -> DensityMatrix:
        self._prepare_engine()
        if self.run.engine is Engine.GAUSSIAN:
            return gaussian.choi_state(self._propagator, self._anticorrelated, tau)
        return edcore.choi_state(self.layout, self._many_body, tau, self._anticorrelated)

    def extract_maps(self, taus: Sequence[float]) -> List[Superoperator]:
        self._prepare_engine()
        states = self._parallel(self.choi_state, list(taus))
        return [maps.choi_to_map(rho, tau=tau) for rho, tau in zip(states, taus)]

    def generators(self, taus: Sequence[float], lam: Sequence[Superoperator]):
        """(generators, singular points); the grid spacing is the derivative step unless configured"""
        delta = self.run.derivative_step
        kappa = self.run.analysis.kappa_max
        if math.isclose(delta, self.run.time.dtau, rel_tol=1e-12):
            return maps.propagators_on_grid(lam, delta, kappa)

        after = self.extract_maps([t + delta for t in taus])
        before_taus = [t - delta for t in taus if t - delta >= 0]
        before = iter(self.extract_maps(before_taus))
        generators, singular = [], []
        for k, tau in enumerate(taus):
            previous = next(before) if tau - delta >= 0 else None
            try:
                generators.append(maps.map_to_propagator(previous, lam[k], after[k], delta, kappa))
            except SingularMapError as e:
                generators.append(None)
                singular.append((tau, e.condition))
        return generators, singular

    @staticmethod
    def _fixed_points(Lam: Superoperator, generator: Optional[Superoperator]):
        """(pair or None, reason or None); a degenerate generator still leaves the map part"""
        try:
            return maps.fixed_points(Lam, generator), None
        except MultiplicityError as e:
            if generator is None:
                return None, str(e)
            try:
                return maps.fixed_points(Lam), str(e)
            except MultiplicityError as inner:
                return None, str(inner)

    def initial_density(self, kind: systems.InitialState = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        return systems.initial_state(kind or self.run.system.initial_state, self.L)

    def extract(self) -> TrajectoryRecord:
        """Maps, generators, spectra, fixed points, CPTP reports and memory times on the grid"""
        taus = self.run.time.grid()
        self.resolve_chains()
        logger.info(f"Extracting {len(taus)} maps (engine={self.run.engine.value}, threads={self.run.threads})")
        lam = self.extract_maps(taus)

        generators, singular = self.generators(taus, lam)
        for tau, condition in singular:
            logger.warning(f"Singular map at tau={tau:g} (cond={condition:.3e}); no generator there")

        map_eigenvalues = [d.eigenvalues for d in self._parallel(maps.spectral_decomposition, lam)]
        generator_eigenvalues = self._parallel(
            lambda g: None if g is None else maps.spectral_decomposition(g).eigenvalues, generators
        )
        cptp = self._parallel(maps.validate_cptp, lam)

        record = TrajectoryRecord(
            taus=taus,
            maps=lam,
            generators=generators,
            map_eigenvalues=map_eigenvalues,
            generator_eigenvalues=generator_eigenvalues,
            cptp=cptp,
            singular_points=singular,
            chain_lengths=dict(self.chain_lengths),
        )

        results = self._parallel(lambda k: self._fixed_points(lam[k], generators[k]), range(len(taus)))
        for tau, (pair, reason) in zip(taus, results):
            record.fixed_points.append(pair)
            if reason is not None:
                record.degenerate_points.append((tau, reason))
        if record.degenerate_points:
            logger.warning(f"Degenerate fixed points at {len(record.degenerate_points)} grid point(s)")

        failed = [r for r, tau in zip(cptp, taus) if not r.passed]
        if failed:
            logger.warning(f"{len(failed)} map(s) failed the CPTP check")

        if self.run.analysis.memory_times:
            record.memory = self.memory_times(record)
        return record

    def memory_times(self, record: TrajectoryRecord) -> Optional[MemoryTimes]:
        """Memory times with rho_inf the map fixed point at the latest grid point that has one"""
        rho_inf = next((p.map_fixed_point for p in reversed(record.fixed_points) if p is not None), None)
        if rho_inf is None:
            logger.warning("No fixed point on the grid; memory times not computed")
            return None
        rho0, _ = self.initial_density()
        memory = maps.memory_times(record.taus, record.maps, record.generators, rho_inf, rho0,
                                   self.run.analysis.epsilon, self.run.analysis.norm)
        unresolved = [name for name, value in memory.to_dict().items() if value is None]
        if unresolved:
            logger.warning(f"Unresolved on this grid: {', '.join(unresolved)}")
        else:
            logger.info(
                f"Memory times: tau_m_generator={memory.tau_m_generator:g}, "
                f"tau_m_map={memory.tau_m_map:g}, tau_re={memory.tau_re:g}"
            )
        return memory

    # =========================================================================
    # DIRECT EVOLUTION
    # =========================================================================

    def direct_trajectory(self, rho0: np.ndarray, C0: np.ndarray = None,
                          taus: Sequence[float] = None) -> List[np.ndarray]:
        """Reduced system state of system ⊗ chains evolved by the engine itself.

        The Gaussian engine takes C0 for a Gaussian rho0; without it rho0 must be a
        mixture of Slater determinants, each evolved on its own.
        """
        taus = list(self.run.time.grid() if taus is None else taus)
        self._prepare_engine()
        layout = self.layout

        if self.run.engine is Engine.GAUSSIAN:
            if C0 is not None:
                components = [(1.0, C0)]
            else:
                components = self.slater_components(rho0)
                if components is None:
                    raise ConfigError("The Gaussian engine evolves mixtures of Gaussian states only")
            products = [(p, gaussian.product_correlation(layout, C)) for p, C in components]
            return self._parallel(
                lambda t: sum(p * gaussian.system_state(self._propagator, product, t).rho
                              for p, product in products),
                taus,
            )

        components = systems.pure_components(np.asarray(rho0, dtype=complex), self.L)
        if components is None:
            full = edcore.product_density(layout, rho0)
            return self._parallel(
                lambda t: edcore.system_density(edcore.evolve_density(full, self._many_body, t, layout.N), layout).rho,
                taus,
            )
        embedded = [(p, edcore.embed_system_state(layout, psi)) for p, psi in components]

        def reduced(t):
            return sum(p * edcore.system_density(edcore.evolve(psi, self._many_body, t)).rho for p, psi in embedded)

        return self._parallel(reduced, taus)

    def slater_components(self, rho: np.ndarray) -> Optional[List[Tuple[float, np.ndarray]]]:
        """(weight, C) per pure component when rho mixes Slater determinants, None otherwise"""
        components = systems.pure_components(np.asarray(rho, dtype=complex), self.L)
        if components is None:
            return None
        correlations = []
        for p, psi in components:
            C = gaussian.slater_correlation(psi, self.layout.system_roles)
            if C is None:
                return None
            correlations.append((p, C))
        return correlations

    def reconstruction_check(self, record: TrajectoryRecord) -> Tuple[List[Dict[str, Any]], float]:
        """Lambda(tau)[rho] against direct evolution for seeded random initial states.

        The exact-diagonalization engine draws every state from the Hilbert–Schmidt
        ensemble. The Gaussian engine alternates between Hilbert–Schmidt states, evolved
        through their Slater components, and random Gaussian states.
        """
        rng = np.random.default_rng(self.run.seed)
        rows = []
        worst = 0.0
        for state in range(self.run.analysis.reconstruction_states):
            C, ensemble = None, "hilbert-schmidt"
            rho = systems.random_hs_state(self.L, rng)
            if self.run.engine is Engine.GAUSSIAN and (state % 2 or self.slater_components(rho) is None):
                C, ensemble = systems.random_gaussian_correlation(self.L, rng), "gaussian"
                rho = gaussian.gaussian_rdm(CorrelationMatrix(C, self.layout.system_roles)).rho
            direct = self.direct_trajectory(rho, C, record.taus)
            for tau, Lam, expected in zip(record.taus, record.maps, direct):
                error = maps.trace_distance(Lam(rho), expected)
                worst = max(worst, error)
                rows.append({"tau": tau, "state": state, "ensemble": ensemble, "trace_distance": error})
        logger.info(f"Reconstruction: {self.run.analysis.reconstruction_states} states, max trace distance {worst:.3e}")
        return rows, worst

    # =========================================================================
    # OBSERVABLES AND TRANSPORT
    # =========================================================================

    def observable_columns(self) -> List[str]:
        return [f"N_{i + 1}" for i in range(self.L)] + [f"J_{i + 1}" for i in range(self.L - 1)]

    def observable_row(self, rho: np.ndarray) -> Dict[str, float]:
        row = {f"N_{i + 1}": transport.expectation(rho, op) for i, op in enumerate(self.observables.densities)}
        row.update({f"J_{i + 1}": transport.expectation(rho, op) for i, op in enumerate(self.observables.currents)})
        bond = self.run.current_bond
        if bond is not None:
            row["particle_current"] = transport.particle_current(rho, self.run.system.t_c, bond, self.observables)
        return row

    def lead_baths(self):
        """(left, right) bath specs, or None unless there is one bath on each side"""
        by_side = {b.side: self.specs[b.id] for b in self.run.baths}
        if Side.LEFT in by_side and Side.RIGHT in by_side:
            return by_side[Side.LEFT], by_side[Side.RIGHT]
        return None

    def lb(self) -> LBResult:
        leads = self.lead_baths()
        if leads is None:
            raise UnsupportedModelError("Landauer–Büttiker needs one bath on each side")
        result = transport.lb_currents(self.system_h, leads[0], leads[1], self.terms)
        logger.info(f"Landauer–Büttiker: J_P={result.particle_current:.6e}, J_E={result.energy_current:.6e}")
        return result

    def lb_agreement(self, record: TrajectoryRecord, lb: LBResult) -> Optional[Dict[str, Any]]:
        """Fixed-point currents against J_P over the steady window (tau >= steady_state_from).

        The generator fixed point is the kernel of L(tau) and carries no memory of the
        initial state, so its window mean is what `relative_error` compares with J_P.
        The map fixed point keeps the initial-slippage term, which decays only at the
        slowest system rate; its numbers are reported alongside.
        """
        bond = self.run.current_bond
        if bond is None or lb.particle_current == 0.0:
            return None
        start = self.run.analysis.steady_state_from
        t_c = self.run.system.t_c
        window = [p for tau, p in zip(record.taus, record.fixed_points) if tau >= start - 1e-9 and p is not None]
        map_currents = np.array([
            transport.particle_current(p.map_fixed_point, t_c, bond, self.observables) for p in window
        ])
        generator_currents = np.array([
            transport.particle_current(p.generator_fixed_point, t_c, bond, self.observables)
            for p in window if p.generator_fixed_point is not None
        ])
        if map_currents.size == 0:
            return None

        J = lb.particle_current
        agreement: Dict[str, Any] = {
            "window_start": start,
            "window_points": int(map_currents.size),
            "map_mean_error": float(abs(map_currents.mean() - J) / abs(J)),
            "map_max_error": float(np.max(np.abs(map_currents - J)) / abs(J)),
            "generator_mean_error": None,
            "generator_max_error": None,
            "branch": "map",
        }
        if generator_currents.size:
            agreement.update(
                generator_mean_error=float(abs(generator_currents.mean() - J) / abs(J)),
                generator_max_error=float(np.max(np.abs(generator_currents - J)) / abs(J)),
                branch="generator",
            )
        agreement["relative_error"] = agreement[f"{agreement['branch']}_mean_error"]
        return agreement

    # =========================================================================
    # PREDICTION
    # =========================================================================

    def predictions(self, record: TrajectoryRecord, rho0: np.ndarray,
                    direct: Sequence[np.ndarray]) -> Tuple[List[Dict[str, Any]], Dict[str, Any]]:
        """Trajectory rows (direct, slippage, preb, preb_stroboscopic) and a summary of the memory times used"""
        rows = [dict(tau=tau, method="direct", **self.observable_row(rho)) for tau, rho in zip(record.taus, direct)]
        summary: Dict[str, Any] = {}
        analysis = self.run.analysis
        memory = record.memory

        tau_l = analysis.tau_m_generator
        if tau_l is None and memory is not None:
            tau_l = memory.tau_m_generator
        if tau_l is None:
            logger.warning("No generator memory time; slippage prediction skipped")
        else:
            k = self._grid_index(record, tau_l, "tau_m_generator")
            generator = record.generators[k] if record.generators else None
            if generator is None:
                logger.warning(f"No generator at tau={record.taus[k]:g}; slippage prediction skipped")
            else:
                times = record.taus[k:]
                states = maps.slippage_propagate(record.maps[k], generator, rho0, times)
                worst = self._append_predicted(rows, "slippage", times, states, direct[k:])
                summary.update(tau_m_generator=record.taus[k], slippage_max_trace_distance=worst)

        tau_map = analysis.tau_m_map
        if tau_map is None and memory is not None:
            tau_map = memory.tau_m_map
        if tau_map is None:
            logger.warning("No map memory time; PReB prediction skipped")
            return rows, summary
        k = self._grid_index(record, tau_map, "tau_m_map")
        if record.taus[k] <= 0:
            logger.warning("Map memory time rounds to tau=0; PReB prediction skipped")
            return rows, summary
        period = record.taus[k]
        times, states, repetitions = self._preb_curve(record, k, rho0)
        expected = [direct[record.index_of(t)] for t in times]
        worst = self._append_predicted(rows, "preb", times, states, expected)
        summary.update(tau_m_map=period, preb_repetitions=repetitions, preb_max_trace_distance=worst)

        offset = self._grid_index(record, analysis.preb_offset, "preb_offset")
        t1 = record.taus[offset]
        n = max(int(math.floor((record.taus[-1] - t1) / period + 1e-9)), 0)
        states = maps.preb_trajectory(record.maps[k], record.maps[offset], rho0, n)
        times = [t1 + j * period for j in range(n + 1)]
        expected = [direct[record.index_of(t)] for t in times]
        worst = self._append_predicted(rows, "preb_stroboscopic", times, states, expected)
        summary.update(preb_offset=t1, preb_stroboscopic_max_trace_distance=worst)
        return rows, summary

    @staticmethod
    def _preb_curve(record: TrajectoryRecord, k: int, rho0: np.ndarray):
        """rho(n tau + t1) = Lambda(tau)^n Lambda(t1)[rho0] on every grid time >= tau, 0 <= t1 < tau.

        Returns (times, states, largest n) in grid order.
        """
        period = record.taus[k]
        points = []
        repetitions = 0
        for i in range(k):
            t1 = record.taus[i]
            n = int(math.floor((record.taus[-1] - t1) / period + 1e-9))
            if n < 1:
                continue
            repetitions = max(repetitions, n)
            trajectory = maps.preb_trajectory(record.maps[k], record.maps[i], rho0, n)
            for j in range(1, n + 1):
                t = t1 + j * period
                if record.on_grid(t):
                    points.append((record.taus[record.index_of(t)], trajectory[j]))
        points.sort(key=lambda point: point[0])
        return [t for t, _ in points], [rho for _, rho in points], repetitions

    @staticmethod
    def _grid_index(record: TrajectoryRecord, tau: float, name: str) -> int:
        k = record.index_of(tau)
        if not record.on_grid(tau):
            logger.warning(f"{name}={tau:g} is not on the grid; using nearest point tau={record.taus[k]:g}")
        return k

    def _append_predicted(self, rows, method, times, states, expected) -> float:
        worst = 0.0
        for tau, rho, target in zip(times, states, expected):
            error = maps.trace_distance(rho, target)
            worst = max(worst, error)
            rows.append(dict(tau=tau, method=method, trace_distance=error, **self.observable_row(rho)))
        return worst


# =============================================================================
# SUBCOMMANDS
# =============================================================================

def _output_dir(run: RunConfig, command: str, out: Optional[str]) -> Path:
    if out:
        return Path(out)
    return Path(run.output_dir) / f"{run.preset or 'run'}-{command}"


def _write_record(bundle: ResultBundle, pipeline: ExtractionPipeline, record: TrajectoryRecord):
    spectrum = [
        {"tau": tau, "i": i, "re": ev.real, "im": ev.imag, "abs": abs(ev)}
        for tau, evs in zip(record.taus, record.map_eigenvalues) for i, ev in enumerate(evs)
    ]
    bundle.write_csv("map_spectrum", spectrum, ["tau", "i", "re", "im", "abs"])

    generator_spectrum = [
        {"tau": tau, "i": i, "re": ev.real, "im": ev.imag}
        for tau, evs in zip(record.taus, record.generator_eigenvalues) if evs is not None
        for i, ev in enumerate(evs)
    ]
    bundle.write_csv("generator_spectrum", generator_spectrum, ["tau", "i", "re", "im"])

    columns = pipeline.observable_columns()
    fixed = []
    for tau, pair in zip(record.taus, record.fixed_points):
        if pair is None:
            continue
        fixed.append(dict(tau=tau, kind="map", residual=pair.map_residual,
                          **pipeline.observable_row(pair.map_fixed_point)))
        if pair.generator_fixed_point is not None:
            fixed.append(dict(tau=tau, kind="generator", residual=pair.generator_residual,
                              **pipeline.observable_row(pair.generator_fixed_point)))
    bundle.write_csv("fixed_points", fixed, ["tau", "kind"] + columns + ["particle_current", "residual"])

    bundle.write_csv(
        "cptp",
        [dict(tau=tau, trace_residual=r.trace_residual, choi_min_eig=r.choi_min_eigenvalue,
              hermiticity_residual=r.hermiticity_residual, passed=r.passed)
         for tau, r in zip(record.taus, record.cptp)],
        ["tau", "trace_residual", "choi_min_eig", "hermiticity_residual", "passed"],
    )

    if pipeline.run.analysis.write_maps:
        for k, Lam in enumerate(record.maps):
            bundle.write_map(Lam, k)
        for k, generator in enumerate(record.generators):
            if generator is not None:
                bundle.write_map(generator, k)

    bundle.set("chain_lengths", record.chain_lengths)
    bundle.set("grid", {"tau": list(record.taus)})
    bundle.set("singular_points", [{"tau": t, "condition": c} for t, c in record.singular_points])
    bundle.set("degenerate_points", [{"tau": t, "reason": r} for t, r in record.degenerate_points])
    bundle.set("memory_times", record.memory.to_dict() if record.memory else None)


def _write_chains(bundle: ResultBundle, pipeline: ExtractionPipeline):
    for (bath_id, branch), coeffs in sorted(pipeline.chains.items()):
        bundle.write_csv(f"chain_{bath_id}_{branch}", coeffs.rows(), ["n", "gamma", "beta"], schema="chain")


def _trajectory_columns(pipeline: ExtractionPipeline) -> List[str]:
    return ["tau", "method"] + pipeline.observable_columns() + ["particle_current", "trace_distance"]


def _lb_applicable(pipeline: ExtractionPipeline) -> bool:
    return pipeline.lead_baths() is not None and pipeline.terms.is_empty and pipeline.run.system.model is systems.ModelPreset.FERMI_CHAIN


def run_chain_coeffs(run: RunConfig, out: Optional[str] = None) -> Path:
    """Recurrence coefficients of every bath branch, one CSV each"""
    pipeline = ExtractionPipeline(run)
    bundle = ResultBundle(_output_dir(run, "chain-coeffs", out), "chain-coeffs", run.resolved())
    pipeline.resolve_chains()
    _write_chains(bundle, pipeline)
    bundle.set("chain_lengths", pipeline.chain_lengths)
    bundle.finalize()
    return bundle.root


def run_extract(run: RunConfig, out: Optional[str] = None) -> Path:
    """Full extraction bundle, plus LB comparison and predictions where they apply"""
    pipeline = ExtractionPipeline(run)
    bundle = ResultBundle(_output_dir(run, "extract", out), "extract", run.resolved())
    record = pipeline.extract()
    _write_chains(bundle, pipeline)
    _write_record(bundle, pipeline, record)
    checks: Dict[str, Any] = {"cptp_all": record.all_cptp}

    if _lb_applicable(pipeline):
        lb = pipeline.lb()
        bundle.write_csv("lb", lb.rows(), ["omega", "transmission"])
        bundle.set("lb", lb.to_dict())
        agreement = pipeline.lb_agreement(record, lb)
        bundle.set("lb_agreement", agreement)
        checks["lb_relative_error"] = None if agreement is None else agreement["relative_error"]

    if run.analysis.observables:
        rho0, C0 = pipeline.initial_density()
        direct = pipeline.direct_trajectory(rho0, C0, record.taus)
        rows, summary = pipeline.predictions(record, rho0, direct)
        bundle.write_csv("trajectory", rows, _trajectory_columns(pipeline))
        bundle.set("prediction", summary)

    bundle.set("checks", checks)
    bundle.finalize()
    return bundle.root


def load_record(bundle: LoadedBundle) -> TrajectoryRecord:
    """Maps, generators and memory times stored by run_extract"""
    changed = bundle.verify()
    if changed:
        raise BundleError(f"Bundle files do not match the manifest: {', '.join(changed)}")
    taus = bundle.taus
    lam = bundle.maps(SuperoperatorKind.MAP)
    if len(lam) != len(taus):
        raise BundleError(f"Bundle holds {len(lam)} maps for {len(taus)} grid points (was write_maps disabled?)")
    generators = bundle.maps(SuperoperatorKind.GENERATOR)
    memory = bundle.manifest.get("memory_times")
    if memory is not None:
        memory = MemoryTimes(**{**memory, "norm": NormKind(memory["norm"])})
    return TrajectoryRecord(
        taus=list(taus),
        maps=[lam[k] for k in range(len(taus))],
        generators=[generators.get(k) for k in range(len(taus))],
        memory=memory,
        chain_lengths=bundle.manifest.get("chain_lengths", {}),
    )


def run_predict(run: RunConfig, bundle_path: str, out: Optional[str] = None,
                initial_state: systems.InitialState = None) -> Path:
    """Slippage and PReB trajectories from stored maps, against direct evolution"""
    record = load_record(LoadedBundle(bundle_path))
    pipeline = ExtractionPipeline(run)
    rho0, C0 = pipeline.initial_density(initial_state)
    direct = pipeline.direct_trajectory(rho0, C0, record.taus)
    rows, summary = pipeline.predictions(record, rho0, direct)

    bundle = ResultBundle(_output_dir(run, "predict", out), "predict", run.resolved())
    bundle.write_csv("trajectory", rows, _trajectory_columns(pipeline))
    bundle.set("source_bundle", str(bundle_path))
    bundle.set("initial_state", (initial_state or run.system.initial_state).value)
    bundle.set("grid", {"tau": list(record.taus)})
    bundle.set("prediction", summary)
    bundle.finalize()
    return bundle.root


def run_lb(run: RunConfig, out: Optional[str] = None) -> Path:
    pipeline = ExtractionPipeline(run)
    lb = pipeline.lb()
    bundle = ResultBundle(_output_dir(run, "lb", out), "lb", run.resolved())
    bundle.write_csv("lb", lb.rows(), ["omega", "transmission"])
    bundle.set("lb", lb.to_dict())
    bundle.finalize()
    return bundle.root


def _check(passed: bool, value, tolerance) -> Dict[str, Any]:
    return {"passed": bool(passed), "value": value, "tolerance": tolerance}


def decay_envelope(record: TrajectoryRecord, windows: int = ENVELOPE_WINDOWS) -> Optional[float]:
    """Largest rise of a non-unit map eigenvalue modulus between consecutive time windows.

    The tau > 0 grid is split into `windows` equal slices; for every rank i >= 1 of
    the moduli sorted in decreasing order, the slice maxima must not increase.
    None when the grid has fewer points than windows.
    """
    moduli = [np.sort(np.abs(evs))[::-1][1:] for tau, evs in zip(record.taus, record.map_eigenvalues) if tau > 0]
    if len(moduli) < max(windows, 2):
        return None
    maxima = np.array([np.max(block, axis=0) for block in np.array_split(np.array(moduli), windows)])
    return float(max(np.max(np.diff(maxima, axis=0)), 0.0))


def spectral_checks(record: TrajectoryRecord) -> Dict[str, Dict[str, Any]]:
    """One unit-modulus map eigenvalue at every tau > 0, decaying non-unit moduli,
    generator spectra in the closed left half-plane"""
    extra_units = 0
    max_modulus = 0.0
    for tau, evs in zip(record.taus, record.map_eigenvalues):
        if tau <= 0:
            continue
        moduli = np.abs(evs)
        extra_units = max(extra_units, int(np.sum(np.abs(moduli - 1.0) <= UNIT_EIGENVALUE_TOL)) - 1)
        max_modulus = max(max_modulus, float(moduli.max()))
    unit_ok = extra_units == 0 and max_modulus <= 1.0 + UNIT_EIGENVALUE_TOL

    rise = decay_envelope(record)

    max_real = -math.inf
    zero_gap = 0.0
    for evs in record.generator_eigenvalues:
        if evs is None:
            continue
        max_real = max(max_real, float(np.max(evs.real)))
        zero_gap = max(zero_gap, float(np.min(np.abs(evs))))
    checks = {
        "unit_eigenvalue": _check(unit_ok, max_modulus, UNIT_EIGENVALUE_TOL),
        "generator_stability": _check(max_real <= GENERATOR_TOL and zero_gap <= GENERATOR_TOL,
                                      max_real, GENERATOR_TOL),
    }
    if rise is not None:
        checks["decay_envelope"] = _check(rise <= ENVELOPE_TOL, rise, ENVELOPE_TOL)
    return checks


def symmetry_checks(record: TrajectoryRecord) -> Dict[str, Dict[str, Any]]:
    """Spin and particle-hole symmetry of the impurity fixed points at the last grid point"""
    pair = next((p for p in reversed(record.fixed_points) if p is not None), None)
    if pair is None:
        return {"particle_hole": _check(False, None, SYMMETRY_TOL)}
    states = [pair.map_fixed_point]
    if pair.generator_fixed_point is not None:
        states.append(pair.generator_fixed_point)
    # basis: empty, down, up, double
    deviation = max(
        max(abs(rho[1, 1] - rho[2, 2]), abs(rho[0, 0] - rho[3, 3])) for rho in states
    )
    return {"particle_hole": _check(deviation <= SYMMETRY_TOL, float(deviation), SYMMETRY_TOL)}


def run_validate(run: RunConfig, out: Optional[str] = None) -> Tuple[bool, Path, Dict[str, Dict[str, Any]]]:
    """Extraction plus every applicable check; returns (all passed, bundle root, checks)"""
    pipeline = ExtractionPipeline(run)
    bundle = ResultBundle(_output_dir(run, "validate", out), "validate", run.resolved())
    record = pipeline.extract()
    _write_record(bundle, pipeline, record)

    worst_cptp = max(max(r.trace_residual, -r.choi_min_eigenvalue) for r in record.cptp)
    checks = {"cptp": _check(record.all_cptp, worst_cptp, 1e-8)}

    rows, worst = pipeline.reconstruction_check(record)
    bundle.write_csv("reconstruction", rows, ["tau", "state", "ensemble", "trace_distance"])
    checks["reconstruction"] = _check(worst <= RECONSTRUCTION_TOL, worst, RECONSTRUCTION_TOL)

    checks.update(spectral_checks(record))

    if _lb_applicable(pipeline):
        lb = pipeline.lb()
        bundle.write_csv("lb", lb.rows(), ["omega", "transmission"])
        bundle.set("lb", lb.to_dict())
        agreement = pipeline.lb_agreement(record, lb)
        if agreement is None:
            logger.warning(f"Grid ends before tau={run.analysis.steady_state_from:g}; LB comparison skipped")
        else:
            bundle.set("lb_agreement", agreement)
            error = agreement["relative_error"]
            checks["lb_match"] = _check(error <= LB_RELATIVE_TOL, error, LB_RELATIVE_TOL)

    if record.memory is not None and record.memory.resolved:
        checks["memory_ordering"] = _check(record.memory.is_ordered(), record.memory.to_dict(), None)

    if run.system.model is systems.ModelPreset.SIAM:
        checks.update(symmetry_checks(record))

    passed = all(c["passed"] for c in checks.values())
    for name, check in checks.items():
        level = logging.INFO if check["passed"] else logging.WARNING
        logger.log(level, f"Check {name}: {'PASS' if check['passed'] else 'FAIL'} (value={check['value']})")
    bundle.set("checks", checks)
    bundle.set("passed", passed)
    bundle.finalize()
    return passed, bundle.root, checks
