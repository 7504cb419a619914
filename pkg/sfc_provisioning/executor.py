"""
sfc_provisioning/executor.py

Runs placement engines on a scenario and sweeps packet sizes.

Engines:
    oracle  exhaustive optimum (also recorded in the golden store)
    mfg     coupled HJB/FPK fixed point, decoded from the gateways
    rl      actor-critic learner, greedy decode
    ga      genetic-algorithm baseline
"""

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import RunConfig
from .delay_model import breakdown_frame, chain_delays, reference_objective
from .ga_baseline import evolve
from .golden import GoldenValueStore
from .mdp_learner import Policy, extract_placement, train
from .mfg_core import build_kernel, build_state_space, decode_solution, solve_mfg
from .oracle import optimal_placement
from .oracle import reference_objective as independent_objective
from .scenario import Scenario
from .topology import PlacementMatrix, is_feasible
from .workload import count_timeouts, generate_requests

logger = logging.getLogger(__name__)

ENGINES = ("mfg", "rl", "ga", "oracle")
DETERMINISTIC_ENGINES = ("mfg", "oracle")

SUMMARY_COLUMNS = [
    "engine",
    "seed",
    "objective_ms",
    "reference_delay_ms",
    "timeouts",
    "wall_time_s",
    "converged",
    "feasible",
]
SWEEP_COLUMNS = [
    "chain",
    "beta",
    "engine",
    "mean_delay_ms",
    "std_delay_ms",
    "seeds",
    "infeasible",
]


@dataclass
class EngineResult:
    """Outcome of one engine run."""

    engine: str
    seed: int
    packet_size: float
    placement: PlacementMatrix
    objective_ms: float
    reference_delay_ms: float
    timeouts: int
    wall_time_s: float
    converged: bool
    feasible: bool
    artefacts: Dict[str, pd.DataFrame] = field(default_factory=dict)
    policy: Optional[Policy] = None

    def summary_row(self, timing: bool = True) -> Dict[str, object]:
        return {
            "engine": self.engine,
            "seed": self.seed,
            "objective_ms": self.objective_ms,
            "reference_delay_ms": self.reference_delay_ms,
            "timeouts": self.timeouts,
            "wall_time_s": self.wall_time_s if timing else 0.0,
            "converged": self.converged,
            "feasible": self.feasible,
        }


def beta_grid(beta_min: float, beta_max: float, steps: int) -> List[float]:
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if beta_min > beta_max:
        raise ValueError(f"beta_min {beta_min:g} exceeds beta_max {beta_max:g}")
    if steps == 1:
        return [float(beta_min)]
    return [float(b) for b in np.linspace(beta_min, beta_max, steps)]


class ExperimentExecutor:
    """Runs engines against one scenario under one RunConfig."""

    def __init__(self, scenario: Scenario, config: RunConfig):
        self.scenario = scenario
        self.config = config
        self._golden_lock = threading.Lock()

    @property
    def reference_packet_size(self) -> float:
        """Training packet size: the run config value, else the scenario's."""
        return self.config.reference_packet_size or self.scenario.reference_packet_size

    # ------------------------------------------------------------------
    # Single engine
    # ------------------------------------------------------------------

    def _solve(
        self,
        engine: str,
        seed: int,
        packet_size: float,
        status_callback: Optional[Callable[[str], None]] = None,
        progress_callback: Optional[Callable[[int, int, str], None]] = None,
    ) -> Tuple[PlacementMatrix, bool, Dict[str, pd.DataFrame], Optional[Policy]]:
        scenario = self.scenario
        if engine == "oracle":
            placement, value = optimal_placement(
                scenario,
                [packet_size],
                limit=self.config.enumeration_limit,
                progress_callback=progress_callback,
            )
            self._record_golden(placement, value, packet_size)
            return placement, True, {}, None

        if engine == "mfg":
            mfg = self.config.mfg
            space = build_state_space(scenario)
            kernel = build_kernel(space, scenario, packet_size, mfg.congestion_weight)
            solution = solve_mfg(
                space,
                kernel,
                tol=mfg.tol,
                max_iters=mfg.max_iters,
                damping=mfg.damping,
                tie_break=mfg.tie_break,
                literal_fpk=mfg.literal_fpk,
                status_callback=status_callback,
            )
            artefacts = {
                "mfg_convergence": solution.convergence_frame(),
                "mfg_solution": solution.solution_frame(),
            }
            return decode_solution(solution, scenario), solution.converged, artefacts, None

        if engine == "rl":
            result = train(
                scenario,
                self.config.learner_config(seed),
                packet_size=packet_size,
                status_callback=status_callback,
                progress_callback=progress_callback,
            )
            placement = extract_placement(
                result.policy, scenario, result.critic, result.kernel, result.reward_scale
            )
            artefacts = {"training_log": result.log.to_frame()}
            return placement, result.log.converged, artefacts, result.policy

        if engine == "ga":
            result = evolve(
                self.config.ga_config(seed),
                scenario,
                [packet_size],
                progress_callback=progress_callback,
            )
            tail = result.history[-max(1, len(result.history) // 10) :]
            settled = tail[0].best == tail[-1].best
            return result.placement, settled, {"fitness_history": result.history_frame()}, None

        raise ValueError(f"Unknown engine '{engine}'. Choose from: {', '.join(ENGINES)}")

    def _record_golden(self, placement: PlacementMatrix, value: float, packet_size: float):
        with self._golden_lock:
            store = GoldenValueStore(self.config.golden_path)
            stored = store.get(self.scenario, [packet_size])
            if stored is None:
                store.record(self.scenario, [packet_size], value, placement)
            elif abs(stored - value) > 1e-9 * max(1.0, abs(value)):
                logger.warning(
                    f"Oracle optimum {value:.9g} ms differs from golden value "
                    f"{stored:.9g} ms for '{self.scenario.name}'"
                )

    def run_engine(
        self,
        engine: str,
        seed: int = 0,
        packet_size: Optional[float] = None,
        status_callback: Optional[Callable[[str], None]] = None,
        progress_callback: Optional[Callable[[int, int, str], None]] = None,
    ) -> EngineResult:
        """Run one engine and evaluate its placement on the workload trace."""
        scenario = self.scenario
        beta = packet_size or self.reference_packet_size
        started = time.perf_counter()
        placement, converged, artefacts, policy = self._solve(
            engine, seed, beta, status_callback, progress_callback
        )
        wall_time = time.perf_counter() - started

        requests = generate_requests(scenario.workload)
        feasible = is_feasible(placement, scenario.topology, scenario.chains)
        if not feasible:
            logger.warning(f"{engine} placement (seed {seed}) violates node capacity")
        delays = breakdown_frame(requests, placement, scenario)
        artefacts["request_delays"] = delays
        artefacts["placement"] = pd.DataFrame(placement.rows(), columns=["chain", "vnf", "node"])

        return EngineResult(
            engine=engine,
            seed=seed,
            packet_size=beta,
            placement=placement,
            objective_ms=reference_objective(
                placement, scenario.topology, scenario.chains, [beta]
            ),
            reference_delay_ms=independent_objective(placement, scenario, [beta]),
            timeouts=count_timeouts(requests, delays["total_ms"].tolist()),
            wall_time_s=wall_time,
            converged=bool(converged),
            feasible=feasible,
            artefacts=artefacts,
            policy=policy,
        )

    # ------------------------------------------------------------------
    # Packet-size sweep
    # ------------------------------------------------------------------

    def sweep(
        self,
        engines: Sequence[str],
        packet_sizes: Sequence[float],
        seeds: Sequence[int],
        retrain_per_beta: bool = False,
        workers: int = 1,
        progress_callback: Optional[Callable[[int, int, str], None]] = None,
        status_callback: Optional[Callable[[str], None]] = None,
    ) -> pd.DataFrame:
        """
        Per (chain, beta, engine): mean and population std of the chain
        delay over seeds. Placements are trained at the reference packet
        size and evaluated at every beta, unless ``retrain_per_beta``.
        """
        unknown = [e for e in engines if e not in ENGINES]
        if unknown:
            raise ValueError(f"Unknown engine(s): {', '.join(unknown)}")
        if not seeds:
            raise ValueError("At least one seed is required")
        scenario = self.scenario
        reference = self.reference_packet_size
        training_betas = list(packet_sizes) if retrain_per_beta else [reference]

        # Deterministic engines run once per training beta.
        cells: List[Tuple[str, int, float]] = []
        for engine in engines:
            cell_seeds = seeds[:1] if engine in DETERMINISTIC_ENGINES else seeds
            for beta in training_betas:
                for seed in cell_seeds:
                    cells.append((engine, seed, beta))

        print_lock = threading.Lock()
        done = [0]

        def _run(cell):
            engine, seed, beta = cell
            placement, *_ = self._solve(engine, seed, beta)
            with print_lock:
                done[0] += 1
                if progress_callback:
                    progress_callback(done[0], len(cells), f"{engine} seed={seed} beta={beta:g}")
            return placement

        placements: List[Optional[PlacementMatrix]] = [None] * len(cells)
        if workers <= 1:
            for n, cell in enumerate(cells):
                placements[n] = _run(cell)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {pool.submit(_run, cell): n for n, cell in enumerate(cells)}
                for future in as_completed(futures):
                    placements[futures[future]] = future.result()

        trained = {cell: placement for cell, placement in zip(cells, placements)}
        feasible = {
            cell: is_feasible(placement, scenario.topology, scenario.chains)
            for cell, placement in trained.items()
        }
        excluded = sorted(
            {(engine, seed) for (engine, seed, _), ok in feasible.items() if not ok}
        )
        if excluded:
            logger.warning(
                "Capacity-violating placements left out of sweep statistics: "
                + ", ".join(f"{engine} seed {seed}" for engine, seed in excluded)
            )

        rows = []
        for chain in scenario.chains:
            for beta in packet_sizes:
                for engine in engines:
                    train_beta = beta if retrain_per_beta else reference
                    cell_seeds = seeds[:1] if engine in DETERMINISTIC_ENGINES else seeds
                    kept = [s for s in cell_seeds if feasible[(engine, s, train_beta)]]
                    samples = [
                        chain_delays(trained[(engine, seed, train_beta)], scenario, beta)[
                            chain.id
                        ].total
                        for seed in kept
                    ]
                    rows.append(
                        {
                            "chain": chain.id,
                            "beta": beta,
                            "engine": engine,
                            "mean_delay_ms": float(np.mean(samples)) if samples else np.nan,
                            "std_delay_ms": float(np.std(samples)) if samples else np.nan,
                            "seeds": len(kept),
                            "infeasible": len(cell_seeds) - len(kept),
                        }
                    )
        if status_callback:
            status_callback(f"{len(cells)} engine run(s), {len(rows)} sweep rows")
        return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def write_csv(frame: pd.DataFrame, path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
