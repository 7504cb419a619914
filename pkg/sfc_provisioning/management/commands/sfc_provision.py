"""
sfc_provisioning/management/commands/sfc_provision.py

Django management command driving the SFC provisioning simulator.
"""

import re
import sys
from datetime import datetime
from pathlib import Path

import pandas as pd
from django.core.management.base import BaseCommand, CommandError

from ...config import load_run_config
from ...delay_model import chain_delays
from ...executor import ENGINES, SUMMARY_COLUMNS, ExperimentExecutor, beta_grid, write_csv
from ...golden import GoldenValueStore
from ...mdp_learner import extract_placement, load_policy, save_policy
from ...mfg_core import build_state_space
from ...scenario import SCENARIO_TEMPLATES, dump_scenario, load_scenario
from ...topology import validate_topology
from ...workload import chain_counts, export_requests_csv, generate_requests


class TeeWriter:
    """Writes to the wrapped stdout AND, if a log_file is open, streams to it in real-time."""

    def __init__(self, wrapped, log_file=None):
        self._wrapped = wrapped
        self._log_file = log_file

    def write(self, msg, style_func=None, ending="\n"):
        self._wrapped.write(msg, style_func=style_func, ending=ending)
        if self._log_file:
            clean = re.sub(r"\x1b\[[0-9;]*m", "", msg + ending)
            self._log_file.write(clean)
            self._log_file.flush()

    def flush(self):
        self._wrapped.flush()

    def __getattr__(self, name):
        return getattr(self._wrapped, name)


class Command(BaseCommand):
    help = """
SFC resource provisioning simulator

Commands:
    run           - Run one engine (mfg, rl, ga, oracle) and write its CSVs
    sweep         - Evaluate engines over a packet-size grid (sweep.csv)
    scenario-gen  - Write a bundled scenario template to a JSON file
    validate      - Check a scenario for structural problems
    workload      - Generate the request trace of a scenario (requests.csv)
    decode        - Decode a saved policy into a placement

Examples:
    python manage.py sfc_provision scenario-gen --template paper --out scenarios/paper.json
    python manage.py sfc_provision run --scenario scenarios/paper.json --engine rl --seed 3
    python manage.py sfc_provision run --engine oracle --out results/oracle
    python manage.py sfc_provision sweep --engines rl,ga --seeds 0,1,2 --beta-steps 20
    python manage.py sfc_provision decode --scenario scenarios/paper.json --policy results/policy.txt
    """

    def add_arguments(self, parser):
        parser.add_argument(
            "action",
            type=str,
            choices=["run", "sweep", "scenario-gen", "validate", "workload", "decode"],
            help="Action to perform",
        )

        # Scenario source
        parser.add_argument(
            "--scenario",
            type=str,
            metavar="FILE",
            help="Scenario JSON file (default: the bundled template, see --template)",
        )
        parser.add_argument(
            "--template",
            type=str,
            choices=sorted(SCENARIO_TEMPLATES),
            default="paper",
            help="Bundled scenario template (default: paper)",
        )
        parser.add_argument(
            "--demand-fraction",
            type=float,
            help="scenario-gen: set every VNF demand to this fraction of the "
            "reference node capacity",
        )

        # Engines
        parser.add_argument(
            "--engine",
            type=str,
            choices=ENGINES,
            default="rl",
            help="Engine for run (default: rl)",
        )
        parser.add_argument(
            "--engines",
            type=str,
            default="rl,ga",
            help="Comma-separated engines for sweep (default: rl,ga)",
        )
        parser.add_argument("--seed", type=int, default=0, help="Seed for run (default: 0)")
        parser.add_argument(
            "--seeds",
            type=str,
            default="0",
            help="Comma-separated seeds for sweep (default: 0)",
        )
        parser.add_argument(
            "--episodes",
            type=int,
            help="Learner episodes (default: SFC_DEFAULTS['learner']['episodes'])",
        )

        # Packet-size grid
        parser.add_argument(
            "--beta-min",
            type=float,
            default=100_000.0,
            help="Smallest packet size in bytes (default: 100000)",
        )
        parser.add_argument(
            "--beta-max",
            type=float,
            default=2_000_000.0,
            help="Largest packet size in bytes (default: 2000000)",
        )
        parser.add_argument(
            "--beta-steps",
            type=int,
            default=20,
            help="Number of grid points (default: 20)",
        )
        parser.add_argument(
            "--retrain-per-beta",
            action="store_true",
            help="Retrain every engine at each packet size instead of evaluating "
            "placements trained at the reference size",
        )

        # Output / configuration
        parser.add_argument(
            "--out",
            type=str,
            help="Output directory (default: SFC_OUTPUT_DIR). For scenario-gen, "
            "the output file (default: <SFC_OUTPUT_DIR>/<template>.json)",
        )
        parser.add_argument(
            "--config",
            type=str,
            metavar="FILE",
            help="JSON overrides for SFC_DEFAULTS, e.g. {\"ga\": {\"generations\": 50}}",
        )
        parser.add_argument(
            "--workers",
            type=int,
            help="Parallel sweep workers (default: SFC_DEFAULTS['workers'])",
        )
        parser.add_argument(
            "--policy",
            type=str,
            metavar="FILE",
            help="decode: policy file written by an rl run",
        )
        parser.add_argument(
            "--no-timing",
            action="store_true",
            help="Write 0 as wall time so summaries are byte-identical across runs",
        )
        parser.add_argument(
            "--save-log",
            action="store_true",
            help="Mirror output to <out>/logs/{timestamp}_{action}.log",
        )

    def handle(self, *args, **options):
        action = options["action"]
        start_time = datetime.now()

        log_path = None
        log_file = None
        if options.get("save_log"):
            log_path, log_file = self._open_log_file(options, action, start_time)

        tee = TeeWriter(self.stdout, log_file)
        self.stdout = tee

        try:
            if action == "run":
                self.handle_run(options)
            elif action == "sweep":
                self.handle_sweep(options)
            elif action == "scenario-gen":
                self.handle_scenario_gen(options)
            elif action == "validate":
                self.handle_validate(options)
            elif action == "workload":
                self.handle_workload(options)
            elif action == "decode":
                self.handle_decode(options)

        except CommandError:
            raise
        except Exception as e:
            raise CommandError(f"Error during {action}: {str(e)}")

        else:
            elapsed = (datetime.now() - start_time).total_seconds()
            minutes, seconds = divmod(int(elapsed), 60)
            if minutes:
                duration = f"{minutes}m {seconds}s"
            else:
                duration = f"{elapsed:.1f}s"
            self.stdout.write(self.style.HTTP_INFO(f"\nTotal time: {duration}"))

        finally:
            if log_file:
                end_time = datetime.now()
                log_file.write(f"\nEnded: {end_time.strftime('%Y-%m-%d %H:%M:%S')}\n")
                log_file.close()
                tee._log_file = None  # prevent writes to closed file
                self.stdout.write(self.style.SUCCESS(f"\nLogs saved to {log_path}"))

    # ------------------------------------------------------------------
    # Actions
    # ------------------------------------------------------------------

    def handle_run(self, options):
        """Run one engine and write its artefacts."""
        scenario = self._load_scenario(options)
        config = self._run_config(options)
        engine = options["engine"]
        seed = options["seed"]
        out = config.output_dir

        self.stdout.write(
            self.style.WARNING(f"Running {engine} on '{scenario.name}' (seed {seed})")
        )
        executor = ExperimentExecutor(scenario, config)
        result = executor.run_engine(
            engine,
            seed,
            status_callback=self._create_status_callback(),
            progress_callback=self._create_progress_callback(),
        )

        summary = pd.DataFrame(
            [result.summary_row(timing=not options["no_timing"])], columns=SUMMARY_COLUMNS
        )
        write_csv(summary, out / "summary.csv")
        for name, frame in result.artefacts.items():
            write_csv(frame, out / f"{name}.csv")
        if result.policy is not None:
            save_policy(result.policy, out / "policy.txt")

        self._display_result(result)
        self._display_golden(scenario, config, result)
        self.stdout.write(self.style.SUCCESS(f"\nResults written to: {out}"))

    def handle_sweep(self, options):
        """Evaluate engines over the packet-size grid."""
        scenario = self._load_scenario(options)
        config = self._run_config(options)
        engines = [e.strip() for e in options["engines"].split(",") if e.strip()]
        unknown = [e for e in engines if e not in ENGINES]
        if unknown:
            raise CommandError(
                f"Unknown engine(s): {', '.join(unknown)}. Choose from: {', '.join(ENGINES)}"
            )
        try:
            seeds = [int(s) for s in options["seeds"].split(",") if s.strip()]
        except ValueError:
            raise CommandError(f"--seeds must be comma-separated integers, got '{options['seeds']}'")
        grid = beta_grid(options["beta_min"], options["beta_max"], options["beta_steps"])

        self.stdout.write(
            self.style.WARNING(f"Sweeping '{scenario.name}': {', '.join(engines)}")
        )
        self.stdout.write(
            f"  Packet sizes: {len(grid)} from {grid[0]:,.0f} to {grid[-1]:,.0f} bytes"
        )
        self.stdout.write(f"  Seeds: {', '.join(str(s) for s in seeds)}")
        if config.workers > 1:
            self.stdout.write(f"  Workers: {config.workers} (parallel)")
        if options["retrain_per_beta"]:
            self.stdout.write("  Retraining at every packet size")

        executor = ExperimentExecutor(scenario, config)
        frame = executor.sweep(
            engines,
            grid,
            seeds,
            retrain_per_beta=options["retrain_per_beta"],
            workers=config.workers,
            progress_callback=self._create_progress_callback(),
            status_callback=self._create_status_callback(),
        )
        path = config.output_dir / "sweep.csv"
        write_csv(frame, path)

        last = frame[frame["beta"] == grid[-1]]
        self.stdout.write(self.style.SUCCESS(f"\n=== Sweep Complete ==="))
        self.stdout.write(f"Delay at {grid[-1]:,.0f} bytes:")
        for row in last.itertuples():
            note = f", {row.infeasible} infeasible" if row.infeasible else ""
            self.stdout.write(
                f"  {row.chain} {row.engine:>6}: {row.mean_delay_ms:9.3f} ms "
                f"(std {row.std_delay_ms:.3f}{note})"
            )
        self.stdout.write(self.style.SUCCESS(f"\nSweep written to: {path}"))

    def handle_scenario_gen(self, options):
        """Write a bundled template to JSON."""
        template = options["template"]
        factory = SCENARIO_TEMPLATES[template]
        fraction = options.get("demand_fraction")
        scenario = factory(fraction) if fraction is not None else factory()
        if options.get("out"):
            path = Path(options["out"])
        else:
            path = self._run_config(options).output_dir / f"{scenario.name}.json"
        dump_scenario(scenario, path)
        self.stdout.write(
            self.style.SUCCESS(f"Scenario '{scenario.name}' written to: {path}")
        )

    def handle_validate(self, options):
        """Report structural problems; exits non-zero when any are found."""
        scenario = self._load_scenario(options)
        report = validate_topology(scenario.topology, scenario.chains)
        self.stdout.write(self.style.WARNING(f"Validating '{scenario.name}'"))
        if report.valid:
            self.stdout.write(self.style.SUCCESS("  ✓ No issues found"))
            return
        for issue in report:
            self.stdout.write(self.style.ERROR(f"  ✗ [{issue.code}] {issue.message}"))
        raise CommandError(f"Scenario '{scenario.name}' has {len(report)} issue(s)")

    def handle_workload(self, options):
        """Generate and export the request trace."""
        scenario = self._load_scenario(options)
        config = self._run_config(options)
        requests = generate_requests(scenario.workload)
        path = export_requests_csv(requests, config.output_dir / "requests.csv")
        self.stdout.write(
            self.style.WARNING(
                f"Generated {len(requests)} request(s) over {scenario.workload.horizon} slots"
            )
        )
        for chain_id, count in sorted(chain_counts(requests).items()):
            self.stdout.write(f"  {chain_id}: {count}")
        self.stdout.write(self.style.SUCCESS(f"\nRequests written to: {path}"))

    def handle_decode(self, options):
        """Decode a saved policy into a placement."""
        policy_path = self._get_required_option(options, "policy")
        scenario = self._load_scenario(options)
        config = self._run_config(options)
        policy = load_policy(policy_path, build_state_space(scenario))
        placement = extract_placement(policy, scenario)

        self.stdout.write(self.style.WARNING(f"Decoded placement for '{scenario.name}'"))
        for row in placement.rows():
            self.stdout.write(f"  {row['chain']} {row['vnf']} -> {row['node']}")
        beta = config.reference_packet_size or scenario.reference_packet_size
        delays = chain_delays(placement, scenario, beta)
        for chain_id, delay in delays.items():
            self.stdout.write(f"  {chain_id}: {delay.total:.3f} ms")
        path = config.output_dir / "placement.csv"
        write_csv(pd.DataFrame(placement.rows(), columns=["chain", "vnf", "node"]), path)
        self.stdout.write(self.style.SUCCESS(f"\nPlacement written to: {path}"))

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _get_required_option(self, options, key):
        value = options.get(key)
        if not value:
            raise CommandError(f"--{key} is required for this action")
        return value

    def _load_scenario(self, options):
        if options.get("scenario"):
            return load_scenario(options["scenario"])
        return SCENARIO_TEMPLATES[options["template"]]()

    def _run_config(self, options):
        return load_run_config(
            options.get("config"),
            cli={
                "output_dir": options.get("out"),
                "workers": options.get("workers"),
                "learner": {"episodes": options.get("episodes")},
            },
        )

    def _create_progress_callback(self):
        """Create progress callback for long-running engines."""

        def callback(current, total, label):
            if total:
                self.stdout.write(f"  [{current}/{total}] {label}")
            else:
                self.stdout.write(f"  [{current:,}] {label}")
            self.stdout.flush()

        return callback

    def _create_status_callback(self):
        """Create callback for status messages."""

        def callback(message):
            self.stdout.write(f"    {message}")
            self.stdout.flush()

        return callback

    def _display_result(self, result):
        if result.feasible:
            self.stdout.write(self.style.SUCCESS(f"\n✓ {result.engine} placement is feasible"))
        else:
            self.stdout.write(self.style.ERROR(f"\n✗ {result.engine} placement overloads a node"))
        self.stdout.write(f"  Objective:       {result.objective_ms:.3f} ms")
        self.stdout.write(f"  Reference delay: {result.reference_delay_ms:.3f} ms")
        self.stdout.write(f"  Timeouts:        {result.timeouts}")
        self.stdout.write(f"  Converged:       {result.converged}")
        self.stdout.write(f"  Time:            {result.wall_time_s:.2f}s")
        self.stdout.write("\nPlacement:")
        for row in result.placement.rows():
            self.stdout.write(f"  {row['chain']} {row['vnf']} -> {row['node']}")

    def _display_golden(self, scenario, config, result):
        """Compare the run against the stored oracle optimum, if any."""
        store = GoldenValueStore(config.golden_path)
        stored = store.get(scenario, [result.packet_size])
        counts = store.summary()
        self.stdout.write(
            f"\nGolden store: {counts['optima']} optimum(s) over "
            f"{counts['scenarios']} scenario(s)"
        )
        if stored is None:
            self.stdout.write(f"  No stored optimum for '{scenario.name}' at this packet size")
            return
        gap = result.objective_ms - stored
        self.stdout.write(f"  Stored optimum:  {stored:.3f} ms (gap {gap:+.3f} ms)")
        if store.placement_rows(scenario, [result.packet_size]) == result.placement.rows():
            self.stdout.write(self.style.SUCCESS("  ✓ Matches the stored optimal placement"))
        else:
            self.stdout.write("  Placement differs from the stored optimum")

    def _open_log_file(self, options, action, start_time):
        """Open a log file for streaming output and write the header immediately."""
        timestamp = start_time.strftime("%Y%m%d_%H%M%S")
        if action == "scenario-gen" or not options.get("out"):
            base = self._run_config({**options, "out": None}).output_dir
        else:
            base = Path(options["out"])
        folder = base / "logs"
        folder.mkdir(parents=True, exist_ok=True)
        log_path = folder / f"{timestamp}_{action}.log"

        try:
            f = open(log_path, "w", encoding="utf-8")
            command_str = " ".join(sys.argv)
            f.write(f"=== sfc_provision {action} ===\n")
            f.write(f"Started:  {start_time.strftime('%Y-%m-%d %H:%M:%S')}\n")
            f.write(f"Command:  {command_str}\n")
            f.write(f"\n--- OUTPUT ---\n")
            f.flush()
            return log_path, f
        except Exception as e:
            self.stdout.write(self.style.ERROR(f"Could not open log file: {e}"))
            return None, None
