"""Command-line entry point.

Subcommands:

    run              execute N episodes of a scenario with an agent and
                     write an EpisodeResult JSON array
    report           aggregate result files into benchmark-style tables
    render-fixtures  regenerate the golden dashboard images
    record           start the teleop service with session recording
    serve            start the teleop service without recording

Exit codes: 0 success, 1 runtime error (diagnostic on stderr), 2 usage
error (including unsupported scenarios).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .agents import (
    EpisodeResult,
    MockVlmAgent,
    NaiveAgent,
    PursuitAgent,
    RemoteConfig,
    RemoteVlmAgent,
    run_episode,
)
from .dynamics import vec3
from .errors import OrbitdeckError, UnsupportedScenarioError
from .navball import RenderConfig, marker_phrase, render_dashboard
from .scenarios import parse_scenario_id
from .telemetry import (
    Observation,
    ScoreLedger,
    ScoreParams,
    aggregate_runs,
    latency_table,
    performance_table,
)

RESULTS_SCHEMA_VERSION = 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbitdeck",
        description="Orbital pursuit games, dashboards, agents and teleop.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run episodes and write results JSON")
    run.add_argument("--scenario", required=True, help="e1..e4 or lbg1-lg0-i2 style")
    run.add_argument(
        "--agent",
        required=True,
        help="naive | pursuit | mock:<script.json> | remote:<profile.json>",
    )
    run.add_argument("--episodes", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="output JSON path")
    run.add_argument("--dt", type=float, default=None, help="physics step override")
    run.add_argument("--max-time", type=float, default=None)
    run.add_argument("--max-accel", type=float, default=None, help="thrust override")
    run.add_argument("--fuel", type=float, default=None)
    run.add_argument("--score-a", type=float, default=None)
    run.add_argument("--score-b", type=float, default=None)
    run.add_argument(
        "--no-render",
        action="store_true",
        help="skip dashboard rendering (scripted agents only)",
    )

    report = sub.add_parser("report", help="aggregate result files into tables")
    report.add_argument("results", nargs="+", help="EpisodeResult JSON files")
    report.add_argument("--json", dest="json_out", default=None,
                        help="also write the aggregated report as JSON")

    fixtures = sub.add_parser(
        "render-fixtures", help="regenerate golden dashboard images"
    )
    fixtures.add_argument("--out", default="fixtures/dashboards")

    record = sub.add_parser("record", help="teleop service with recording")
    record.add_argument("--root", required=True, help="episode store root")
    record.add_argument("--instruction", default="")
    record.add_argument("--session-id", default=None)
    record.add_argument("--scene", default=None, help="scene JSON file")
    record.add_argument("--host", default="127.0.0.1")
    record.add_argument("--port", type=int, default=8750)

    serve = sub.add_parser("serve", help="teleop service without recording")
    serve.add_argument("--scene", default=None)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8750)

    return parser


def _make_agent(agent_spec: str, max_accel: float):
    if agent_spec == "naive":
        return NaiveAgent()
    if agent_spec == "pursuit":
        return PursuitAgent(max_accel=max_accel)
    if agent_spec.startswith("mock:"):
        script = json.loads(Path(agent_spec[5:]).read_text())
        if not isinstance(script, list):
            raise ValueError("mock fixture must be a JSON array of responses")
        return MockVlmAgent(script)
    if agent_spec.startswith("remote:"):
        profile = json.loads(Path(agent_spec[7:]).read_text())
        return RemoteVlmAgent(RemoteConfig.from_dict(profile))
    raise ValueError(f"unknown agent spec {agent_spec!r}")


def _cmd_run(args) -> int:
    overrides = {}
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.max_time is not None:
        overrides["max_time"] = args.max_time
    if args.max_accel is not None:
        overrides["max_accel"] = args.max_accel
    if args.fuel is not None:
        overrides["fuel"] = args.fuel
    if args.score_a is not None or args.score_b is not None:
        overrides["score_params"] = ScoreParams(
            a=args.score_a if args.score_a is not None else 1e6,
            b=args.score_b if args.score_b is not None else 0.1,
        )
    if args.episodes < 1:
        raise ValueError("--episodes must be >= 1")

    base = parse_scenario_id(args.scenario, **overrides)
    results = []
    for i in range(args.episodes):
        spec = replace(base, rng_seed=args.seed + i)
        agent = _make_agent(args.agent, spec.max_accel)
        result = run_episode(spec, agent, render=not args.no_render)
        results.append(result.to_dict())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(results, indent=2) + "\n")
    print(f"wrote {len(results)} episode result(s) to {out}")
    return 0


def _cmd_report(args) -> int:
    reports = []
    for path in args.results:
        docs = json.loads(Path(path).read_text())
        episodes = [EpisodeResult.from_dict(d) for d in docs]
        if not episodes:
            raise ValueError(f"{path} holds no episodes")
        label = episodes[0].agent or Path(path).stem
        latencies = [lat for ep in episodes for lat in ep.latencies_ms]
        reports.append(
            aggregate_runs(
                [ep.ledger for ep in episodes], latencies_ms=latencies, label=label
            )
        )
    print(performance_table(reports))
    print()
    print(latency_table(reports))
    if args.json_out:
        Path(args.json_out).write_text(
            json.dumps([r.to_dict() for r in reports], indent=2) + "\n"
        )
    return 0


def _fixture_observations() -> dict[str, Observation]:
    import numpy as np

    def unit(x, y, z):
        v = vec3(x, y, z)
        return v / np.linalg.norm(v)

    return {
        "boresight": Observation(
            time=0.0, fuel=100.0,
            rel_position=vec3(0, 2600.0, 0), rel_velocity=vec3(0, -8.7, 0),
            prograde=vec3(0, 1.0, 0),
        ),
        "bottom_left_far": Observation(
            time=45.0, fuel=96.5,
            rel_position=vec3(120.0, 2590.0, -80.0), rel_velocity=vec3(5.9, -6.0, 2.0),
            prograde=unit(-0.70710678, 0.1, -0.70710678),
        ),
        "retrograde": Observation(
            time=90.0, fuel=92.0,
            rel_position=vec3(0, 700.0, 0), rel_velocity=vec3(0, 4.0, 0),
            prograde=vec3(0, -1.0, 0),
        ),
        "with_guard": Observation(
            time=150.0, fuel=88.0,
            rel_position=vec3(0, 1200.0, 0), rel_velocity=vec3(0, -5.0, 0),
            prograde=unit(0.2, 0.95, 0.1),
            guard_rel_position=vec3(0, 360.74, 0),
        ),
    }


def _cmd_render_fixtures(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, obs in _fixture_observations().items():
        config = RenderConfig(scenario_id="fixture", target_label="Lady")
        image = render_dashboard(obs, config)
        (out_dir / f"{name}.png").write_bytes(image.to_png())
        (out_dir / f"{name}.txt").write_text(marker_phrase(obs.prograde) + "\n")
    print(f"wrote {len(_fixture_observations())} fixtures to {out_dir}")
    return 0


def _load_scene(path: str | None):
    from .inspection import InspectScene, default_scene

    if path is None:
        return default_scene()
    return InspectScene.from_dict(json.loads(Path(path).read_text()))


def _cmd_record(args) -> int:
    from .service import TeleopService, serve

    service = TeleopService(
        scene=_load_scene(args.scene),
        record_root=args.root,
        instruction=args.instruction,
        session_id=args.session_id,
    )
    print(f"recording session {service.writer.session_id} under {args.root}")
    serve(args.host, args.port, service)
    return 0


def _cmd_serve(args) -> int:
    from .service import TeleopService, serve

    service = TeleopService(scene=_load_scene(args.scene))
    serve(args.host, args.port, service)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "report": _cmd_report,
    "render-fixtures": _cmd_render_fixtures,
    "record": _cmd_record,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UnsupportedScenarioError as err:
        print(f"unsupported scenario: {err}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OrbitdeckError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
