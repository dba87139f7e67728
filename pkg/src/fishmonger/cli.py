"""Command-line entry point: simulate, verify, sweep, oracle, serve, audit.

Configuration comes from a TOML file with sections [curve], [cook], [engine],
[oracle], [service]; command-line flags override file values. Every run that
writes artifacts also writes a manifest.json recording the fully resolved
configuration, the seeds, and the artifact list; feeding a manifest back via
--config reproduces the artifacts byte for byte (the manifest's own timestamp
is the only thing that differs).

Exit codes: 0 success and all checks passed; 1 runtime failure or a failed
check (a witness is printed); 2 configuration or usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .curves import ExponentialCurve, RationalCurve, RewardCurve, make_curve
from .engine import GameConfig, monte_carlo, replication_seed, run
from .errors import (
    BudgetExceededError,
    ConfigurationError,
    CurveValidityError,
    FishmongerError,
)
from .policies import make_policy
from .service import audit_log_file, create_app
from .verifier import (
    OracleConfig,
    check_key_inequality,
    check_reward_derivative,
    check_simplex,
    check_spence_mirrlees,
    distortion_csv,
    distortion_curve,
    expectimax_oracle,
    threshold_sweep,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

ALL_SUITES = ("simplex", "inequalities", "derivative", "distortion", "sweep")
DISTORTION_TYPES = (1.0, 10.0, 100.0, 1000.0)


def load_config(path: str) -> dict:
    """Read a TOML config or a manifest.json and return the section dict."""
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"config file not found: {path}")
    if p.suffix == ".json":
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}")
        if isinstance(data, dict) and "command" in data and "config" in data:
            return data["config"]  # a manifest from an earlier run
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: expected a JSON object")
        return data
    with open(p, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}")


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge config file sections with flag overrides (flags win)."""
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    engine = dict(cfg.get("engine") or {})
    if getattr(args, "seed", None) is not None:
        engine["seed"] = args.seed
    if getattr(args, "rounds", None) is not None:
        engine["rounds"] = args.rounds
    if getattr(args, "replications", None) is not None:
        engine["replications"] = args.replications
    if getattr(args, "q", None) is not None:
        engine["q"] = _flag_float(args.q, "--q")
    cfg["engine"] = engine
    if getattr(args, "threshold", None) is not None:
        cook = dict(cfg.get("cook") or {"kind": "naive"})
        cook["threshold"] = _flag_float(args.threshold, "--threshold")
        cfg["cook"] = cook
    return cfg


def _flag_float(text: str, flag: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"{flag} expects a number, got {text!r}")


def build_reward(cfg: dict, validate: bool = True) -> RewardCurve:
    spec = cfg.get("curve") or {"family": "rational"}
    return RewardCurve(make_curve(spec, validate=validate))


def build_game_config(cfg: dict, reward: RewardCurve) -> GameConfig:
    engine = cfg.get("engine") or {}
    q = float(engine.get("q", 1.0))
    rounds = int(engine.get("rounds", 100_000))
    burn_in = int(engine.get("burn_in", rounds // 10))
    cook = dict(cfg.get("cook") or {})
    cook.setdefault("kind", "naive")
    if cook["kind"] == "naive":
        cook.setdefault("threshold", q)  # truthful buyer unless told otherwise
    policy = make_policy(cook)
    return GameConfig(
        reward=reward, q=q, policy=policy, rounds=rounds,
        seed=int(engine.get("seed", 0)), burn_in=burn_in,
        stride=int(engine.get("stride", 100)),
    )


def resolved_sections(config: GameConfig, replications: int) -> dict:
    return {
        "curve": config.curve_spec,
        "cook": config.policy.describe(),
        "engine": {
            "q": config.q, "rounds": config.rounds, "burn_in": config.burn_in,
            "seed": config.seed, "stride": config.stride,
            "replications": replications,
        },
    }


def write_manifest(out: Path, command: str, config_sections: dict,
                   seeds: list[int], artifacts: dict[str, str]) -> Path:
    path = out / "manifest.json"
    payload = {
        "command": command,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "config": config_sections,
        "seeds": seeds,
        "artifacts": artifacts,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def curve_table_csv(reward: RewardCurve, upper: float) -> str:
    lines = ["q,p,R"]
    steps = int(round(upper / 0.1))
    for i in range(steps + 1):
        q = i * 0.1
        lines.append(f"{q!r},{reward.accept_prob(q)!r},{reward.reward(q)!r}")
    return "\n".join(lines) + "\n"


def parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigurationError(f"{flag} expects comma-separated numbers, got {text!r}")
    if not values:
        raise ConfigurationError(f"{flag} got an empty list")
    return values


# -- commands ----------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    reward = build_reward(cfg)
    config = build_game_config(cfg, reward)
    replications = int((cfg.get("engine") or {}).get("replications", 1))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    artifacts: dict[str, str] = {}
    sections = resolved_sections(config, replications)
    if replications == 1:
        history, stats = run(config)
        (out / "history.jsonl").write_text(history.to_jsonl(), encoding="utf-8")
        artifacts["history"] = "history.jsonl"
        (out / "trace.csv").write_text(stats.trace_csv(), encoding="utf-8")
        artifacts["trace"] = "trace.csv"
        payload = {"config": sections, "statistics": stats.to_json_dict()}
        print(f"rounds={stats.rounds} q={stats.q} seed={config.seed}")
        print(f"revenue_avg={stats.revenue_avg:.6f} surplus_avg={stats.surplus_avg:.6f} "
              f"accept_freq={stats.accept_freq:.6f}")
        print(f"welfare_identity_error={stats.welfare_identity_error():.3e}")
    else:
        summary = monte_carlo(config, replications)
        payload = {
            "config": sections,
            "replications": replications,
            "summary": {key: dataclasses.asdict(value)
                        for key, value in summary.stats.items()},
        }
        mean = summary.stats["revenue_avg"].mean
        sur = summary.stats["surplus_avg"].mean
        print(f"replications={replications} rounds={config.rounds} q={config.q}")
        print(f"revenue_avg={mean:.6f} surplus_avg={sur:.6f}")
    (out / "stats.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifacts["stats"] = "stats.json"
    (out / "curve.csv").write_text(
        curve_table_csv(reward, max(10.0, 2.0 * config.q)), encoding="utf-8")
    artifacts["curve_table"] = "curve.csv"

    seeds = [replication_seed(config.seed, r) for r in range(replications)]
    manifest = write_manifest(out, "simulate", sections, seeds, artifacts)
    print(f"artifacts in {out}: {', '.join(sorted(artifacts.values()))} "
          f"(manifest {manifest.name})")
    return EXIT_OK


def parse_suites(text: str) -> list[str]:
    names = [tok.strip() for tok in text.split(",") if tok.strip()]
    if not names:
        raise ConfigurationError(
            f"empty suite selector; choose from: all, {', '.join(ALL_SUITES)}")
    if names == ["all"]:
        return list(ALL_SUITES)
    unknown = [n for n in names if n not in ALL_SUITES]
    if unknown:
        raise ConfigurationError(
            f"unknown suite(s) {', '.join(unknown)}; choose from: all, {', '.join(ALL_SUITES)}")
    return names


def cmd_verify(args: argparse.Namespace) -> int:
    suites = parse_suites(args.suite)
    cfg = resolve_config(args)
    engine = cfg.get("engine") or {}
    seed = int(engine.get("seed", 0))

    if cfg.get("curve"):
        # lenient load: the whole point of verify is to catch a bad curve
        # in a check with a witness rather than refuse at the door
        reward = build_reward(cfg, validate=False)
        curves = [(cfg["curve"].get("family", "custom"), reward)]
    else:
        curves = [("rational", RewardCurve(RationalCurve())),
                  ("exponential", RewardCurve(ExponentialCurve(1.0)))]

    reports = []
    all_passed = True
    for name, rc in curves:
        simplex_ok = True
        if "simplex" in suites:
            report = check_simplex(rc)
            simplex_ok = report.passed
            reports.append((name, report))
        if "inequalities" in suites:
            reports.append((name, check_spence_mirrlees(rc)))
            reports.append((name, check_key_inequality(rc)))
        if "derivative" in suites:
            if isinstance(rc.curve, (RationalCurve, ExponentialCurve)):
                reports.append((name, check_reward_derivative(rc)))
            else:
                print(f"[skip] reward-derivative on {name}: "
                      "finite differences are unreliable at curve kinks")
        if "distortion" in suites:
            _, report = distortion_curve(rc, list(DISTORTION_TYPES))
            reports.append((name, report))
        if "sweep" in suites:
            if simplex_ok:
                config = GameConfig(
                    reward=rc, q=1.0, policy=make_policy({"kind": "naive", "threshold": 1.0}),
                    rounds=20_000, seed=seed, burn_in=2_000,
                )
                result = threshold_sweep(config, [0.5, 1.0, 1.5], replications=2)
                reports.append((name, result.report))
            else:
                print(f"[skip] threshold-sweep on {name}: curve failed the simplex check")

    for name, report in reports:
        print(f"{name}: {report.summary()}")
        all_passed = all_passed and report.passed

    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = [{"curve": name, **report.to_json_dict()} for name, report in reports]
        (out / "reports.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK if all_passed else EXIT_FAILURE


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    reward = build_reward(cfg)

    if args.kind == "distortion":
        qs = (parse_float_list(args.q_list, "--q") if args.q_list
              else list(DISTORTION_TYPES))
        rows, report = distortion_curve(reward, qs)
        csv_text = distortion_csv(rows)
        name = "distortion.csv"
    else:
        engine = cfg.get("engine") or {}
        if args.q_list:
            values = parse_float_list(args.q_list, "--q")
            if len(values) != 1:
                raise ConfigurationError("threshold sweep takes a single --q")
            q = values[0]
        else:
            q = float(engine.get("q", 1.0))
        engine["q"] = q
        cfg["engine"] = engine
        config = build_game_config(cfg, reward)
        if args.threshold_list:
            thresholds = parse_float_list(args.threshold_list, "--threshold")
        elif q > 0:
            thresholds = [q * f for f in (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)]
        else:
            thresholds = [0.0, 0.5, 1.0]
        replications = int(engine.get("replications", 1))
        result = threshold_sweep(config, thresholds, replications=replications)
        csv_text = result.to_csv()
        report = result.report
        name = "threshold_sweep.csv"

    print(csv_text, end="")
    print(report.summary())
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(csv_text, encoding="utf-8")
        print(f"wrote {out / name}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    section = cfg.get("oracle") or {}
    oc = OracleConfig(
        horizon=args.horizon if args.horizon is not None else int(section.get("horizon", 4)),
        grid=args.grid if args.grid is not None else int(section.get("grid", 3)),
        q=float((cfg.get("engine") or {}).get("q", 1.0)),
        curve_spec=cfg.get("curve") or {"family": "rational"},
        budget=int(section.get("budget", 10_000_000)),
    )
    result = expectimax_oracle(oc)
    text = json.dumps(result.to_json_dict(), indent=2, sort_keys=True)
    print(text)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle.json").write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    cfg = resolve_config(args)
    section = cfg.get("service") or {}
    port = args.port if args.port is not None else int(section.get("port", 8765))
    log_dir = args.out_dir or section.get("log_dir", "fishmonger-sessions")
    app = create_app(log_dir)
    print(f"serving play sessions on http://{args.host}:{port} (logs in {log_dir})")
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    report = audit_log_file(args.log)
    print(json.dumps(report, indent=2, sort_keys=True))
    ok = report["replay_match"] and report["verdict"] != "fail"
    return EXIT_OK if ok else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fishmonger",
        description="Repeated posted-price game: simulate, verify, sweep, oracle, serve, audit.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_default: str | None = None) -> None:
        p.add_argument("--config", help="TOML config or manifest.json from an earlier run")
        p.add_argument("--seed", type=int, help="root seed (overrides config)")
        p.add_argument("--out-dir", default=out_default, help="artifact directory")

    p = sub.add_parser("simulate", help="run the game engine and write artifacts")
    common(p, out_default="fishmonger-out")
    p.add_argument("--rounds", type=int, help="rounds per game")
    p.add_argument("--replications", type=int, help="independent replications")
    p.add_argument("--q", help="buyer valuation")
    p.add_argument("--threshold", help="naive buyer threshold (defaults to q)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify", help="run verification suites")
    common(p)
    p.add_argument("--suite", default="all",
                   help=f"comma-separated: all, {', '.join(ALL_SUITES)}")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("sweep", help="distortion or threshold sweep tables")
    p.add_argument("kind", choices=("distortion", "threshold"))
    common(p)
    p.add_argument("--rounds", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--q", dest="q_list",
                   help="type list (distortion) or scalar type (threshold)")
    p.add_argument("--threshold", dest="threshold_list",
                   help="comma-separated threshold grid")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("oracle", help="exact finite-horizon best-response value")
    common(p)
    p.add_argument("--q", help="buyer valuation")
    p.add_argument("--horizon", type=int, help="rounds in the tree")
    p.add_argument("--grid", type=int, help="price atoms per unit interval")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("serve", help="start the live-play HTTP service")
    common(p)
    p.add_argument("--port", type=int, help="listen port (default 8765)")
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("audit", help="offline audit of a session event log")
    p.add_argument("log", help="path to a session .jsonl event log")
    p.set_defaults(fn=cmd_audit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigurationError, CurveValidityError, BudgetExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FishmongerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
