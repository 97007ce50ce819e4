"""Command-line entry point: solve tasks, run benchmarks, classify datasets,
drive the synthesis pipeline, serve simulated sites, analyze run outputs."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import RunReport, action_stats, language_counts, load_benchmark, run_bench, validate_benchmark
from .classifier import ClassifyBudget, classify
from .engine import Engine, EngineConfig
from .errors import EngineError
from .gateway import ModelProfile
from .protocol import StepBudget, new_task, read_run_manifest, read_trajectory
from .qa import QAPair

log = logging.getLogger("infodig")


def _profile_from_obj(role_default: str, obj: dict) -> ModelProfile:
    return ModelProfile(
        role=obj.get("role", role_default),
        endpoint=obj["endpoint"],
        model_name=obj.get("model_name", ""),
        auth_env=obj.get("auth_env", ""),
        script=obj.get("script"),
        timeout_s=float(obj.get("timeout_s", 30.0)),
    )


def load_config(path: Path) -> EngineConfig:
    """Engine configuration file: model profiles, search provider, browser
    endpoint, budgets, seeds. Secrets stay in env vars named by the config."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    profiles = {
        role: _profile_from_obj("teacher", spec)
        for role, spec in obj.get("profiles", {}).items()
        if role != "vision"
    }
    vision = obj.get("profiles", {}).get("vision")
    vision_profile = _profile_from_obj("vision", vision) if vision else None

    search_cfg = obj.get("search", {})
    provider = None
    if search_cfg.get("provider") == "serper":
        from .searcher import SerperSearchProvider

        provider = SerperSearchProvider(
            api_key_env=search_cfg.get("api_key_env", "SERPER_API_KEY"),
            timeout_s=float(search_cfg.get("timeout_s", 15.0)),
        )
    elif search_cfg.get("provider") == "fixture":
        from .searcher import FixtureSearchProvider

        provider = FixtureSearchProvider(Path(search_cfg["fixture_dir"]))

    from .cdp import browser_factory_from_config

    budget_cfg = obj.get("budget", {})
    return EngineConfig(
        profiles=profiles,
        search_provider=provider,
        browser_factory=browser_factory_from_config(obj.get("browser", {})),
        vision_profile=vision_profile,
        budget=StepBudget(
            max_steps=int(budget_cfg.get("max_steps", 20)),
            max_total_tool_calls=int(budget_cfg.get("max_total_tool_calls", 120)),
            wall_clock_limit_s=float(budget_cfg.get("wall_clock_limit_s", 600.0)),
        ),
        seed=int(obj.get("seed", 0)),
        deterministic=bool(obj.get("deterministic", True)),
        temperature=float(obj.get("temperature", 0.0)),
    )


def cmd_solve(args) -> int:
    config = load_config(args.config)
    engine = Engine(config)
    budget = config.budget
    if args.budget:
        budget = StepBudget(max_steps=args.budget,
                            max_total_tool_calls=budget.max_total_tool_calls,
                            wall_clock_limit_s=budget.wall_clock_limit_s)
    question = args.question
    if args.start_url:
        # steer the planner toward a surfer sub-task anchored at this URL
        question = f"{args.question}\n(start from: {args.start_url})"
    task = new_task(question, budget)
    result = engine.run(task, run_dir=Path(args.out) if args.out else None)
    if result.final_answer is None:
        print("ABSTAIN")
        return 1
    print(result.final_answer)
    return 0


def cmd_bench(args) -> int:
    config = load_config(args.config)
    qas = load_benchmark(Path(args.dataset))
    issues = validate_benchmark(qas)
    for issue in issues:
        log.warning("dataset: %s", issue)
    report = run_bench(qas, lambda qa: Engine(config), Path(args.out), parallelism=args.parallelism)
    print(report.to_text())
    return 0


def cmd_classify(args) -> int:
    qas = load_benchmark(Path(args.dataset))
    counts = language_counts(qas)
    print(f"{len(qas)} records ({', '.join(f'{k}={v}' for k, v in sorted(counts.items()))})")
    provider = None
    if args.config:
        provider = load_config(args.config).search_provider
    if provider is None:
        from .searcher import SerperSearchProvider

        provider = SerperSearchProvider()
    budget = ClassifyBudget()
    out = []
    for qa in qas:
        verdict = classify(qa, budget, search_provider=provider, strict_redirect=args.strict)
        out.append({"qa_id": qa.qa_id, **verdict.to_obj()})
        print(f"{qa.qa_id}\t{verdict.label}\t{verdict.stage}"
              + ("\tfile_exception" if verdict.file_exception else ""))
    if args.out:
        Path(args.out).write_text(
            "\n".join(json.dumps(v, ensure_ascii=False, sort_keys=True) for v in out) + "\n",
            encoding="utf-8",
        )
    return 0


def cmd_serve_sim(args) -> int:
    from .simenv import build_db, serve, site_spec

    db = build_db(args.kind, args.seed, args.size)
    bundle = Path(args.widget_bundle).read_bytes() if args.widget_bundle else b""
    handle = serve(site_spec(args.kind, args.tier), db, args.port, widget_bundle=bundle,
                   test_mode=not args.live_clock)
    print(f"serving {args.kind} ({args.tier} tier) at {handle.base_url} - Ctrl-C stops")
    try:
        import time

        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        handle.stop()
    return 0


def cmd_synthesize(args) -> int:
    from . import forge

    if args.action == "explore":
        config = load_config(args.config)
        result = forge.explore_site(args.homepage, Engine(config))
        for section in result.sections:
            print(f"SECTION: {section.url}\n{section.text}\n")
        if result.partial:
            print("(partial: fewer than two sections found)", file=sys.stderr)
        return 0
    if args.action == "generate":
        config = load_config(args.config)
        sections = [forge.ContextSection(url=o["url"], text=o["text"])
                    for o in map(json.loads, Path(args.context).read_text(encoding="utf-8").splitlines()) if o]
        qas = forge.generate_queries(sections, config.profile("planner"))
        for qa in qas:
            print(json.dumps(qa.to_obj(), ensure_ascii=False, sort_keys=True))
        return 0
    if args.action == "derive":
        from .simenv import build_db
        from .simenv.policy import sim_file_qa_suite, sim_qa_suite

        db = build_db(args.kind, args.seed, args.size)
        suite = sim_qa_suite(db, args.base_url, args.count, seed=args.seed)
        for qa in suite:
            print(json.dumps(qa.to_obj(), ensure_ascii=False, sort_keys=True))
        return 0
    if args.action == "collect":
        config = load_config(args.config)
        qas = load_benchmark(Path(args.dataset))
        records = forge.collect(qas, args.stage, lambda qa, member: Engine(config))
        survivors = forge.reject_sample(records)
        if args.stage == "rft":
            survivors = forge.difficulty_reweight(survivors, seed=args.seed)
        manifest = forge.emit_dataset(survivors, args.stage, Path(args.out), retention_seed=args.seed)
        print(forge.scale_note(manifest))
        return 0
    raise EngineError(f"unknown synthesize action {args.action!r}")


def cmd_analyze(args) -> int:
    run_dir = Path(args.run_dir)
    report_path = run_dir / "report.json"
    if report_path.exists():
        obj = json.loads(report_path.read_text(encoding="utf-8"))
        report = RunReport(per_qa=obj["per_qa"], accuracy=obj["accuracy"],
                           ring_proportions=obj.get("ring_proportions"),
                           action_table=obj.get("action_table", {}), flags=obj.get("flags", []))
        print(report.to_text())
        return 0
    manifest = read_run_manifest(run_dir / "manifest.json")
    for entry in manifest.get("tasks", []):
        trajs = [read_trajectory(run_dir / rel) for rel in entry["trajectories"]]
        stats = action_stats([trajs], [entry.get("final_answer") is not None])
        print(f"{entry['task_id']}: answer={entry.get('final_answer')!r}")
        print(f"  actions: {stats}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infodig", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="answer one question with the engine")
    p.add_argument("question")
    p.add_argument("--start-url", default=None)
    p.add_argument("--budget", type=int, default=None, help="max steps per agent")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run a benchmark file and score it")
    p.add_argument("dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("classify", help="label benchmark questions IIS/UIS")
    p.add_argument("dataset")
    p.add_argument("--config", default=None)
    p.add_argument("--strict", action="store_true",
                   help="treat answers reached only via hit-link crawls as still unindexed")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("serve-sim", help="serve one simulated website")
    p.add_argument("--kind", required=True, choices=("flights", "shopping", "statistics"))
    p.add_argument("--tier", default="form", choices=("form", "widget"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=80)
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--widget-bundle", default=None)
    p.add_argument("--live-clock", action="store_true")
    p.set_defaults(func=cmd_serve_sim)

    p = sub.add_parser("synthesize", help="QA and trajectory synthesis pipeline")
    p.add_argument("action", choices=("explore", "generate", "derive", "collect"))
    p.add_argument("--config", default=None)
    p.add_argument("--homepage", default=None)
    p.add_argument("--context", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--stage", choices=("sft", "rft"), default="sft")
    p.add_argument("--kind", default="flights")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=80)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--base-url", dest="base_url", default="http://127.0.0.1:8008")
    p.add_argument("--out", default="dataset-out")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("analyze", help="summarize a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
