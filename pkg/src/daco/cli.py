"""Command-line harness: run episodes, evaluate traces, render annotated maps.

Data artifacts go under the output directory; progress logs go to stderr.
Every option can also come from an INI config file (sections [run], [eval]);
explicit command-line flags win over config values.
"""

from __future__ import annotations

import configparser
import json
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from .backends import RemoteBackend, ScriptedBackend, UsageLedger, report_usage
from .errors import DacoError
from .metrics import (
    SUCCESS_THRESHOLD_M,
    aggregate,
    bucket_by_gt_steps,
    format_stability_table,
    format_table,
    stability,
)
from .orchestrator import Budget, RunSettings, load_episodes, run_episode
from .prompts import PromptTemplates
from .scene import load_scene
from .topdown import annotate_trajectory, load_floor_maps
from . import metrics as metrics_mod


def _log(message: str) -> None:
    click.echo(message, err=True)


def _load_config(path: str | None) -> dict[str, dict[str, str]]:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise click.UsageError(f"config file not found: {path}")
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _resolve(value, config: dict, section: str, key: str, default=None, cast=None):
    """Flag value if given, else config value, else default."""
    if value is not None:
        return value
    raw = config.get(section, {}).get(key)
    if raw is None:
        return default
    if cast is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return cast(raw) if cast else raw


def _safe_name(episode_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", episode_id)


def _scene_paths(scene_dir: Path, scan: str) -> tuple[Path, Path]:
    return scene_dir / f"{scan}.scene.json", scene_dir / f"{scan}.maps.json"


def _load_world(scene_dir: Path, scan: str, cache: dict):
    if scan not in cache:
        scene_path, maps_path = _scene_paths(scene_dir, scan)
        if not scene_path.is_file():
            raise click.ClickException(f"scene file not found: {scene_path}")
        graph = load_scene(scene_path)
        floor_maps = load_floor_maps(maps_path) if maps_path.is_file() else []
        cache[scan] = (graph, floor_maps)
    return cache[scan]


@click.group()
def main():
    """Dual-agent navigation engine harness."""


@main.command()
@click.option("--scene-dir", type=click.Path(path_type=Path), default=None, help="Directory of <scan>.scene.json and <scan>.maps.json files.")
@click.option("--episodes", "episodes_file", type=click.Path(path_type=Path), default=None, help="Episode dataset JSON file.")
@click.option("--backend", "backend_kind", type=click.Choice(["remote", "oracle"]), default=None)
@click.option("--oracle-script", type=click.Path(path_type=Path), default=None, help="JSONL of scripted responses (oracle backend).")
@click.option("--endpoint", default=None, help="Base URL of the OpenAI-compatible API (remote backend).")
@click.option("--model", default=None, help="Model name for the remote backend.")
@click.option("--plan-style", type=click.Choice(["none", "static", "dynamic"]), default=None)
@click.option("--replan/--no-replan", "replan_enabled", default=None)
@click.option("--max-steps", type=int, default=None, help="Override the per-mode step cap.")
@click.option("--max-replans", type=int, default=None)
@click.option("--mode", type=click.Choice(["r2r", "reverie", "r4r"]), default=None, help="Dataset mode for episodes that do not carry one.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None, help="Output directory for traces and the usage ledger.")
@click.option("--run-label", default=None, help="Label recorded in every trace; used for stability grouping.")
@click.option("--jobs", type=int, default=None, help="Number of episodes to run concurrently.")
@click.option("--dump-maps", is_flag=True, default=False, help="Write every step's annotated maps as PNGs.")
@click.option("--templates", "template_dir", type=click.Path(path_type=Path), default=None, help="Directory of prompt template overrides.")
@click.option("--temperature", type=float, default=None, help="Sampling temperature for every model call.")
@click.option("--max-gen-tokens", type=int, default=None, help="Generation-length cap for every model call.")
@click.option("--retries", type=int, default=None, help="Transport retry count for the remote backend.")
@click.option("--config", "config_path", type=click.Path(), default=None, help="INI config file; flags win over its values.")
def run(scene_dir, episodes_file, backend_kind, oracle_script, endpoint, model, plan_style,
        replan_enabled, max_steps, max_replans, mode, out_dir, run_label, jobs, dump_maps,
        template_dir, temperature, max_gen_tokens, retries, config_path):
    """Run episodes and write one trace JSONL per episode plus a usage ledger."""
    config = _load_config(config_path)
    scene_dir = _resolve(scene_dir, config, "run", "scene_dir")
    if scene_dir is None:
        raise click.UsageError("--scene-dir is required")
    scene_dir = Path(scene_dir)
    episodes_file = _resolve(episodes_file, config, "run", "episodes")
    if episodes_file is None:
        raise click.UsageError("--episodes is required")
    episodes_file = Path(episodes_file)
    backend_kind = _resolve(backend_kind, config, "run", "backend", default="oracle")
    oracle_script = _resolve(oracle_script, config, "run", "oracle_script")
    endpoint = _resolve(endpoint, config, "run", "endpoint")
    model = _resolve(model, config, "run", "model")
    plan_style = _resolve(plan_style, config, "run", "plan_style", default="dynamic")
    replan_enabled = _resolve(replan_enabled, config, "run", "replan", default=plan_style != "none", cast=bool)
    max_steps = _resolve(max_steps, config, "run", "max_steps", cast=int)
    max_replans = _resolve(max_replans, config, "run", "max_replans", default=1, cast=int)
    mode = _resolve(mode, config, "run", "mode", default="r2r")
    out_dir = Path(_resolve(out_dir, config, "run", "out", default="out"))
    run_label = _resolve(run_label, config, "run", "run_label", default="run0")
    jobs = _resolve(jobs, config, "run", "jobs", default=1, cast=int)
    temperature = _resolve(temperature, config, "backend", "temperature", cast=float)
    max_gen_tokens = _resolve(max_gen_tokens, config, "backend", "max_tokens", cast=int)
    retries = _resolve(retries, config, "backend", "retries", default=3, cast=int)

    if plan_style == "none" and replan_enabled:
        raise click.UsageError("--plan-style none cannot be combined with --replan: replan requires a planner")
    if not episodes_file.is_file():
        raise click.UsageError(f"episode file not found: {episodes_file}")

    if backend_kind == "oracle":
        if not oracle_script:
            raise click.UsageError("--backend oracle requires --oracle-script")
        if not Path(oracle_script).is_file():
            raise click.UsageError(f"oracle script not found: {oracle_script}")
        backend = ScriptedBackend.from_jsonl(oracle_script)
    else:
        if not endpoint or not model:
            raise click.UsageError("--backend remote requires --endpoint and --model")
        backend = RemoteBackend(endpoint=endpoint, model=model, max_retries=retries)

    episodes = load_episodes(episodes_file, default_mode=mode)
    templates = PromptTemplates.load(template_dir)
    settings = RunSettings(
        plan_style=plan_style,
        replan_enabled=replan_enabled,
        templates=templates,
        dump_map_dir=(out_dir / "maps") if dump_maps else None,
        temperature=temperature,
        max_tokens=max_gen_tokens,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    cache: dict = {}
    for episode in episodes:  # load scenes up front so failures surface before any run
        _load_world(scene_dir, episode.scan, cache)

    def _run_one(episode):
        graph, floor_maps = cache[episode.scan]
        budget = Budget(
            max_steps=max_steps if max_steps is not None else Budget.for_mode(episode.dataset_mode).max_steps,
            max_replans=max_replans,
        )
        trace = run_episode(graph, floor_maps, episode, backend, settings, budget, run_label=run_label)
        trace.write(out_dir / f"{_safe_name(episode.id)}.trace.jsonl")
        return trace

    failures = []
    traces = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_one, ep): ep for ep in episodes}
            for future, episode in futures.items():
                try:
                    traces.append(future.result())
                except Exception as exc:
                    failures.append((episode.id, exc))
    else:
        for episode in episodes:
            try:
                traces.append(_run_one(episode))
            except Exception as exc:
                failures.append((episode.id, exc))

    traces.sort(key=lambda tr: tr.episode.id)
    with (out_dir / "usage.jsonl").open("w") as handle:
        for trace in traces:
            record = trace.usage.to_dict()
            record["run_label"] = run_label
            handle.write(json.dumps(record, sort_keys=True) + "\n")

    for trace in traces:
        _log(f"{trace.episode.id}: {trace.termination} at {trace.final_pose.viewpoint} "
             f"({trace.moves} moves, {trace.replans_used} replans)")
    if failures:
        for episode_id, exc in failures:
            _log(f"{episode_id}: FAILED: {exc}")
        raise click.ClickException(f"{len(failures)} episode(s) failed at the infrastructure level")
    _log(f"wrote {len(traces)} trace(s) to {out_dir}")


def _read_trace(path: Path) -> tuple[dict, dict]:
    try:
        records = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
        header = records[0]
        summary = records[-1]
        if header.get("record") != "header" or summary.get("record") != "summary":
            raise ValueError("missing header or summary record")
        return header, summary
    except (ValueError, IndexError, KeyError) as exc:
        raise click.ClickException(f"unparsable trace {path}: {exc}") from exc


@main.command("eval")
@click.argument("traces_dir", type=click.Path(path_type=Path))
@click.option("--scene-dir", type=click.Path(path_type=Path), required=False, default=None)
@click.option("--report", "report_kind", type=click.Choice(["metrics", "cost"]), default="metrics")
@click.option("--threshold", type=float, default=SUCCESS_THRESHOLD_M, show_default=True, help="Success distance in meters.")
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None, help="Write the JSON report here as well.")
@click.option("--config", "config_path", type=click.Path(), default=None)
def eval_cmd(traces_dir, scene_dir, report_kind, threshold, out_file, config_path):
    """Score a directory of traces and print the report table."""
    config = _load_config(config_path)
    scene_dir = _resolve(scene_dir, config, "eval", "scene_dir")

    if report_kind == "cost":
        payload = _cost_report(traces_dir)
    else:
        if scene_dir is None:
            raise click.UsageError("--scene-dir is required for the metrics report")
        payload = _metrics_report(Path(traces_dir), Path(scene_dir), threshold)

    if out_file is not None:
        out_file = Path(out_file)
        out_file.parent.mkdir(parents=True, exist_ok=True)
        out_file.write_text(json.dumps(payload["json"], sort_keys=True, indent=2) + "\n")
    click.echo(payload["text"])


def _metrics_report(traces_dir: Path, scene_dir: Path, threshold: float) -> dict:
    trace_files = sorted(traces_dir.rglob("*.trace.jsonl"))
    if not trace_files:
        raise click.ClickException(f"no trace files under {traces_dir}")
    cache: dict = {}
    scored = []  # (header, metrics)
    for path in trace_files:
        header, summary = _read_trace(path)
        graph, _maps = _load_world(scene_dir, header["scan"], cache)
        metric = metrics_mod.score_episode(
            graph, summary["path"], header["goal"], termination=summary["termination"], threshold=threshold
        )
        scored.append((header, metric))

    rows = {"overall": aggregate([m for _h, m in scored])}
    modes = sorted({h["mode"] for h, _m in scored})
    if len(modes) > 1:
        for mode in modes:
            rows[f"mode:{mode}"] = aggregate([m for h, m in scored if h["mode"] == mode])
    buckets = bucket_by_gt_steps([(h["gt_path"], m) for h, m in scored])
    for steps, agg in buckets.items():
        rows[f"gt_moves:{steps}"] = agg

    labels = sorted({h["run_label"] for h, _m in scored})
    per_run = {label: aggregate([m for h, m in scored if h["run_label"] == label]) for label in labels}
    stability_stats = stability(list(per_run.values())) if len(labels) > 1 else None

    text_parts = [format_table(rows), "(gt_moves buckets are keyed by ground-truth move count, path edges not nodes)"]
    if len(labels) > 1:
        run_rows = {f"run:{label}": agg for label, agg in per_run.items()}
        text_parts.append("")
        text_parts.append(format_table(run_rows))
        text_parts.append("")
        text_parts.append(format_stability_table(stability_stats))

    def _agg_dict(agg):
        return {"NE": agg.ne, "OSR": agg.osr, "SR": agg.sr, "SPL": agg.spl, "n": agg.count}

    payload = {
        "episodes": len(scored),
        "threshold_m": threshold,
        "overall": _agg_dict(rows["overall"]),
        "by_mode": {mode: _agg_dict(aggregate([m for h, m in scored if h["mode"] == mode])) for mode in modes},
        "buckets": {str(k): _agg_dict(v) for k, v in buckets.items()},
        "bucket_semantics": "ground-truth move count",
        "runs": {label: _agg_dict(agg) for label, agg in per_run.items()},
    }
    if stability_stats is not None:
        payload["stability"] = {
            name: {"mean": s.mean, "range": s.range, "sd": s.sd, "cv_percent": s.cv, "sd_kind": "sample"}
            for name, s in stability_stats.items()
        }
    return {"json": payload, "text": "\n".join(text_parts)}


def _cost_report(traces_dir: Path) -> dict:
    usage_files = sorted(Path(traces_dir).rglob("usage.jsonl"))
    if not usage_files:
        raise click.ClickException(f"no usage.jsonl under {traces_dir}")
    ledgers = []
    for path in usage_files:
        for line in path.read_text().splitlines():
            if line.strip():
                ledgers.append(UsageLedger.from_dict(json.loads(line)))
    summary = report_usage(ledgers)
    header = f"{'Time/task':>12}  {'PromptTok/task':>15}  {'CompletionTok/task':>19}  {'Latency/call':>13}"
    line = (
        f"{summary['time_per_task']:>12.2f}  {summary['prompt_tokens_per_task']:>15.1f}  "
        f"{summary['completion_tokens_per_task']:>19.1f}  {summary['latency_per_call']:>13.3f}"
    )
    text = "\n".join([header, "-" * len(header), line, f"({summary['tasks']} tasks, {summary['calls']} calls)"])
    return {"json": summary, "text": text}


@main.command()
@click.option("--scene-dir", type=click.Path(path_type=Path), required=True)
@click.option("--trajectory", "trajectory_file", type=click.Path(path_type=Path), required=True,
              help='JSON file: {"scan": ..., "path": [viewpoint ids]}.')
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--steps", "which_steps", type=click.Choice(["all", "last"]), default="all", show_default=True)
def annotate(scene_dir, trajectory_file, out_dir, which_steps):
    """Render marked top-down maps for a trajectory, one PNG per floor per step."""
    if not trajectory_file.is_file():
        raise click.UsageError(f"trajectory file not found: {trajectory_file}")
    raw = json.loads(trajectory_file.read_text())
    scan, path = str(raw["scan"]), [str(v) for v in raw["path"]]
    if not path:
        raise click.ClickException("trajectory has no viewpoints")
    _scene, maps_path = _scene_paths(Path(scene_dir), scan)
    if not maps_path.is_file():
        raise click.ClickException(f"floor-map metadata not found: {maps_path}")
    floor_maps = load_floor_maps(maps_path)
    out_dir = Path(out_dir)
    indices = range(len(path)) if which_steps == "all" else [len(path) - 1]
    written = []
    for t in indices:
        try:
            marked = annotate_trajectory(floor_maps, path[: t + 1], path[t])
        except DacoError as exc:
            raise click.ClickException(str(exc)) from exc
        written.extend(marked.save(out_dir, prefix=scan))
    for p in written:
        _log(f"wrote {p}")


@main.command()
@click.argument("summaries", nargs=-1, type=click.Path(path_type=Path))
def report(summaries):
    """Print a combined table from previously written eval JSON reports."""
    if not summaries:
        raise click.UsageError("pass at least one eval JSON report")
    rows = {}
    for path in summaries:
        payload = json.loads(Path(path).read_text())
        overall = payload["overall"]
        rows[path.stem] = metrics_mod.AggregateMetrics(
            ne=overall["NE"], osr=overall["OSR"], sr=overall["SR"], spl=overall["SPL"], count=overall["n"]
        )
    click.echo(format_table(rows))


if __name__ == "__main__":
    main()
