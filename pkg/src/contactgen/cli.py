"""Command-line entry point orchestrating the pipeline end to end.

Exit codes are a stable scripting contract: 0 success, 2 configuration error
(bad config file, unknown keys, missing inputs), 3 runtime failure (solver
blowup, replay mismatch, port in use).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import ConfigError, RunConfig, load_config

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _fail(code: int, msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _load(ctx: click.Context, overrides: dict | None = None) -> RunConfig:
    try:
        return load_config(ctx.obj.get("config_path"), overrides)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))


def _load_demos(cfg: RunConfig):
    from .embodiments import DemoTrajectory
    from .scripted import default_demo_suite

    if not cfg.demos:
        return default_demo_suite()
    demos = []
    for p in cfg.demos:
        if not Path(p).is_file():
            _fail(EXIT_CONFIG, f"demo file not found: {p}")
        demos.append(DemoTrajectory.load(p))
    return demos


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(),
    default=None,
    help="Config file path (default: $CONTACTGEN_CONFIG).",
)
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Contact-rich manipulation data generation pipeline."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--demo-dir", default=None, type=click.Path(), help="Where recordings are saved.")
@click.option("--ui-dir", default=None, type=click.Path(), help="Static UI bundle to serve at /ui.")
@click.pass_context
def serve(ctx: click.Context, host: str, port: int, demo_dir: str | None, ui_dir: str | None) -> None:
    """Run the live demonstration-recording server."""
    overrides = {"server": {"host": host, "port": port, "demo_dir": demo_dir, "ui_dir": ui_dir}}
    cfg = _load(ctx, overrides)
    from .demo_server import ServerConfig, serve as run_server
    from .session import SessionConfig

    srv = cfg.server
    ui = srv.get("ui_dir")
    server_cfg = ServerConfig(
        params=cfg.physical_params(),
        session=SessionConfig(),
        demo_dir=Path(srv.get("demo_dir") or "demos"),
        ui_dir=Path(ui) if ui else None,
        realtime=bool(srv.get("realtime", True)),
    )
    try:
        run_server(srv.get("host", host), int(srv.get("port", port)), server_cfg)
    except OSError as exc:
        _fail(EXIT_RUNTIME, f"cannot bind {host}:{port}: {exc}")


@main.command()
@click.option("--demo", "demo_path", required=True, type=click.Path())
@click.option("--embodiment", "embodiment_name", default=None, help="Target embodiment name.")
@click.option("--out", "out_path", default=None, type=click.Path(), help="Output file.")
@click.pass_context
def retarget(ctx: click.Context, demo_path: str, embodiment_name: str | None, out_path: str | None) -> None:
    """Retarget a recorded demo onto an embodiment and write the result."""
    overrides = {"embodiment": embodiment_name} if embodiment_name else None
    cfg = _load(ctx, overrides)
    if not Path(demo_path).is_file():
        _fail(EXIT_CONFIG, f"demo file not found: {demo_path}")
    from .embodiments import DemoTrajectory, scale_demo
    from .retarget import retarget_trajectory

    emb = cfg.embodiment()
    demo = scale_demo(DemoTrajectory.load(demo_path), emb.demo_scale)
    kwargs = {}
    if "margin" in cfg.retarget:
        kwargs["margin"] = float(cfg.retarget["margin"])
    if "max_iters" in cfg.retarget:
        kwargs["max_iters"] = int(cfg.retarget["max_iters"])
    try:
        ret = retarget_trajectory(demo, emb, **kwargs)
    except ValueError as exc:
        _fail(EXIT_RUNTIME, f"retargeting failed: {exc}")
    out = Path(out_path) if out_path else Path(demo_path).with_suffix(f".{emb.name}.retargeted.json")
    ret.save(out)
    mean_obj = sum(fr.objective for fr in ret.frame_results) / len(ret.frame_results)
    click.echo(
        f"retargeted {ret.q.shape[0]} frames onto {emb.name} (dof={emb.dof}): "
        f"mean objective {mean_obj:.3e}, worst clearance violation {ret.worst_violation:.2e}"
    )
    click.echo(str(out))


@main.command()
@click.option("--mode", type=click.Choice(["trajopt", "replay"]), required=True)
@click.option("-N", "--episodes", "n_episodes", type=int, default=None, help="Episode count.")
@click.option("--seed", type=int, default=None, help="Master seed; echoed into the manifest.")
@click.option("--workers", type=int, default=None, help="Parallel workers (results identical for any k).")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Dataset directory.")
@click.pass_context
def generate(
    ctx: click.Context,
    mode: str,
    n_episodes: int | None,
    seed: int | None,
    workers: int | None,
    out_dir: str | None,
) -> None:
    """Generate a randomized episode dataset from the demo suite."""
    overrides: dict = {"generate": {"mode": mode, "episodes": n_episodes, "workers": workers, "out_dir": out_dir}}
    if seed is not None:
        overrides["randomization"] = {"master_seed": seed}
    cfg = _load(ctx, overrides)
    gen = cfg.generate
    out = Path(gen.get("out_dir") or f"dataset_{mode}")
    n = int(gen.get("episodes") or 10)
    from . import datagen

    demos = _load_demos(cfg)
    extra = {}
    for key in ("control_hz", "timeout_factor", "execution_fraction", "settle_time", "replay_hold"):
        if key in gen and gen[key] is not None:
            extra[key] = float(gen[key])
    try:
        manifest = datagen.generate(
            demos,
            cfg.embodiment(),
            cfg.randomization_spec(),
            n,
            gen.get("mode", mode),
            out,
            workers=int(gen.get("workers") or 1),
            cem=cfg.cem_config(),
            weights=cfg.cost_weights(),
            success=cfg.success_spec(),
            base_params=cfg.physical_params(),
            **extra,
        )
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))
    ok = sum(1 for e in manifest["episodes"] if e["success"])
    click.echo(
        f"{manifest['mode']}: {ok}/{manifest['n_episodes']} succeeded "
        f"(seed {manifest['master_seed']}, hash {manifest['content_hash'][:12]})"
    )
    click.echo(str(out / "manifest.json"))


@main.command()
@click.option("--episode", "episode_path", required=True, type=click.Path())
@click.option("--render-svg", "svg_dir", type=click.Path(), default=None, help="Write frame SVGs here.")
@click.option("--stride", type=int, default=10, show_default=True, help="Ticks per rendered frame.")
@click.pass_context
def replay(ctx: click.Context, episode_path: str, svg_dir: str | None, stride: int) -> None:
    """Re-simulate a stored episode and verify it reproduces bit-identically."""
    _load(ctx)  # config validation only; replay state comes from the file
    if not Path(episode_path).is_file():
        _fail(EXIT_CONFIG, f"episode file not found: {episode_path}")
    from .datagen import load_episode, replay_episode_states

    episode = load_episode(episode_path)
    identical, max_diff = replay_episode_states(episode)
    if svg_dir is not None:
        from .svg_render import render_episode

        paths = render_episode(episode, svg_dir, stride=stride)
        click.echo(f"rendered {len(paths)} frames to {svg_dir}")
    if not identical:
        _fail(EXIT_RUNTIME, f"replay mismatch: max |state difference| = {max_diff:.3e}")
    click.echo(f"{episode.episode_id}: {episode.states.shape[0]} tick states replay bit-identically")


@main.command()
@click.option(
    "--manifest",
    "manifest_paths",
    multiple=True,
    required=True,
    type=click.Path(),
    help="Dataset manifest(s); pass twice to compare replay vs trajopt runs.",
)
@click.pass_context
def stats(ctx: click.Context, manifest_paths: tuple[str, ...]) -> None:
    """Success-rate table grouped by perturbation bucket."""
    _load(ctx)
    from .datagen import BUCKETS, load_manifest, recount_manifest

    rows = []
    for path in manifest_paths:
        if not Path(path).is_file():
            _fail(EXIT_CONFIG, f"manifest not found: {path}")
        man = load_manifest(path)
        recount = recount_manifest(man, Path(path).parent)
        if recount != man["counts"]:
            _fail(EXIT_RUNTIME, f"{path}: stored counts disagree with episode list")
        rows.append(man)
    width = max(len(b) for b in BUCKETS) + 2
    col = 16
    header = "bucket".ljust(width) + "".join(f"{m['mode']:>{col}}" for m in rows)
    click.echo(header)
    for bucket in BUCKETS:
        line = bucket.ljust(width)
        for man in rows:
            got = man["counts"]["by_bucket"].get(bucket, {"total": 0, "success": 0})
            cell = "-" if got["total"] == 0 else f"{got['success']}/{got['total']}"
            line += f"{cell:>{col}}"
        click.echo(line)
    total = "total".ljust(width)
    for man in rows:
        n = man["n_episodes"]
        s = sum(1 for e in man["episodes"] if e["success"])
        pct = f" ({100.0 * s / n:.0f}%)" if n else ""
        total += f"{f'{s}/{n}{pct}':>{col}}"
    click.echo(total)


@main.command("synth-demos")
@click.option("--out", "out_dir", type=click.Path(), default="demos", show_default=True)
@click.pass_context
def synth_demos(ctx: click.Context, out_dir: str) -> None:
    """Write the built-in scripted demonstration suite as demo files."""
    _load(ctx)
    from .scripted import default_demo_suite

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, demo in enumerate(default_demo_suite()):
        name = demo.metadata.get("script", f"demo_{i}")
        path = out / f"{i:02d}_{name}.json"
        demo.save(path)
        click.echo(str(path))


if __name__ == "__main__":
    main()
