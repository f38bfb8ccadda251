"""Command-line entry points for every pipeline stage.

Usage:
    trajlab synth --spec spec.json --out session/
    trajlab fit-plane --manifest session/manifest.json
    trajlab sync --manifest session/manifest.json
    trajlab fuse --manifest session/manifest.json [--workers N]
    trajlab cart --manifest session/manifest.json
    trajlab export --manifest session/manifest.json --output-fps 2.5 [--smooth-window 5]
    trajlab stats session/export.csv [--corrections session/corrections.json]
    trajlab serve --manifest session/manifest.json --port 8000

Each stage reads prior artifacts from the manifest directory and writes
its own. Exit codes: 0 success, 1 validation error, 2 I/O error; errors
are printed as one machine-parsable "E:<code>: message" line. The env
var TRAJLAB_SEED overrides the manifest (or scene spec) seed.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import ingest, session, synth
from .errors import TrajlabError
from .fuse import apply_corrections

SEED_ENV = "TRAJLAB_SEED"


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw else None


def _artifact(manifest, name: str) -> str:
    return os.path.join(manifest.root, name)


def cmd_synth(args) -> int:
    if args.spec:
        spec = synth.load_scene_spec(args.spec)
    else:
        spec = synth.SceneSpec()
    if args.seed is not None:
        spec.seed = args.seed
    if _env_seed() is not None:
        spec.seed = _env_seed()
    scene = synth.generate(spec)
    manifest_path = synth.write_scene(scene, args.out)
    print(f"wrote session {spec.session_id!r} ({len(scene.truth)} pedestrians) to {manifest_path}")
    return 0


def cmd_fit_plane(args) -> int:
    manifest = ingest.load_manifest(args.manifest)
    inputs = session.load_inputs(manifest)
    seed = _env_seed()
    plane, inliers = session.stage_fit_plane(inputs, seed=seed)
    out = _artifact(manifest, session.PLANE_FILE)
    session.save_plane(out, plane, inliers)
    a, b, c, d = plane.coeffs
    print(
        f"plane {a:.6f}x + {b:.6f}y + {c:.6f}z + {d:.6f} = 0 "
        f"({int(inliers.sum())}/{len(inliers)} inliers) -> {out}"
    )
    return 0


def cmd_sync(args) -> int:
    manifest = ingest.load_manifest(args.manifest)
    inputs = session.load_inputs(manifest)
    alignment = session.stage_sync(inputs)
    out = _artifact(manifest, session.ALIGNMENT_FILE)
    session.save_alignment(out, alignment)
    offsets = ", ".join(f"{cid}:{off:+d}" for cid, off in sorted(alignment.offsets.items()))
    print(f"alignment ref={alignment.reference_camera_id} offsets {offsets} -> {out}")
    return 0


def cmd_fuse(args) -> int:
    manifest = ingest.load_manifest(args.manifest)
    inputs = session.load_inputs(manifest)
    plane = session.load_plane(_artifact(manifest, session.PLANE_FILE))
    alignment = session.load_alignment(_artifact(manifest, session.ALIGNMENT_FILE))
    params = session.FuseParams(workers=args.workers)
    trajectories = session.stage_fuse(inputs, plane, alignment, params)
    fused_path = _artifact(manifest, session.FUSED_FILE)
    ingest.save_fused(fused_path, trajectories, manifest.native_fps, manifest.session_id)
    csv_path = _artifact(manifest, session.TRAJECTORIES_FILE)
    ingest.write_trajectories(csv_path, trajectories, manifest.native_fps, manifest.session_id)
    flags = sum(len(t.flags) for t in trajectories)
    print(f"fused {len(trajectories)} trajectories ({flags} flags) -> {fused_path}, {csv_path}")
    return 0


def cmd_cart(args) -> int:
    manifest = ingest.load_manifest(args.manifest)
    inputs = session.load_inputs(manifest)
    plane = session.load_plane(_artifact(manifest, session.PLANE_FILE))
    alignment = session.load_alignment(_artifact(manifest, session.ALIGNMENT_FILE))
    trajectory = session.stage_cart(inputs, plane, alignment)
    out = _artifact(manifest, session.CART_FILE)
    ingest.write_trajectories(out, [trajectory], manifest.output_fps, manifest.session_id)
    print(f"cart trajectory ({len(trajectory.frames)} samples) -> {out}")
    return 0


def cmd_export(args) -> int:
    manifest = ingest.load_manifest(args.manifest)
    fused = ingest.load_fused(_artifact(manifest, session.FUSED_FILE))
    corrections = []
    corrections_path = _artifact(manifest, session.CORRECTIONS_FILE)
    if os.path.isfile(corrections_path):
        corrections = ingest.load_corrections(corrections_path)
    output_fps = args.output_fps if args.output_fps else manifest.output_fps
    exported = session.stage_export(
        fused.trajectories,
        native_fps=fused.fps,
        output_fps=output_fps,
        corrections=corrections,
        smooth_window=args.smooth_window,
    )
    out = args.out or _artifact(manifest, session.EXPORT_FILE)
    ingest.write_trajectories(out, exported, output_fps, manifest.session_id)
    print(f"exported {len(exported)} trajectories at {output_fps:g} Hz -> {out}")
    return 0


def cmd_stats(args) -> int:
    path = args.trajectories
    corrections = None
    base = None
    if args.corrections:
        corrections = ingest.load_corrections(args.corrections)
    if path.endswith(".json"):
        bundle = ingest.load_fused(path)
        base = bundle.trajectories
    else:
        bundle = ingest.load_trajectories(path)
    if corrections is not None and base is not None:
        trajectories = apply_corrections(base, corrections)
    else:
        trajectories = bundle.trajectories
    stats = session.compute_stats(
        trajectories, bundle.fps, corrections=corrections, base_trajectories=base
    )
    print(f"pedestrians:      {stats.pedestrian_count}")
    print(f"summed duration:  {stats.summed_duration_s:.3f} s")
    print(f"wall-clock span:  {stats.span_s:.3f} s")
    print(f"label frequency:  {stats.label_freq_hz:g} Hz")
    print(f"verified:         {stats.verified_count}")
    print(f"corrections:      {stats.correction_count}")
    anomalies = ", ".join(f"{k}={v}" for k, v in sorted(stats.anomaly_counts.items())) or "none"
    print(f"anomalies:        {anomalies}")
    if stats.auto_fraction_strict is not None:
        print(f"auto (zero corrections):    {stats.auto_fraction_strict:.3f}")
        print(f"auto (any auto provenance): {stats.auto_fraction_partial:.3f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    manifest = ingest.load_manifest(args.manifest)
    state = session.ReviewSession(manifest)
    ui_dir = args.ui_dir
    if ui_dir is None:
        candidate = os.path.join(os.getcwd(), "frontend", "dist")
        ui_dir = candidate if os.path.isdir(candidate) else None
    app = create_app(state, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajlab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic session")
    p.add_argument("--spec", help="scene spec JSON (defaults used when omitted)")
    p.add_argument("--out", required=True, help="output session directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    for name, func, extras in (
        ("fit-plane", cmd_fit_plane, ()),
        ("sync", cmd_sync, ()),
        ("fuse", cmd_fuse, ("workers",)),
        ("cart", cmd_cart, ()),
        ("export", cmd_export, ("export",)),
    ):
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--manifest", required=True, help="session manifest path")
        if "workers" in extras:
            p.add_argument("--workers", type=int, default=1)
        if "export" in extras:
            p.add_argument("--output-fps", type=float, default=None)
            p.add_argument("--smooth-window", type=int, default=None)
            p.add_argument("--out", default=None, help="output CSV path")
        p.set_defaults(func=func)

    p = sub.add_parser("stats", help="summarize a trajectory file")
    p.add_argument("trajectories", help="trajectory CSV or fused JSON")
    p.add_argument("--corrections", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir", default=None, help="built review UI directory")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrajlabError as e:
        print(f"E:{e.code}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"E:IO: {e}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
