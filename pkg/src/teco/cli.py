"""Command-line interface: teco {eval,flow,pp,losses,bt}.

Exit codes: 0 success, 1 a --assert threshold failed, 2 input or
configuration error.  JSON outputs are versioned with "schema": 1 and are
byte-deterministic for identical inputs, independent of --threads.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import warnings
from dataclasses import dataclass, field

from .btmodel import fit_bradley_terry, load_votes_csv
from .errors import ProtocolError, TecoError
from .flow import FlowParams, alignment_field, estimate_flow, write_flo
from .imgseq import load_frame, load_sequence, save_frame
from .losses import (
    PART_NAMES,
    content_loss_vsr,
    pp_loss,
    total_generator_loss,
    uvt_weights,
    vsr_weights,
    warp_loss,
)
from .metrics import (
    DIRECTION,
    LABELS,
    EvalProtocol,
    evaluate_scene,
)
from .pipeline import (
    make_pp_sequence,
    split_pp_outputs,
    triplet_original,
    triplet_static,
    triplet_warped,
)

_ASSERT_RX = re.compile(r"^\s*([a-z_]+)\s*(<=|>=|<|>)\s*([-0-9.eE+]+)\s*$")


@dataclass(frozen=True)
class EvalConfig:
    """Everything `teco eval` needs, resolved from flags."""

    gt_dir: str
    gen_dir: str
    mode: str = "vsr"
    metrics: tuple[str, ...] = ()
    border: int = 8
    divisor: int = 8
    spatial_skip: tuple[int, int] = (2, 2)
    temporal_skip: tuple[int, int] = (3, 2)
    flow_params: FlowParams = field(default_factory=FlowParams)
    backend_name: str = "msgrad"
    backend_table: str | None = None
    pattern: str = "%04d.png"
    scene: str | None = None
    method: str | None = None
    json_out: str | None = None
    csv_out: str | None = None
    threads: int = 1
    asserts: tuple[tuple[str, str, float], ...] = ()


def _json_text(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_eval(config: EvalConfig) -> int:
    protocol = EvalProtocol(
        mode=config.mode,
        metrics=config.metrics,
        border=config.border,
        divisor=config.divisor,
        spatial_skip=config.spatial_skip,
        temporal_skip=config.temporal_skip,
        flow_params=config.flow_params,
        backend_name=config.backend_name,
        backend_table=config.backend_table,
        pattern=config.pattern,
    )
    report = evaluate_scene(
        config.gt_dir, config.gen_dir, protocol,
        scene=config.scene, method=config.method, threads=config.threads,
    )
    if config.json_out:
        _write_text(config.json_out, _json_text(report.to_json_dict()))
    if config.csv_out:
        lines = ["scene,method,metric,mean"]
        for m in report.mean:
            lines.append(
                f"{report.scene},{report.method},{m},{report.mean[m]!r}"
            )
        _write_text(config.csv_out, "\n".join(lines) + "\n")
    print(f"scene={report.scene} method={report.method} "
          f"mode={report.protocol['mode']}")
    for m, mu in report.mean.items():
        arrow = "↑" if DIRECTION[m] == "up" else "↓"
        scaled = mu * report.scaling[m]
        print(f"  {LABELS[m] + ' ' + arrow:<20} {scaled:10.4f}")
    failures = []
    for name, op, threshold in config.asserts:
        if name not in report.mean:
            raise ProtocolError(f"--assert references unreported metric {name!r}")
        actual = report.mean[name]
        ok = {"<=": actual <= threshold, ">=": actual >= threshold,
              "<": actual < threshold, ">": actual > threshold}[op]
        if not ok:
            failures.append(f"assert failed: {name} {op} {threshold} "
                            f"(actual {actual!r})")
    for line in failures:
        print(line, file=sys.stderr)
    return 1 if failures else 0


def cmd_flow(path_a: str, path_b: str, out: str, params: FlowParams) -> int:
    a = load_frame(path_a)
    b = load_frame(path_b)
    flow = estimate_flow(a, b, params)
    write_flo(flow, out)
    print(f"wrote {out} ({flow.height}x{flow.width})")
    return 0


def cmd_pp(input_dir: str, out_dir: str, pattern: str = "%04d.png",
           triplets: str = "none", border_reset: int = 16,
           params: FlowParams | None = None) -> int:
    if params is None:
        params = FlowParams()
    seq = load_sequence(input_dir, pattern)
    pp = make_pp_sequence(seq)
    os.makedirs(out_dir, exist_ok=True)
    n = len(seq)
    for i, frame in enumerate(pp.frames):
        save_frame(frame, os.path.join(out_dir, pattern % (i + 1)))
    index_map = [seq.start_index + k
                 for k in list(range(n)) + list(range(n - 2, -1, -1))]
    manifest: dict[str, object] = {
        "schema": 1,
        "input_count": n,
        "output_count": len(pp),
        "pattern": pattern,
        "index_map": index_map,
        "notes": {
            "pairing": "output frame i and output frame 2n-2-i show the "
                       "same source frame from the forward/backward legs; "
                       "the middle frame is shared",
        },
    }
    if triplets != "none":
        if n < 3:
            raise ProtocolError("triplet materialization needs >= 3 frames")
        kinds = (["original", "warped", "static"]
                 if triplets == "all" else [triplets])
        tri_dir = os.path.join(out_dir, "triplets")
        os.makedirs(tri_dir, exist_ok=True)
        centers = []
        for t in range(1, n - 1):
            built = {}
            if "original" in kinds:
                built["original"] = triplet_original(seq, t)
            if "warped" in kinds:
                fwd = alignment_field(seq[t - 1], seq[t], params)
                bwd = alignment_field(seq[t + 1], seq[t], params)
                built["warped"] = triplet_warped(seq, fwd, bwd, t,
                                                 border_reset)
            if "static" in kinds:
                built["static"] = triplet_static(seq[t], t)
            src = seq.start_index + t
            centers.append(src)
            for kind, tri in built.items():
                for slot, frame in enumerate(tri.slots):
                    save_frame(frame, os.path.join(
                        tri_dir, f"{kind}_t{src:04d}_s{slot}.png"))
        manifest["triplets"] = {
            "kinds": kinds,
            "border_reset": border_reset,
            "centers": centers,
            "slot_order": ["t-1", "t", "t+1"],
            "note": "warped neighbor slots are built from estimated flow "
                    "and border-zeroed; training frameworks conventionally "
                    "stop gradient propagation through the warping path, "
                    "which is out of scope here",
        }
    _write_text(os.path.join(out_dir, "manifest.json"), _json_text(manifest))
    print(f"wrote {len(pp)} frames to {out_dir}")
    return 0


def cmd_losses(gen_dir: str, ref_dir: str | None, preset: str,
               phi_source: str, use_pp: bool, border: int,
               pattern: str, params: FlowParams,
               json_out: str | None) -> int:
    gen = load_sequence(gen_dir, pattern)
    parts: dict[str, float] = {}
    flows = [alignment_field(gen[i], gen[i + 1], params)
             for i in range(len(gen) - 1)]
    parts["warp"] = warp_loss(gen, flows, border=border)
    if ref_dir is not None:
        ref = load_sequence(ref_dir, pattern)
        if len(ref) != len(gen):
            raise ProtocolError(
                f"frame-count mismatch: {ref_dir} has {len(ref)}, "
                f"{gen_dir} has {len(gen)}"
            )
        parts["content"] = sum(
            content_loss_vsr(g, r) for g, r in zip(gen.frames, ref.frames)
        )
    if use_pp:
        fwd, bwd = split_pp_outputs(gen)
        parts["pp"] = pp_loss(fwd, bwd)
    weights = uvt_weights() if preset == "uvt" else vsr_weights(phi_source)
    # absent parts are expected here and reported via missing_parts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        total = total_generator_loss(parts, weights)
    missing = [n for n in PART_NAMES if n not in parts]
    out = {
        "schema": 1,
        "parts": {k: parts[k] for k in sorted(parts)},
        "missing_parts": missing,
        "weights": {"warp": weights.warp, "pp": weights.pp,
                    "adv": weights.adv, "phi": weights.phi,
                    "content": weights.content},
        "preset": preset,
        "total": total,
    }
    text = _json_text(out)
    if json_out:
        _write_text(json_out, text)
    print(text, end="")
    return 0


def cmd_bt(votes_csv: str, smooth: bool, json_out: str | None) -> int:
    vm = load_votes_csv(votes_csv)
    scores, stderr = fit_bradley_terry(vm, smooth=smooth)
    out = {
        "schema": 1,
        "items": list(vm.items),
        "scores": [float(s) for s in scores],
        "stderr": [float(e) for e in stderr],
        "anchor": vm.items[0],
        "smoothed": smooth,
    }
    text = _json_text(out)
    if json_out:
        _write_text(json_out, text)
    for name, s, e in zip(vm.items, scores, stderr):
        print(f"{name:<24} {s:8.4f} ({e:.4f})")
    return 0


def _add_flow_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--flow-scale", type=float, default=0.5,
                   help="pyramid scale in (0,1)")
    p.add_argument("--flow-levels", type=int, default=3)
    p.add_argument("--flow-window", type=int, default=15,
                   help="odd box-averaging window")
    p.add_argument("--flow-iterations", type=int, default=3)
    p.add_argument("--flow-poly-n", type=int, default=5,
                   help="odd polynomial-expansion window")
    p.add_argument("--flow-poly-sigma", type=float, default=1.2)


def _flow_params(args: argparse.Namespace) -> FlowParams:
    return FlowParams(
        pyramid_scale=args.flow_scale,
        levels=args.flow_levels,
        window=args.flow_window,
        iterations=args.flow_iterations,
        poly_n=args.flow_poly_n,
        poly_sigma=args.flow_poly_sigma,
    )


def _parse_pair(text: str, what: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ProtocolError(f"{what} must be 'head,tail', got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise ProtocolError(f"{what} must be integers, got {text!r}") from None


def _parse_assert(text: str) -> tuple[str, str, float]:
    m = _ASSERT_RX.match(text)
    if m is None:
        raise ProtocolError(
            f"bad --assert {text!r}; expected e.g. 'psnr>=25' "
            "(raw, unscaled values)"
        )
    return m.group(1), m.group(2), float(m.group(3))


def _default_threads() -> int:
    env = os.environ.get("TECO_THREADS", "").strip()
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ProtocolError(f"TECO_THREADS must be an integer, got {env!r}")
        if value < 1:
            raise ProtocolError("TECO_THREADS must be >= 1")
        return value
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teco",
        description="Temporal-coherence metrics, losses, and evaluation "
                    "tooling for video generation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate a generated scene")
    p_eval.add_argument("--gt", required=True, help="reference directory")
    p_eval.add_argument("--gen", required=True, help="generated directory")
    p_eval.add_argument("--mode", choices=("vsr", "uvt"), default="vsr")
    p_eval.add_argument("--metrics", default="",
                        help="comma list, e.g. psnr,tdiff,tof,tlp "
                             "(default: all for the mode)")
    p_eval.add_argument("--border", type=int, default=8)
    p_eval.add_argument("--divisor", type=int, default=8)
    p_eval.add_argument("--spatial-skip", default="2,2")
    p_eval.add_argument("--temporal-skip", default="3,2")
    p_eval.add_argument("--backend", default="msgrad",
                        help="perceptual backend name")
    p_eval.add_argument("--backend-table", default=None,
                        help="CSV of tabulated distances (overrides "
                             "--backend)")
    p_eval.add_argument("--pattern", default="%04d.png")
    p_eval.add_argument("--scene", default=None)
    p_eval.add_argument("--method", default=None)
    p_eval.add_argument("--json", dest="json_out", default=None)
    p_eval.add_argument("--csv", dest="csv_out", default=None)
    p_eval.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: TECO_THREADS or 1); "
                             "does not change output bytes")
    p_eval.add_argument("--assert", dest="asserts", action="append",
                        default=[], metavar="EXPR",
                        help="e.g. 'psnr>=25' on raw means; exit 1 on "
                             "violation (repeatable)")
    _add_flow_args(p_eval)

    p_flow = sub.add_parser("flow", help="estimate flow between two PNGs")
    p_flow.add_argument("image_a")
    p_flow.add_argument("image_b")
    p_flow.add_argument("-o", "--out", required=True, help=".flo output path")
    _add_flow_args(p_flow)

    p_pp = sub.add_parser("pp", help="materialize a ping-pong sequence")
    p_pp.add_argument("--input", required=True)
    p_pp.add_argument("--out", required=True)
    p_pp.add_argument("--pattern", default="%04d.png")
    p_pp.add_argument("--triplets",
                      choices=("none", "original", "warped", "static", "all"),
                      default="none",
                      help="also materialize triplet slots per interior frame")
    p_pp.add_argument("--border-reset", type=int, default=16)
    _add_flow_args(p_pp)

    p_losses = sub.add_parser("losses",
                              help="evaluate loss terms on directories")
    p_losses.add_argument("--gen", required=True)
    p_losses.add_argument("--ref", default=None)
    p_losses.add_argument("--preset", choices=("vsr", "uvt"), default="vsr")
    p_losses.add_argument("--phi-source", choices=("vgg", "disc"),
                          default="vgg")
    p_losses.add_argument("--pp", action="store_true",
                          help="treat --gen as a materialized ping-pong "
                               "output and add the pp part")
    p_losses.add_argument("--border", type=int, default=0,
                          help="interior crop for the warp part")
    p_losses.add_argument("--pattern", default="%04d.png")
    p_losses.add_argument("--json", dest="json_out", default=None)
    _add_flow_args(p_losses)

    p_bt = sub.add_parser("bt", help="fit Bradley-Terry scores from votes")
    p_bt.add_argument("--votes", required=True,
                      help="CSV rows winner,loser,count")
    p_bt.add_argument("--smooth", action="store_true",
                      help="add 0.5 pseudo-wins per direction on compared "
                           "pairs (handles unanimous sweeps)")
    p_bt.add_argument("--json", dest="json_out", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "eval":
            threads = (args.threads if args.threads is not None
                       else _default_threads())
            if threads < 1:
                raise ProtocolError("--threads must be >= 1")
            metrics = tuple(m.strip() for m in args.metrics.split(",")
                            if m.strip())
            config = EvalConfig(
                gt_dir=args.gt,
                gen_dir=args.gen,
                mode=args.mode,
                metrics=metrics,
                border=args.border,
                divisor=args.divisor,
                spatial_skip=_parse_pair(args.spatial_skip, "--spatial-skip"),
                temporal_skip=_parse_pair(args.temporal_skip,
                                          "--temporal-skip"),
                flow_params=_flow_params(args),
                backend_name=args.backend,
                backend_table=args.backend_table,
                pattern=args.pattern,
                scene=args.scene,
                method=args.method,
                json_out=args.json_out,
                csv_out=args.csv_out,
                threads=threads,
                asserts=tuple(_parse_assert(a) for a in args.asserts),
            )
            return cmd_eval(config)
        if args.command == "flow":
            return cmd_flow(args.image_a, args.image_b, args.out,
                            _flow_params(args))
        if args.command == "pp":
            return cmd_pp(args.input, args.out, args.pattern, args.triplets,
                          args.border_reset, _flow_params(args))
        if args.command == "losses":
            return cmd_losses(args.gen, args.ref, args.preset,
                              args.phi_source, args.pp, args.border,
                              args.pattern, _flow_params(args),
                              args.json_out)
        if args.command == "bt":
            return cmd_bt(args.votes, args.smooth, args.json_out)
        parser.error(f"unknown command {args.command!r}")
    except TecoError as exc:
        print(f"teco: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"teco: error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
