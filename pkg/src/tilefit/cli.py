"""Command-line interface.

Subcommands:
    fit          train a grid ensemble on a PNG or WAV and write
                 model/metrics/reconstruction/manifest
    search       run the width/depth architecture search under a FLOP budget
    reconstruct  evaluate a saved model back into a PNG/WAV
    flops        print the analytic FLOP count of a configuration
    divergence   mean PSNR per sub-network width over an image set
    compare      sine vs ReLU vs Fourier ensembles at one FLOP budget
    bench        time the compiled kernels against the numpy fallback
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, kernels
from .bench import format_results, run_benchmarks
from .flops import flops_per_sample, format_flops, total_flops
from .modelfile import load_model, save_model
from .nets import Activation, SubNetworkConfig
from .partition import GridSpec, SignalTensor, SourceInfo
from .reports import (
    build_manifest,
    write_candidates_csv,
    write_json,
    write_metrics_csv,
    write_svg_line_plot,
)
from .search import SearchConfig, SearchSpace, run_search
from .signals import load_audio, load_image, save_reconstruction
from .training import TrainConfig, reconstruct, train_ensemble


def _parse_flop_budget(text: str) -> int:
    units = {"k": 10**3, "m": 10**6, "g": 10**9, "t": 10**12}
    t = text.strip().lower().replace(" ", "")
    if t and t[-1] in units:
        return int(round(float(t[:-1]) * units[t[-1]]))
    return int(float(t))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    p.add_argument("--backend", choices=["cython", "python"], default=None,
                   help="kernel backend (default: compiled if built)")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel cell-training threads (results identical for any count)")
    p.add_argument("--out", type=Path, default=None, help="output directory")


def _add_subnet_flags(p: argparse.ArgumentParser, *, depth=3, width=256) -> None:
    p.add_argument("--depth", type=int, default=depth, help="hidden width-x-width layers")
    p.add_argument("--width", type=int, default=width, help="hidden units per layer")
    p.add_argument("--activation", choices=[a.value for a in Activation],
                   default="sine")
    p.add_argument("--omega0", type=float, default=30.0, help="first sine layer frequency scale")
    p.add_argument("--mapping-size", type=int, default=65,
                   help="Fourier feature count (fourier-relu only)")
    p.add_argument("--mapping-scale", type=float, default=10.0,
                   help="std of the Fourier projection (fourier-relu only)")


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--image", type=Path, help="square 8-bit PNG")
    g.add_argument("--audio", type=Path, help="16-bit PCM WAV")
    p.add_argument("--max-seconds", type=float, default=None,
                   help="truncate audio to this many seconds")


def _subnet_from_args(args) -> SubNetworkConfig:
    return SubNetworkConfig(
        depth_d=args.depth, width_w=args.width,
        activation=Activation(args.activation), omega0=args.omega0,
        mapping_size=args.mapping_size, mapping_scale=args.mapping_scale,
    )


def _load_signal(args, grid_m: int) -> tuple[SignalTensor, Path]:
    if args.image is not None:
        path = args.image
        if not path.exists():
            raise FileNotFoundError(f"input image not found: {path}")
        return load_image(path), path
    path = args.audio
    if not path.exists():
        raise FileNotFoundError(f"input audio not found: {path}")
    return load_audio(path, max_seconds=args.max_seconds, trim_multiple=grid_m), path


def _out_dir(args, default: str) -> Path:
    out = args.out if args.out is not None else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_fit(args) -> int:
    signal, in_path = _load_signal(args, args.grid)
    config = _subnet_from_args(args)
    grid = GridSpec(args.grid, signal.rank)
    tcfg = TrainConfig(steps=args.steps, seed=args.seed, eval_every=args.eval_every,
                       learning_rate=args.lr)
    model, report = train_ensemble(signal, grid, config, tcfg,
                                   workers=args.workers, backend=args.backend)
    out = _out_dir(args, "fit-out")
    write_metrics_csv(out / "metrics.csv", report.records)
    save_model(model, signal.n, out / "model.tfm", source=signal.source)
    recon_name = "reconstruction.png" if signal.rank == 2 else "reconstruction.wav"
    save_reconstruction(report.reconstruction, out / recon_name)
    manifest = build_manifest(
        experiment="fit", input_path=in_path, grid_m=args.grid, seed=args.seed,
        subnet_config=config, train_config=tcfg, backend=report.backend,
        extra={"signal_n": signal.n, "signal_rank": signal.rank,
               "audio_trimmed_to_multiple": args.grid if signal.rank == 1 else None},
    )
    write_json(out / "manifest.json", manifest)
    write_json(out / "report.json", {
        "final_psnr_db": report.final_psnr,
        "final_mse": report.final_mse,
        "flops": report.flops,
        "flops_human": format_flops(report.flops),
        "wall_time_sec": report.wall_time,
        "backend": report.backend,
    })
    print(f"fit: PSNR {report.final_psnr:.2f} dB after {args.steps} steps, "
          f"{format_flops(report.flops)}FLOPs/pass -> {out}")
    return 0


def cmd_search(args) -> int:
    file_cfg = {}
    if args.config is not None:
        file_cfg = json.loads(Path(args.config).read_text())

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return file_cfg.get(key, default)

    grid_m = int(pick(args.grid, "m", 1))
    signal, in_path = _load_signal(args, grid_m)
    space = SearchSpace(
        depths=tuple(int(x) for x in pick(args.depths, "depths", (1, 2, 3, 4, 5))),
        widths=tuple(int(x) for x in pick(args.widths, "widths", (16, 32, 64, 128, 256, 512))),
    )
    train_dict = dict(file_cfg.get("train", {}))
    if args.steps is not None:
        train_dict["steps"] = args.steps
    train_dict.setdefault("steps", 500)
    train_dict["seed"] = args.seed
    f_max = pick(args.f_max, "f_max", "1G")
    cfg = SearchConfig(
        iter_max=int(pick(args.iter_max, "iter_max", 5)),
        f_max=_parse_flop_budget(str(f_max)),
        alpha=float(pick(args.alpha, "alpha", 7.0)),
        repeats=int(pick(args.repeats, "repeats", 5)),
        m=grid_m,
        train=TrainConfig.from_dict(train_dict),
        activation=Activation(pick(args.activation, "activation", "sine")),
    )
    best, trace = run_search(space, cfg, signal, workers=args.workers, backend=args.backend)
    out = _out_dir(args, "search-out")
    write_json(out / "trace.json", trace.to_dict())
    write_candidates_csv(out / "candidates.csv", trace.candidates)
    write_json(out / "chosen.json", {
        "depth": trace.final_depth, "width": trace.final_width,
        "termination": trace.termination,
        "flops": total_flops(best, GridSpec(cfg.m, signal.rank), signal.n,
                             signal.rank, signal.channels),
    })
    if trace.iterations:
        write_svg_line_plot(
            out / "score_iteration.svg",
            [("accepted score", [r.iteration for r in trace.iterations],
              [r.score for r in trace.iterations])],
            title=f"Architecture search, M={cfg.m}", xlabel="iteration", ylabel="score",
        )
    manifest = build_manifest(
        experiment="search", input_path=in_path, grid_m=cfg.m, seed=args.seed,
        subnet_config=best, backend=kernels.get_backend(args.backend).NAME,
        search_config={
            "iter_max": cfg.iter_max, "f_max": cfg.f_max, "alpha": cfg.alpha,
            "repeats": cfg.repeats, "m": cfg.m, "train": cfg.train.to_dict(),
            "depths": list(space.depths), "widths": list(space.widths),
            "activation": cfg.activation.value,
        },
    )
    write_json(out / "manifest.json", manifest)
    print(f"search: chose depth={trace.final_depth} width={trace.final_width} "
          f"({trace.termination}) -> {out}")
    return 0


def cmd_reconstruct(args) -> int:
    if not args.model.exists():
        raise FileNotFoundError(f"model file not found: {args.model}")
    model, header = load_model(args.model)
    source = SourceInfo.from_dict(header["source"])
    signal = reconstruct(model, header["n"], source=source, backend=args.backend)
    out = args.out_file
    if out is None:
        out = Path("reconstruction.png" if model.grid.rank == 2 else "reconstruction.wav")
    save_reconstruction(signal, out)
    print(f"reconstruct: wrote {out}")
    return 0


def cmd_flops(args) -> int:
    config = _subnet_from_args(args)
    rank = args.rank
    input_dim = args.input_dim if args.input_dim is not None else rank
    output_dim = args.output_dim if args.output_dim is not None else (3 if rank == 2 else 1)
    per_sample = flops_per_sample(config, input_dim, output_dim)
    total = total_flops(config, GridSpec(args.grid, rank), args.n, input_dim, output_dim)
    print(f"per-sample: {per_sample}")
    print(f"total ({args.n}^{rank} samples): {total} = {format_flops(total)}")
    return 0


def cmd_divergence(args) -> int:
    from .training import divergence_experiment

    images = []
    for p in args.images:
        if not p.exists():
            raise FileNotFoundError(f"input image not found: {p}")
        images.append(load_image(p))
    tcfg = TrainConfig(steps=args.steps, seed=args.seed)
    results = divergence_experiment(images, [int(w) for w in args.widths], args.depth,
                                    args.grid, args.repeats, tcfg,
                                    workers=args.workers, backend=args.backend)
    out = _out_dir(args, "divergence-out")
    lines = ["# tilefit-divergence-v1", "width,flops,mean_psnr_db,runs"]
    for r in results:
        lines.append(f"{r.width},{r.flops},{repr(r.mean_psnr)},{len(r.runs)}")
    (out / "divergence.csv").write_text("\n".join(lines) + "\n")
    write_svg_line_plot(
        out / "psnr_vs_width.svg",
        [("mean PSNR", [r.width for r in results], [r.mean_psnr for r in results])],
        title=f"PSNR vs width (M={args.grid}, depth={args.depth})",
        xlabel="width", ylabel="PSNR (dB)",
    )
    for r in results:
        print(f"width {r.width:>4}: {r.mean_psnr:.2f} dB over {len(r.runs)} runs "
              f"({format_flops(r.flops)}FLOPs)")
    return 0


def cmd_compare(args) -> int:
    if not args.image.exists():
        raise FileNotFoundError(f"input image not found: {args.image}")
    signal = load_image(args.image)
    tcfg = TrainConfig(steps=args.steps, seed=args.seed, eval_every=args.eval_every)
    rows = []
    for activation in (Activation.SINE, Activation.RELU, Activation.FOURIER_RELU):
        for m in (1, args.grid):
            config = SubNetworkConfig(depth_d=args.depth, width_w=args.width,
                                      activation=activation,
                                      mapping_size=args.mapping_size,
                                      mapping_scale=args.mapping_scale)
            grid = GridSpec(m, signal.rank)
            _, report = train_ensemble(signal, grid, config, tcfg,
                                       workers=args.workers, backend=args.backend)
            rows.append((activation.value, m, report.flops, report.final_psnr))
            print(f"{activation.value:>12} M={m:<3} {format_flops(report.flops):>10}FLOPs "
                  f"{report.final_psnr:.2f} dB")
    out = _out_dir(args, "compare-out")
    lines = ["# tilefit-compare-v1", "activation,grid_m,flops,psnr_db"]
    for activation, m, fc, p in rows:
        lines.append(f"{activation},{m},{fc},{repr(p)}")
    (out / "compare.csv").write_text("\n".join(lines) + "\n")
    return 0


def cmd_bench(args) -> int:
    results = run_benchmarks(backends=args.backends, repeats=args.repeats)
    print(format_results(results))
    if args.csv is not None:
        lines = ["# tilefit-bench-v1", "scenario,backend,cell_steps_per_sec,seconds"]
        for r in results:
            lines.append(f"{r.scenario},{r.backend},{repr(r.steps_per_sec)},{repr(r.seconds)}")
        args.csv.write_text("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilefit",
        description="Fit images/audio with grid ensembles of small coordinate networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train an ensemble on one signal")
    _add_input_flags(p)
    p.add_argument("--grid", type=int, default=1, help="grid order M")
    _add_subnet_flags(p)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--lr", type=float, default=1e-4)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("search", help="width/depth search under a FLOP budget")
    _add_input_flags(p)
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--grid", type=int, default=None, help="grid order M")
    p.add_argument("--f-max", default=None, help="FLOP budget, e.g. 1G or 557.84M")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--iter-max", type=int, default=None)
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--depths", nargs="+", default=None)
    p.add_argument("--widths", nargs="+", default=None)
    p.add_argument("--activation", choices=[a.value for a in Activation], default=None)
    _add_common(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("reconstruct", help="evaluate a saved model to PNG/WAV")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--out-file", type=Path, default=None)
    p.add_argument("--backend", choices=["cython", "python"], default=None)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("flops", help="print the FLOP count of a configuration")
    _add_subnet_flags(p)
    p.add_argument("--n", type=int, default=128, help="samples per axis")
    p.add_argument("--rank", type=int, choices=(1, 2), default=2)
    p.add_argument("--grid", type=int, default=1,
                   help="grid order (totals are independent of it)")
    p.add_argument("--input-dim", type=int, default=None)
    p.add_argument("--output-dim", type=int, default=None)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("divergence", help="mean PSNR per width over images")
    p.add_argument("--images", type=Path, nargs="+", required=True)
    p.add_argument("--widths", nargs="+", required=True)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--grid", type=int, default=4)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--steps", type=int, default=500)
    _add_common(p)
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("compare", help="three activation families at one budget")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--grid", type=int, default=32)
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--mapping-size", type=int, default=65)
    p.add_argument("--mapping-scale", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--eval-every", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="compare kernel backends")
    p.add_argument("--backends", nargs="+", choices=["cython", "python"], default=None)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--csv", type=Path, default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
