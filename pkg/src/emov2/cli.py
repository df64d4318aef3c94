"""Command line front end.

Subcommands: cost (analytic report), check (verification suites),
forward (run a model on a tensor file), train-toy (synthetic training
demo), erf (receptive-field reachability export). Delimited outputs
(CSV, PGM, EMOT/EMOW) are the primary artifacts; a PNG figure is
rendered next to each where a picture helps.

Exit codes: 0 success, 1 verification failure, 2 usage or config
error, 3 I/O or file-format error. EMOV2_LOG selects the log level
(error, info, debug).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .backbone import Backbone, PRESETS, preset_config
from .checks import SUITES, SUITE_ORDER, run_suite
from .configfile import ConfigError, load_config
from .costs import LAYER_KINDS, analyze_reachability, model_report
from .figures import render_cost_figure, render_erf_figure, render_loss_figure
from .layers import global_avg_pool
from .tensor import FormatError, Tensor, load_tensor, save_tensor
from .train import train_toy

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_IO = 3

log = logging.getLogger("emov2")


class UsageError(ValueError):
    pass


def _setup_logging():
    wanted = os.environ.get("EMOV2_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if wanted not in levels:
        raise UsageError(f"EMOV2_LOG must be one of {sorted(levels)}, got {wanted!r}")
    logging.basicConfig(level=levels[wanted], stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _resolve_config(args):
    """Exactly one model source: --preset or --config."""
    if (args.preset is None) == (args.config is None):
        raise UsageError("exactly one of --preset or --config is required")
    if args.preset is not None:
        try:
            return preset_config(args.preset)
        except KeyError:
            raise UsageError(
                f"unknown preset {args.preset!r}; known: {', '.join(PRESETS)}") from None
    return load_config(args.config)


def _stem(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root


def _write_text(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_pgm(path: str, mask: np.ndarray):
    """P5 binary PGM, 0 = unreached, 255 = reached."""
    assert mask.ndim == 2
    h, w = mask.shape
    payload = np.where(mask, np.uint8(255), np.uint8(0))
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(payload.tobytes())


# -- subcommands ----------------------------------------------------------


def cmd_cost(args) -> int:
    config = _resolve_config(args)
    report = model_report(config, resolution=args.res)
    out = args.out or "cost.csv"
    _write_text(out, report.to_csv())
    figure = _stem(out) + ".png"
    render_cost_figure(report, figure)
    source = args.preset or args.config
    print(f"model {source} at {args.res}x{args.res}")
    print(f"params {report.total_params} ({report.total_params / 1e6:.2f}M)")
    print(f"mult-adds {report.total_macs} ({report.total_macs / 1e6:.1f}M)")
    print(f"flops(2x, with softmax) {report.total_flops} ({report.total_flops / 1e6:.1f}M)")
    print(f"wrote {out}, {figure}")
    return EXIT_OK


def cmd_check(args) -> int:
    if args.threads > 1 and args.suite == "all":
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            futures = {name: pool.submit(SUITES[name]) for name in SUITE_ORDER}
            results = [r for name in SUITE_ORDER for r in futures[name].result()]
    else:
        results = run_suite(args.suite)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return EXIT_OK if passed == len(results) else EXIT_VERIFY


def cmd_forward(args) -> int:
    config = _resolve_config(args)
    if args.input is not None:
        x = load_tensor(args.input).astype(np.float64)
        source = args.input
    else:
        rng = np.random.default_rng(args.seed)
        x = rng.normal(size=(1, 3, args.res, args.res))
        source = f"random[seed={args.seed}]"
    if x.ndim != 4 or x.shape[1] != 3:
        raise UsageError(f"input must be [N,3,H,W], got {x.shape}")
    n, _, h, w = x.shape
    pad = args.pad_windows
    if not pad and (h % 32 or w % 32):
        raise UsageError(
            f"strict mode needs H,W divisible by 32, got {h}x{w} (try --pad-windows)")
    model = Backbone(config, seed=args.seed)
    if args.weights:
        model.load(args.weights)
    model.eval()
    feats = model.forward_features(Tensor(x), pad_windows=pad)
    for i, f in enumerate(feats):
        print(f"stage{i + 1} {tuple(f.shape)}")
    logits = model.head(global_avg_pool(feats[-1]))
    out = args.out or "logits.emot"
    save_tensor(out, logits.data)
    print(f"input {source} -> logits {tuple(logits.shape)}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_train_toy(args) -> int:
    if args.steps < 1:
        raise UsageError(f"steps must be >= 1, got {args.steps}")
    model, losses = train_toy(seed=args.seed, steps=args.steps, lr=args.lr)
    out = args.out or "train_toy.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "loss"])
    for i, value in enumerate(losses, 1):
        writer.writerow([i, repr(value)])
    _write_text(out, buf.getvalue())
    render_loss_figure(losses, _stem(out) + ".png")
    weights = _stem(out) + ".emow"
    model.save(weights)
    print(f"wrote {out}, {_stem(out)}.png, {weights}")
    if any(np.isnan(v) for v in losses):
        print("FAIL training diverged (loss is NaN)")
        return EXIT_VERIFY
    ratio = losses[-1] / losses[0]
    print(f"loss {losses[0]:.4f} -> {losses[-1]:.4f} ({ratio:.1%} of initial)"
          f" in {len(losses)} steps")
    return EXIT_OK


def cmd_erf(args) -> int:
    result = analyze_reachability(args.layer, args.map, args.map,
                                  depth=args.depth, window=args.window,
                                  kernel=args.kernel)
    out = args.out or "erf.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["depth", "coverage"])
    for i, cov in enumerate(result.coverage, 1):
        writer.writerow([i, repr(cov)])
    _write_text(out, buf.getvalue())
    maps = []
    for i, center in enumerate(result.center_maps, 1):
        path = f"{_stem(out)}_d{i}.pgm"
        _write_pgm(path, center)
        maps.append(path)
    render_erf_figure(result.center_maps, result.coverage, _stem(out) + ".png")
    print(f"{args.layer} on {args.map}x{args.map}: coverage "
          + " ".join(f"{c:.4f}" for c in result.coverage))
    full = result.layers_to_full
    print("full coverage at depth "
          + (str(full) if full is not None else "inf (never)"))
    print(f"wrote {out}, {len(maps)} PGM maps, {_stem(out)}.png")
    return EXIT_OK


# -- argument parsing -----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emov2",
        description="Mobile attention backbone: cost model, checks, and demos.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="primary output path; siblings share its stem")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--deterministic", action="store_true",
                        help="assert deterministic mode (all commands already are)")

    model_source = argparse.ArgumentParser(add_help=False)
    model_source.add_argument("--preset", choices=sorted(PRESETS))
    model_source.add_argument("--config", help="model config file (INI)")

    p = sub.add_parser("cost", parents=[common, model_source],
                       help="analytic parameter/flops/path-length report")
    p.add_argument("--res", type=int, default=224)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("check", parents=[common],
                       help="run verification suites, print PASS/FAIL lines")
    p.add_argument("suite", nargs="?", default="all",
                   choices=("all",) + SUITE_ORDER)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("forward", parents=[common, model_source],
                       help="run a model forward, write logits")
    p.add_argument("--input", help="input tensor file; default: seeded random")
    p.add_argument("--weights", help="weights file to load")
    p.add_argument("--res", type=int, default=224,
                   help="edge length for the random input")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict-windows", dest="pad_windows", action="store_false",
                      help="require H,W divisible by 32 (default)")
    mode.add_argument("--pad-windows", dest="pad_windows", action="store_true",
                      help="zero-pad maps to the window grid, crop after")
    p.set_defaults(func=cmd_forward, pad_windows=False)

    p = sub.add_parser("train-toy", parents=[common],
                       help="train the small model on synthetic data")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("erf", parents=[common],
                       help="influence reachability maps for a layer stack")
    p.add_argument("--layer", choices=LAYER_KINDS, required=True)
    p.add_argument("--map", type=int, default=16, help="square map edge")
    p.add_argument("--window", type=int, default=0)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--depth", type=int, default=4)
    p.set_defaults(func=cmd_erf)

    return parser


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        if args.deterministic:
            log.debug("deterministic mode requested; commands are seed-deterministic")
        log.info("command %s", args.command)
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
