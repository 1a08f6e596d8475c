"""Command-line entry point: train, infer, eval, bench, selftest.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("semnet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(s: str) -> list[int]:
    try:
        return [int(p) for p in s.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key=value config file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=Path("."))
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")

    p = _Parser(prog="semnet", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", parents=[common], help="train on a directory of PGM/PPM images")
    t.add_argument("--steps", type=int)
    t.add_argument("--data", type=Path, help="dataset directory (overrides data_dir)")

    i = sub.add_parser("infer", parents=[common], help="inpaint one image")
    i.add_argument("--checkpoint", type=Path, required=True)
    i.add_argument("--image", type=Path, required=True)
    i.add_argument("--mask", type=Path, required=True, help="PGM mask, white = known")
    i.add_argument("--tile", type=int)

    e = sub.add_parser("eval", parents=[common], help="banded PSNR/SSIM/L1 on a dataset")
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--data", type=Path)

    b = sub.add_parser("bench", parents=[common], help="time sequential vs parallel scans")
    b.add_argument("--lengths", type=_int_list, default=[1024, 4096, 16384])
    b.add_argument("--states", type=_int_list, default=[16])
    b.add_argument("--blocks", type=_int_list, default=[16, 256])
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--no-python", action="store_true", help="skip the numpy fallback kernel")
    b.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)

    s = sub.add_parser("selftest", parents=[common], help="run built-in invariant checks")
    s.add_argument("--inject-fault", choices=["snake_inverse"], help=argparse.SUPPRESS)
    return p


# ---------------------------------------------------------------------------


def _load_config(args):
    from .config import RunConfig
    return RunConfig.load(args.config, args.overrides)


def _load_dataset(directory, size: int | None = None):
    from .pnm import list_images, load_image
    paths = list_images(directory)
    if not paths:
        raise RuntimeError(f"no .pgm/.ppm images in dataset directory {directory}")
    images = [load_image(p) for p in paths]
    if size is not None:
        for p, img in zip(paths, images):
            if min(img.shape[1:]) < size:
                raise RuntimeError(f"image {p} is smaller than image_size={size}")
    return images


def _batch(images, rng, size: int, batch_size: int, flip: bool):
    out = []
    for _ in range(batch_size):
        img = images[int(rng.integers(len(images)))]
        y = int(rng.integers(img.shape[1] - size + 1))
        x = int(rng.integers(img.shape[2] - size + 1))
        crop = img[:, y:y + size, x:x + size]
        if flip and rng.random() < 0.5:
            crop = crop[:, :, ::-1]
        out.append(crop)
    return np.ascontiguousarray(np.stack(out))


def _center_crop(img, size):
    y = (img.shape[1] - size) // 2
    x = (img.shape[2] - size) // 2
    return np.ascontiguousarray(img[:, y:y + size, x:x + size])


def cmd_train(args) -> int:
    from .masks import MaskSpec, generate_mask
    from .train import TrainState, evaluate, save_train_state, train_step, write_metrics_csv

    cfg = _load_config(args)
    model_cfg = cfg.model_config()
    steps = cfg["steps"] if args.steps is None else args.steps
    if steps < 0:
        raise UsageError("--steps must be >= 0")
    data_dir = args.data if args.data is not None else cfg["data_dir"]
    if data_dir is None:
        raise UsageError("no dataset: pass --data or set data_dir")
    size = cfg["image_size"]
    if size % model_cfg.divisor:
        raise UsageError(f"image_size {size} not divisible by {model_cfg.divisor}")
    images = _load_dataset(data_dir, size)

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    state = TrainState.create(model_cfg, seed=args.seed, lr=cfg["lr"],
                              w_hole=cfg["w_hole"], w_valid=cfg["w_valid"])
    save_train_state(out / "ckpt_000000.semn", state)
    if steps == 0:
        log.info("steps=0: wrote initial checkpoint only")
        return EXIT_OK

    band = (cfg["mask_low"], cfg["mask_high"])
    every = max(1, cfg["checkpoint_every"])
    with open(out / "loss.csv", "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for step in range(steps):
            rng = np.random.default_rng([args.seed, step])
            batch = _batch(images, rng, size, cfg["batch_size"], cfg["flip"])
            masks = np.stack([
                generate_mask(MaskSpec(cfg["mask_kind"], band, seed=int(rng.integers(2 ** 63))), size, size)[None]
                for _ in range(len(batch))])
            state, loss = train_step(state, (batch, masks))
            fh.write(f"{step + 1},{loss!r}\n")
            if (step + 1) % max(1, cfg["log_every"]) == 0:
                log.info("step %d loss %.6f", step + 1, loss)
            if (step + 1) % every == 0:
                save_train_state(out / f"ckpt_{step + 1:06d}.semn", state)
    save_train_state(out / "final.semn", state)
    rows = evaluate(state.model, [_center_crop(im, size) for im in images], seed=args.seed,
                    mask_kind=cfg["eval_mask_kind"])
    write_metrics_csv(out / "metrics.csv", rows)
    for r in rows:
        print(f"band {r.label}: psnr {r.psnr:.4f} ssim {r.ssim:.4f} l1 {r.l1:.4f} (n={r.count})")
    return EXIT_OK


def _output_path(out: Path, default_name: str) -> Path:
    if out.suffix.lower() in (".ppm", ".pgm", ".pnm", ".csv"):
        out.parent.mkdir(parents=True, exist_ok=True)
        return out
    out.mkdir(parents=True, exist_ok=True)
    return out / default_name


def cmd_infer(args) -> int:
    from .inference import inpaint_image
    from .pnm import load_image, load_mask, save_image
    from .train import load_model

    model = load_model(args.checkpoint)
    image = load_image(args.image)
    mask = load_mask(args.mask)
    if image.shape[1:] != mask.shape[1:]:
        raise RuntimeError(f"image {args.image} is {image.shape[1:]} but mask {args.mask} is {mask.shape[1:]}")
    result = inpaint_image(model, image, mask, tile=args.tile)
    path = _output_path(args.out, "inpainted.ppm")
    save_image(path, result)
    print(path)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .train import evaluate, load_model, write_metrics_csv

    cfg = _load_config(args)
    data_dir = args.data if args.data is not None else cfg["data_dir"]
    if data_dir is None:
        raise UsageError("no dataset: pass --data or set data_dir")
    model = load_model(args.checkpoint)
    d = model.config.divisor
    images = []
    for img in _load_dataset(data_dir):
        h, w = (img.shape[1] // d) * d, (img.shape[2] // d) * d
        images.append(_center_crop(img, min(h, w)) if (h, w) != img.shape[1:] or h != w else img)
    rows = evaluate(model, images, seed=args.seed, mask_kind=cfg["eval_mask_kind"])
    path = _output_path(args.out, "metrics.csv")
    write_metrics_csv(path, rows)
    print(path.read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import rows_to_csv, run_bench

    rows = run_bench(args.lengths, args.states, args.blocks, args.repeats, seed=args.seed,
                     include_python=not args.no_python, corrupt=args.corrupt)
    text = rows_to_csv(rows)
    if args.out != Path("."):
        path = _output_path(args.out, "bench.csv")
        path.write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .kernels import BACKEND_NAME
    from .selftest import run_selftest

    print(f"kernel backend: {BACKEND_NAME}")
    results = run_selftest(seed=args.seed, fault=args.inject_fault)
    for r in results:
        print(r.line())
        for f in r.failures[:5]:
            print(f"  - {f}")
    return EXIT_OK if all(r.failed == 0 for r in results) else EXIT_RUNTIME


COMMANDS = {"train": cmd_train, "infer": cmd_infer, "eval": cmd_eval, "bench": cmd_bench,
            "selftest": cmd_selftest}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    from .config import ConfigError
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"semnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"semnet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
