"""Command line: train noise-range buckets and serve the inference bridge."""

import argparse
import sys

import numpy as np

from .dataset import (
    CANONICAL_RANGES,
    DEFAULT_PATCH_COUNT,
    NoiseRangeSpec,
    build_patch_dataset,
)
from .training import DESK_BATCH, DESK_EPOCHS, DESK_LR, train_colored_dncnn
from .server import serve_denoiser


def _load_sources(paths):
    from PIL import Image

    sources = []
    for path in paths:
        with Image.open(path) as im:
            arr = np.asarray(im, dtype=np.float64)
        if arr.ndim == 3:
            arr = arr[..., 0]
        if arr.max() > 255.0:
            arr *= 255.0 / 65535.0
        sources.append(arr)
    return sources


def cmd_train(args):
    sources = _load_sources(args.images)
    dataset = build_patch_dataset(
        sources, count=args.count, augmentations=not args.no_augment,
        seed=args.seed,
    )
    ranges = (
        [NoiseRangeSpec(*map(float, r.split(":"))) for r in args.ranges]
        if args.ranges
        else list(CANONICAL_RANGES)
    )
    for spec in ranges:
        artifact = train_colored_dncnn(
            dataset, spec, epochs=args.epochs, lr=args.lr,
            batch_size=args.batch_size, seed=args.seed, log=print,
        )
        path = f"{args.out_prefix}_{int(spec.lower)}_{int(spec.upper)}.pt"
        artifact.save(path)
        print(
            f"saved {path}: held-out PSNR "
            f"{artifact.meta['val_psnr_noisy_db']:.2f} dB -> "
            f"{artifact.meta['val_psnr_denoised_db']:.2f} dB"
        )
    return 0


def cmd_serve(args):
    print(f"serving on {args.endpoint}" + (" (echo mode)" if args.echo else ""))
    serve_denoiser(args.artifacts, args.endpoint, echo=args.echo)
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="cnn-denoiser", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train noise-range buckets")
    p_train.add_argument("images", nargs="+", help="grayscale source images")
    p_train.add_argument("--count", type=int, default=DEFAULT_PATCH_COUNT)
    p_train.add_argument("--epochs", type=int, default=DESK_EPOCHS)
    p_train.add_argument("--batch-size", type=int, default=DESK_BATCH)
    p_train.add_argument("--lr", type=float, default=DESK_LR)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--no-augment", action="store_true")
    p_train.add_argument("--ranges", nargs="+", metavar="LOWER:UPPER",
                         help="override the four canonical sd brackets")
    p_train.add_argument("--out-prefix", default="colored_dncnn")
    p_train.set_defaults(func=cmd_train)

    p_serve = sub.add_parser("serve", help="serve the bridge protocol")
    p_serve.add_argument("artifacts", nargs="*", help="trained .pt artifacts")
    p_serve.add_argument("--endpoint", default="127.0.0.1:7433")
    p_serve.add_argument("--echo", action="store_true",
                         help="bypass models, return the input unchanged")
    p_serve.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
