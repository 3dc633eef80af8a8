"""ptmkit-adapter: train ensemble members and serve them to the pipeline."""

from __future__ import annotations

import argparse
import sys

from .model import AdapterConfig
from . import MAX_SEQUENCE_UNITS


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ptmkit-adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune one ensemble member on dataset splits")
    p.add_argument("--data", required=True, help="directory with train.jsonl and val.jsonl")
    p.add_argument("--out", required=True, help="checkpoint output directory")
    p.add_argument("--base-model", required=True, help="pretrained model name or path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--learning-rate", type=float, default=2e-5)
    p.add_argument("--device", default="cpu")

    p = sub.add_parser("serve", help="speak the scoring wire protocol (stdio or HTTP)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--max-units", type=int, default=MAX_SEQUENCE_UNITS)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--device", default="cpu")
    p.add_argument("--http", action="store_true", help="serve POST /score instead of stdio")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8330)

    args = parser.parse_args(argv)
    if args.command == "train":
        from .training import TrainConfig, train

        out = train(
            TrainConfig(
                data_dir=args.data,
                out_dir=args.out,
                base_model=args.base_model,
                seed=args.seed,
                epochs=args.epochs,
                batch_size=args.batch_size,
                learning_rate=args.learning_rate,
                device=args.device,
            )
        )
        print(f"checkpoint saved to {out}")
        return 0

    config = AdapterConfig(
        checkpoint=args.checkpoint,
        max_units=args.max_units,
        batch_size=args.batch_size,
        seed=args.seed,
        device=args.device,
    )
    if args.http:
        from .serve import serve_http

        serve_http(config, args.host, args.port)
    else:
        from .serve import serve_stdio

        serve_stdio(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
