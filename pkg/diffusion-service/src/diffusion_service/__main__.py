"""Command-line entry point: parse flags, load the model once, serve."""

from __future__ import annotations

import argparse
import logging
import sys

import uvicorn

from diffusion_service.app import create_app
from diffusion_service.config import DEFAULT_MODEL, ConfigError, ServiceConfig
from diffusion_service.runners import SMOOTH_FILL_MODEL_ID, load_runner


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="diffusion-service",
        description="HTTP inpainting service for the recursive-inpainting harness",
    )
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help=(
            "inpainting checkpoint to load, or "
            f"'{SMOOTH_FILL_MODEL_ID}' for the built-in deterministic fallback "
            f"(default: {DEFAULT_MODEL})"
        ),
    )
    parser.add_argument("--device", default="auto", help="cuda, cpu, or auto (default: auto)")
    parser.add_argument("--host", default="127.0.0.1", help="bind address (default: 127.0.0.1)")
    parser.add_argument("--port", type=int, default=8000, help="bind port (default: 8000)")
    parser.add_argument(
        "--max-concurrent",
        type=int,
        default=1,
        help="requests allowed in inference at once; extras get 503 (default: 1)",
    )
    parser.add_argument(
        "--image-size",
        type=int,
        default=512,
        help="square image edge length the service accepts (default: 512)",
    )
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = ServiceConfig(
            model_identifier=args.model,
            device=args.device,
            port=args.port,
            max_concurrent=args.max_concurrent,
            image_size=args.image_size,
        )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        runner = load_runner(config.model_identifier, device=config.device)
    except Exception as exc:  # model loading is the startup gate: fail loudly
        print(f"error: could not load model {config.model_identifier!r}: {exc}", file=sys.stderr)
        return 1

    app = create_app(runner, config)
    uvicorn.run(app, host=args.host, port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
