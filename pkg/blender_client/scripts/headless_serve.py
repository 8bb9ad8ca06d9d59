"""Serve one pose-streaming session inside the DCC's background mode:

    blender --background --python scripts/headless_serve.py -- --port 9907

Everything after ``--`` belongs to this script. The DCC's main thread runs
the drain loop, so scene mutations stay where they must.
"""

import argparse
import sys

from motionkit_blender.headless import serve_once


def main() -> int:
    argv = sys.argv[sys.argv.index("--") + 1:] if "--" in sys.argv else sys.argv[1:]
    parser = argparse.ArgumentParser(description="receive one pose-streaming session")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=9907)
    parser.add_argument("--record", action="store_true", help="keyframe every applied frame")
    parser.add_argument("--timeout", type=float, default=60.0,
                        help="give up after this many seconds")
    args = parser.parse_args(argv)
    serve_once(host=args.host, port=args.port, record=args.record, timeout=args.timeout)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
