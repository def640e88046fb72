"""``kklab verify|decay|boundary``.

Exit codes: 0 all checks passed, 1 some check failed, 2 usage or config
error, 3 dimension cap exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from . import harness
from .errors import DimensionCapError
from .fock import FOCK_DIM_CAP
from .suites import SUITES


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _suite_list(text: str) -> List[str]:
    names = [x.strip() for x in text.split(",") if x.strip()]
    bad = [x for x in names if x not in SUITES]
    if bad:
        raise argparse.ArgumentTypeError(
            f"unknown suite {', '.join(bad)} (choose from {', '.join(SUITES)})")
    return names


def _dims(text: str):
    try:
        return harness.parse_dims(text)
    except harness.ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="64-bit seed (default 0)")
    common.add_argument("--trials", type=int, help="trials per suite")
    common.add_argument("--dims", type=_dims, help="size caps, e.g. n=6,N=2")
    common.add_argument("--out", help="output directory (default kklab-out)")
    common.add_argument("--config", help="YAML or JSON config file; flags override it")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="kklab", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("--suite", type=_suite_list, action="extend",
                   help=f"comma-separated subset of: {', '.join(SUITES)}")
    d = sub.add_parser("decay", parents=[common], help="Fock-space decay sweep")
    d.add_argument("--n", type=int, help="alphabet size (default 2)")
    d.add_argument("--k", type=_int_list, help="comma-separated k values (default 4,8,16)")
    d.add_argument("--sparse", action="store_true", default=None,
                   help="build explicit sparse operators (enforces the dimension cap)")
    d.add_argument("--cap", type=int, help=f"dimension cap (default {FOCK_DIM_CAP})")
    sub.add_parser("boundary", parents=[common], help="Mayer-Vietoris scenario pipelines")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = harness.load_config(args.config, seed=args.seed, trials=args.trials,
                                  dims=args.dims, out=args.out,
                                  suites=getattr(args, "suite", None))
        if args.command == "verify":
            ok, files = harness.verify(cfg)
            print(f"verify: {'PASS' if ok else 'FAIL'}; report {files['report']}")
            return 0 if ok else 1
        if args.command == "decay":
            dc = cfg.decay
            n = args.n if args.n is not None else int(dc.get("n", 2))
            ks = args.k if args.k is not None else [int(k) for k in dc.get("k", [4, 8, 16])]
            sparse = args.sparse if args.sparse is not None else bool(dc.get("sparse", False))
            cap = args.cap if args.cap is not None else int(dc.get("cap", FOCK_DIM_CAP))
            files = harness.decay(cfg, n, ks, sparse=sparse, cap=cap)
            print(f"decay: table {files['table']}")
            return 0
        ok, files = harness.boundary(cfg)
        print(f"boundary: {'PASS' if ok else 'FAIL'}; report {files['report']}")
        return 0 if ok else 1
    except harness.ConfigError as exc:
        parser.error(str(exc))
    except DimensionCapError as exc:
        print(f"kklab: {exc}", file=sys.stderr)
        return 3
    return 2


if __name__ == "__main__":
    sys.exit(main())
