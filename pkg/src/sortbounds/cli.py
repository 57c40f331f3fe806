"""Command-line driver: configure a run, print the verdict, write stats.

Exit codes: 0 the run completed (whatever the verdict), 1 usage error,
2 resource failure (store room, down-set bound) or a failed check.
"""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction
from pathlib import Path

from .backward import backward_search, load_advice
from .canonical import canonicalize
from .config import DEFAULT_PARAMETERS, SearchConfig
from .forward import forward_search
from .linext import DownSetBoundExceeded
from .oracle import (SMALL_S, ford_johnson_count, info_lower_bound,
                     minimax_sortable, oracle_s_value)
from .posets import Poset
from . import report

# Comparison counts that bracket S(n) on the reference table.
FJ_SPOT = {1: 0, 2: 1, 5: 7, 12: 30, 16: 46, 47: 201}
ILB_SPOT = {1: 0, 2: 1, 5: 7, 12: 29, 13: 33, 16: 45}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sortbounds",
                description="Search prover for sorting lower bounds")
    p.add_argument("--n", type=int, help="number of elements")
    p.add_argument("--budget", type=int,
                   help="comparison budget C (default: ceil(log2 n!))")
    p.add_argument("--mode", choices=("forward", "backward", "bidirectional"),
                   default="bidirectional")
    p.add_argument("--full-layers", type=int, default=None,
                   help="complete backward layers (default per known n)")
    p.add_argument("--bandwidth", type=str, default=None,
                   help="efficiency bandwidth as an exact rational, e.g. 5/100")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--chunk-limit", type=int, default=1 << 20)
    p.add_argument("--store-cap", type=int, default=1 << 26)
    p.add_argument("--spill-dir", type=str, default=None)
    p.add_argument("--stats-out", type=str, default=None,
                   help="per-level CSV path; a figure lands beside it")
    p.add_argument("--no-figure", action="store_true",
                   help="write the CSV without rendering the figure")
    p.add_argument("--advice-out", type=str, default=None,
                   help="directory for the backward level files")
    p.add_argument("--advice-in", type=str, default=None,
                   help="reuse backward level files instead of rebuilding")
    p.add_argument("--no-pair-heuristic", action="store_true")
    p.add_argument("--validate", action="store_true",
                   help="cross-check advice against direct exploration")
    p.add_argument("--verify-known", action="store_true",
                   help="check S(1..7) by search and by game-tree oracle")
    p.add_argument("--oracle-check", action="store_true",
                   help="compare search verdicts with the oracle (n <= 7)")
    return p


def parse_bandwidth(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise SystemExit(f"sortbounds: error: bad bandwidth {text!r}: {exc}")


def verdict_line(n: int, budget: int, sortable: bool) -> str:
    if sortable:
        return f"{n} sortable in {budget}"
    return f"S({n}) > {budget}"


def verify_known(out=sys.stdout) -> int:
    """S(1..7) by forward search and by minimax, plus the count tables."""
    ok = True
    for n in range(1, 8):
        want = SMALL_S[n]
        got_oracle = oracle_s_value(n)
        by_search = forward_search(
            SearchConfig(n=n, budget=want, mode="forward")).sortable
        below = want == 0 or not forward_search(
            SearchConfig(n=n, budget=want - 1, mode="forward")).sortable
        good = got_oracle == want and by_search and below
        ok &= good
        print(f"S({n}) = {want}: oracle {got_oracle}, search "
              f"{'tight' if by_search and below else 'WRONG'} "
              f"[{'pass' if good else 'FAIL'}]", file=out)
    for n, want in ILB_SPOT.items():
        good = info_lower_bound(n) == want
        ok &= good
        if not good:
            print(f"C({n}) != {want} [FAIL]", file=out)
    for n, want in FJ_SPOT.items():
        good = ford_johnson_count(n) == want
        ok &= good
        if not good:
            print(f"F({n}) != {want} [FAIL]", file=out)
    print("verify-known:", "pass" if ok else "FAIL", file=out)
    return 0 if ok else 2


def oracle_check(n: int, out=sys.stdout) -> int:
    if not 1 <= n <= 7:
        raise SystemExit("sortbounds: error: --oracle-check needs --n in 1..7")
    ok = True
    base = info_lower_bound(n)
    for budget in (max(base - 1, 0), base, base + 1):
        v = forward_search(SearchConfig(n=n, budget=budget, mode="forward"))
        want = minimax_sortable(Poset.antichain(n), budget)
        good = v.sortable == want
        ok &= good
        print(f"n={n} C={budget}: search {v.sortable}, oracle {want} "
              f"[{'pass' if good else 'FAIL'}]", file=out)
    print("oracle-check:", "pass" if ok else "FAIL", file=out)
    return 0 if ok else 2


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verify_known:
        return verify_known()
    if args.oracle_check:
        if args.n is None:
            raise SystemExit("sortbounds: error: --oracle-check needs --n")
        return oracle_check(args.n)
    if args.n is None:
        raise SystemExit("sortbounds: error: --n is required")

    n = args.n
    budget = args.budget if args.budget is not None else info_lower_bound(n)
    bw, fl = DEFAULT_PARAMETERS.get(n, (Fraction(0), 0))
    if args.bandwidth is not None:
        bw = parse_bandwidth(args.bandwidth)
    if args.full_layers is not None:
        fl = args.full_layers
    try:
        cfg = SearchConfig(
            n=n, budget=budget, mode=args.mode, full_layers=fl, bandwidth=bw,
            chunk_limit=args.chunk_limit, threads=args.threads,
            store_cap=args.store_cap, spill_dir=args.spill_dir,
            advice_in=args.advice_in, advice_out=args.advice_out,
            pair_heuristic=not args.no_pair_heuristic, validate=args.validate)
    except ValueError as exc:
        raise SystemExit(f"sortbounds: error: {exc}")

    t0 = time.time()
    advice = None
    verdict = None
    try:
        if cfg.mode in ("backward", "bidirectional"):
            if cfg.advice_in:
                advice = load_advice(cfg.advice_in)
                if (advice.n, advice.budget) != (n, budget):
                    raise SystemExit(
                        f"sortbounds: error: advice at {cfg.advice_in} is for "
                        f"n={advice.n} C={advice.budget}")
            else:
                advice = backward_search(cfg)
        if cfg.mode == "backward":
            root = canonicalize(Poset.antichain(n))
            sortable = advice.levels[0].lookup(root) is not None
        else:
            verdict = forward_search(
                cfg, advice=advice if cfg.mode == "bidirectional" else None)
            sortable = verdict.sortable
    except (MemoryError, DownSetBoundExceeded, OSError) as exc:
        print(f"sortbounds: resource failure: {exc}", file=sys.stderr)
        return 2
    elapsed = time.time() - t0

    stored = (advice.total_stored if advice is not None else 0) + \
        (sum(verdict.stored) if verdict is not None else 0)
    print(f"# n={n} C={budget} mode={cfg.mode} full_layers={cfg.full_layers} "
          f"bandwidth={cfg.bandwidth} stored={stored} "
          f"elapsed={elapsed:.1f}s")
    print(verdict_line(n, budget, sortable))

    if args.stats_out:
        csv_path = report.write_stats_csv(args.stats_out, budget, advice,
                                          verdict)
        if not args.no_figure:
            report.render_figure(csv_path)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
