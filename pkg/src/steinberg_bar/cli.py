"""Bar complex homology and verification suites for Steinberg modules over F_q.

    steinberg-bar homology --n 3 --q 2
    steinberg-bar verify homotopy --n 2 --q 3 --json
    steinberg-bar express "2;2;[0,1|1,1]"
    steinberg-bar cache warm --n 3 --q 2 --cache-dir /tmp/sb

Every flag can also come from an environment variable ``STEINBERG_BAR_<FLAG>``
(``STEINBERG_BAR_CACHE_DIR``, ``STEINBERG_BAR_JOBS``, ...); flags win.

Exit status: 0 verified, 1 violations / degenerate input / I/O failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from ._parallel import default_jobs
from .barcomplex import cache_path, complex_homology, differential_matrix, format_homology_table, verify_dsquared
from .errors import DegenerateApartmentError, MalformedInputError
from .exactla import SUPPORTED_PRIMES, read_matrix_header
from .koszulcheck import verify_filtration_lemma, verify_graded, verify_homotopy_identity
from .steinberg import express_in_pbw, parse_apartment, verify_relations

ENV_PREFIX = "STEINBERG_BAR_"
SCHEMA = "steinberg-bar/report"
SCHEMA_VERSION = 1
DEFAULT_GRID = frozenset({(1, 2), (1, 3), (2, 2), (2, 3), (3, 2), (3, 3)})
LONG_GRID = DEFAULT_GRID | {(4, 2)}
SUITES = ("filtration", "homotopy", "relations", "dsquared", "graded")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    command: str
    n: int | None
    q: int | None
    json: bool
    out: Path | None
    cache_dir: Path | None
    long_tests: bool
    jobs: int
    timing: bool = False


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _env_flag(name: str) -> bool:
    return _env(name, "").strip().lower() in {"1", "true", "yes", "on"}


def _env_int(name: str):
    raw = _env(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        print(f"error: {ENV_PREFIX}{name} must be an integer, got {raw!r}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--n", type=int, default=_env_int("N"), help="ambient dimension")
    p.add_argument("--q", type=int, default=_env_int("Q"), help="field size (prime)")
    p.add_argument("--json", action="store_true", default=_env_flag("JSON"), help="print the machine-readable document")
    p.add_argument("--out", type=Path, default=_env("OUT"), help="also write the document to this path")
    p.add_argument("--cache-dir", type=Path, default=_env("CACHE_DIR"), help="differential matrix cache directory")
    p.add_argument("--long-tests", action="store_true", default=_env_flag("LONG_TESTS"), help="allow (n, q) beyond the default grid")
    p.add_argument("--jobs", type=int, default=_env_int("JOBS") or default_jobs(), help="worker processes (1 = serial)")
    p.add_argument("--timing", action="store_true", default=_env_flag("TIMING"), help="record elapsed seconds in reports")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="steinberg-bar", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("homology", parents=[common], help="integral homology of the bar complex")
    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", choices=SUITES)
    e = sub.add_parser("express", parents=[common], help="rewrite an apartment in the PBW basis")
    e.add_argument("apartment", help='encoding "q;n;[v1|v2|...]"')
    c = sub.add_parser("cache", parents=[common], help="manage cached differential matrices")
    c.add_argument("action", choices=("warm", "clear", "stat"))
    return parser


def _config(args, parser) -> RunConfig:
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    cfg = RunConfig(
        command=args.command,
        n=args.n,
        q=args.q,
        json=args.json,
        out=Path(args.out) if args.out else None,
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
        long_tests=args.long_tests,
        jobs=args.jobs,
        timing=args.timing,
    )
    needs_grid = args.command in ("homology", "verify") or (args.command == "cache" and args.action == "warm")
    if needs_grid:
        if cfg.n is None or cfg.q is None:
            parser.error("--n and --q are required")
        if cfg.q not in SUPPORTED_PRIMES:
            parser.error(f"--q must be one of {SUPPORTED_PRIMES}")
        if cfg.n < 1:
            parser.error("--n must be at least 1")
        if (cfg.n, cfg.q) not in DEFAULT_GRID and not cfg.long_tests:
            allowed = ", ".join(f"({n},{q})" for n, q in sorted(DEFAULT_GRID))
            parser.error(f"(n, q) = ({cfg.n}, {cfg.q}) is outside the default grid {allowed}; pass --long-tests")
    return cfg


def _document(cfg: RunConfig, payload: dict) -> dict:
    doc = {"schema": SCHEMA, "version": SCHEMA_VERSION, "command": cfg.command}
    if cfg.n is not None:
        doc["n"] = cfg.n
    if cfg.q is not None:
        doc["q"] = cfg.q
    doc.update(payload)
    return doc


def _emit(cfg: RunConfig, doc: dict, text: str) -> None:
    blob = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if cfg.out is not None:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        cfg.out.write_text(blob, encoding="utf-8")
    sys.stdout.write(blob if cfg.json else text + "\n")


def _clean_report(report: dict, timing: bool) -> dict:
    out = {}
    for k, v in report.items():
        if k == "elapsed":
            v = round(v, 6) if timing else None
        out[k] = v
    return out


def cmd_homology(cfg: RunConfig) -> int:
    records = complex_homology(cfg.n, cfg.q, cfg.jobs, cfg.cache_dir)
    ok = all(r.trivial for r in records if r.s != cfg.n)
    doc = _document(cfg, {"records": [r.as_dict() for r in records], "vanishing_below_top": ok})
    text = format_homology_table(records)
    text += "\n" + ("H_s = 0 for all s != n" if ok else "NONZERO homology below the top degree")
    _emit(cfg, doc, text)
    return EXIT_OK if ok else EXIT_FAIL


def _run_suite(cfg: RunConfig, suite: str) -> dict:
    n, q, jobs = cfg.n, cfg.q, cfg.jobs
    if suite == "filtration":
        return verify_filtration_lemma(n, q, jobs)
    if suite == "homotopy":
        return verify_homotopy_identity(n, q, jobs)
    if suite == "relations":
        return verify_relations(n, q)
    if suite == "dsquared":
        return verify_dsquared(n, q, jobs, cfg.cache_dir)
    if suite == "graded":
        return verify_graded(n, q, jobs, cfg.cache_dir)
    raise ValueError(suite)


def format_report(report: dict) -> str:
    lines = [f"check {report['check']}  n={report['n']} q={report['q']}"]
    for k, v in report.items():
        if k in ("check", "n", "q", "violations", "elapsed"):
            continue
        lines.append(f"  {k}: {v}")
    viol = report["violations"]
    lines.append(f"  violations: {len(viol)}")
    for item in viol[:20]:
        lines.append(f"    {item['decomposition']}: {item['detail']}")
    if len(viol) > 20:
        lines.append(f"    ... {len(viol) - 20} more")
    if report.get("elapsed") is not None:
        lines.append(f"  elapsed: {report['elapsed']:.3f}s")
    lines.append("PASS" if not viol else "FAIL")
    return "\n".join(lines)


def cmd_verify(cfg: RunConfig, suite: str) -> int:
    report = _clean_report(_run_suite(cfg, suite), cfg.timing)
    _emit(cfg, _document(cfg, {"report": report}), format_report(report))
    return EXIT_OK if not report["violations"] else EXIT_FAIL


def cmd_express(cfg: RunConfig, encoding: str) -> int:
    apartment = parse_apartment(encoding)
    try:
        element = express_in_pbw(apartment)
    except DegenerateApartmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    terms = [{"apartment": a.encode(), "coefficient": c} for a, c in element.items()]
    doc = _document(cfg, {"apartment": apartment.encode(), "terms": terms})
    _emit(cfg, doc, element.format())
    return EXIT_OK


def _cache_dir_for(cfg: RunConfig) -> Path:
    if cfg.cache_dir is not None:
        return cfg.cache_dir
    base = os.environ.get("XDG_CACHE_HOME") or Path.home() / ".cache"
    return Path(base) / "steinberg-bar"


def cmd_cache(cfg: RunConfig, action: str) -> int:
    root = _cache_dir_for(cfg)
    entries = []
    if action == "warm":
        root.mkdir(parents=True, exist_ok=True)
        if not os.access(root, os.W_OK):
            raise PermissionError(f"cache directory {root} is not writable")
        for s in range(2, cfg.n + 1):
            fresh = not cache_path(root, cfg.n, cfg.q, s).exists()
            differential_matrix(cfg.n, cfg.q, s, cfg.jobs, root)
            entries.append({"n": cfg.n, "q": cfg.q, "s": s, "computed": fresh})
    elif action == "clear":
        if root.exists():
            for path in sorted(root.glob("differential_n*_q*_s*.txt")):
                path.unlink()
                entries.append({"file": path.name})
    else:
        if root.exists():
            for path in sorted(root.glob("differential_n*_q*_s*.txt")):
                try:
                    n, q, s, rows, cols = read_matrix_header(path)
                except (MalformedInputError, ValueError):
                    continue
                size = path.stat().st_size
                entries.append({"n": n, "q": q, "s": s, "rows": rows, "cols": cols, "bytes": size})
    doc = _document(cfg, {"action": action, "cache_dir": str(root), "entries": entries})
    if action == "stat":
        text = "\n".join(
            f"n={e['n']} q={e['q']} s={e['s']}  {e['rows']}x{e['cols']}  {e['bytes']} bytes" for e in entries
        ) or "(empty)"
    elif action == "warm":
        text = "\n".join(
            f"n={e['n']} q={e['q']} s={e['s']}  {'computed' if e['computed'] else 'cached'}" for e in entries
        ) or "(nothing to cache)"
    else:
        text = f"removed {len(entries)} files"
    _emit(cfg, doc, text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _config(args, parser)
    try:
        if cfg.command == "homology":
            return cmd_homology(cfg)
        if cfg.command == "verify":
            return cmd_verify(cfg, args.suite)
        if cfg.command == "express":
            return cmd_express(cfg, args.apartment)
        return cmd_cache(cfg, args.action)
    except MalformedInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
