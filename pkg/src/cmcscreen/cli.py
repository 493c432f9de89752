"""Command-line interface: ``cmcscreen {screen,measure,simulate,generate}``.

Exit codes: 0 success, 2 malformed input, 3 configuration error, 4 data too
degenerate to screen (for example fewer than four rows).

Every output file carries a manifest (command, config, input digest, library
version, seed). Wall-clock time is logged to stderr only, so reruns with the
same manifest reproduce the files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from cmcscreen import __version__
from cmcscreen.datagen import SimDesign, gen_design
from cmcscreen.errors import ConfigError, DegenerateDataError
from cmcscreen.estimators import measure
from cmcscreen.harness import METHODS, reports_from_records, run_simulation
from cmcscreen.kernels import BandwidthPolicy, KernelFamily, KernelSpec, gram_matrix, resolve_bandwidth
from cmcscreen.screening import ScreeningConfig, mdc_screen, scmc_screen, standardize_columns

log = logging.getLogger("cmcscreen")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_DEGENERATE = 0, 2, 3, 4
MISSING = {"", "na", "nan", "null", "none", "?"}
WORKERS_ENV = "CMCSCREEN_WORKERS"


class InputError(Exception):
    """Malformed input table."""


# --- input -----------------------------------------------------------------


class Table:
    def __init__(self, names: list[str], data: np.ndarray, digest: str):
        self.names = names
        self.data = data
        self.digest = digest

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"column {name!r} not found in header") from None


def read_table(path) -> Table:
    """Read a comma- or tab-delimited numeric table with a header row.

    The delimiter is whichever of tab or comma appears in the header line.
    Missing or non-numeric cells are rejected with their row and column.
    """
    raw = Path(path).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise InputError(f"{path}: not UTF-8 text ({e})") from None
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise InputError(f"{path}: empty file (no header row)")
    delim = "\t" if "\t" in lines[0] else ","
    rows = list(csv.reader(io.StringIO(text), delimiter=delim))
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        dup = next(h for h in header if header.count(h) > 1)
        raise InputError(f"{path}: duplicate column name {dup!r} in header")
    body = [(i + 2, r) for i, r in enumerate(rows[1:]) if any(c.strip() for c in r)]
    if not body:
        raise InputError(f"{path}: no data rows")
    data = np.empty((len(body), len(header)))
    for k, (lineno, r) in enumerate(body):
        if len(r) != len(header):
            raise InputError(f"{path}: row {lineno} has {len(r)} fields, header has {len(header)}")
        for j, cell in enumerate(r):
            c = cell.strip()
            if c.lower() in MISSING:
                raise InputError(f"{path}: missing value at row {lineno}, column {header[j]!r}")
            try:
                val = float(c)
            except ValueError:
                raise InputError(f"{path}: non-numeric value {c!r} at row {lineno}, column {header[j]!r}") from None
            if not math.isfinite(val):
                raise InputError(f"{path}: non-finite value {c!r} at row {lineno}, column {header[j]!r}")
            data[k, j] = val
    return Table(header, data, digest)


# --- output ----------------------------------------------------------------


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


def fmt3(x: float) -> str:
    return format(float(x), ".3f")


def manifest(command: str, config: dict, digest: Optional[str], seed: int) -> dict:
    return {
        "command": command,
        "config": config,
        "input_sha256": digest,
        "version": __version__,
        "seed": seed,
    }


def dumps(obj) -> str:
    # json writes floats with repr, which round-trips exactly
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def manifest_comment(m: dict) -> str:
    return "# manifest: " + json.dumps(m, sort_keys=True, separators=(",", ":")) + "\n"


# --- shared option handling --------------------------------------------------


def default_workers() -> int:
    val = os.environ.get(WORKERS_ENV)
    if val is None:
        return 1
    try:
        w = int(val)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {val!r}") from None
    if w < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {val!r}")
    return w


def parse_policy(text: str) -> BandwidthPolicy:
    try:
        return BandwidthPolicy.parse(text)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def parse_kernel(text: str) -> KernelFamily:
    try:
        return KernelFamily(text.lower())
    except ValueError:
        raise ConfigError(f"unknown kernel {text!r}; choose from {[k.value for k in KernelFamily]}") from None


def split_names(text: Optional[str]) -> list[str]:
    if text is None:
        return []
    return [s.strip() for s in text.split(",") if s.strip()]


def conditional_indices(text: Optional[str], names: Sequence[str]) -> Optional[tuple[int, ...]]:
    """``None``/``"mdc"`` selects the set from the data; otherwise comma-separated names."""
    if text is None or text.strip().lower() == "mdc":
        return None
    out = []
    for nm in split_names(text):
        if nm not in names:
            raise ConfigError(f"conditional column {nm!r} is not a predictor")
        out.append(names.index(nm))
    if not out:
        raise ConfigError("empty conditional set")
    return tuple(out)


def _add_kernel_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", default="gaussian", help="gaussian, laplacian or cauchy (default gaussian)")


def _add_workers(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--workers", type=int, default=None,
        help=f"parallel workers; default from ${WORKERS_ENV} or 1. Never changes results.",
    )


# --- screen ----------------------------------------------------------------


def cmd_screen(args) -> int:
    table = read_table(args.input)
    y_idx = table.column_index(args.response)
    pred_idx = [j for j in range(len(table.names)) if j != y_idx]
    names = [table.names[j] for j in pred_idx]
    y = table.data[:, y_idx]
    x = table.data[:, pred_idx]
    method = "mdc" if args.method == "mdc" else "scmc"
    cfg = ScreeningConfig(
        conditional_set=conditional_indices(args.conditional, names),
        d1=args.d1,
        d2=args.d2,
        mdc_bandwidths=tuple(parse_policy(b) for b in split_names(args.mdc_bandwidths)),
        cmc_bandwidth=parse_policy(args.cmc_bandwidth),
        kernel=parse_kernel(args.kernel),
        quantile=args.tau,
        seed=args.seed,
        workers=args.workers or default_workers(),
    )
    if len(names) < 2:
        raise ConfigError("screening needs at least two predictor columns")
    if y.size < 4:
        raise DegenerateDataError(f"screening needs at least 4 rows, got {y.size}")
    res = (mdc_screen if method == "mdc" else scmc_screen)(y, x, cfg)
    m = manifest(f"screen:{method}", dict(cfg.to_dict(include_runtime=False), response=args.response), table.digest, cfg.seed)

    out = Path(args.output)
    atomic_write(out / "scores.tsv", manifest_comment(m) + scores_tsv(res, names))
    doc = {
        "manifest": m,
        "predictors": names,
        "selected_names": [names[i] for i in res.selected],
        "conditional_names": [names[i] for i in res.conditional_set],
        "result": res.to_dict(),
    }
    atomic_write(out / "result.json", dumps(doc))
    log.info("screen: selected %d of %d predictors", res.selected.size, len(names))
    return EXIT_OK


def scores_tsv(res, names: Sequence[str]) -> str:
    """One row per predictor in ranking order: index, name, psi, cmc, combined, rank.

    Conditional-set members have no conditional or combined score (``NA``).
    """
    cand_pos = {int(j): k for k, j in enumerate(res.candidates)}
    lines = ["index\tname\tpsi\tcmc\tcombined\trank"]
    for rank, j in enumerate(res.full_ranking, start=1):
        j = int(j)
        if j in cand_pos:
            k = cand_pos[j]
            c, a = fmt17(res.cmc[k]), fmt17(res.combined[k])
        else:
            c = a = "NA"
        lines.append(f"{j}\t{names[j]}\t{fmt17(res.marginal_scores[j])}\t{c}\t{a}\t{rank}")
    return "\n".join(lines) + "\n"


def load_result(path):
    """Reload ``result.json`` written by ``screen`` as a ScreeningResult."""
    from cmcscreen.screening import ScreeningResult

    doc = json.loads(Path(path).read_text())
    return ScreeningResult.from_dict(doc["result"])


# --- measure ---------------------------------------------------------------


def cmd_measure(args) -> int:
    table = read_table(args.input)
    y_idx = table.column_index(args.response)
    cond = [table.column_index(c) for c in split_names(args.conditional)]
    if args.targets:
        targets = [table.column_index(t) for t in split_names(args.targets)]
    else:
        targets = [j for j in range(len(table.names)) if j != y_idx and j not in cond]
    if not targets:
        raise ConfigError("no target columns")
    family = parse_kernel(args.kernel)
    policy = parse_policy(args.bandwidth)
    cond_policy = parse_policy(args.cond_bandwidth)
    if cond_policy.mode != "fixed":
        raise ConfigError("the conditional bandwidth must be fixed (the block is standardised)")
    y = table.data[:, y_idx]
    n = y.size
    if n < 4:
        raise DegenerateDataError(f"estimators need at least 4 rows, got {n}")
    spec = KernelSpec(family, policy)
    g1 = None
    if cond:
        block = standardize_columns(table.data[:, cond])
        g1 = gram_matrix(KernelSpec(family, cond_policy), block, cond_policy.scale)

    m = manifest(
        "measure",
        {"response": args.response, "targets": [table.names[j] for j in targets],
         "conditional": [table.names[j] for j in cond], "kernel": family.value,
         "bandwidth": str(policy), "cond_bandwidth": str(cond_policy)},
        table.digest, 0,
    )
    lines = ["target\tdivergence_sq\tcorrelation\ts_n"]
    for j in targets:
        col = table.data[:, j]
        h = resolve_bandwidth(policy, col)
        g2 = np.ones((n, n)) if h is None else gram_matrix(spec, col, h)
        mv = measure(y, g2, g1)
        lines.append(f"{table.names[j]}\t{fmt17(mv.divergence_sq)}\t{fmt17(mv.correlation)}\t{fmt17(mv.s_n)}")
    text = manifest_comment(m) + "\n".join(lines) + "\n"
    if args.output:
        atomic_write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- simulate / generate ---------------------------------------------------


def _design_from_args(args, replicate: int = 0) -> SimDesign:
    return SimDesign(
        example=args.example, n=args.n, p=args.p, rho=args.rho, tau=args.tau,
        z_dist=args.z_dist, seed=args.seed, replicate=replicate,
    )


def _sim_conditional(text: Optional[str], p: int) -> Optional[tuple[int, ...]]:
    return conditional_indices(text, [f"X{j + 1}" for j in range(p)])


def cmd_simulate(args) -> int:
    design = _design_from_args(args)
    methods = split_names(args.methods)
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ConfigError(f"methods must be drawn from {list(METHODS)}, got {args.methods!r}")
    if args.reps < 1:
        raise ConfigError("reps must be >= 1")
    workers = args.workers or default_workers()
    cond = _sim_conditional(args.conditional, design.p)
    config = {
        "example": design.example, "n": design.n, "p": design.p, "rho": design.rho, "tau": design.tau,
        "z_dist": design.z_dist, "reps": args.reps, "methods": methods,
        "conditional": None if cond is None else [f"X{j + 1}" for j in cond],
    }
    m = manifest("simulate", config, None, design.seed)

    records = run_simulation(design, args.reps, methods, cond, workers)
    reports = reports_from_records(records, design.active)

    out = Path(args.output)
    jsonl = [json.dumps({"manifest": m}, sort_keys=True)]
    jsonl += [json.dumps(r, sort_keys=True) for r in records]
    atomic_write(out / "replicates.jsonl", "\n".join(jsonl) + "\n")
    atomic_write(out / "report.tsv", manifest_comment(m) + report_table(reports, design.active))
    log.info("simulate: %d replicates x %d methods", args.reps, len(methods))
    return EXIT_OK


def report_table(reports: dict, active) -> str:
    """Summary table: P for each active predictor, P_all and the median minimal model size."""
    head = ["method"] + [f"P_X{i + 1}" for i in active] + ["P_all", "S_0.5", "reps"]
    lines = ["\t".join(head)]
    for method, rep in reports.items():
        row = [method] + [fmt3(rep.p_i[i]) for i in active] + [fmt3(rep.p_all), f"{rep.s_q[0.5]:.1f}", str(rep.reps)]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def cmd_generate(args) -> int:
    design = _design_from_args(args, replicate=args.replicate)
    y, x, _ = gen_design(design)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Y"] + [f"X{j + 1}" for j in range(design.p)])
    for i in range(design.n):
        w.writerow([fmt17(y[i])] + [fmt17(v) for v in x[i]])
    atomic_write(Path(args.output), buf.getvalue())
    return EXIT_OK


# --- entry point -----------------------------------------------------------


def _add_design_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--example", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=int, default=500)
    p.add_argument("--rho", type=float, default=0.0, help="predictor correlation (examples 1-3)")
    p.add_argument("--z-dist", default="normal", choices=("normal", "chisq1"), help="example 4 noise for X_k")
    p.add_argument("--tau", type=float, default=None, help="quantile level for quantile screening")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmcscreen", description="Kernel conditional mean dependence screening.")
    parser.add_argument("--version", action="version", version=f"cmcscreen {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and timing to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("screen", help="screen the predictors of a delimited table")
    s.add_argument("input", help="comma- or tab-delimited table with a header row")
    s.add_argument("--response", required=True, help="name of the response column")
    s.add_argument("--method", choices=("scmc", "mdc"), default="scmc", help="two-stage (default) or marginal only")
    s.add_argument("--conditional", default=None,
                   help="comma-separated conditional column names, or 'mdc' to pick the top d1 (default)")
    s.add_argument("--d1", type=int, default=None, help="conditional set size (default floor(sqrt(n/log n)))")
    s.add_argument("--d2", type=int, default=None, help="number selected (default floor(n/log n))")
    s.add_argument("--tau", type=float, default=None, help="screen the quantile-transformed response at this level")
    s.add_argument("--mdc-bandwidths", default="2var,6var", help="marginal bandwidths, e.g. '2var,6var' or '1.5'")
    s.add_argument("--cmc-bandwidth", default="2", help="fixed bandwidth for the conditional score (default 2)")
    _add_kernel_options(s)
    _add_workers(s)
    s.add_argument("--seed", type=int, default=0, help="recorded in the manifest; screening itself is deterministic")
    s.add_argument("--output", "-o", required=True, help="output directory (scores.tsv, result.json)")
    s.set_defaults(func=cmd_screen)

    m = sub.add_parser("measure", help="print divergence, correlation and S_n for target columns")
    m.add_argument("input")
    m.add_argument("--response", required=True)
    m.add_argument("--targets", default=None, help="comma-separated target columns (default: all others)")
    m.add_argument("--conditional", default=None, help="comma-separated conditional columns")
    m.add_argument("--bandwidth", default="2", help="target bandwidth, fixed ('2') or variance-scaled ('2var')")
    m.add_argument("--cond-bandwidth", default="2", help="fixed bandwidth for the standardised conditional block")
    _add_kernel_options(m)
    m.add_argument("--output", "-o", default=None, help="write the table here instead of stdout")
    m.set_defaults(func=cmd_measure)

    sim = sub.add_parser("simulate", help="run replicates of a synthetic design and tabulate selection rates")
    _add_design_options(sim)
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--methods", default="mdc,scmc", help="comma-separated subset of mdc,scmc")
    sim.add_argument("--conditional", default=None, help="e.g. 'X1,X5,X10', or 'mdc' for data-driven (default)")
    _add_workers(sim)
    sim.add_argument("--output", "-o", required=True, help="output directory (replicates.jsonl, report.tsv)")
    sim.set_defaults(func=cmd_simulate)

    g = sub.add_parser("generate", help="write one replicate of a synthetic design as CSV")
    _add_design_options(g)
    g.add_argument("--replicate", type=int, default=0)
    g.add_argument("--output", "-o", required=True)
    g.set_defaults(func=cmd_generate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except InputError as e:
        print(f"cmcscreen: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as e:
        print(f"cmcscreen: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateDataError as e:
        print(f"cmcscreen: degenerate data: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as e:
        print(f"cmcscreen: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    log.info("elapsed %.2f s", time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
