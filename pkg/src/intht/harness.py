"""Experiment drivers: single runs, phase sweeps and their CSV files.

CSV bodies depend only on the configuration and seed. Wall-clock and peak
memory go to a ``<out>.timing.csv`` sidecar so reruns compare byte for byte.
"""
from __future__ import annotations

import csv
import io
import math
import os
import resource
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .atee import derive_seed
from .data import DataSet, generate
from .errors import ConfigError, OutputError
from .optimizer import intht_order3_run, intht_run, intht_vr_run, support_metrics
from .tensor import SparseTensor, hard_threshold

RUN_COLUMNS = ("t", "frob_error", "support_precision", "support_recall", "atee_set_size", "success")
TIMING_COLUMNS = ("t", "wall_ms", "peak_rss_kb")
BK_COLUMNS = ("kind", "K", "b", "successes", "trials", "rate", "median_rel_error")
MP_COLUMNS = ("kind", "p", "m", "successes", "trials", "rate", "median_rel_error")

ORDER3_DEFAULTS = {"p": 30, "K": 20, "order": 3}
SWEEP_MP_DEFAULTS = {"mode": "exact", "regime": "bernoulli", "K": 5}


@dataclass
class RunOutcome:
    theta: SparseTensor
    records: list
    theta_star: SparseTensor

    @property
    def final_error(self) -> float:
        return self.theta.frobenius_distance(self.theta_star)

    @property
    def rel_error(self) -> float:
        scale = self.theta_star.norm()
        return self.final_error / scale if scale else self.final_error

    @property
    def support_recovered(self) -> bool:
        truth = self.theta_star.folded().support()
        return hard_threshold(self.theta.folded(), len(truth)).support() == truth

    def success(self, tol: float) -> bool:
        return self.support_recovered and self.rel_error < tol


def dataset_for(config, seed: int | None = None) -> DataSet:
    seed = config.seed if seed is None else seed
    return generate(config.regime, config.n_eff, config.p, config.K, config.order, seed, config.include_diagonal)


def execute(config, data: DataSet | None = None, theta0: SparseTensor | None = None) -> RunOutcome:
    """Generate (or take) the data, run the configured mode, keep everything."""
    data = data if data is not None else dataset_for(config)
    if config.mode == "vr":
        runner = intht_vr_run
    elif config.order == 3:
        runner = intht_order3_run
    else:
        runner = intht_run
    theta, records = runner(config, data, data.theta_star, theta0)
    return RunOutcome(theta, records, data.theta_star)


# -- csv ---------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(v: str):
    if v == "":
        return None
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in header])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    """Write ``rows`` (dicts) as UTF-8 CSV to ``path``; ``None`` or ``-`` means stdout."""
    text = to_csv(header, rows)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def check_writable(path) -> None:
    """Fail before a long run rather than after it."""
    if path in (None, "-"):
        return
    target = Path(path)
    parent = target.parent if str(target.parent) else Path(".")
    if target.is_dir() or not parent.is_dir() or not os.access(parent, os.W_OK):
        raise OutputError(f"cannot write {path}: directory missing or not writable")
    if target.exists() and not os.access(target, os.W_OK):
        raise OutputError(f"cannot write {path}: permission denied")


def read_csv(path) -> tuple[list, list]:
    """``(header, rows)`` with numeric fields parsed and blanks as None."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [dict(zip(header, (_parse(v) for v in r))) for r in reader]
    except (OSError, StopIteration) as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    return header, rows


def _timing_path(out) -> str | None:
    return None if out in (None, "-") else f"{out}.timing.csv"


def _peak_rss_kb() -> int:
    return int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss)


# -- single runs -----------------------------------------------------------------

def run_rows(outcome: RunOutcome, tol: float) -> list:
    rows = [
        {"t": r.t, "frob_error": r.frob_error, "support_precision": r.support_precision,
         "support_recall": r.support_recall, "atee_set_size": r.atee_set_size}
        for r in outcome.records
    ]
    err, prec, rec = support_metrics(outcome.theta, outcome.theta_star)
    rows.append({"t": "summary", "frob_error": err, "support_precision": prec,
                 "support_recall": rec, "success": outcome.success(tol)})
    return rows


def cmd_run(config, data: DataSet | None = None, theta0: SparseTensor | None = None) -> RunOutcome:
    """One run; per-iteration rows plus a summary row go to ``config.out``."""
    check_writable(config.out)
    outcome = execute(config, data, theta0)
    write_csv(config.out, RUN_COLUMNS, run_rows(outcome, config.success_tol))
    timing = _timing_path(config.out)
    if timing:
        peak = _peak_rss_kb()
        write_csv(timing, TIMING_COLUMNS,
                  [{"t": r.t, "wall_ms": r.wall_ms, "peak_rss_kb": peak} for r in outcome.records])
    return outcome


def cmd_order3(config, data=None, theta0=None) -> RunOutcome:
    if config.order != 3:
        raise ConfigError("order3 needs order=3")
    return cmd_run(config, data, theta0)


# -- sweeps -----------------------------------------------------------------------

def _cell(args):
    config, data_seed = args
    outcome = execute(config, dataset_for(config, data_seed))
    return outcome.support_recovered, outcome.rel_error


def _map(jobs, workers: int) -> list:
    if workers <= 1:
        return [_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell, jobs))  # map keeps submission order


def _sweep(config, cells, repeats, workers):
    """Run every (label, overrides) cell ``repeats`` times; yields per-cell summaries.

    Datasets and run seeds depend on the cell's non-swept key and the repeat
    index, so different values of the swept axis see the same instances.
    """
    if not cells:
        raise ConfigError("sweep grid is empty")
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    jobs = []
    for key, overrides in cells:
        for r in range(repeats):
            seed = derive_seed(config.seed, key, r)
            cfg = replace(config, seed=seed, out=None, **overrides)
            cfg.validate()
            jobs.append((cfg, seed))
    results = _map(jobs, workers)
    for c, (key, overrides) in enumerate(cells):
        chunk = results[c * repeats:(c + 1) * repeats]
        wins = sum(ok for ok, _ in chunk)
        yield overrides, wins, statistics.median(e for _, e in chunk)


def minimal_value(rows, group: str, axis: str, need: float) -> dict:
    """Smallest ``axis`` value per ``group`` whose rate reaches ``need`` (None if never)."""
    out: dict = {}
    for row in rows:
        out.setdefault(row[group], None)
        if row["rate"] >= need - 1e-12 and (out[row[group]] is None or row[axis] < out[row[group]]):
            out[row[group]] = row[axis]
    return out


def cmd_sweep_bk(config, b_grid, k_grid, repeats: int = 3, workers: int = 1) -> list:
    """Support-recovery rate over a b x K grid; minimal b at full success per K."""
    check_writable(config.out)
    cells = [(K, {"K": K, "b": b, "k": None}) for K in k_grid for b in b_grid]
    rows = []
    for ov, wins, med in _sweep(config, cells, repeats, workers):
        rows.append({"kind": "cell", "K": ov["K"], "b": ov["b"], "successes": wins,
                     "trials": repeats, "rate": wins / repeats, "median_rel_error": med})
    mins = minimal_value(rows, "K", "b", 1.0)
    rows += [{"kind": "min_b", "K": K, "b": mins[K]} for K in k_grid]
    write_csv(config.out, BK_COLUMNS, rows)
    return rows


def cmd_sweep_mp(config, m_grid, p_grid, repeats: int = 5, workers: int = 1, need: int = 4) -> list:
    """Exact-mode recovery rate over an m x p grid; minimal m with ``need``/``repeats`` wins per p.

    Without an explicit ``n`` every cell draws from ``20 * max(m_grid)`` samples.
    """
    check_writable(config.out)
    if not m_grid:
        raise ConfigError("sweep grid is empty")
    # one sample pool per cell regardless of m, so only the batch size varies
    n = config.n if config.n is not None else 20 * max(m_grid)
    config = replace(config, mode="exact", n=n)
    cells = [(p, {"p": p, "m": m}) for p in p_grid for m in m_grid]
    rows = []
    for ov, wins, med in _sweep(config, cells, repeats, workers):
        rows.append({"kind": "cell", "p": ov["p"], "m": ov["m"], "successes": wins,
                     "trials": repeats, "rate": wins / repeats, "median_rel_error": med})
    mins = minimal_value(rows, "p", "m", need / repeats)
    rows += [{"kind": "min_m", "p": p, "m": mins[p]} for p in p_grid]
    write_csv(config.out, MP_COLUMNS, rows)
    return rows


def is_geometric(errors, burn_in: int = 0, slack: float = 1e-9) -> bool:
    """True if ``errors`` never increase after ``burn_in`` (allowing ``slack``)."""
    tail = [e for e in errors[burn_in:] if not math.isnan(e)]
    return all(b <= a * (1 + slack) for a, b in zip(tail, tail[1:]))
