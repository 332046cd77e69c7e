"""Aggregation and CSV/JSON output."""
import csv
import json
import math
from collections import defaultdict

import numpy as np

from ..errors import EmptyResults

RESULT_COLUMNS = [
    "run", "sinr_db", "sbnr_db", "smnr_db", "filter", "status", "selected_rank",
    "j_value", "reconstruction_error", "pdc_error", "cond_H", "cond_Hc",
]
SUMMARY_COLUMNS = [
    "filter", "sinr_db", "sbnr_db", "smnr_db", "n_runs", "n_failed",
    "recon_mean", "recon_median", "recon_std",
    "pdc_mean", "pdc_median", "pdc_std",
]
TIMING_COLUMNS = ["run", "sinr_db", "sbnr_db", "smnr_db", "filter", "elapsed_s"]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def result_rows(results):
    for rr in results:
        for fr in rr.filters:
            yield {
                "run": rr.run_index, "sinr_db": rr.sinr_db, "sbnr_db": rr.sbnr_db,
                "smnr_db": rr.smnr_db, "filter": fr.kind, "status": fr.status,
                "selected_rank": fr.selected_rank, "j_value": fr.j_value,
                "reconstruction_error": fr.reconstruction_error,
                "pdc_error": fr.pdc_error, "cond_H": rr.cond_H, "cond_Hc": rr.cond_Hc,
            }


def _stats(values):
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size == 0:
        return float("nan"), float("nan"), float("nan")
    return float(np.mean(v)), float(np.median(v)), float(np.std(v))


def aggregate(results):
    """Per (filter, SNR point): run count, failures and mean / median /
    population std of both error metrics over the finite values."""
    if not results:
        raise EmptyResults("nothing to aggregate")
    groups = defaultdict(list)
    order = []
    for row in result_rows(results):
        key = (row["filter"], row["sinr_db"], row["sbnr_db"], row["smnr_db"])
        if key not in groups:
            order.append(key)
        groups[key].append(row)
    table = []
    for key in order:
        rows = groups[key]
        rec = _stats(r["reconstruction_error"] for r in rows)
        pdc = _stats(r["pdc_error"] for r in rows)
        table.append({
            "filter": key[0], "sinr_db": key[1], "sbnr_db": key[2], "smnr_db": key[3],
            "n_runs": len(rows),
            "n_failed": sum(not r["status"].startswith("ok") for r in rows),
            "recon_mean": rec[0], "recon_median": rec[1], "recon_std": rec[2],
            "pdc_mean": pdc[0], "pdc_median": pdc[1], "pdc_std": pdc[2],
        })
    return table


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def write_results(path, results):
    _write_csv(path, RESULT_COLUMNS, result_rows(results))


def write_summary(path, table):
    _write_csv(path, SUMMARY_COLUMNS, table)


def write_timing(path, results):
    rows = ({"run": rr.run_index, "sinr_db": rr.sinr_db, "sbnr_db": rr.sbnr_db,
             "smnr_db": rr.smnr_db, "filter": fr.kind, "elapsed_s": fr.elapsed_s}
            for rr in results for fr in rr.filters)
    _write_csv(path, TIMING_COLUMNS, rows)


def write_config_echo(path, cfg):
    d = cfg.resolved()
    d["run_seed_entropy"] = [[cfg.master_seed, i] for i in range(cfg.n_runs)]
    with open(path, "w") as f:
        json.dump(d, f, indent=2, sort_keys=True)
        f.write("\n")


def write_all(out_dir, cfg, results):
    """Write results.csv, summary.csv, timing.csv and config-echo.json;
    return the summary table."""
    out_dir.mkdir(parents=True, exist_ok=True)
    table = aggregate(results)
    write_results(out_dir / "results.csv", results)
    write_summary(out_dir / "summary.csv", table)
    write_timing(out_dir / "timing.csv", results)
    write_config_echo(out_dir / "config-echo.json", cfg)
    return table


def format_table(table, metric="recon_median"):
    """Plain-text pivot: one row per filter, one column per SINR."""
    sinrs = sorted({row["sinr_db"] for row in table})
    cells = defaultdict(dict)
    names = []
    for row in table:
        if row["filter"] not in cells:
            names.append(row["filter"])
        cells[row["filter"]][row["sinr_db"]] = row[metric]
    width = max(len(n) for n in names)
    lines = [f"{metric} by SINR (dB)",
             " " * width + "".join(f"{s:>12g}" for s in sinrs)]
    for n in names:
        lines.append(n.ljust(width) + "".join(f"{cells[n].get(s, float('nan')):>12.4g}"
                                              for s in sinrs))
    return "\n".join(lines)
