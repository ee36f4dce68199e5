"""Output writers: delimited data, JSON reports, and rendered figures.

Every file embeds the fully materialized configuration and the artifact
version; no timestamps are written, so identical runs produce byte-identical
CSV and JSON outputs.
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import __version__
from .config import RunConfig, config_as_dict, serialize_config
from .geometry import classify_sites, default_t_n, enumerate_sites
from .montecarlo import (INNOVATIONS, RegimeExperimentReport, normality_test,
                         regime_experiment, sample_sums)
from .numerics import format_float, json_canonical
from .theta import sigma_sq, theta_fft, variance_decompose

SCAN_COLUMNS = ("lambda", "N_n", "sigma_sq", "tail_bound", "lindeberg_ratio",
                "interior_sum", "exterior_sum", "boundary_sum_scaled")
DECOMP_COLUMNS = ("lambda", "interior_sum", "exterior_sum", "boundary_sum",
                  "boundary_sum_scaled", "t_n", "sigma_sq_total", "tail_bound")


def _header_lines(cfg: RunConfig) -> str:
    cfg_json = json_canonical(config_as_dict(cfg)).replace("\n", " ")
    while "  " in cfg_json:
        cfg_json = cfg_json.replace("  ", " ")
    return f"# version: {__version__}\n# config: {cfg_json}\n"


def write_csv(path: str, cfg: RunConfig, columns, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header_lines(cfg))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(
                format_float(row[c]) if isinstance(row[c], float) else str(row[c])
                for c in columns) + "\n")


def write_json(path: str, cfg: RunConfig, payload: dict) -> None:
    doc = {"version": __version__, "config": config_as_dict(cfg)}
    doc.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json_canonical(doc) + "\n")


def _scan_rows(report: RegimeExperimentReport):
    return [{c: r[c] for c in SCAN_COLUMNS} for r in report.per_lambda]


def _decomp_rows(report: RegimeExperimentReport):
    rows = []
    for r in report.per_lambda:
        rows.append({
            "lambda": r["lambda"],
            "interior_sum": r["interior_sum"],
            "exterior_sum": r["exterior_sum"],
            "boundary_sum": r["boundary_sum"],
            "boundary_sum_scaled": r["boundary_sum_scaled"],
            "t_n": r["t_n"],
            "sigma_sq_total": r["sigma_sq"],
            "tail_bound": r["tail_bound"],
        })
    return rows


def run_command(cfg: RunConfig, out_dir: str | None = None,
                progress=None) -> list[str]:
    """Execute the configured command; returns the list of files written."""
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    model = cfg.build_model()
    prototype = cfg.build_prototype()
    command = cfg.command
    written: list[str] = []

    def emit_csv(name, columns, rows):
        path = os.path.join(out, name)
        write_csv(path, cfg, columns, rows)
        written.append(path)

    def emit_json(name, payload):
        path = os.path.join(out, name)
        write_json(path, cfg, payload)
        written.append(path)

    if command == "mc":
        lam = cfg.lambda_grid[-1]
        sites = enumerate_sites(prototype, lam)
        theta = theta_fft(model, sites, rho=cfg.rho, workers=cfg.workers)
        value, tail = sigma_sq(theta)
        sigma_n = math.sqrt(value)
        samples = sample_sums(theta, INNOVATIONS[cfg.innovation],
                              cfg.replicates, cfg.base_seed)
        clt = normality_test(samples, sigma_n,
                             tail_std_fraction=math.sqrt(tail) / sigma_n)
        payload = clt.to_json_dict()
        payload["lambda"] = lam
        payload["sigma_sq"] = value
        payload["tail_variance_ok"] = bool(tail < 0.01 * value)
        emit_json("clt_report.json", {"clt": payload})
        z = samples / sigma_n
        counts, edges = np.histogram(z, bins=48, range=(-6.0, 6.0))
        emit_csv("histogram.csv", ("bin_left", "bin_right", "count"),
                 [{"bin_left": float(edges[i]), "bin_right": float(edges[i + 1]),
                   "count": int(counts[i])} for i in range(len(counts))])
        return written

    want_clt = command == "report"
    want_limit = command in ("limits", "report")
    report = regime_experiment(
        model, prototype, cfg.lambda_grid,
        innovation=cfg.innovation, replicates=cfg.replicates,
        base_seed=cfg.base_seed, rho=cfg.rho, t_rule=cfg.t_rule,
        run_clt=want_clt, compute_limit=want_limit, workers=cfg.workers,
        progress=progress,
    )

    if command in ("scan", "report"):
        emit_csv("scan.csv", SCAN_COLUMNS, _scan_rows(report))
        emit_json("growth.json", {
            "slope": report.slope,
            "intercept": report.intercept,
            "slope_halfwidth": report.slope_halfwidth,
            "predicted_exponent": report.predicted_exponent,
            "regime": report.regime_label,
        })
    if command in ("decompose", "report"):
        rows = _decomp_rows(report)
        emit_csv("decomposition.csv", DECOMP_COLUMNS, rows)
        for r, row in zip(report.per_lambda, rows):
            emit_json(f"decomposition_lam{int(r['lambda'])}.json", {
                "decomposition": {k: row[k] for k in DECOMP_COLUMNS if k != "lambda"}
            })
    if command == "limits":
        payload = {"limits": [report.limit.to_json_dict()] if report.limit else []}
        if report.limit and report.limit.cross_check is not None:
            payload["cross_check"] = report.limit.cross_check
        emit_json("limits.json", payload)
    if command == "report":
        payload = {"limits": [report.limit.to_json_dict()] if report.limit else []}
        if report.limit and report.limit.cross_check is not None:
            payload["cross_check"] = report.limit.cross_check
        emit_json("limits.json", payload)
        if report.clt is not None:
            clt_payload = report.clt.to_json_dict()
            clt_payload["lambda"] = cfg.lambda_grid[-1]
            clt_payload["theorem_scale"] = report.clt_theorem_scale
            tail_frac = report.clt.tail_std_fraction
            clt_payload["tail_variance_ok"] = bool(tail_frac**2 < 0.01)
            emit_json("clt_report.json", {"clt": clt_payload})
        if report.histogram is not None:
            edges = report.histogram["edges"]
            counts = report.histogram["counts"]
            emit_csv("histogram.csv", ("bin_left", "bin_right", "count"),
                     [{"bin_left": float(edges[i]), "bin_right": float(edges[i + 1]),
                       "count": int(counts[i])} for i in range(len(counts))])
        lind = [r["lindeberg_ratio"] for r in report.per_lambda]
        emit_json("summary.json", {
            "regime": report.regime_label,
            "predicted_exponent": report.predicted_exponent,
            "measured_slope": report.slope,
            "slope_halfwidth": report.slope_halfwidth,
            "slope_minus_predicted": report.slope - report.predicted_exponent,
            "limit_value": report.limit.value if report.limit else None,
            "limit_error": report.limit.error_estimate if report.limit else None,
            "ratio_sigma_sq_to_theory_largest": report.ratio_largest,
            "lindeberg_strictly_decreasing": bool(
                all(b < a for a, b in zip(lind, lind[1:]))),
            "lindeberg_largest": lind[-1],
            "clt_pass": report.clt.passed if report.clt else None,
        })
        written.extend(render_figures(report, cfg, out))
    return written


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

def render_figures(report: RegimeExperimentReport, cfg: RunConfig,
                   out_dir: str) -> list[str]:
    """Render the growth, histogram and decomposition figures as PNG files."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    lams = np.array([r["lambda"] for r in report.per_lambda])
    sig = np.array([r["sigma_sq"] for r in report.per_lambda])

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.loglog(lams, sig, "o-", label=r"measured $\sigma_n^2$")
    fit = np.exp(report.intercept) * lams**report.slope
    ax.loglog(lams, fit, "--",
              label=f"fit slope {report.slope:.3f}")
    theo = np.array([r.get("theory_scale_sq", math.nan) for r in report.per_lambda])
    if np.all(np.isfinite(theo)):
        ax.loglog(lams, theo, ":", label=f"theory exponent {report.predicted_exponent:g}")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$\sigma_n^2$")
    ax.set_title(f"variance growth [{report.regime_label}]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, "variance_growth.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)

    if report.histogram is not None:
        edges = np.asarray(report.histogram["edges"])
        counts = np.asarray(report.histogram["counts"], dtype=float)
        centers = 0.5 * (edges[:-1] + edges[1:])
        width = edges[1] - edges[0]
        density = counts / counts.sum() / width
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        ax.bar(centers, density, width=width * 0.95, alpha=0.7,
               label="standardized sums")
        zz = np.linspace(-5, 5, 400)
        ax.plot(zz, np.exp(-zz**2 / 2) / math.sqrt(2 * math.pi), "k-",
                label="standard normal")
        ks = report.clt.ks_statistic if report.clt else math.nan
        ax.set_title(f"CLT check (KS = {ks:.4f})")
        ax.set_xlabel("standardized sum")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(out_dir, "clt_histogram.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)

    interior = np.array([r["interior_sum"] for r in report.per_lambda])
    exterior = np.array([r["exterior_sum"] for r in report.per_lambda])
    boundary = np.array([r["boundary_sum"] for r in report.per_lambda])
    total = interior + exterior + boundary
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.stackplot(lams, interior / total, exterior / total, boundary / total,
                 labels=("interior", "exterior", "boundary"), alpha=0.8)
    ax.set_xscale("log")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"share of $\sigma_n^2$")
    ax.set_title("variance decomposition")
    ax.legend(fontsize=8, loc="center left")
    fig.tight_layout()
    path = os.path.join(out_dir, "decomposition.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)
    return written
