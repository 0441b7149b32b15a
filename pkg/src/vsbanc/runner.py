"""Scenario execution: closed-loop runs, tonal sweeps, frequency-domain optimal
analysis and validation. Every report embeds the scenario hash and seed."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import kernels
from .acoustics import (
    EvalGrid,
    condition_number,
    controllable_limit,
    noise_reduction,
    optimal_source_strengths,
    transfer_matrices,
)
from .analysis import NrReport, NrRow, broadband_nr, third_octave_bands
from .controller import (
    FxlmsConfig,
    identify_secondary_paths,
    lms_step_size,
    observe,
    run_simulation,
    spl_to_pressure_rms,
    stability_bound,
    window_power,
)
from .errors import IllPosedControlError, ScenarioError, VsbError
from .scenario import SCHEMA, Scenario, _path, jsonable, load_scenario, parse_scenario
from .signals import SampleBuffer, gen_white_noise, write_wav

log = logging.getLogger(__name__)

BOUND_WINDOW = 2.0  # seconds of reference used for the step-size estimate
DEFAULT_OPTIMAL_FREQS = [float(f) for f in range(50, 1501, 50)]


@dataclass
class Plant:
    paths: object
    monitor_paths: object
    s_hat: np.ndarray
    identification: dict = field(default_factory=dict)


def prepare_plant(sc: Scenario) -> Plant:
    """Error and monitor paths plus the controller's secondary-path model."""
    paths = sc.pathset()
    monitors = sc.pathset(sc.monitor_mics)
    pl = sc.cfg["plant"]
    if pl["secondary_model"] == "exact":
        return Plant(paths, monitors, np.array(paths.secondary_irs))
    idc = pl["identification"]
    sr = sc.sample_rate
    excitation = gen_white_noise(1.0, idc["duration"], sr, seed=sc.seed + 1)
    mu = lms_step_size(excitation, idc["taps"], idc["step_fraction"])
    noise = 0.0 if idc["noise_spl"] is None else spl_to_pressure_rms(idc["noise_spl"])
    res = identify_secondary_paths(paths, excitation, idc["taps"], mu, idc["passes"],
                                   noise_rms=noise, seed=sc.seed + 2)
    true = paths.secondary_irs
    L = min(true.shape[2], res.s_hat.shape[2])
    rel = float(np.linalg.norm(res.s_hat[..., :L] - true[..., :L]) / np.linalg.norm(true))
    info = {"step_size": mu, "max_error_ratio": float(res.error_ratio.max()),
            "relative_coefficient_error": rel}
    return Plant(paths, monitors, res.s_hat, info)


def _step_size(sc: Scenario, x, s_hat):
    ctrl = sc.cfg["controller"]
    n = min(x.size, int(BOUND_WINDOW * sc.sample_rate))
    bound = stability_bound(x[:n], s_hat, ctrl["taps"])
    mu = ctrl["step_size"] if "step_size" in ctrl else ctrl["step_fraction"] * bound
    return float(mu), float(bound)


def simulate_condition(sc: Scenario, plant: Plant, stimulus: SampleBuffer, label: str,
                       keep_signals=False) -> dict:
    """Closed-loop run of one stimulus with ANC-off/on analysis at the monitor microphones."""
    ctrl = sc.cfg["controller"]
    sim = sc.cfg["simulation"]
    weighting = sc.cfg["analysis"]["weighting"]
    mu, bound = _step_size(sc, stimulus.mono, plant.s_hat)
    config = FxlmsConfig(ctrl["taps"], mu, plant.paths.n_secondaries, plant.paths.n_errors,
                         ctrl["leakage"], ctrl["output_limit"])
    lg = run_simulation(plant.paths, config, plant.s_hat, stimulus, settle=sim["settle"],
                        background_spl=sim["background_spl"], seed=sc.seed,
                        snapshot_interval=sim["snapshot_interval"],
                        reference_noise_rms=sim["reference_noise_rms"],
                        convergence_window=sim["convergence_window"])
    off, on = observe(plant.monitor_paths, stimulus, lg.y, sim["background_spl"], sc.seed)
    sr = sc.sample_rate
    c = lg.converged_index
    if c is None:
        c = max(lg.settle_index, off.shape[1] - int(sim["convergence_window"] * sr))
    s0 = lg.settle_index

    def buf(a):
        return SampleBuffer(a, sr)

    row = broadband_nr(buf(off[:, c:]), buf(on[:, c:]), weighting, label, lg.converged)
    whole = broadband_nr(buf(off[:, s0:]), buf(on[:, s0:]), weighting, label, True, bands=False)
    err = broadband_nr(buf(lg.d[:, c:]), buf(lg.e[:, c:]), weighting, label, lg.converged, bands=False)
    result = {
        "label": label,
        "step_size": mu,
        "stability_bound": bound,
        "converged": lg.converged,
        "converged_index": lg.converged_index,
        "converged_time_s": None if lg.converged_index is None else lg.converged_index / sr,
        "analysis_start_index": c,
        "monitor": {"spl_off": row.spl_off, "spl_on": row.spl_on, "nr_converged": row.nr,
                    "nr_whole_run": whole.nr, "band_nr": row.band_nr},
        "error_mics": {"spl_off": err.spl_off, "spl_on": err.spl_on, "nr_converged": err.nr},
        "final_weight_norm": float(np.linalg.norm(lg.W)),
        "_row": row,
    }
    if keep_signals:
        result["_log"] = lg
        result["_monitor"] = (off, on)
    return result


def _public(result: dict) -> dict:
    return {k: v for k, v in result.items() if not k.startswith("_")}


def _write_text(path: Path, text: str):
    path.write_text(text)


def _dump_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _summary_base(sc: Scenario, kind: str) -> dict:
    return {"report": kind, "scenario_name": sc.name, "provenance": sc.provenance(kernels.BACKEND),
            "scenario": sc.raw}


def run_scenario(sc: Scenario, out_dir=None) -> dict:
    """Run a scenario: a tonal sweep when it has a ``sweep`` block, else one stimulus."""
    if "sweep" in sc.cfg:
        return run_sweep(sc, out_dir=out_dir)
    plant = prepare_plant(sc)
    stim = sc.stimulus_spec().generate(sc.base_dir)
    res = simulate_condition(sc, plant, stim, sc.stimulus_label(), keep_signals=True)
    report = NrReport([res["_row"]], sc.cfg["analysis"]["weighting"])
    summary = _summary_base(sc, "run")
    summary.update({"table": report.to_dict(), "condition": _public(res),
                    "identification": plant.identification})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lg = res["_log"]
        off, on = res["_monitor"]
        sr = sc.sample_rate
        c = res["analysis_start_index"]
        _write_text(out / "summary.json", _dump_json(summary))
        _write_text(out / "nr.csv", report.to_csv())
        _write_text(out / "bands.csv", _bands_csv(SampleBuffer(off[:, c:], sr), SampleBuffer(on[:, c:], sr),
                                                  sc.cfg["analysis"]["weighting"]))
        _write_text(out / "residual.csv", _residual_csv(lg))
        _write_text(out / "weights.csv", _weights_csv(lg))
        _write_text(out / "scenario.json", _dump_json(sc.raw))
        write_wav(SampleBuffer(lg.d, sr), out / "errors_anc_off.wav")
        write_wav(SampleBuffer(lg.e, sr), out / "errors_anc_on.wav")
        write_wav(SampleBuffer(off, sr), out / "monitor_anc_off.wav")
        write_wav(SampleBuffer(on, sr), out / "monitor_anc_on.wav")
    return summary


def _sweep_worker(args):
    raw, base_dir, freq = args
    sc = parse_scenario(raw, base_dir=base_dir)
    plant = prepare_plant(sc)
    stim = sc.stimulus_spec(freq).generate(sc.base_dir)
    res = simulate_condition(sc, plant, stim, f"{freq:g} Hz")
    return freq, res


def run_sweep(sc: Scenario, frequencies=None, jobs: int = 1, out_dir=None) -> dict:
    """Tonal sweep: one closed-loop run per frequency, one NR row each."""
    if frequencies is None:
        if "sweep" not in sc.cfg:
            raise ScenarioError("sweep", "no sweep frequencies given")
        frequencies = sc.cfg["sweep"]["frequencies"]
    freqs = [float(f) for f in frequencies]
    for i, f in enumerate(freqs):
        try:
            sc.stimulus_spec(f)
        except VsbError as exc:
            raise ScenarioError(f"sweep.frequencies.{i}", str(exc)) from exc
    tasks = [(sc.raw, sc.base_dir, f) for f in freqs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_worker, tasks))
    else:
        results = [_sweep_worker(t) for t in tasks]
    report = NrReport([r["_row"] for _, r in results], sc.cfg["analysis"]["weighting"])
    summary = _summary_base(sc, "sweep")
    summary.update({"table": report.to_dict(), "frequencies": freqs,
                    "conditions": [_public(r) for _, r in results]})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "summary.json", _dump_json(summary))
        _write_text(out / "nr.csv", report.to_csv())
        _write_text(out / "scenario.json", _dump_json(sc.raw))
    return summary


@dataclass
class OptimalRow:
    freq: float
    nr_optimal: float
    condition_number: float
    rank_deficient: bool = False


def optimal_curve(sc: Scenario, frequencies=None, with_field=False):
    """Frequency-domain optimal NR over the evaluation grid at each frequency."""
    layout = sc.layout
    grid = sc.eval_grid()
    medium = sc.medium
    freqs = frequencies or sc.cfg.get("optimal", {}).get("frequencies", DEFAULT_OPTIMAL_FREQS)
    rows, fields = [], []
    for f in freqs:
        p_vec, s_mat = transfer_matrices(layout, grid, f, medium)
        p_off = p_vec * layout.q_p
        try:
            q = optimal_source_strengths(p_vec, s_mat, layout.q_p)
            p_on = p_off + s_mat @ q
            rows.append(OptimalRow(float(f), noise_reduction(p_off, p_on), condition_number(s_mat)))
        except IllPosedControlError as exc:
            p_on = np.full_like(p_off, np.nan)
            rows.append(OptimalRow(float(f), math.nan, exc.condition_number, True))
        if with_field:
            fields.append((float(f), p_off, p_on))
    return rows, grid, fields


def run_optimal_analysis(sc: Scenario, out_dir=None) -> dict:
    rows, grid, fields = optimal_curve(sc, with_field=out_dir is not None)
    f_h = controllable_limit(sc.opening.shorter_side, sc.medium)
    summary = _summary_base(sc, "optimal")
    summary.update({
        "controllable_limit_hz": f_h,
        "grid_points": len(grid),
        "rows": [vars(r) for r in rows],
    })
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "summary.json", _dump_json(summary))
        _write_text(out / "optimal.csv", _optimal_csv(rows))
        _write_text(out / "field.csv", _field_csv(grid, fields))
        _write_text(out / "scenario.json", _dump_json(sc.raw))
    return summary


# --- CSV writers ------------------------------------------------------------

def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return v


def _bands_csv(off: SampleBuffer, on: SampleBuffer, weighting) -> str:
    if off.duration < 1.0:
        return _csv(["center_hz", "spl_off_db", "spl_on_db", "nr_db"], [])
    b_off = third_octave_bands(off, weighting)
    b_on = third_octave_bands(on, weighting)
    rows = [(c, a, b, a - b if math.isfinite(a) and math.isfinite(b) else math.nan)
            for c, a, b in zip(b_off.centers, b_off.spl, b_on.spl)]
    return _csv(["center_hz", f"spl_off_db_{weighting}", f"spl_on_db_{weighting}", "nr_db"], rows)


def _residual_csv(lg) -> str:
    t, p = window_power(lg.e, lg.sample_rate, 0.1)
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(p / 20e-6**2)
    return _csv(["time_s", "residual_power", "residual_spl_db"], zip(t, p, db))


def _weights_csv(lg) -> str:
    rows = []
    if lg.snapshots is not None:
        for i, snap in enumerate(lg.snapshots):
            t = (i + 1) * lg.snapshot_interval / lg.sample_rate
            rows += [(t, k, l, snap[k, l]) for k in range(snap.shape[0]) for l in range(snap.shape[1])]
    t_end = lg.e.shape[1] / lg.sample_rate
    rows += [(t_end, k, l, lg.W[k, l]) for k in range(lg.W.shape[0]) for l in range(lg.W.shape[1])]
    return _csv(["time_s", "secondary", "tap", "weight"], rows)


def _optimal_csv(rows) -> str:
    return _csv(["freq_hz", "nr_optimal_db", "condition_number", "rank_deficient"],
                [(r.freq, r.nr_optimal, r.condition_number, r.rank_deficient) for r in rows])


def _field_csv(grid: EvalGrid, fields) -> str:
    out = []
    for f, p_off, p_on in fields:
        with np.errstate(divide="ignore", invalid="ignore"):
            spl_off = 20 * np.log10(np.abs(p_off) / np.sqrt(2) / 20e-6)
            spl_on = 20 * np.log10(np.abs(p_on) / np.sqrt(2) / 20e-6)
        for i, pt in enumerate(grid.points):
            out.append((f, *pt, p_off[i].real, p_off[i].imag, spl_off[i],
                        p_on[i].real, p_on[i].imag, spl_on[i]))
    return _csv(["freq_hz", "x_m", "y_m", "z_m", "re_off_pa", "im_off_pa", "spl_off_db",
                 "re_on_pa", "im_on_pa", "spl_on_db"], out)


# --- validation -------------------------------------------------------------

@dataclass
class Diagnostic:
    severity: str  # "error", "warning" or "info"
    path: str
    message: str


def validate_raw(raw, base_dir=None) -> list:
    """Schema, geometry and stability diagnostics; never raises for bad input."""
    diags = []
    if not isinstance(raw, dict):
        return [Diagnostic("error", "<root>", "scenario must be a JSON object")]
    validator = jsonschema.Draft202012Validator(SCHEMA)
    schema_errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    for e in schema_errors:
        diags.append(Diagnostic("error", _path(e), e.message))
    if schema_errors:
        return diags
    try:
        sc = parse_scenario(raw, base_dir=base_dir)
    except ScenarioError as exc:
        return diags + [Diagnostic("error", exc.path, str(exc))]
    f_h = controllable_limit(sc.opening.shorter_side, sc.medium)
    diags.append(Diagnostic("info", "opening", f"controllable limit c0/(2*l_s) = {f_h:.1f} Hz"))
    try:
        paths = sc.pathset()
        stim = sc.stimulus_spec(sc.cfg["sweep"]["frequencies"][0] if "sweep" in sc.cfg else None)
        x = stim.generate(sc.base_dir).mono
    except (VsbError, ValueError, OSError) as exc:
        return diags + [Diagnostic("error", "plant", str(exc))]
    ctrl = sc.cfg["controller"]
    n = min(x.size, int(BOUND_WINDOW * sc.sample_rate))
    bound = stability_bound(x[:n], paths.secondary_irs, ctrl["taps"])
    if "step_size" in ctrl:
        if ctrl["step_size"] > bound:
            diags.append(Diagnostic("warning", "controller.step_size",
                                    f"step size {ctrl['step_size']:g} exceeds the stability estimate "
                                    f"{bound:.4g}"))
        else:
            diags.append(Diagnostic("info", "controller.step_size", f"stability estimate {bound:.4g}"))
    elif ctrl["step_fraction"] > 1:
        diags.append(Diagnostic("warning", "controller.step_fraction",
                                f"step fraction {ctrl['step_fraction']:g} exceeds the stability estimate "
                                f"({bound:.4g})"))
    else:
        diags.append(Diagnostic("info", "controller.step_fraction",
                                f"step size {ctrl['step_fraction'] * bound:.4g} (estimate {bound:.4g})"))
    if "eval_grid" in sc.cfg and len(sc.cfg["secondaries"]) > len(sc.eval_grid()):
        diags.append(Diagnostic("warning", "eval_grid", "fewer grid points than secondary sources"))
    return diags


def validate(path) -> list:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        return [Diagnostic("error", "<root>", f"invalid JSON: {exc}")]
    return validate_raw(raw, base_dir=path.parent)


__all__ = ["Diagnostic", "Plant", "OptimalRow", "load_scenario", "optimal_curve", "prepare_plant",
           "run_optimal_analysis", "run_scenario", "run_sweep", "simulate_condition", "validate",
           "validate_raw"]
