"""Experiment harness: data generation, training, open- and closed-loop runs.

Reproducibility works through named SeedSequence branches: one root seed
determines patient parameters, meal profiles, dose schedules, report
noise, training shuffles/masks, meal scenarios and MC dropout masks.
Foundation and test patients live in separate cohorts; each patient owns
disjoint streams for dataset generation, benchmarking, open-loop
validation, and baseline calibration, so the same patient can be reused
across stages without stream collisions.  The MPC and fixed arms of the
closed-loop benchmark deliberately share the meal and report-noise
streams (paired comparison).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import AppConfig
from .dataset import EpisodeRecord, WindowDataset, read_episode_csv, write_episode_csv
from .errors import ConfigurationError, EvaluationError
from .forecast.model import (
    ModelWeights,
    decode,
    denormalize_scores,
    encode,
    forward,
    init_weights,
    make_dropout_masks,
    normalize_scores,
)
from .forecast.train import finetune, train
from .meals import sample_profile, sample_scenarios
from .mpc import HistoryWindow, hourly_dose_schedule, solve
from .patient import PatientParams, basal_state, sample_patient, simulate_hours
from .symptoms import (
    digestion_score_continuous,
    reflux_score_continuous,
    report,
    report_moments,
)

HOURS_PER_DAY = 24
FOUNDATION_COHORT = 0
TEST_COHORT = 1

# per-patient top-level streams, in spawn order
_S_PARAMS, _S_DATA, _S_BENCH, _S_OPENLOOP, _S_CALIB = range(5)


def patient_streams(seed: int, cohort: int, index: int) -> list[np.random.SeedSequence]:
    base = np.random.SeedSequence(seed, spawn_key=(cohort, index))
    return base.spawn(5)


def patient_params(seed: int, cohort: int, index: int,
                   ranges: dict | None = None) -> PatientParams:
    return sample_patient(patient_streams(seed, cohort, index)[_S_PARAMS], ranges)


# ---------------------------------------------------------------------------
# episode generation


def random_dose_schedule(n_days: int, rng: np.random.Generator, u_max: float,
                         block_days: tuple[int, int] = (1, 5)) -> np.ndarray:
    """Morning boluses with levels ~ U(0, u_max) held over 1-5 day blocks."""
    daily = np.empty(n_days)
    day = 0
    while day < n_days:
        length = int(rng.integers(block_days[0], block_days[1] + 1))
        level = float(rng.uniform(0.0, u_max))
        daily[day:day + length] = level
        day += length
    return hourly_dose_schedule(daily)


def fixed_dose_schedule(n_days: int, dose: float) -> np.ndarray:
    """Twice-daily fixed regimen: equal boluses at hours 8 and 18."""
    out = np.zeros(n_days * HOURS_PER_DAY)
    out[8::HOURS_PER_DAY] = dose / 2.0
    out[18::HOURS_PER_DAY] = dose / 2.0
    return out


def encode_episode_reports(acid: np.ndarray, params: PatientParams,
                           rng: np.random.Generator):
    """Hourly integer reports; one (n, 2) noise draw keeps streams aligned."""
    noise = rng.normal(0.0, params.sigma_noise, size=(acid.shape[0], 2))
    s_r = reflux_score_continuous(acid, params.a_high, params.k_r)
    s_d = digestion_score_continuous(acid, params.a_low, params.k_d)
    return (report(s_r, params.eta_r, noise[:, 0]),
            report(s_d, params.eta_d, noise[:, 1]))


def generate_episode(params: PatientParams, n_days: int, patient_id: int,
                     meal_rng: np.random.Generator, dose_rng: np.random.Generator,
                     report_rng: np.random.Generator, config: AppConfig,
                     dose_schedule: np.ndarray | None = None) -> EpisodeRecord:
    _, meal = sample_profile(n_days, meal_rng, config.meals)
    if dose_schedule is None:
        # capped below u_max: dosing past the suppression saturation point
        # teaches the forecaster nothing and starves the informative range
        cap = min(config.harness.training_dose_max, config.mpc.u_max)
        dose_schedule = random_dose_schedule(n_days, dose_rng, cap,
                                             config.harness.dose_block_days)
    acid, _ = simulate_hours(basal_state(params), meal, dose_schedule, params,
                             dt_sub=config.sim.dt_sub, dt_absorb=config.sim.dt_absorb)
    reflux, digestion = encode_episode_reports(acid, params, report_rng)
    return EpisodeRecord(patient_id=patient_id, meal=meal, dose=dose_schedule,
                         reflux=reflux, digestion=digestion, acid=acid)


def _episode_from_streams(params, n_days, patient_id, stream, config):
    meal_ss, dose_ss, report_ss = stream.spawn(3)
    return generate_episode(params, n_days, patient_id,
                            np.random.default_rng(meal_ss),
                            np.random.default_rng(dose_ss),
                            np.random.default_rng(report_ss), config)


def generate_foundation_dataset(n_patients: int, n_days: int, seed: int,
                                config: AppConfig
                                ) -> tuple[list[EpisodeRecord], WindowDataset]:
    """Per-patient randomized episodes plus pooled sliding windows."""
    if n_patients < 1:
        raise ConfigurationError("need at least one patient")
    span_days = (config.bnn.t_hist + config.bnn.t_fut) / HOURS_PER_DAY
    if n_days < span_days:
        raise ConfigurationError(
            f"n_days={n_days} shorter than one window ({span_days:g} days)")
    episodes = []
    for i in range(n_patients):
        streams = patient_streams(seed, FOUNDATION_COHORT, i)
        params = sample_patient(streams[_S_PARAMS], config.sim.ranges)
        episodes.append(_episode_from_streams(params, n_days, i,
                                              streams[_S_DATA], config))
    windows = WindowDataset.from_episodes(
        episodes, config.bnn.t_hist, config.bnn.t_fut, config.harness.stride_hours,
        dose_max=config.mpc.u_max)
    return episodes, windows


# ---------------------------------------------------------------------------
# dataset persistence: episode CSVs plus a JSON header


def save_dataset(episodes, windows: WindowDataset, out_dir,
                 include_hidden: bool = False, seed: int | None = None) -> Path:
    out_dir = Path(out_dir)
    ep_dir = out_dir / "episodes"
    ep_dir.mkdir(parents=True, exist_ok=True)
    for ep in episodes:
        write_episode_csv(ep, ep_dir / f"patient_{ep.patient_id:04d}.csv",
                          include_hidden=include_hidden)
    header = {
        "meal_max": windows.meal_max,
        "dose_max": windows.dose_max,
        "n_patients": len(episodes),
        "n_hours": len(episodes[0]) if episodes else 0,
        "n_windows": len(windows),
        "seed": seed,
        "include_hidden": include_hidden,
    }
    (out_dir / "dataset.json").write_text(
        json.dumps(header, sort_keys=True, indent=2) + "\n")
    return out_dir


def load_dataset(data_dir, config: AppConfig) -> tuple[list[EpisodeRecord], WindowDataset]:
    data_dir = Path(data_dir)
    header_path = data_dir / "dataset.json"
    if not header_path.exists():
        raise ConfigurationError(f"{data_dir}: missing dataset.json header")
    header = json.loads(header_path.read_text())
    paths = sorted((data_dir / "episodes").glob("patient_*.csv"))
    if not paths:
        raise ConfigurationError(f"{data_dir}: no episode files")
    episodes = [read_episode_csv(p, patient_id=int(p.stem.split("_")[1]))
                for p in paths]
    windows = WindowDataset.from_episodes(
        episodes, config.bnn.t_hist, config.bnn.t_fut, config.harness.stride_hours,
        meal_max=header["meal_max"], dose_max=header["dose_max"])
    return episodes, windows


# ---------------------------------------------------------------------------
# training orchestration


def train_foundation(windows: WindowDataset, config: AppConfig,
                     seed: int) -> tuple[ModelWeights, object]:
    ss = np.random.SeedSequence(seed, spawn_key=(2,))
    init_ss, loop_ss = ss.spawn(2)
    weights = init_weights(np.random.default_rng(init_ss),
                           hidden_size=config.bnn.hidden_size,
                           t_hist=config.bnn.t_hist, t_fut=config.bnn.t_fut,
                           dropout=config.bnn.dropout,
                           meal_max=windows.meal_max, dose_max=windows.dose_max)
    train_set, val_set = windows.split_train_val(config.bnn.val_fraction)
    return train(weights, train_set, val_set, config.bnn.train_config(),
                 np.random.default_rng(loop_ss))


def finetune_patient(foundation: ModelWeights, episode: EpisodeRecord,
                     config: AppConfig, seed: int,
                     patient_index: int = 0) -> tuple[ModelWeights, object]:
    """Adapt decoder+head on one patient's history (foundation normalization)."""
    windows = WindowDataset.from_episodes(
        [episode], foundation.t_hist, foundation.t_fut, config.harness.stride_hours,
        meal_max=foundation.meal_max, dose_max=foundation.dose_max)
    loop_ss = np.random.SeedSequence(seed, spawn_key=(3, patient_index))
    return finetune(foundation, (windows.hist, windows.inputs, windows.targets),
                    config.bnn.train_config(), np.random.default_rng(loop_ss),
                    val_fraction=config.bnn.val_fraction)


# ---------------------------------------------------------------------------
# open-loop validation


@dataclass
class OpenLoopResult:
    patient_id: int
    rmse: np.ndarray              # [2] reflux, digestion
    noise_floor: np.ndarray       # [2] best-achievable RMSE from report noise
    n_windows: int
    trace: list = field(repr=False, default_factory=list)


def window_starts(n_hours: int, t_hist: int, t_fut: int, stride: int) -> range:
    last = n_hours - (t_hist + t_fut)
    if last < 0:
        return range(0)
    return range(0, last + 1, stride)


def run_open_loop_validation(weights: ModelWeights, params: PatientParams,
                             n_days: int, seed: int, config: AppConfig,
                             patient_index: int = 0,
                             cohort: int = TEST_COHORT) -> OpenLoopResult:
    """Frozen-weights forecasting on a fresh randomized episode.

    Every stride the deterministic (dropout off) forecast of the next
    T_fut reports is compared against the true noisy reports; the noise
    floor is the RMSE an exact conditional-mean oracle would attain,
    computed from the hidden acid trace via the report-moment formula.
    """
    streams = patient_streams(seed, cohort, patient_index)
    episode = _episode_from_streams(params, n_days, patient_index,
                                    streams[_S_OPENLOOP], config)
    starts = window_starts(len(episode), weights.t_hist, weights.t_fut,
                           config.harness.stride_hours)
    if len(starts) == 0:
        raise ConfigurationError(
            f"episode of {len(episode)} hours is too short for one window")

    scores = np.stack([normalize_scores(episode.reflux),
                       normalize_scores(episode.digestion)], axis=1)
    inputs_full = np.stack([episode.meal / weights.meal_max,
                            episode.dose / weights.dose_max], axis=1)
    truth = np.stack([episode.reflux, episode.digestion], axis=1).astype(float)

    s_r = reflux_score_continuous(episode.acid, params.a_high, params.k_r)
    s_d = digestion_score_continuous(episode.acid, params.a_low, params.k_d)
    _, var_r = report_moments(s_r, params.eta_r, params.sigma_noise)
    _, var_d = report_moments(s_d, params.eta_d, params.sigma_noise)
    var = np.stack([var_r, var_d], axis=1)

    sq_sum = np.zeros(2)
    var_sum = np.zeros(2)
    count = 0
    trace = []
    for start in starts:
        span = slice(start, start + weights.t_hist + weights.t_fut)
        fut = slice(start + weights.t_hist, start + weights.t_hist + weights.t_fut)
        pred = denormalize_scores(
            forward(weights, scores[start:start + weights.t_hist], inputs_full[span]))
        err = pred - truth[fut]
        sq_sum += np.sum(err * err, axis=0)
        var_sum += np.sum(var[fut], axis=0)
        count += weights.t_fut
        for h in range(weights.t_fut):
            trace.append((start, h, float(pred[h, 0]), float(pred[h, 1]),
                          int(truth[fut][h, 0]), int(truth[fut][h, 1])))
    rmse = np.sqrt(sq_sum / count)
    floor = np.sqrt(var_sum / count)
    return OpenLoopResult(patient_id=patient_index, rmse=rmse, noise_floor=floor,
                          n_windows=len(starts), trace=trace)


# ---------------------------------------------------------------------------
# MPC predictor adapter


class BnnPredictor:
    """Forecast adapter for the dose search: raw histories in, score units out.

    Monte Carlo dropout prediction identical to ``predict_mc``, with the
    encoder pass cached per distinct history window (within one solve the
    history never changes, so the encoder runs once).
    """

    def __init__(self, weights: ModelWeights, mc_passes: int):
        self.weights = weights
        self.mc_passes = mc_passes
        self._cache_key = None
        self._cache_state = None

    def _encode_cached(self, hist_scores, hist_inputs):
        key = (hist_scores.tobytes(), hist_inputs.tobytes())
        if key != self._cache_key:
            self._cache_state = encode(self.weights, hist_scores, hist_inputs)
            self._cache_key = key
        return self._cache_state

    def __call__(self, hist_symptoms, hist_meals, hist_doses,
                 future_meals, future_doses, rng):
        w = self.weights
        hist_scores = normalize_scores(np.asarray(hist_symptoms, dtype=float))
        hist_inputs = np.stack([np.asarray(hist_meals) / w.meal_max,
                                np.asarray(hist_doses) / w.dose_max], axis=1)
        future = np.stack([np.asarray(future_meals) / w.meal_max,
                           np.asarray(future_doses) / w.dose_max], axis=1)
        h, c = self._encode_cached(hist_scores, hist_inputs)
        m = self.mc_passes
        h_rep = np.repeat(h, m, axis=0)
        c_rep = np.repeat(c, m, axis=0)
        masks = make_dropout_masks(rng, w.dropout,
                                   (m, future.shape[0], w.hidden_size))
        ys = decode(w, h_rep, c_rep,
                    np.ascontiguousarray(np.broadcast_to(future, (m,) + future.shape)),
                    masks)
        mu = denormalize_scores(ys.mean(axis=0))
        sigma = ys.std(axis=0) * 9.0
        return mu, sigma


# ---------------------------------------------------------------------------
# closed loop


@dataclass
class ClosedLoopResult:
    patient_id: int
    arm: str                       # "mpc" or "fixed"
    days: int
    usage: float                   # total administered dose over measured days
    satisfaction: np.ndarray       # [2] hourly fraction with report <= theta
    daily_doses: np.ndarray        # measured days
    reports: np.ndarray            # [n_hours, 2] measured hours
    meals: np.ndarray
    doses: np.ndarray              # hourly
    acid: np.ndarray               # hidden trace, measured hours
    violations: list               # (symptom, start_hour, end_hour) runs
    decisions: list = field(repr=False, default_factory=list)


def _violation_runs(mask: np.ndarray, symptom: str) -> list:
    runs = []
    start = None
    for h, bad in enumerate(mask):
        if bad and start is None:
            start = h
        elif not bad and start is not None:
            runs.append((symptom, start, h))
            start = None
    if start is not None:
        runs.append((symptom, start, len(mask)))
    return runs


def run_closed_loop(weights: ModelWeights | None, params: PatientParams,
                    n_days: int, bench_ss: np.random.SeedSequence,
                    config: AppConfig, arm: str = "mpc",
                    fixed_dose: float | None = None,
                    initial_dose: float | None = None,
                    patient_id: int = 0) -> ClosedLoopResult:
    """Daily loop: plan (MPC arm) or hold the fixed regimen, then simulate.

    ``bench_ss`` seeds three streams (meals, report noise, MPC internals);
    passing the same sequence to both arms yields a paired comparison on
    identical meals and noise.
    """
    if arm not in ("mpc", "fixed"):
        raise ConfigurationError(f"unknown arm {arm!r}")
    if arm == "fixed" and fixed_dose is None:
        raise ConfigurationError("fixed arm needs fixed_dose")
    if arm == "mpc" and weights is None:
        raise ConfigurationError("mpc arm needs trained weights")
    meal_ss, report_ss, mpc_ss = bench_ss.spawn(3)
    meal_rng = np.random.default_rng(meal_ss)
    report_rng = np.random.default_rng(report_ss)
    mpc_rng = np.random.default_rng(mpc_ss)

    warmup = config.harness.warmup_days
    total_days = warmup + n_days
    _, meal = sample_profile(total_days, meal_rng, config.meals)

    theta = config.mpc.theta
    if initial_dose is None:
        initial_dose = (config.harness.initial_dose
                        if config.harness.initial_dose >= 0
                        else 0.5 * config.mpc.u_max)
    t_hist = weights.t_hist if weights is not None else config.bnn.t_hist
    if warmup * HOURS_PER_DAY < t_hist:
        raise ConfigurationError(
            f"warmup of {warmup} days is shorter than the history window")

    predictor = BnnPredictor(weights, config.mpc.mc_passes) if arm == "mpc" else None

    def sampler(j, horizon_days, rng):
        return sample_scenarios(j, horizon_days, rng, config.meals)

    state = basal_state(params)
    reports_log = np.zeros((total_days * HOURS_PER_DAY, 2), dtype=np.int64)
    dose_log = np.zeros(total_days * HOURS_PER_DAY)
    acid_log = np.zeros(total_days * HOURS_PER_DAY)
    daily_doses = np.zeros(total_days)
    decisions = []

    for day in range(total_days):
        sl = slice(day * HOURS_PER_DAY, (day + 1) * HOURS_PER_DAY)
        if arm == "fixed":
            u_day = fixed_dose_schedule(1, fixed_dose)
        elif day < warmup:
            u_day = hourly_dose_schedule(np.array([initial_dose]))
        else:
            h0 = day * HOURS_PER_DAY
            history = HistoryWindow(
                symptoms=reports_log[h0 - t_hist:h0].astype(float),
                meals=meal[h0 - t_hist:h0],
                doses=dose_log[h0 - t_hist:h0])
            decision = solve(history, predictor, sampler, config.mpc,
                             mpc_rng.spawn(1)[0])
            u_day = decision.u_apply
            decisions.append({
                "day": day - warmup,
                "actions": decision.plan.actions,
                "dose": float(decision.plan.doses[0]),
                "score": decision.plan.score,
                "worst_violation": decision.plan.worst_violation,
                "mean_sigma": decision.plan.mean_sigma,
                "mean_feasible_frac": decision.mean_feasible_frac,
            })
        acid_day, state = simulate_hours(state, meal[sl], u_day, params,
                                         dt_sub=config.sim.dt_sub,
                                         dt_absorb=config.sim.dt_absorb)
        r, d = encode_episode_reports(acid_day, params, report_rng)
        reports_log[sl, 0] = r
        reports_log[sl, 1] = d
        dose_log[sl] = u_day
        acid_log[sl] = acid_day
        daily_doses[day] = u_day.sum()

    measured = slice(warmup * HOURS_PER_DAY, total_days * HOURS_PER_DAY)
    reports_m = reports_log[measured]
    satisfaction = (reports_m <= theta).mean(axis=0)
    violations = (_violation_runs(reports_m[:, 0] > theta, "reflux")
                  + _violation_runs(reports_m[:, 1] > theta, "digestion"))
    return ClosedLoopResult(
        patient_id=patient_id, arm=arm, days=n_days,
        usage=float(daily_doses[warmup:].sum()),
        satisfaction=satisfaction,
        daily_doses=daily_doses[warmup:].copy(),
        reports=reports_m.copy(),
        meals=meal[measured].copy(),
        doses=dose_log[measured].copy(),
        acid=acid_log[measured].copy(),
        violations=violations,
        decisions=decisions)


# ---------------------------------------------------------------------------
# fixed-regimen baseline calibration


@dataclass
class BaselineCalibration:
    dose: float                     # the fixed regimen's daily dose
    requirements: dict              # patient id -> minimal adequate daily dose
    satisfaction_at_requirement: dict
    unreachable: list               # patient ids that never met the target
    grid: tuple
    target: float


def open_loop_satisfaction(params: PatientParams, daily_dose: float, n_days: int,
                           calib_ss: np.random.SeedSequence,
                           config: AppConfig) -> np.ndarray:
    """Report satisfaction per symptom under the twice-daily fixed regimen."""
    if n_days <= config.harness.calibration_warmup_days:
        raise ConfigurationError(
            f"calibration needs more than {config.harness.calibration_warmup_days} "
            f"days, got {n_days}")
    meal_ss, report_ss = calib_ss.spawn(2)
    _, meal = sample_profile(n_days, np.random.default_rng(meal_ss), config.meals)
    doses = fixed_dose_schedule(n_days, daily_dose)
    acid, _ = simulate_hours(basal_state(params), meal, doses, params,
                             dt_sub=config.sim.dt_sub, dt_absorb=config.sim.dt_absorb)
    r, d = encode_episode_reports(acid, params, np.random.default_rng(report_ss))
    skip = config.harness.calibration_warmup_days * HOURS_PER_DAY
    reports = np.stack([r, d], axis=1)[skip:]
    return (reports <= config.mpc.theta).mean(axis=0)


def calibrate_fixed_dose(patients: list[tuple[int, PatientParams,
                                              np.random.SeedSequence]],
                         n_days: int, config: AppConfig) -> BaselineCalibration:
    """Fixed dose = 95th percentile of per-patient minimal adequate doses.

    A patient's requirement is the smallest grid dose whose open-loop
    satisfaction meets the target on both symptoms; patients that never
    meet it contribute the maximal grid dose and are flagged.
    """
    grid = tuple(sorted(config.harness.baseline_grid))
    if not grid:
        raise ConfigurationError("baseline grid is empty")
    target = config.harness.baseline_target
    requirements = {}
    sat_at_req = {}
    unreachable = []
    for pid, params, calib_ss in patients:
        requirement = None
        for dose in grid:
            sat = open_loop_satisfaction(params, dose, n_days, calib_ss, config)
            if sat.min() >= target:
                requirement = dose
                sat_at_req[pid] = sat
                break
        if requirement is None:
            requirement = grid[-1]
            unreachable.append(pid)
            sat_at_req[pid] = open_loop_satisfaction(params, requirement, n_days,
                                                     calib_ss, config)
        requirements[pid] = requirement
    dose = float(np.quantile(sorted(requirements.values()), 0.95, method="higher"))
    return BaselineCalibration(dose=dose, requirements=requirements,
                               satisfaction_at_requirement=sat_at_req,
                               unreachable=unreachable, grid=grid, target=target)


# ---------------------------------------------------------------------------
# benchmark evaluation and reports


@dataclass
class BenchmarkSummary:
    mean_usage_reduction: float
    min_satisfaction: float
    per_patient: list
    paper_target_met: bool


def evaluate_rows(rows: list[dict]) -> BenchmarkSummary:
    """Pair MPC and fixed report rows per patient; reduction and worst satisfaction."""
    by_patient: dict[int, dict[str, dict]] = {}
    for row in rows:
        by_patient.setdefault(int(row["patient"]), {})[row["arm"]] = row
    per_patient = []
    reductions = []
    min_sat = math.inf
    for pid in sorted(by_patient):
        arms = by_patient[pid]
        if "mpc" not in arms or "fixed" not in arms:
            raise EvaluationError(f"patient {pid}: missing arm "
                                  f"(have {sorted(arms)})")
        mpc, fixed = arms["mpc"], arms["fixed"]
        if fixed["total_usage"] <= 0:
            raise EvaluationError(f"patient {pid}: fixed arm has zero usage")
        reduction = 1.0 - mpc["total_usage"] / fixed["total_usage"]
        reductions.append(reduction)
        min_sat = min(min_sat, mpc["satisfaction_reflux"],
                      mpc["satisfaction_digestion"])
        per_patient.append({
            "patient": pid,
            "usage_mpc": mpc["total_usage"],
            "usage_fixed": fixed["total_usage"],
            "usage_reduction": reduction,
            "satisfaction_mpc_reflux": mpc["satisfaction_reflux"],
            "satisfaction_mpc_digestion": mpc["satisfaction_digestion"],
            "satisfaction_fixed_reflux": fixed["satisfaction_reflux"],
            "satisfaction_fixed_digestion": fixed["satisfaction_digestion"],
        })
    mean_reduction = float(np.mean(reductions))
    return BenchmarkSummary(
        mean_usage_reduction=mean_reduction,
        min_satisfaction=float(min_sat),
        per_patient=per_patient,
        paper_target_met=bool(mean_reduction >= 0.65 and min_sat >= 0.95))


def evaluate_reports(results: list[ClosedLoopResult]) -> BenchmarkSummary:
    return evaluate_rows([result_row(res) for res in results])


def result_row(res: ClosedLoopResult) -> dict:
    return {
        "patient": res.patient_id,
        "arm": res.arm,
        "days": res.days,
        "total_usage": res.usage,
        "satisfaction_reflux": float(res.satisfaction[0]),
        "satisfaction_digestion": float(res.satisfaction[1]),
        "violations": [{"symptom": s, "start_hour": int(a), "end_hour": int(b)}
                       for s, a, b in res.violations],
    }


def report_json(results: list[ClosedLoopResult],
                summary: BenchmarkSummary | None = None) -> str:
    payload = {"patients": [result_row(r) for r in results]}
    if summary is not None:
        payload["summary"] = {
            "mean_usage_reduction": summary.mean_usage_reduction,
            "min_satisfaction": summary.min_satisfaction,
            "paper_target_met": summary.paper_target_met,
            "per_patient": summary.per_patient,
        }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def report_csv(results: list[ClosedLoopResult]) -> str:
    lines = ["patient,arm,days,total_usage,satisfaction_reflux,satisfaction_digestion"]
    for r in results:
        lines.append(f"{r.patient_id},{r.arm},{r.days},{r.usage!r},"
                     f"{float(r.satisfaction[0])!r},{float(r.satisfaction[1])!r}")
    return "\n".join(lines) + "\n"


def trace_csv(res: ClosedLoopResult, include_hidden: bool = False) -> str:
    header = "t_hours,meal,dose,reflux,digestion" + (",acid" if include_hidden else "")
    lines = [header]
    for h in range(res.reports.shape[0]):
        row = (f"{h},{float(res.meals[h])!r},{float(res.doses[h])!r},"
               f"{int(res.reports[h, 0])},{int(res.reports[h, 1])}")
        if include_hidden:
            row += f",{float(res.acid[h])!r}"
        lines.append(row)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# end-to-end pipeline (desk scale)


@dataclass
class PipelineResult:
    foundation: ModelWeights
    tuned: dict                     # patient id -> ModelWeights
    patients: dict                  # patient id -> PatientParams
    open_loop: dict                 # patient id -> OpenLoopResult
    calibration: BaselineCalibration
    results: list                   # ClosedLoopResult, both arms
    summary: BenchmarkSummary


def run_pipeline(seed: int, config: AppConfig,
                 run_open_loop: bool = True) -> PipelineResult:
    """Foundation training, per-patient fine-tuning, both benchmark arms."""
    _, windows = generate_foundation_dataset(
        config.harness.foundation_patients, config.harness.foundation_days,
        seed, config)
    foundation, _ = train_foundation(windows, config, seed)

    patients = {}
    tuned = {}
    open_loop = {}
    calib_patients = []
    for i in range(config.harness.test_patients):
        streams = patient_streams(seed, TEST_COHORT, i)
        params = sample_patient(streams[_S_PARAMS], config.sim.ranges)
        patients[i] = params
        history_ep = _episode_from_streams(params, config.harness.finetune_days,
                                           i, streams[_S_DATA], config)
        tuned[i], _ = finetune_patient(foundation, history_ep, config, seed,
                                       patient_index=i)
        calib_patients.append((i, params, streams[_S_CALIB]))
        if run_open_loop:
            open_loop[i] = run_open_loop_validation(
                tuned[i], params, config.harness.open_loop_days, seed, config,
                patient_index=i)

    calibration = calibrate_fixed_dose(calib_patients,
                                       config.harness.closed_loop_days, config)
    start_dose = (config.harness.initial_dose
                  if config.harness.initial_dose >= 0 else calibration.dose)
    results = []
    for i, params in patients.items():
        bench_ss = patient_streams(seed, TEST_COHORT, i)[_S_BENCH]
        results.append(run_closed_loop(
            tuned[i], params, config.harness.closed_loop_days, bench_ss, config,
            arm="mpc", initial_dose=start_dose, patient_id=i))
        bench_ss = patient_streams(seed, TEST_COHORT, i)[_S_BENCH]
        results.append(run_closed_loop(
            None, params, config.harness.closed_loop_days, bench_ss, config,
            arm="fixed", fixed_dose=calibration.dose, patient_id=i))
    summary = evaluate_reports(results)
    return PipelineResult(foundation=foundation, tuned=tuned, patients=patients,
                          open_loop=open_loop, calibration=calibration,
                          results=results, summary=summary)
