"""Monte-Carlo experiment driver: benchmarks, sweeps, statistics, CSV output.

A sweep runs every requested algorithm on the same channel realization
(paired comparison) for each (sweep point, trial) cell. Seeds are derived
from the base seed, the point index and the trial index through a
``SeedSequence``, so results are reproducible and trials are embarrassingly
parallel; aggregation is a deterministic reduction independent of worker
completion order. All dBm-to-watt conversion happens here and nowhere else.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import multi, single
from .channels import ArrayConfig, ChannelSet, GeometryConfig, RicianConfig, sample_channel_set, without_ris
from .single import GsmConfig, SingleDesign
from .system import Beamformer, PhaseShifts, PowerConfig, min_snr_db, optimal_tau

logger = logging.getLogger(__name__)

SINGLE_ALGORITHMS = ("sum", "gsm", "random_phase", "no_ris")
MULTI_ALGORITHMS = ("sum_ob", "sum_mrb", "gsm_ob", "gsm_mrb", "random_phase", "no_ris")

# stream tags for per-trial sub-seeds
_STREAM_CHANNEL = 0
_STREAM_SINGLE = 1
_STREAM_MULTI_OB = 2
_STREAM_MULTI_MRB = 3
_STREAM_RANDOM_PHASE = 4


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


def noise_power_dbm(bandwidth_hz: float) -> float:
    """Thermal noise floor over the signal bandwidth, no noise figure."""
    return -174.0 + 10.0 * math.log10(bandwidth_hz)


def _limit_blas_threads():
    # one BLAS thread per trial process; parallelism lives at the trial level
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=1)
    except Exception:  # pragma: no cover - best effort
        pass


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str = "single_antenna"          # "single_antenna" | "multi_antenna"
    algorithms: tuple = ()                    # empty means all for the scenario
    sweep_var: str = "p_b_dbm"                # "p_b_dbm" | "n_v" | "m"
    sweep_values: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 200
    base_seed: int = 1
    p_s_dbm: float = 0.0
    p_b_dbm: float = 10.0                     # used when the sweep is not over power
    m: int = 1
    n_h: int = 10
    n_v: int = 10
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    rician: RicianConfig = field(default_factory=RicianConfig)
    generations: int = 3
    draws: int = 200
    sdp_tol: float = 1e-6

    def __post_init__(self):
        if self.scenario not in ("single_antenna", "multi_antenna"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.sweep_values:
            raise ValueError("sweep_values must be nonempty")
        if self.sweep_var not in ("p_b_dbm", "n_v", "m"):
            raise ValueError(f"unknown sweep variable {self.sweep_var!r}")
        allowed = SINGLE_ALGORITHMS if self.scenario == "single_antenna" else MULTI_ALGORITHMS
        algs = tuple(self.algorithms) or allowed
        for a in algs:
            if a not in allowed:
                raise ValueError(f"algorithm {a!r} not available for {self.scenario}")
        object.__setattr__(self, "algorithms", algs)
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))

    def gsm_config(self) -> GsmConfig:
        return GsmConfig(
            generations=self.generations,
            randomization_draws=self.draws,
            sdp_tol=self.sdp_tol,
        )

    def array_at(self, value) -> ArrayConfig:
        m, n_v = self.m, self.n_v
        if self.sweep_var == "n_v":
            n_v = int(value)
        elif self.sweep_var == "m":
            m = int(value)
        return ArrayConfig(m=m, n_h=self.n_h, n_v=n_v)

    def power_at(self, value) -> PowerConfig:
        p_b = float(value) if self.sweep_var == "p_b_dbm" else self.p_b_dbm
        return PowerConfig(
            p_s_watts=dbm_to_watts(self.p_s_dbm),
            p_b_watts=dbm_to_watts(p_b),
            sigma2_watts=dbm_to_watts(noise_power_dbm(self.geometry.bandwidth_hz)),
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["algorithms"] = list(self.algorithms)
        d["sweep_values"] = list(self.sweep_values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if "geometry" in d and isinstance(d["geometry"], dict):
            d["geometry"] = GeometryConfig(**d["geometry"])
        if "rician" in d and isinstance(d["rician"], dict):
            d["rician"] = RicianConfig(**d["rician"])
        return cls(**d)

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def benchmark_no_ris(ch: ChannelSet, pw: PowerConfig, scenario: str):
    """Plain relaying with the reflect path absent."""
    bare = without_ris(ch)
    phi = PhaseShifts(np.ones(ch.n, dtype=complex))
    if scenario == "single_antenna":
        tau = optimal_tau(bare, phi, pw)
        bf = Beamformer.scalar(tau)
        return SingleDesign(phi=phi, tau=tau, min_snr_db=min_snr_db(bare, phi, bf, pw))
    bf = multi.mrr_mrt_beamformer(bare, phi, pw)
    return multi.JointDesign(phi=phi, a_mat=bf, min_snr_db=min_snr_db(bare, phi, bf, pw), method_tag="no_ris")


def benchmark_random_phase(ch: ChannelSet, pw: PowerConfig, scenario: str, rng):
    """RIS present but uncontrolled: phases uniform on [0, 2pi)."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    phi = PhaseShifts.from_angles(rng.uniform(0.0, 2.0 * math.pi, ch.n))
    if scenario == "single_antenna":
        tau = optimal_tau(ch, phi, pw)
        bf = Beamformer.scalar(tau)
        return SingleDesign(phi=phi, tau=tau, min_snr_db=min_snr_db(ch, phi, bf, pw))
    bf = multi.mrr_mrt_beamformer(ch, phi, pw)
    return multi.JointDesign(phi=phi, a_mat=bf, min_snr_db=min_snr_db(ch, phi, bf, pw), method_tag="random_phase")


def _stream_rng(spec: ExperimentSpec, pt_idx: int, trial: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((spec.base_seed, pt_idx, trial, tag)))


def run_trial(spec: ExperimentSpec, pt_idx: int, trial: int) -> dict:
    """All requested algorithms on one shared channel realization.

    GSM variants are seeded with the matching SUM design computed on the same
    randomization stream, which both avoids redundant work and makes the
    per-trial improvement guarantee exact.
    """
    _limit_blas_threads()
    value = spec.sweep_values[pt_idx]
    arr = spec.array_at(value)
    pw = spec.power_at(value)
    ch = sample_channel_set(spec.geometry, spec.rician, arr, _stream_rng(spec, pt_idx, trial, _STREAM_CHANNEL))
    cfg = spec.gsm_config()
    out: dict[str, float | None] = {}

    def record(name: str, fn):
        if name not in spec.algorithms:
            return None
        try:
            design = fn()
        except Exception as exc:
            logger.warning("trial %d point %d: %s failed: %s", trial, pt_idx, name, exc)
            out[name] = None
            return None
        out[name] = design.min_snr_db
        return design

    if spec.scenario == "single_antenna":
        want_gsm = "gsm" in spec.algorithms
        if "sum" in spec.algorithms or want_gsm:
            rng = _stream_rng(spec, pt_idx, trial, _STREAM_SINGLE)
            seed_design = None
            try:
                seed_design = single.sum_single(ch, pw, cfg, rng)
                if "sum" in spec.algorithms:
                    out["sum"] = seed_design.min_snr_db
            except Exception as exc:
                logger.warning("trial %d point %d: sum failed: %s", trial, pt_idx, exc)
                if "sum" in spec.algorithms:
                    out["sum"] = None
            if want_gsm:
                if seed_design is None:
                    out["gsm"] = None
                else:
                    record("gsm", lambda: single.gsm_single(ch, pw, cfg, rng, seed_design=seed_design))
    else:
        for seed_name, gsm_name, seed_fn, gsm_fn, tag in (
            ("sum_ob", "gsm_ob", multi.sum_ob, multi.gsm_ob, _STREAM_MULTI_OB),
            ("sum_mrb", "gsm_mrb", multi.sum_mrb, multi.gsm_mrb, _STREAM_MULTI_MRB),
        ):
            want_gsm = gsm_name in spec.algorithms
            if seed_name not in spec.algorithms and not want_gsm:
                continue
            rng = _stream_rng(spec, pt_idx, trial, tag)
            seed_design = None
            try:
                seed_design = seed_fn(ch, pw, cfg, rng)
                if seed_name in spec.algorithms:
                    out[seed_name] = seed_design.min_snr_db
            except Exception as exc:
                logger.warning("trial %d point %d: %s failed: %s", trial, pt_idx, seed_name, exc)
                if seed_name in spec.algorithms:
                    out[seed_name] = None
            if want_gsm:
                if seed_design is None:
                    out[gsm_name] = None
                else:
                    record(gsm_name, lambda: gsm_fn(ch, pw, cfg, rng, seed_design=seed_design))

    record("random_phase", lambda: benchmark_random_phase(
        ch, pw, spec.scenario, _stream_rng(spec, pt_idx, trial, _STREAM_RANDOM_PHASE)))
    record("no_ris", lambda: benchmark_no_ris(ch, pw, spec.scenario))
    return out


@dataclass
class SweepResult:
    sweep_var: str
    sweep_values: tuple
    algorithms: tuple
    table: dict          # (sweep_value, algorithm) -> np.ndarray (trials,) with NaN = failure
    metadata: dict

    def samples(self, value, alg) -> np.ndarray:
        col = self.table[(value, alg)]
        return col[np.isfinite(col)]

    def failures(self, value, alg) -> int:
        return int(np.sum(~np.isfinite(self.table[(value, alg)])))

    def mean_db(self, value, alg) -> float:
        """Average min-SNR in dB; the average itself is taken in linear units."""
        s = self.samples(value, alg)
        return float(10.0 * np.log10(np.mean(10.0 ** (s / 10.0))))

    def mean_of_db(self, value, alg) -> float:
        """Arithmetic mean of the per-trial dB values (geometric-mean flavor)."""
        return float(np.mean(self.samples(value, alg)))

    def cdf(self, value, alg) -> np.ndarray:
        return empirical_cdf(self.samples(value, alg))


def run_sweep(spec: ExperimentSpec, workers: int | None = None) -> SweepResult:
    """Execute the full (points x trials) grid, optionally on a process pool."""
    t0 = time.time()
    tasks = [(pt, tr) for pt in range(len(spec.sweep_values)) for tr in range(spec.trials)]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_task, [(spec, pt, tr) for pt, tr in tasks], chunksize=1))
    else:
        _limit_blas_threads()
        results = [_trial_task((spec, pt, tr)) for pt, tr in tasks]

    table = {
        (v, a): np.full(spec.trials, np.nan)
        for v in spec.sweep_values
        for a in spec.algorithms
    }
    for (pt, tr), res in zip(tasks, results):
        v = spec.sweep_values[pt]
        for a in spec.algorithms:
            snr = res.get(a)
            if snr is not None:
                table[(v, a)][tr] = snr
    meta = {
        "base_seed": spec.base_seed,
        "spec_hash": spec.spec_hash(),
        "wall_time_s": time.time() - t0,
    }
    return SweepResult(spec.sweep_var, spec.sweep_values, spec.algorithms, table, meta)


def _trial_task(args):
    spec, pt, tr = args
    return run_trial(spec, pt, tr)


def empirical_cdf(samples) -> np.ndarray:
    """Right-continuous step CDF knots: rows (x, fraction of samples <= x)."""
    samples = np.sort(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("empirical_cdf needs at least one sample")
    xs, counts = np.unique(samples, return_counts=True)
    return np.column_stack([xs, np.cumsum(counts) / samples.size])


def cdf_value(knots: np.ndarray, x: float) -> float:
    idx = int(np.searchsorted(knots[:, 0], x, side="right")) - 1
    return 0.0 if idx < 0 else float(knots[idx, 1])


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".10g")


def write_samples_csv(result: SweepResult, path) -> None:
    lines = ["sweep_var,sweep_value,algorithm,trial,min_snr_db"]
    for v in result.sweep_values:
        for a in result.algorithms:
            col = result.table[(v, a)]
            for tr in range(col.size):
                if np.isfinite(col[tr]):
                    lines.append(f"{result.sweep_var},{_fmt(v)},{a},{tr},{_fmt(col[tr])}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_csv(result: SweepResult, path) -> None:
    lines = ["sweep_var,sweep_value,algorithm,mean_db,p10_db,p50_db,p90_db"]
    for v in result.sweep_values:
        for a in result.algorithms:
            s = result.samples(v, a)
            p10, p50, p90 = np.percentile(s, [10, 50, 90])
            lines.append(
                f"{result.sweep_var},{_fmt(v)},{a},"
                f"{_fmt(result.mean_db(v, a))},{_fmt(p10)},{_fmt(p50)},{_fmt(p90)}"
            )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_cdf_csv(result: SweepResult, path) -> None:
    lines = ["sweep_var,sweep_value,algorithm,min_snr_db,cdf"]
    for v in result.sweep_values:
        for a in result.algorithms:
            for x, p in result.cdf(v, a):
                lines.append(f"{result.sweep_var},{_fmt(v)},{a},{_fmt(x)},{_fmt(p)}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
