"""Twin-experiment orchestration.

A twin experiment integrates a high-resolution nature run, draws noisy
observations from it every assim_interval, and cycles an ensemble through
forecast / dimension matching / analysis / jitter / dimension return.  The
sweep and sensitivity drivers reproduce the tuning protocol: full-factorial
(alpha, alpha_J) grids per parameter setting, argmin on time-averaged
analysis-mean RMSE.

All randomness flows from six named seeds; per-cycle / per-member streams are
derived with explicit spawn keys so results do not depend on execution order
or worker count.
"""

from __future__ import annotations

import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .dimension import (
    match_hr,
    match_hra,
    reference_partition,
    return_hr,
    return_hra,
)
from .enkf import (
    FilterConfig,
    FilterDegeneracyError,
    MatchedEnsemble,
    analysis,
    jitter_ensemble,
)
from .metrics import diagnose_snapshot, ensemble_fidelity, field_on_reference
from .models import (
    ModelSpec,
    ModelState,
    SolverBlowUpError,
    bgm_spec,
    initial_state,
    integrate,
    ksm_spec,
)
from .observations import (
    ObservationSet,
    generate_observations,
    interp_periodic,
    make_observation_operator,
)

SCHEMES = ("hr", "hra", "free")

# model-dependent defaults: (n_obs, sigma_o, duration, spin_up)
_MODEL_DEFAULTS = {
    "bgm": (10, 0.01, 2.0, 0.0),
    "ksm": (20, 0.798, 5.0, 20.0),
}

_MODEL_OVERRIDE_FIELDS = ("viscosity", "dt", "delta1", "delta2", "domain_length")


@dataclass(frozen=True)
class SeedPack:
    """The six named random seeds of one experiment.

    The nature seed is recorded for provenance but never consumed: the nature
    run is deterministic.
    """

    nature: int
    ensemble_init: int
    obs_noise: int
    ghost: int
    jitter: int
    perturbed_obs: int

    @classmethod
    def from_master(cls, master: int) -> "SeedPack":
        state = np.random.SeedSequence(master).generate_state(6, np.uint32)
        return cls(*(int(s) for s in state))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one twin experiment depends on, serialization-friendly.

    Model numerics (viscosity, dt, tolerances) default to the chosen model's
    standard set; n_obs, sigma_o, duration and spin_up default per model.
    averaging_start defaults to one time unit after spin-up.
    """

    model: str
    scheme: str = "hra"
    n_ensemble: int = 30
    initial_mesh_size: int = 70
    sigma_o: float | None = None
    n_obs: int | None = None
    assim_interval: float = 0.05
    duration: float | None = None
    spin_up: float | None = None
    averaging_start: float | None = None
    alpha: float = 1.0
    alpha_j: float = 0.0
    sigma_pert: float | None = None
    nature_mesh_size: int | None = None
    master_seed: int = 0
    seeds: SeedPack | None = None
    viscosity: float | None = None
    dt: float | None = None
    delta1: float | None = None
    delta2: float | None = None
    domain_length: float | None = None
    jitter_range_per_member: bool = False
    ghost_spread_is_variance: bool = False
    rmse_ens_conventional: bool = False

    def __post_init__(self):
        if self.model not in _MODEL_DEFAULTS:
            raise ValueError(f"model must be one of {tuple(_MODEL_DEFAULTS)}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        n_obs, sigma_o, duration, spin_up = _MODEL_DEFAULTS[self.model]
        _set = object.__setattr__
        if self.n_obs is None:
            _set(self, "n_obs", n_obs)
        if self.sigma_o is None:
            _set(self, "sigma_o", sigma_o)
        if self.duration is None:
            _set(self, "duration", duration)
        if self.spin_up is None:
            _set(self, "spin_up", spin_up)
        if self.averaging_start is None:
            _set(self, "averaging_start", self.spin_up + 1.0)
        if self.sigma_pert is None:
            _set(self, "sigma_pert", self.sigma_o)
        if self.seeds is None:
            _set(self, "seeds", SeedPack.from_master(self.master_seed))

        if self.n_ensemble < 2:
            raise ValueError("n_ensemble must be >= 2")
        if self.initial_mesh_size < 2:
            raise ValueError("initial_mesh_size must be >= 2")
        if self.n_obs < 1:
            raise ValueError("n_obs must be >= 1")
        if not self.sigma_o > 0.0:
            raise ValueError("sigma_o must be positive")
        if self.sigma_pert < 0.0:
            raise ValueError("sigma_pert must be >= 0")
        if self.alpha < 0.0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 <= self.alpha_j <= 1.0:
            raise ValueError("alpha_j must lie in [0, 1]")
        if not self.assim_interval > 0.0:
            raise ValueError("assim_interval must be positive")
        if self.spin_up < 0.0:
            raise ValueError("spin_up must be >= 0")
        n = round(self.duration / self.assim_interval)
        if n < 1 or abs(n * self.assim_interval - self.duration) > 1e-9 * self.duration:
            raise ValueError("duration must be a positive multiple of assim_interval")

    @property
    def n_cycles(self) -> int:
        return round(self.duration / self.assim_interval)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.to_dict() if f.name == "seeds" else v
        return out


def config_from_dict(data: dict) -> ExperimentConfig:
    """Rebuild a config from its to_dict() form; unknown keys are errors."""
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kw = dict(data)
    if isinstance(kw.get("seeds"), dict):
        seed_fields = {f.name for f in fields(SeedPack)}
        bad = set(kw["seeds"]) - seed_fields
        if bad:
            raise ValueError(f"unknown seed keys: {sorted(bad)}")
        missing = seed_fields - set(kw["seeds"])
        if missing:
            raise ValueError(f"missing seed keys: {sorted(missing)}")
        kw["seeds"] = SeedPack(**kw["seeds"])
    return ExperimentConfig(**kw)


def build_model_spec(config: ExperimentConfig) -> ModelSpec:
    """The ModelSpec for a config: model defaults plus any numeric overrides."""
    kw = {
        name: getattr(config, name)
        for name in _MODEL_OVERRIDE_FIELDS
        if getattr(config, name) is not None
    }
    factory = bgm_spec if config.model == "bgm" else ksm_spec
    return factory(**kw)


@dataclass(frozen=True)
class NatureBundle:
    """The deterministic truth trajectory shared by all runs of one cell.

    initial: the (spun-up) state the ensemble is initialised from.
    truths[j], times[j]: the truth at assimilation time tau_{j+1}.
    truth_fields[j]: that truth interpolated onto the reference positions.
    """

    initial: ModelState
    truths: tuple
    times: np.ndarray
    truth_fields: np.ndarray


def make_nature(config: ExperimentConfig) -> NatureBundle:
    """Integrate the nature run and record the truth at every analysis time."""
    spec = build_model_spec(config)
    partition = reference_partition(spec.tolerances)
    n_nodes = config.nature_mesh_size or partition.m
    state = initial_state(spec, n_nodes)
    if config.spin_up > 0.0:
        state = integrate(state, spec, config.spin_up)
    initial = state
    truths = []
    fields_ = np.empty((config.n_cycles, partition.m))
    times = config.spin_up + config.assim_interval * np.arange(1, config.n_cycles + 1)
    for j in range(config.n_cycles):
        state = integrate(state, spec, config.assim_interval)
        truths.append(state)
        fields_[j] = field_on_reference(state, partition)
    return NatureBundle(initial, tuple(truths), times, fields_)


def init_ensemble(nature_ic: ModelState, config: ExperimentConfig) -> list:
    """Members on uniform meshes of initial_mesh_size nodes.

    Values are the nature initial condition interpolated to the member mesh
    plus independent N(0, sigma_pert^2) perturbations, one stream per member.
    """
    spec = build_model_spec(config)
    L = spec.tolerances.domain_length
    base = initial_state(spec, config.initial_mesh_size)
    z = base.mesh.nodes
    clean = interp_periodic(z, nature_ic.mesh.nodes, nature_ic.u, L)
    members = []
    for i in range(config.n_ensemble):
        rng = _stream(config.seeds.ensemble_init, i)
        u = clean + config.sigma_pert * rng.standard_normal(z.size)
        members.append(ModelState(base.mesh, u, nature_ic.t))
    return members


@dataclass
class CycleInfo:
    """Everything one assimilation cycle produced, handed to cycle hooks."""

    cycle: int
    time: float
    truth: ModelState
    truth_on_gamma: np.ndarray
    observations: ObservationSet
    forecast_members: list
    forecast_matched: MatchedEnsemble | None
    analysis_matched: MatchedEnsemble | None
    analysis_members: list


@dataclass(frozen=True)
class PhaseSummary:
    """Time-averaged scalars of one phase over the averaging window."""

    rmse: float
    rmse_derivative: float
    spread: float
    sigma_ens: float
    k_ens: float
    rmse_ens: float
    kurtosis_terms_skipped: int
    kurtosis_terms_total: int
    n_times: int

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_NAN_SUMMARY = PhaseSummary(
    float("nan"), float("nan"), float("nan"), float("nan"), float("nan"),
    float("nan"), 0, 0, 0,
)


@dataclass
class RunRecord:
    """One twin experiment: config, per-cycle diagnostics, window averages."""

    config: ExperimentConfig
    diagnostics: list = field(default_factory=list)
    forecast_summary: PhaseSummary = _NAN_SUMMARY
    analysis_summary: PhaseSummary = _NAN_SUMMARY
    wall_clock_seconds: float = 0.0
    n_cycles_completed: int = 0
    failed: bool = False
    failure_time: float | None = None
    failure_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "forecast_summary": self.forecast_summary.to_dict(),
            "analysis_summary": self.analysis_summary.to_dict(),
            "wall_clock_seconds": self.wall_clock_seconds,
            "n_cycles_completed": self.n_cycles_completed,
            "failed": self.failed,
            "failure_time": self.failure_time,
            "failure_reason": self.failure_reason,
        }


def _phase_summary(records: list, start: float, rmse_conventional: bool) -> PhaseSummary:
    window = [r for r in records if r.time > start + 1e-12]
    if not window:
        return _NAN_SUMMARY
    errors = np.stack([r.per_member_errors for r in window])
    fid = ensemble_fidelity(errors, rmse_conventional)
    return PhaseSummary(
        rmse=float(np.mean([r.rmse_mean for r in window])),
        rmse_derivative=float(np.mean([r.rmse_derivative for r in window])),
        spread=float(np.mean([r.spread for r in window])),
        sigma_ens=fid.sigma_ens,
        k_ens=fid.k_ens,
        rmse_ens=fid.rmse_ens,
        kurtosis_terms_skipped=fid.kurtosis_terms_skipped,
        kurtosis_terms_total=fid.kurtosis_terms_total,
        n_times=len(window),
    )


def run_twin(
    config: ExperimentConfig,
    nature: NatureBundle | None = None,
    cycle_hook=None,
) -> RunRecord:
    """Run one full twin experiment.

    nature can be precomputed and shared across runs (sweeps do); cycle_hook,
    if given, receives a CycleInfo after every completed cycle.
    """
    t0 = _time.perf_counter()
    spec = build_model_spec(config)
    partition = reference_partition(spec.tolerances)
    if nature is None:
        nature = make_nature(config)

    filter_config = FilterConfig(
        n_ensemble=config.n_ensemble,
        inflation=config.alpha,
        jitter=config.alpha_j,
        scheme=config.scheme if config.scheme != "free" else "hra",
        rng_seed=config.master_seed,
        jitter_range_per_member=config.jitter_range_per_member,
        ghost_spread_is_variance=config.ghost_spread_is_variance,
    )

    record = RunRecord(config=config)
    members = init_ensemble(nature.initial, config)
    seeds = config.seeds

    try:
        for j in range(1, config.n_cycles + 1):
            members = [integrate(m, spec, config.assim_interval) for m in members]
            truth = nature.truths[j - 1]
            truth_gamma = nature.truth_fields[j - 1]
            tau = float(nature.times[j - 1])
            obs = generate_observations(
                truth, config.n_obs, config.sigma_o, _stream(seeds.obs_noise, j)
            )

            if config.scheme == "free":
                fc = diagnose_snapshot(members, truth_gamma, partition, tau, "forecast")
                an = replace(fc, phase="analysis")
                record.diagnostics.extend([fc, an])
                if cycle_hook is not None:
                    cycle_hook(
                        CycleInfo(j, tau, truth, truth_gamma, obs, members,
                                  None, None, members)
                    )
                record.n_cycles_completed = j
                continue

            if config.scheme == "hr":
                matched = [match_hr(m, partition) for m in members]
            else:
                matched = [
                    match_hra(
                        m, partition, _stream(seeds.ghost, j, i),
                        config.ghost_spread_is_variance,
                    )
                    for i, m in enumerate(members)
                ]
            ens_f = MatchedEnsemble(matched, partition)
            fc = diagnose_snapshot(ens_f, truth_gamma, partition, tau, "forecast")

            observe = make_observation_operator(config.scheme, partition, obs.locations)
            ens_a = analysis(
                ens_f, obs, filter_config, observe, _stream(seeds.perturbed_obs, j)
            )
            ens_a = jitter_ensemble(
                ens_a,
                config.alpha_j,
                [_stream(seeds.jitter, j, i) for i in range(config.n_ensemble)],
                config.jitter_range_per_member,
            )

            forecast_members = members
            if config.scheme == "hr":
                members = [return_hr(mm) for mm in ens_a.members]
            else:
                members = [return_hra(mm, spec.tolerances) for mm in ens_a.members]
            an = diagnose_snapshot(members, truth_gamma, partition, tau, "analysis")
            record.diagnostics.extend([fc, an])
            if cycle_hook is not None:
                cycle_hook(
                    CycleInfo(j, tau, truth, truth_gamma, obs, forecast_members,
                              ens_f, ens_a, members)
                )
            record.n_cycles_completed = j
    except (SolverBlowUpError, FilterDegeneracyError) as err:
        record.failed = True
        record.failure_time = getattr(err, "time", None)
        record.failure_reason = f"{type(err).__name__}: {err}"

    start = config.averaging_start
    conv = config.rmse_ens_conventional
    if not record.failed:
        record.forecast_summary = _phase_summary(
            [r for r in record.diagnostics if r.phase == "forecast"], start, conv
        )
        record.analysis_summary = _phase_summary(
            [r for r in record.diagnostics if r.phase == "analysis"], start, conv
        )
    record.wall_clock_seconds = _time.perf_counter() - t0
    return record


# --- tuning sweeps ---------------------------------------------------------


def default_alpha_grid() -> np.ndarray:
    return np.linspace(0.0, 1.6, 9)


def default_alpha_j_grid(model: str) -> np.ndarray:
    return np.linspace(0.0, 0.1 if model == "bgm" else 0.5, 6)


@dataclass
class SweepCell:
    alpha: float
    alpha_j: float
    record: RunRecord


@dataclass
class SweepResult:
    """Full-factorial (alpha, alpha_J) grid plus its argmin."""

    cells: list
    best_alpha: float
    best_alpha_j: float
    best_rmse: float
    n_failed: int

    def cell(self, alpha: float, alpha_j: float) -> SweepCell:
        for c in self.cells:
            if c.alpha == alpha and c.alpha_j == alpha_j:
                return c
        raise KeyError(f"no sweep cell ({alpha}, {alpha_j})")


def _sweep_worker(args) -> RunRecord:
    config, nature = args
    return run_twin(config, nature)


def sweep(
    config_template: ExperimentConfig,
    alpha_grid=None,
    alpha_j_grid=None,
    jobs: int = 1,
    nature: NatureBundle | None = None,
) -> SweepResult:
    """Tune (alpha, alpha_J) on a full-factorial grid, sharing one nature run.

    The argmin minimises the time-averaged analysis-mean RMSE; ties break
    toward smaller alpha_J, then smaller alpha.  Failed cells are excluded
    from the argmin and counted.  Results are identical for any jobs value.
    """
    if alpha_grid is None:
        alpha_grid = default_alpha_grid()
    if alpha_j_grid is None:
        alpha_j_grid = default_alpha_j_grid(config_template.model)
    alpha_grid = [float(a) for a in np.atleast_1d(alpha_grid)]
    alpha_j_grid = [float(a) for a in np.atleast_1d(alpha_j_grid)]
    if not alpha_grid or not alpha_j_grid:
        raise ValueError("sweep grids must be non-empty")

    if nature is None:
        nature = make_nature(config_template)
    # tie-break order: cells sorted by (alpha_J, alpha), argmin by strict <
    grid = sorted(
        (aj, a) for aj in alpha_j_grid for a in alpha_grid
    )
    configs = [
        replace(config_template, alpha=a, alpha_j=aj) for aj, a in grid
    ]
    tasks = [(c, nature) for c in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_sweep_worker, tasks))
    else:
        records = [_sweep_worker(t) for t in tasks]

    cells = [
        SweepCell(c.alpha, c.alpha_j, r) for c, r in zip(configs, records)
    ]
    best = None
    for cell in cells:
        r = cell.record
        if r.failed or not np.isfinite(r.analysis_summary.rmse):
            continue
        if best is None or r.analysis_summary.rmse < best.record.analysis_summary.rmse:
            best = cell
    if best is None:
        raise RuntimeError("every sweep cell failed")
    n_failed = sum(1 for c in cells if c.record.failed)
    return SweepResult(
        cells, best.alpha, best.alpha_j, best.record.analysis_summary.rmse, n_failed
    )


# --- sensitivity experiments ----------------------------------------------

# parameter ranges of the three sensitivity experiments per model:
# (varied field, values, fixed fields)
SENSITIVITY_TABLE = {
    ("bgm", "ensemble"): (
        "n_ensemble",
        (20, 30, 40, 50, 60, 70, 80, 90),
        {"initial_mesh_size": 70, "sigma_o": 0.01},
    ),
    ("bgm", "mesh"): (
        "initial_mesh_size",
        (50, 60, 70, 80, 90),
        {"n_ensemble": 30, "sigma_o": 0.01},
    ),
    ("bgm", "obs-error"): (
        "sigma_o",
        (0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07),
        {"n_ensemble": 30, "initial_mesh_size": 70},
    ),
    ("ksm", "ensemble"): (
        "n_ensemble",
        (20, 30, 40, 50, 60, 70, 80, 90),
        {"initial_mesh_size": 70, "sigma_o": 0.798},
    ),
    ("ksm", "mesh"): (
        "initial_mesh_size",
        (50, 60, 70, 80, 90),
        {"n_ensemble": 40, "sigma_o": 0.798},
    ),
    ("ksm", "obs-error"): (
        "sigma_o",
        (0.60, 0.80, 1.00, 1.20, 1.40, 1.60, 1.80, 2.00),
        {"n_ensemble": 40, "initial_mesh_size": 70},
    ),
}


@dataclass
class SensitivityRow:
    parameter: str
    value: float
    scheme: str
    best_alpha: float
    best_alpha_j: float
    rmse: float
    rmse_derivative: float


def sensitivity_suite(
    model: str,
    experiment: str,
    schemes=("hr", "hra"),
    alpha_grid=None,
    alpha_j_grid=None,
    values=None,
    base_config: ExperimentConfig | None = None,
    jobs: int = 1,
) -> list:
    """Optimal time-averaged RMSE per scheme across one parameter range.

    experiment is one of {"ensemble", "mesh", "obs-error"}; values and the
    tuning grids can be overridden (the defaults are the full table ranges).
    """
    try:
        parameter, table_values, fixed = SENSITIVITY_TABLE[(model, experiment)]
    except KeyError:
        raise ValueError(
            f"no sensitivity experiment {experiment!r} for model {model!r}"
        ) from None
    if values is None:
        values = table_values
    if base_config is None:
        base_config = ExperimentConfig(model=model)
    base_config = replace(base_config, **fixed)

    rows = []
    for value in values:
        cell_config = replace(base_config, **{parameter: value})
        nature = make_nature(cell_config)
        for scheme in schemes:
            result = sweep(
                replace(cell_config, scheme=scheme),
                alpha_grid,
                alpha_j_grid,
                jobs=jobs,
                nature=nature,
            )
            best = result.cell(result.best_alpha, result.best_alpha_j).record
            rows.append(
                SensitivityRow(
                    parameter=parameter,
                    value=value,
                    scheme=scheme,
                    best_alpha=result.best_alpha,
                    best_alpha_j=result.best_alpha_j,
                    rmse=result.best_rmse,
                    rmse_derivative=best.analysis_summary.rmse_derivative,
                )
            )
    return rows
