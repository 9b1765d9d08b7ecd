"""Experiment orchestration: training jobs, test sweeps, result tables.

The test pipeline per run: draw uniform symbols, map through the fixed
constellation, apply the Wiener phase walk and additive noise, recover the
phase with BPS, apply one genie global derotation (picked from the BPS
test-phase grid against the transmitted sequence), then estimate MI with
the mismatched Gaussian receiver over the interior symbols.

Everything is deterministic given the configuration: per-run generators are
seeded from (base_seed, point_index, run_index), so grid points are
independent and order-insensitive, and identical manifests reproduce
byte-identical output files.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import channel as ch
from . import config as cfgmod
from .autoencoder import SamplingRule, ScenarioSpec, TrainConfig, train
from .bps import BpsConfig, run_bps, test_phases
from .config import ConfigError
from .constellation import Constellation, load, make_square_qam, moments, save
from .metrics import mi_gaussian_receiver

_QAM_TOKEN = re.compile(r"^qam(\d+)$")


# ---------------------------------------------------------------------------
# training jobs


@dataclass
class TrainJob:
    """One training request: a single scenario or a fixed-parameter family."""

    name: str
    model: str  # "awgn" | "nlin"
    out_dir: Path
    m_order: int = 64
    epochs: int = 1000
    learning_rate: float = 1e-3
    seed: int = 0
    family: bool = False
    plateau_stop: bool = False
    snr_db: str | None = None
    noise_figure_db: str | None = None
    launch_power_dbm: str | None = None
    sigma2_rpn: str | None = None
    link_path: str | None = None

    @classmethod
    def from_config(cls, cfg: dict, origin: str = "<config>") -> "TrainJob":
        model = cfgmod.get(cfg, "model", str, required=True, origin=origin)
        if model not in ("awgn", "nlin"):
            raise ConfigError(f"{origin}: model must be awgn or nlin, got {model!r}")
        job = cls(
            name=cfgmod.get(cfg, "name", str, required=True, origin=origin),
            model=model,
            out_dir=Path(cfgmod.get(cfg, "out", str, default=".", origin=origin)),
            m_order=cfgmod.get(cfg, "M", int, default=64, origin=origin),
            epochs=cfgmod.get(cfg, "epochs", int, default=1000, origin=origin),
            learning_rate=cfgmod.get(cfg, "learning_rate", float, default=1e-3, origin=origin),
            seed=cfgmod.get(cfg, "seed", int, default=0, origin=origin),
            family=cfgmod.get(cfg, "family", bool, default=False, origin=origin),
            plateau_stop=cfgmod.get(cfg, "plateau_stop", bool, default=False, origin=origin),
            snr_db=cfg.get("snr_db"),
            noise_figure_db=cfg.get("noise_figure_db"),
            launch_power_dbm=cfg.get("launch_power_dbm"),
            sigma2_rpn=cfg.get("sigma2_rpn"),
            link_path=cfg.get("link"),
        )
        if job.sigma2_rpn is None:
            raise ConfigError(f"{origin}: missing required key 'sigma2_rpn'")
        needed = ("snr_db",) if model == "awgn" else ("noise_figure_db", "launch_power_dbm")
        for key in needed:
            if getattr(job, key) is None:
                raise ConfigError(f"{origin}: {model} training needs key {key!r}")
        return job


def _scenario_for(job: TrainJob, rules: dict[str, SamplingRule]) -> ScenarioSpec:
    if job.model == "awgn":
        return ScenarioSpec(
            noise_model="awgn",
            snr_db=rules["snr_db"],
            sigma2_rpn=rules["sigma2_rpn"],
        )
    link, coeffs = cfgmod.load_link_config(job.link_path)
    return ScenarioSpec(
        noise_model="nlin",
        noise_figure_db=rules["noise_figure_db"],
        launch_power_dbm=rules["launch_power_dbm"],
        sigma2_rpn=rules["sigma2_rpn"],
        link=link,
        nlin_coeffs=coeffs,
    )


def _write_loss_csv(path: Path, history) -> None:
    lines = ["epoch,loss"]
    lines.extend(f"{i},{loss!r}" for i, loss in enumerate(history))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_training_job(job: TrainJob, echo=None) -> list[Path]:
    """Train one constellation, or one per grid tuple for family jobs.

    Returns the written constellation file paths; each gets a loss-history
    CSV alongside.
    """
    job.out_dir.mkdir(parents=True, exist_ok=True)
    origin = f"train job {job.name}"
    written: list[Path] = []

    if not job.family:
        rule_keys = ("snr_db",) if job.model == "awgn" else ("noise_figure_db", "launch_power_dbm")
        rules = {k: cfgmod.parse_rule(getattr(job, k), k, origin) for k in rule_keys}
        rules["sigma2_rpn"] = cfgmod.parse_rule(job.sigma2_rpn, "sigma2_rpn", origin)
        scenario = _scenario_for(job, rules)
        cfg = TrainConfig(
            M=job.m_order,
            epochs=job.epochs,
            learning_rate=job.learning_rate,
            seed=job.seed,
            plateau_stop=job.plateau_stop,
        )
        result = train(cfg, scenario, name=job.name)
        path = job.out_dir / f"{job.name}.const"
        save(result.constellation, path)
        _write_loss_csv(job.out_dir / f"{job.name}_loss.csv", result.loss_history)
        if echo:
            echo(f"wrote {path} (final loss {result.loss_history[-1]:.4f})")
        return [path]

    # family: every rule axis is a comma list of fixed values
    if job.model == "awgn":
        axes = [("snr_db", "snr{:g}dB"), ("sigma2_rpn", "rpn{:g}")]
    else:
        axes = [
            ("noise_figure_db", "fn{:g}dB"),
            ("launch_power_dbm", "p{:g}dBm"),
            ("sigma2_rpn", "rpn{:g}"),
        ]
    values = [cfgmod.parse_float_list(getattr(job, key), key, origin) for key, _ in axes]
    for tuple_index, combo in enumerate(itertools.product(*values)):
        rules = {key: SamplingRule.fixed(v) for (key, _), v in zip(axes, combo)}
        scenario = _scenario_for(job, rules)
        seed = np.random.SeedSequence([job.seed, tuple_index]).generate_state(1)[0]
        cfg = TrainConfig(
            M=job.m_order,
            epochs=job.epochs,
            learning_rate=job.learning_rate,
            seed=int(seed),
            plateau_stop=job.plateau_stop,
        )
        tag = "_".join(fmt.format(v) for (_, fmt), v in zip(axes, combo))
        cname = f"{job.name}_{tag}"
        result = train(cfg, scenario, name=cname)
        path = job.out_dir / f"{cname}.const"
        save(result.constellation, path)
        _write_loss_csv(job.out_dir / f"{cname}_loss.csv", result.loss_history)
        written.append(path)
        if echo:
            echo(f"wrote {path} (final loss {result.loss_history[-1]:.4f})")
    return written


# ---------------------------------------------------------------------------
# test sweeps


@dataclass(frozen=True)
class SweepGrid:
    """Grid axes and sampling effort for a test sweep."""

    model: str  # "awgn" | "nlin"
    linewidth_khz: tuple
    snr_db: tuple = ()
    noise_figure_db: tuple = ()
    launch_power_dbm: tuple = ()
    runs_per_point: int = 10
    symbols_per_run: int = 10_000
    base_seed: int = 0

    def __post_init__(self):
        if not self.linewidth_khz:
            raise ValueError("empty linewidth axis")
        if self.model == "awgn":
            if not self.snr_db:
                raise ValueError("awgn grid needs an snr_db axis")
            if self.noise_figure_db or self.launch_power_dbm:
                raise ValueError("awgn grid cannot carry noise-figure/launch-power axes")
        elif self.model == "nlin":
            if not (self.noise_figure_db and self.launch_power_dbm):
                raise ValueError("nlin grid needs noise_figure_db and launch_power_dbm axes")
            if self.snr_db:
                raise ValueError("nlin grid cannot carry an snr_db axis")
        else:
            raise ValueError(f"unknown model {self.model!r}")

    def points(self) -> list[dict]:
        """Deterministic grid enumeration; the position is the point index."""
        if self.model == "awgn":
            return [
                {"snr_db": snr, "linewidth_khz": lw}
                for snr in self.snr_db
                for lw in self.linewidth_khz
            ]
        return [
            {"noise_figure_db": fn, "launch_power_dbm": p, "linewidth_khz": lw}
            for fn in self.noise_figure_db
            for p in self.launch_power_dbm
            for lw in self.linewidth_khz
        ]


@dataclass(frozen=True)
class SimResult:
    """Per-(constellation, grid point) MI aggregate."""

    constellation: str
    point_index: int
    params: dict
    mi_runs: tuple
    base_seed: int
    symbols_per_run: int

    @property
    def mean_mi(self) -> float:
        return float(np.mean(self.mi_runs))

    @property
    def stderr_mi(self) -> float:
        if len(self.mi_runs) < 2:
            return 0.0
        return float(np.std(self.mi_runs, ddof=1) / math.sqrt(len(self.mi_runs)))


def genie_derotate(received, reference_symbols, bps_cfg: BpsConfig):
    """Best global derotation from the BPS test-phase grid, by MSE to truth.

    mean |y e^{i psi} - x|^2 = mean|y|^2 + mean|x|^2 - 2 Re(e^{i psi} mean(y conj(x))),
    so only the cross term varies with the candidate phase.
    """
    y = np.asarray(received)
    x = np.asarray(reference_symbols)
    cross = np.mean(y * np.conj(x))
    psis = test_phases(bps_cfg)
    best = int(np.argmin(-np.real(np.exp(1j * psis) * cross)))
    return y * np.exp(1j * psis[best])


def effective_test_variance(
    model: str,
    point: dict,
    const: Constellation,
    link: ch.LinkParams | None,
    coeffs: ch.NlinCoefficients | None,
) -> float:
    """Additive-noise variance for the unit-power test channel at one point."""
    if model == "awgn":
        return ch.awgn_variance(ch.AwgnSpec(point["snr_db"]))
    link_at = dataclasses.replace(
        link,
        noise_figure_db=point["noise_figure_db"],
        launch_power_dbm=point["launch_power_dbm"],
    )
    p_w = ch.dbm_to_watts(point["launch_power_dbm"])
    return ch.total_noise_variance(link_at, coeffs, moments(const)) / p_w


def run_seed(base_seed: int, point_index: int, run_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, point_index, run_index])


def _single_run(
    const: Constellation,
    sigma_n2: float,
    wiener: ch.WienerSpec,
    bps_cfg: BpsConfig,
    n_symbols: int,
    seed_seq,
) -> float:
    rng = np.random.default_rng(seed_seq)
    idx = rng.integers(0, const.cardinality, n_symbols)
    x = const.points[idx]
    phases = ch.wiener_phase_walk(n_symbols, wiener, rng)
    z = ch.test_channel_apply(x, phases, sigma_n2, rng)
    compensated, _ = run_bps(z, const, bps_cfg)
    w = bps_cfg.half_window
    interior = slice(w, n_symbols - w)
    y = genie_derotate(compensated, x[interior], bps_cfg)
    return mi_gaussian_receiver(idx[interior], y, const).bits_per_symbol


def _point_task(args):
    const, sigma_n2, wiener, bps_cfg, n_symbols, base_seed, point_index, runs = args
    return [
        _single_run(const, sigma_n2, wiener, bps_cfg, n_symbols, run_seed(base_seed, point_index, r))
        for r in range(runs)
    ]


def run_test_sweep(
    constellations,
    grid: SweepGrid,
    bps_cfg: BpsConfig = BpsConfig(),
    link: ch.LinkParams | None = None,
    coeffs: ch.NlinCoefficients | None = None,
    symbol_rate_hz: float = 32e9,
    workers: int = 1,
    echo=None,
) -> list[SimResult]:
    """Evaluate constellations over the grid; returns one SimResult per pair.

    All constellations share the per-(point, run) random draws, so MI
    differences between them are paired comparisons.
    """
    if grid.symbols_per_run <= 2 * bps_cfg.half_window:
        raise ValueError("symbols_per_run must exceed twice the BPS half-window")
    if grid.model == "nlin" and (link is None or coeffs is None):
        raise ValueError("nlin sweep needs link parameters and NLIN coefficients")
    if isinstance(constellations, Constellation):
        constellations = [constellations]
    rate = link.symbol_rate_hz if link is not None else symbol_rate_hz

    points = grid.points()
    tasks = []
    order = []
    for const in constellations:
        for p_index, point in enumerate(points):
            sigma_n2 = effective_test_variance(grid.model, point, const, link, coeffs)
            wiener = ch.WienerSpec(point["linewidth_khz"] * 1e3, rate)
            tasks.append(
                (
                    const,
                    sigma_n2,
                    wiener,
                    bps_cfg,
                    grid.symbols_per_run,
                    grid.base_seed,
                    p_index,
                    grid.runs_per_point,
                )
            )
            order.append((const.name, p_index, point))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            all_runs = list(pool.map(_point_task, tasks, chunksize=1))
    else:
        all_runs = []
        for i, task in enumerate(tasks):
            all_runs.append(_point_task(task))
            if echo:
                name, p_index, point = order[i]
                echo(f"[{i + 1}/{len(tasks)}] {name} {point} mean MI {np.mean(all_runs[-1]):.4f}")

    results = []
    for (name, p_index, point), mi_runs in zip(order, all_runs):
        results.append(
            SimResult(
                constellation=name,
                point_index=p_index,
                params=point,
                mi_runs=tuple(mi_runs),
                base_seed=grid.base_seed,
                symbols_per_run=grid.symbols_per_run,
            )
        )
    return results


def envelope_results(results: list[SimResult], name: str = "envelope") -> list[SimResult]:
    """Best-per-point aggregate over a constellation family (by mean MI)."""
    by_point: dict[int, SimResult] = {}
    for res in results:
        cur = by_point.get(res.point_index)
        if cur is None or res.mean_mi > cur.mean_mi:
            by_point[res.point_index] = cur = res
    out = []
    for p_index in sorted(by_point):
        best = by_point[p_index]
        assert all(
            best.mean_mi >= r.mean_mi for r in results if r.point_index == p_index
        )
        out.append(dataclasses.replace(best, constellation=name))
    return out


# ---------------------------------------------------------------------------
# result emission

_CSV_COLUMNS = (
    "constellation",
    "model",
    "snr_db",
    "noise_figure_db",
    "launch_power_dbm",
    "linewidth_khz",
    "mean_mi_bits",
    "stderr_mi_bits",
    "runs",
    "symbols_per_run",
    "point_index",
    "base_seed",
)


def results_csv_text(results: list[SimResult], model: str) -> str:
    lines = [",".join(_CSV_COLUMNS)]
    for res in results:
        row = {
            "constellation": res.constellation,
            "model": model,
            "snr_db": _fmt(res.params.get("snr_db")),
            "noise_figure_db": _fmt(res.params.get("noise_figure_db")),
            "launch_power_dbm": _fmt(res.params.get("launch_power_dbm")),
            "linewidth_khz": _fmt(res.params.get("linewidth_khz")),
            "mean_mi_bits": repr(res.mean_mi),
            "stderr_mi_bits": repr(res.stderr_mi),
            "runs": str(len(res.mi_runs)),
            "symbols_per_run": str(res.symbols_per_run),
            "point_index": str(res.point_index),
            "base_seed": str(res.base_seed),
        }
        lines.append(",".join(row[c] for c in _CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    return "" if value is None else f"{value:g}"


def emit_results(results: list[SimResult], dest_dir, manifest: dict, model: str):
    """Write results.csv and manifest.json; returns their paths."""
    if not results:
        raise ValueError("no results to emit")
    dest = Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    csv_path = dest / "results.csv"
    csv_path.write_text(results_csv_text(results, model), encoding="utf-8")
    manifest_path = dest / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return csv_path, manifest_path


# ---------------------------------------------------------------------------
# sweep jobs (config-file driven)


@dataclass
class SweepJob:
    model: str
    constellation_specs: list
    out_dir: Path
    linewidth_khz: list
    snr_db: list = field(default_factory=list)
    noise_figure_db: list = field(default_factory=list)
    launch_power_dbm: list = field(default_factory=list)
    runs_per_point: int = 10
    symbols_per_run: int = 10_000
    bps_phases: int = 60
    bps_window: int = 64
    base_seed: int = 0
    envelope: bool = False
    link_path: str | None = None
    workers: int = 1

    @classmethod
    def from_config(cls, cfg: dict, origin: str = "<config>") -> "SweepJob":
        model = cfgmod.get(cfg, "model", str, required=True, origin=origin)
        if model not in ("awgn", "nlin"):
            raise ConfigError(f"{origin}: model must be awgn or nlin, got {model!r}")
        raw_consts = cfgmod.get(cfg, "constellations", str, required=True, origin=origin)
        specs = [s.strip() for s in raw_consts.split(",") if s.strip()]
        if not specs:
            raise ConfigError(f"{origin}: empty constellation list")
        job = cls(
            model=model,
            constellation_specs=specs,
            out_dir=Path(cfgmod.get(cfg, "out", str, default=".", origin=origin)),
            linewidth_khz=cfgmod.parse_float_list(
                cfgmod.get(cfg, "linewidth_khz", str, required=True, origin=origin),
                "linewidth_khz",
                origin,
            ),
            runs_per_point=cfgmod.get(cfg, "runs_per_point", int, default=10, origin=origin),
            symbols_per_run=cfgmod.get(cfg, "symbols_per_run", int, default=10_000, origin=origin),
            bps_phases=cfgmod.get(cfg, "bps_phases", int, default=60, origin=origin),
            bps_window=cfgmod.get(cfg, "bps_window", int, default=64, origin=origin),
            base_seed=cfgmod.get(cfg, "seed", int, default=0, origin=origin),
            envelope=cfgmod.get(cfg, "envelope", bool, default=False, origin=origin),
            link_path=cfg.get("link"),
            workers=cfgmod.get(cfg, "workers", int, default=1, origin=origin),
        )
        for axis in ("snr_db", "noise_figure_db", "launch_power_dbm"):
            if axis in cfg:
                setattr(job, axis, cfgmod.parse_float_list(cfg[axis], axis, origin))
        if cfgmod.get(cfg, "paper_scale", bool, default=False, origin=origin):
            job.runs_per_point = 100
            job.symbols_per_run = 100_000
        return job

    def grid(self) -> SweepGrid:
        try:
            return SweepGrid(
                model=self.model,
                linewidth_khz=tuple(self.linewidth_khz),
                snr_db=tuple(self.snr_db),
                noise_figure_db=tuple(self.noise_figure_db),
                launch_power_dbm=tuple(self.launch_power_dbm),
                runs_per_point=self.runs_per_point,
                symbols_per_run=self.symbols_per_run,
                base_seed=self.base_seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def manifest(self) -> dict:
        return {
            "job": "sweep",
            "model": self.model,
            "constellations": [str(s) for s in self.constellation_specs],
            "out": str(self.out_dir),
            "linewidth_khz": list(self.linewidth_khz),
            "snr_db": list(self.snr_db),
            "noise_figure_db": list(self.noise_figure_db),
            "launch_power_dbm": list(self.launch_power_dbm),
            "runs_per_point": self.runs_per_point,
            "symbols_per_run": self.symbols_per_run,
            "bps_phases": self.bps_phases,
            "bps_window": self.bps_window,
            "seed": self.base_seed,
            "envelope": self.envelope,
            "link": self.link_path,
        }

    @classmethod
    def from_manifest(cls, manifest: dict, origin: str = "<manifest>") -> "SweepJob":
        if manifest.get("job") != "sweep":
            raise ConfigError(f"{origin}: not a sweep manifest")
        job = cls(
            model=manifest["model"],
            constellation_specs=list(manifest["constellations"]),
            out_dir=Path(manifest["out"]),
            linewidth_khz=list(manifest["linewidth_khz"]),
            snr_db=list(manifest.get("snr_db", [])),
            noise_figure_db=list(manifest.get("noise_figure_db", [])),
            launch_power_dbm=list(manifest.get("launch_power_dbm", [])),
            runs_per_point=int(manifest["runs_per_point"]),
            symbols_per_run=int(manifest["symbols_per_run"]),
            bps_phases=int(manifest["bps_phases"]),
            bps_window=int(manifest["bps_window"]),
            base_seed=int(manifest["seed"]),
            envelope=bool(manifest.get("envelope", False)),
            link_path=manifest.get("link"),
        )
        return job


def resolve_constellation(spec: str) -> Constellation:
    """A constellation file path, or a ``qam<M>`` token for the baseline."""
    token = _QAM_TOKEN.match(spec)
    if token:
        return make_square_qam(int(token.group(1)))
    return load(spec)


def run_sweep_job(job: SweepJob, echo=None):
    """Execute a sweep job end to end; returns (results, csv_path, manifest_path)."""
    constellations = [resolve_constellation(s) for s in job.constellation_specs]
    bps_cfg = BpsConfig(num_test_phases=job.bps_phases, half_window=job.bps_window)
    link = coeffs = None
    if job.model == "nlin":
        link, coeffs = cfgmod.load_link_config(job.link_path)
    results = run_test_sweep(
        constellations,
        job.grid(),
        bps_cfg=bps_cfg,
        link=link,
        coeffs=coeffs,
        workers=job.workers,
        echo=echo,
    )
    if job.envelope:
        results = results + envelope_results(results)
    csv_path, manifest_path = emit_results(results, job.out_dir, job.manifest(), job.model)
    return results, csv_path, manifest_path
