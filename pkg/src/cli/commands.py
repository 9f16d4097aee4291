"""
Pipeline commands behind the command-line entry point.

Artifacts land under the run's output directory:
    world/       world.png, world.json
    dataset/     dataset.bin, metadata.csv, dataset.json
    train/<tag>/ seed<N>/{checkpoint.bin, train_log.jsonl, timing.csv}, manifest.json
    eval/<tag>/  traces, LPC curves, band, summary.json, reference_baselines.csv
    ablation/    ablation.csv, ablation_runs.csv
    hpsearch/    ranked.csv, trials.csv
"""
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..datapipe import (
    DatasetHeader,
    FrameRecord,
    SampleSequence,
    build_sequences,
    export_metadata_csv,
    extract_frames,
    filter_accuracy,
    read_dataset,
    write_dataset,
)
from ..evaluation import (
    LocalizationTrace,
    compare_ablation,
    confidence_band,
    deviation_summary,
    export_curves,
    lpc,
    median_deviation,
    reference_baselines,
)
from ..geo import GeoBounds, GeoCoordinate, bounds_diagonal_m
from ..inference import CoordinatePredictor, measure_throughput, run_stream
from ..model import SpatialTemporalModel, layer_table, load_checkpoint, parameter_count
from ..training import grid_search, train
from ..worldsim import (
    AgentPose,
    DistractorField,
    World,
    export_world,
    generate_world,
    render_fpp,
    render_gmp,
    sample_trajectory,
    simulate_gps,
    simulate_rtk,
)
from .run_config import RunConfig, config_hash

logger = logging.getLogger(__name__)

WITH_RECON = 'w/ Recon'
WITHOUT_RECON = 'w/o Recon'


def session_seed(base_seed: int, index: int) -> int:
    """Independent per-session seed derived from the world seed."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def run_tag(cfg: RunConfig) -> str:
    """Directory name of a model setting, e.g. 'transformer' or 'rnn-norecon'."""
    return cfg.model.variant + ('' if cfg.model.reconstruction_enabled else '-norecon')


def resolve_max_threshold(cfg: RunConfig) -> float:
    """Configured LPC threshold range, else a fixed share of the environment diagonal."""
    if cfg.eval['max_threshold_m'] is not None:
        return float(cfg.eval['max_threshold_m'])
    return float(cfg.eval['threshold_fraction']) * bounds_diagonal_m(cfg.world.bounds)


def _write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=str)
    return path


# ========================================
# WORLD
# ========================================

def cmd_gen_world(cfg: RunConfig) -> Dict[str, Any]:
    """Generate the world and export its satellite image with metadata."""
    world = generate_world(cfg.world)
    image_path, meta_path = export_world(world, cfg.output_dir / 'world', cfg.config_hash)
    width_m, height_m = cfg.world.extent_m
    info = {
        'extent_m': [width_m, height_m],
        'bounds': cfg.world.bounds.to_list(),
        'diagonal_m': bounds_diagonal_m(cfg.world.bounds),
        'occupied_fraction': world.occupied_fraction,
        'image': str(image_path),
        'metadata': str(meta_path),
    }
    print(f"World {width_m:.0f} x {height_m:.0f} m, bounds {info['bounds']}, "
          f"diagonal {info['diagonal_m']:.1f} m, occupancy {world.occupied_fraction:.3f}")
    return info


# ========================================
# DATASET
# ========================================

@dataclass
class SessionStats:
    poses: int = 0
    selected: int = 0
    excluded: int = 0
    sequences: int = 0

    def add(self, other: 'SessionStats') -> None:
        self.poses += other.poses
        self.selected += other.selected
        self.excluded += other.excluded
        self.sequences += other.sequences


def simulate_session(world: World, cfg: RunConfig, seed: int,
                     duration_s: float) -> Tuple[List[SampleSequence], SessionStats]:
    """One recording session: drive, RTK, frame extraction, filtering, rendering, windowing."""
    dataset = cfg.dataset
    interval = float(dataset['frame_interval_s'])
    fpp_size = tuple(dataset['fpp_size'])
    gmp_size = tuple(dataset['gmp_size'])
    coverage = float(dataset['gmp_coverage_m'])

    poses = sample_trajectory(world, world.spec.agent_speed_mps, duration_s, seed)
    distractors = DistractorField(world, duration_s, seed + 1)
    fixes = simulate_rtk(poses, cfg.sensors, seed + 2, world.frame)
    selected = extract_frames(fixes, interval)
    kept = filter_accuracy(selected, float(dataset['max_accuracy_m']))

    records = [
        FrameRecord(
            t_s=fix.t_s,
            fpp=render_fpp(world, fix.pose, distractors.state_at(fix.t_s), fpp_size),
            coord=fix.coord,
            rtk_accuracy_m=float(np.float32(fix.rtk_accuracy_m)),
        )
        for fix in kept
    ]

    def gmp_source(record: FrameRecord) -> np.ndarray:
        return render_gmp(world, world.frame.to_local(record.coord), coverage, gmp_size)

    sequences = build_sequences(records, gmp_source, world.spec.bounds, int(dataset['seq_len']),
                                interval, dataset['stride'], float(dataset['interval_tolerance_s']))
    stats = SessionStats(len(poses), len(selected), len(selected) - len(kept), len(sequences))
    return sequences, stats


def _dataset_hash(cfg: RunConfig) -> str:
    doc = cfg.document
    return config_hash({'world': doc['world'], 'sensors': doc['sensors'], 'dataset': doc['dataset']})


def build_dataset(cfg: RunConfig, show_progress: bool = False) -> Tuple[DatasetHeader, List[SampleSequence], SessionStats]:
    """Simulate every session and write the binary dataset plus its metadata."""
    world = generate_world(cfg.world)
    dataset = cfg.dataset
    sessions = int(dataset['sessions'])
    if sessions < 1:
        raise ValueError(f"dataset.sessions must be at least 1, got {sessions}")

    sequences: List[SampleSequence] = []
    totals = SessionStats()
    for index in tqdm(range(sessions), desc='sessions', disable=not show_progress):
        seqs, stats = simulate_session(world, cfg, session_seed(cfg.world.seed, index),
                                       float(dataset['session_duration_s']))
        sequences.extend(seqs)
        totals.add(stats)
        logger.debug(f"Session {index}: {stats.selected} frames, {stats.excluded} excluded, "
                     f"{stats.sequences} sequences")

    out_dir = cfg.output_dir / 'dataset'
    header = write_dataset(out_dir / 'dataset.bin', DatasetHeader(
        bounds=cfg.world.bounds,
        fpp_size=tuple(dataset['fpp_size']),
        gmp_size=tuple(dataset['gmp_size']),
        frame_interval_s=float(dataset['frame_interval_s']),
        seq_len=int(dataset['seq_len']),
    ), sequences)
    export_metadata_csv(sequences, out_dir / 'metadata.csv')
    _write_json(out_dir / 'dataset.json', {
        'config_hash': cfg.config_hash,
        'dataset_hash': _dataset_hash(cfg),
        'sessions': sessions,
        'record_count': header.record_count,
        'sequence_count': header.sequence_count,
        **{f'total_{k}': v for k, v in vars(totals).items()},
    })
    logger.info(f"Dataset built: {header.sequence_count} sequences from {sessions} sessions")
    return header, sequences, totals


def load_or_build_dataset(cfg: RunConfig, show_progress: bool = False) -> Tuple[DatasetHeader, List[SampleSequence]]:
    """Reuse the stored dataset when it was built from the same world, sensor and dataset settings."""
    out_dir = cfg.output_dir / 'dataset'
    meta_path = out_dir / 'dataset.json'
    if (out_dir / 'dataset.bin').exists() and meta_path.exists():
        with open(meta_path, 'r', encoding='utf-8') as f:
            if json.load(f).get('dataset_hash') == _dataset_hash(cfg):
                logger.info(f"Reusing dataset in {out_dir}")
                return read_dataset(out_dir / 'dataset.bin')
    header, sequences, _ = build_dataset(cfg, show_progress)
    return header, sequences


def cmd_build_dataset(cfg: RunConfig, show_progress: bool = False) -> Dict[str, Any]:
    header, _, totals = build_dataset(cfg, show_progress)
    print(f"Records {header.record_count}, sequences {header.sequence_count}; "
          f"extracted frames {totals.selected}, excluded by accuracy {totals.excluded}")
    return {'record_count': header.record_count, 'sequence_count': header.sequence_count,
            'selected': totals.selected, 'excluded': totals.excluded}


# ========================================
# TRAINING
# ========================================

def train_seed(cfg: RunConfig, header: DatasetHeader, sequences: Sequence[SampleSequence], seed: int,
               run_dir: Path, show_progress: bool = False) -> Dict[str, Any]:
    """Train one seed into run_dir and describe the artifacts."""
    result = train(sequences, cfg.model, replace(cfg.train, seed=seed), run_dir,
                   bounds=header.bounds, frame_interval_s=header.frame_interval_s,
                   config_hash=cfg.config_hash, show_progress=show_progress)
    return {
        'seed': seed,
        'checkpoint': str(run_dir / 'checkpoint.bin'),
        'log': str(run_dir / 'train_log.jsonl'),
        'timing': str(run_dir / 'timing.csv'),
        'best_epoch': result.best_epoch,
        'best_val': result.best_val,
        'steps': result.steps,
        'stopped_early': result.stopped_early,
    }


def train_runs(cfg: RunConfig, header: DatasetHeader, sequences: Sequence[SampleSequence],
               seeds: Sequence[int], jobs: int = 1, show_progress: bool = False) -> Dict[str, Any]:
    """Train every seed, optionally in worker processes, and write the seed manifest."""
    tag_dir = cfg.output_dir / 'train' / run_tag(cfg)
    run_dirs = [tag_dir / f'seed{seed}' for seed in seeds]
    if jobs > 1 and len(seeds) > 1:
        worker = partial(train_seed, cfg, header, sequences)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(worker, seeds, run_dirs))
    else:
        runs = [train_seed(cfg, header, sequences, seed, run_dir, show_progress)
                for seed, run_dir in zip(seeds, run_dirs)]

    manifest = {
        'config_hash': cfg.config_hash,
        'variant': cfg.model.variant,
        'reconstruction_enabled': cfg.model.reconstruction_enabled,
        'runs': runs,
    }
    _write_json(tag_dir / 'manifest.json', manifest)
    logger.info(f"Trained {len(runs)} seeds into {tag_dir}")
    return manifest


def cmd_train(cfg: RunConfig, jobs: int = 1, show_progress: bool = False) -> Dict[str, Any]:
    header, sequences = load_or_build_dataset(cfg, show_progress)
    manifest = train_runs(cfg, header, sequences, cfg.seeds, jobs, show_progress)
    for run in manifest['runs']:
        print(f"seed {run['seed']}: best epoch {run['best_epoch']}, "
              f"val coord {run['best_val'].get('coord', float('nan')):.4f} -> {run['checkpoint']}")
    return manifest


# ========================================
# EVALUATION
# ========================================

@dataclass
class HeldOutSession:
    poses: List[AgentPose]
    frames: List[Tuple[float, np.ndarray]]
    truth: List[Tuple[float, GeoCoordinate]]
    seed: int


@dataclass
class EvalRun:
    label: str
    model: CoordinatePredictor
    bounds: GeoBounds
    frame_interval_s: float
    capacity: int


def render_test_session(world: World, cfg: RunConfig, show_progress: bool = False) -> HeldOutSession:
    """Held-out drive through the training world with its own seed."""
    seed = cfg.world.seed + int(cfg.eval['test_seed_offset'])
    duration = float(cfg.eval['test_duration_s'])
    poses = sample_trajectory(world, world.spec.agent_speed_mps, duration, seed)
    distractors = DistractorField(world, duration, seed + 1)
    fpp_size = tuple(cfg.dataset['fpp_size'])
    frames = [(p.t_s, render_fpp(world, p, distractors.state_at(p.t_s), fpp_size))
              for p in tqdm(poses, desc='rendering', disable=not show_progress)]
    truth = [(p.t_s, world.frame.to_geo(p.x_m, p.y_m)) for p in poses]
    return HeldOutSession(poses, frames, truth, seed)


def runs_from_checkpoints(paths: Sequence[Path], cfg: RunConfig) -> List[EvalRun]:
    runs = []
    for path in paths:
        model, header = load_checkpoint(path)
        bounds = GeoBounds.from_dict(header['bounds']) if header.get('bounds') else cfg.world.bounds
        seed = header.get('extra', {}).get('seed')
        runs.append(EvalRun(
            label=f'seed{seed}' if seed is not None else Path(path).parent.name,
            model=model,
            bounds=bounds,
            frame_interval_s=header.get('frame_interval_s') or cfg.frame_interval_s,
            capacity=model.config.seq_len,
        ))
    return runs


def evaluate_runs(cfg: RunConfig, world: World, runs: Sequence[EvalRun], out_dir: Path,
                  session: Optional[HeldOutSession] = None, show_progress: bool = False
                  ) -> Tuple[Dict[str, Any], List[LocalizationTrace]]:
    """Stream the held-out session through every run and export curves and summaries.

    Returns:
        (summary, one trace per run)
    """
    if not runs:
        raise ValueError("Nothing to evaluate: no checkpoints given")
    session = session or render_test_session(world, cfg, show_progress)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inference = cfg.inference
    ev = cfg.eval
    diagonal = bounds_diagonal_m(cfg.world.bounds)
    max_threshold = resolve_max_threshold(cfg)
    spikes = float(ev['spike_threshold_m'])
    include_warm_up = bool(ev['include_warm_up'])
    n_points = int(ev['n_points'])
    speed = world.spec.agent_speed_mps

    traces, curves, per_run = [], [], {}
    for run in runs:
        trace = run_stream(run.model, session.frames, session.truth, run.bounds, run.capacity,
                           run.frame_interval_s, int(inference['min_frames']),
                           float(inference['pairing_window_s']), float(inference['admit_tolerance_s']),
                           label=run.label)
        trace.to_csv(out_dir / f'trace_{run.label}.csv')
        curve = lpc(trace, max_threshold, n_points, include_warm_up, run.label)
        traces.append(trace)
        curves.append(curve)
        per_run[run.label] = {'auc': curve.auc,
                              **deviation_summary(trace, diagonal, speed, spikes, include_warm_up)}

    band = confidence_band(traces, max_threshold, n_points, include_warm_up,
                           labels=[r.label for r in runs]) if len(traces) > 1 else None

    # Phone GPS is scored at every 1 Hz fix of the same drive
    gps = simulate_gps(session.poses, cfg.sensors, session.seed + 2, world.frame)
    gps.to_csv(out_dir / 'trace_phone_gps.csv')
    gps_curve = lpc(gps, max_threshold, n_points, True, 'phone_gps')

    throughput = measure_throughput(runs[0].model, runs[0].capacity, tuple(cfg.dataset['fpp_size']),
                                    int(ev['throughput_frames']))
    aucs = [c.auc for c in curves]
    summary = {
        'config_hash': cfg.config_hash,
        'diagonal_m': diagonal,
        'max_threshold_m': max_threshold,
        'test_seed': session.seed,
        'runs': per_run,
        'mean_auc': float(np.mean(aucs)),
        'auc_range': float(np.max(aucs) - np.min(aucs)),
        'median_deviation_m': float(np.mean([median_deviation(t, include_warm_up) for t in traces])),
        'phone_gps': {'auc': gps_curve.auc, **deviation_summary(gps, diagonal, speed, spikes, True)},
        'throughput': throughput,
    }
    export_curves(curves + [gps_curve], band, out_dir, summary)
    refs = reference_baselines()
    refs['config_hash'] = cfg.config_hash
    refs.to_csv(out_dir / 'reference_baselines.csv', index=False)
    return summary, traces


def _manifest_checkpoints(cfg: RunConfig) -> List[Path]:
    manifest_path = cfg.output_dir / 'train' / run_tag(cfg) / 'manifest.json'
    if not manifest_path.exists():
        raise FileNotFoundError(f"No training manifest at {manifest_path}; run 'train' first or pass --checkpoints")
    with open(manifest_path, 'r', encoding='utf-8') as f:
        return [Path(run['checkpoint']) for run in json.load(f)['runs']]


def cmd_eval(cfg: RunConfig, checkpoints: Optional[Sequence[Path]] = None,
             show_progress: bool = False) -> Dict[str, Any]:
    world = generate_world(cfg.world)
    runs = runs_from_checkpoints(checkpoints or _manifest_checkpoints(cfg), cfg)
    summary, _ = evaluate_runs(cfg, world, runs, cfg.output_dir / 'eval' / run_tag(cfg),
                               show_progress=show_progress)
    for label, stats in summary['runs'].items():
        print(f"{label}: AUC {stats['auc']:.3f}, median deviation {stats['median_deviation_m']:.2f} m")
    print(f"mean AUC {summary['mean_auc']:.3f} over {len(runs)} runs; phone GPS AUC "
          f"{summary['phone_gps']['auc']:.3f}, median {summary['phone_gps']['median_deviation_m']:.2f} m")
    print(f"{summary['throughput']['predictions_per_s']:.1f} predictions/s, "
          f"{summary['throughput']['mean_inference_ms']:.1f} ms each")
    return summary


# ========================================
# ABLATION AND SEARCH
# ========================================

def cmd_ablate(cfg: RunConfig, jobs: int = 1, show_progress: bool = False) -> pd.DataFrame:
    """Train and evaluate with and without the reconstruction objective over every seed."""
    header, sequences = load_or_build_dataset(cfg, show_progress)
    world = generate_world(cfg.world)
    session = render_test_session(world, cfg, show_progress)

    results: Dict[str, List[LocalizationTrace]] = {}
    rows = []
    max_threshold = resolve_max_threshold(cfg)
    for label, enabled in ((WITH_RECON, True), (WITHOUT_RECON, False)):
        setting = replace(cfg, model=replace(cfg.model, reconstruction_enabled=enabled))
        manifest = train_runs(setting, header, sequences, cfg.seeds, jobs, show_progress)
        runs = runs_from_checkpoints([Path(r['checkpoint']) for r in manifest['runs']], setting)
        summary, traces = evaluate_runs(setting, world, runs, cfg.output_dir / 'eval' / run_tag(setting),
                                        session=session)
        results[label] = traces
        for run in runs:
            stats = summary['runs'][run.label]
            rows.append({'label': label, 'run': run.label, 'auc': stats['auc'],
                         'median_deviation_m': stats['median_deviation_m']})

    table = compare_ablation(results, max_threshold, int(cfg.eval['n_points']),
                             bool(cfg.eval['include_warm_up']), include_references=True)
    table['config_hash'] = cfg.config_hash
    out_dir = cfg.output_dir / 'ablation'
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / 'ablation.csv', index=False, float_format='%.10g')
    pd.DataFrame(rows).assign(config_hash=cfg.config_hash).to_csv(
        out_dir / 'ablation_runs.csv', index=False, float_format='%.10g')
    print(table[table['source'] == 'computed'][['rank', 'label', 'mean_auc', 'auc_range',
                                                'median_deviation_m']].to_string(index=False))
    return table


def cmd_hpsearch(cfg: RunConfig, jobs: int = 1, show_progress: bool = False) -> pd.DataFrame:
    header, sequences = load_or_build_dataset(cfg, show_progress)
    search = cfg.search
    ranked, trials = grid_search(search['space'], sequences, cfg.model, cfg.train,
                                 subset_fraction=float(search['subset_fraction']),
                                 seeds=list(search['seeds']),
                                 source_interval_s=header.frame_interval_s, jobs=jobs)
    out_dir = cfg.output_dir / 'hpsearch'
    out_dir.mkdir(parents=True, exist_ok=True)
    ranked.assign(config_hash=cfg.config_hash).to_csv(out_dir / 'ranked.csv', index=False, float_format='%.10g')
    trials.assign(config_hash=cfg.config_hash).to_csv(out_dir / 'trials.csv', index=False, float_format='%.10g')
    print(ranked.head(10).to_string(index=False))
    return ranked


def cmd_params(cfg: RunConfig) -> int:
    """Print the per-module parameter table of the configured model."""
    model = SpatialTemporalModel(cfg.model)
    print(layer_table(model).to_string(index=False))
    total = parameter_count(model)
    print(f"Total trainable parameters: {total:,} ({total / 1e6:.2f} M)")
    return total
