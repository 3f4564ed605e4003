"""Model evaluation reports and hyperparameter sweep harness.

A report contains the four computational metrics for one model/test-set
pair: MAE (the metric-preservation loss over the whole test set as a single
batch), PC (Pearson correlation of pairwise distances), NCA (nearest
centroid accuracy in the output space, labeled by the source-space nearest
centroid predictions), and the mean pairwise distance of the sonifications.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import torch

from . import geometry
from .audio import FeatureParams, mel_feature_tensor
from .data import AudioCorpus, FeatureTable
from .errors import ConfigurationError, DegenerateBatchError
from .models import ModelState, generate_waveforms
from .training import TrainConfig, train

SWEEP_HEADER = "value,pc,mae,nca,mean_pairwise_out"
SWEEP_PARAMETERS = ("lambda_metric", "uri_p")

# Above this many records the quadratic pair set is subsampled (uniformly,
# with replacement) down to max_exact_records*(max_exact_records-1)/2 pairs.
MAX_EXACT_RECORDS = 2000


@dataclass
class EvalReport:
    mae: float
    pc: float
    nca: float
    mean_pairwise_out: float
    metric_mode: str
    model_id: str = ""
    test_set_id: str = ""
    n_records: int = 0
    pairs_subsampled: bool = False

    def to_text(self) -> str:
        lines = []
        for key, value in asdict(self).items():
            lines.append(f"{key} = {value!r}" if isinstance(value, str) else f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _output_points(state: ModelState, waves: torch.Tensor, metric_mode: str):
    if metric_mode == "mfcc":
        with torch.no_grad():
            pts = mel_feature_tensor(waves, state.feature_params, state.sample_rate)
        return pts.numpy().astype(np.float64), "squared-feature-frame"
    if metric_mode == "l2":
        return waves.numpy().astype(np.float64), "euclidean"
    raise ValueError(f"unknown metric mode {metric_mode!r}")


def _condensed_pair_values(src: np.ndarray, out: np.ndarray, point_metric: str, seed: int):
    """Source/output pairwise distance vectors over a shared pair set."""
    n = src.shape[0]
    if n <= MAX_EXACT_RECORDS:
        return (
            geometry.condensed_distances(src, "euclidean"),
            geometry.condensed_distances(out, point_metric),
            False,
        )
    rng = np.random.default_rng(seed)
    k = MAX_EXACT_RECORDS * (MAX_EXACT_RECORDS - 1) // 2
    i = rng.integers(0, n, size=k)
    j = rng.integers(0, n - 1, size=k)
    j = np.where(j >= i, j + 1, j)  # uniform over ordered pairs with i != j
    sflat = src.reshape(n, -1)
    oflat = out.reshape(n, -1)
    u = np.linalg.norm(sflat[i] - sflat[j], axis=1)
    v = ((oflat[i] - oflat[j]) ** 2).sum(axis=1)
    if point_metric == "euclidean":
        v = np.sqrt(v)
    return u, v, True


def evaluate_model(
    state: ModelState,
    test_table: FeatureTable,
    metric_mode: str = "mfcc",
    model_id: str = "",
    test_set_id: str = "",
    sonifier=None,
    pair_sample_seed: int = 0,
) -> EvalReport:
    """Sonify every test record once and compute MAE/PC/NCA over the set.

    ``sonifier`` overrides the model's generator (vectors -> (n, len) float
    waveform array); used for oracle stubs in tests.  A degenerate output set
    (all sonifications identical) propagates DegenerateBatchError: the
    evaluation fails rather than reporting a meaningless score.
    """
    if len(test_table) < 2:
        raise ConfigurationError("test table needs at least 2 records")
    vectors = test_table.vectors()
    if vectors.shape[1] != state.gen_config.input_dim:
        raise ConfigurationError(
            f"model expects {state.gen_config.input_dim}-dim features, table has {vectors.shape[1]}"
        )
    if sonifier is not None:
        waves = torch.as_tensor(np.asarray(sonifier(vectors), dtype=np.float32))
    else:
        waves = generate_waveforms(state, vectors)
    out_points, point_metric = _output_points(state, waves, metric_mode)
    src = vectors.astype(np.float64)

    u, v, subsampled = _condensed_pair_values(src, out_points, point_metric, pair_sample_seed)
    n = len(test_table)
    u_mean, v_mean = float(np.mean(u)), float(np.mean(v))
    if u_mean == 0.0 or v_mean == 0.0:
        # mirrors the metric-loss degeneracy contract for constant outputs
        side = "source" if u_mean == 0.0 else "output"
        raise DegenerateBatchError(f"all {side} points identical over the test set")
    mae = float(np.abs(u / u_mean - v / v_mean).mean()) / 2.0  # == Eq. sum/(N(N-1)) on the full pair set
    pc = geometry.pearson(u, v)

    source_pred = geometry.nearest_centroid_predictions(src, test_table.labels(), "euclidean")
    nca = geometry.nearest_centroid_accuracy(out_points, source_pred, point_metric)

    return EvalReport(
        mae=mae,
        pc=pc,
        nca=nca,
        mean_pairwise_out=v_mean,
        metric_mode=metric_mode,
        model_id=model_id,
        test_set_id=test_set_id or f"{len(test_table)} records",
        n_records=n,
        pairs_subsampled=subsampled,
    )


def corpus_mean_pairwise_distance(
    corpus: AudioCorpus,
    mode: str = "mfcc",
    params: FeatureParams | None = None,
    sample_rate: int = 16000,
) -> float:
    """Mean pairwise distance between corpus clips under an audio metric."""
    waves = torch.as_tensor(corpus.waveforms(), dtype=torch.float64)
    if mode == "mfcc":
        with torch.no_grad():
            pts = mel_feature_tensor(waves, params or FeatureParams(), sample_rate).numpy()
        metric = "squared-feature-frame"
    else:
        pts, metric = waves.numpy(), "euclidean"
    return float(np.mean(geometry.condensed_distances(pts, metric)))


@dataclass
class SweepRow:
    value: float
    report: EvalReport | None
    error: str | None = None

    def to_csv(self) -> str:
        if self.report is None:
            return f"{self.value!r},,,,"
        r = self.report
        return f"{self.value!r},{r.pc!r},{r.mae!r},{r.nca!r},{r.mean_pairwise_out!r}"


def run_sweep(
    tables: tuple[FeatureTable, FeatureTable, FeatureTable],
    corpus: AudioCorpus,
    base_config: TrainConfig,
    parameter: str,
    values,
    out_dir,
) -> list[SweepRow]:
    """Train and evaluate one model per swept value (shared seed).

    Writes ``sweep.csv`` (value,pc,mae,nca,mean_pairwise_out), one plot-ready
    ``<metric>.csv`` per metric, and per-value run directories with training
    logs and checkpoints.  A failed run is recorded in ``failures.txt`` and
    the sweep continues.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigurationError(f"can only sweep {SWEEP_PARAMETERS}, got {parameter!r}")
    values = list(values)
    if not values:
        raise ConfigurationError("no sweep values given")
    train_table, val_table, test_table = tables
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows: list[SweepRow] = []
    for value in values:
        config = replace(base_config, **{parameter: value})
        run_dir = out_dir / f"{parameter}-{value}"
        try:
            state, _ = train(train_table, corpus, config, val_table=val_table, out_dir=run_dir)
            report = evaluate_model(
                state, test_table, config.target_metric,
                model_id=f"{parameter}={value}", test_set_id="test",
            )
            report.write(run_dir / "eval.txt")
            rows.append(SweepRow(float(value), report))
        except Exception as exc:  # noqa: BLE001 - per-row failures must not kill the sweep
            rows.append(SweepRow(float(value), None, error=f"{type(exc).__name__}: {exc}"))

    lines = [SWEEP_HEADER] + [row.to_csv() for row in rows]
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for metric in ("pc", "mae", "nca", "mean_pairwise_out"):
        content = [f"value,{metric}"]
        for row in rows:
            if row.report is not None:
                content.append(f"{row.value!r},{getattr(row.report, metric)!r}")
        (out_dir / f"{metric}.csv").write_text("\n".join(content) + "\n", encoding="utf-8")
    failures = [f"{row.value!r}: {row.error}" for row in rows if row.error]
    if failures:
        (out_dir / "failures.txt").write_text("\n".join(failures) + "\n", encoding="utf-8")
    return rows
