"""Earballs: metric-preserving sonification of feature-vector spaces.

Learns a distance-preserving map from a metric space of feature vectors into
a perceptual audio domain with an adversarially trained waveform generator,
evaluates the learned map computationally (MAE/PC/NCA), and generates
self-contained human listening tests.
"""

__version__ = "0.1.0"

from .audio import AudioClip, FeatureFrame, FeatureParams, audio_distance, extract_features, mel_scale, read_clip, write_clip
from .data import AudioCorpus, FeatureRecord, FeatureTable, load_audio_corpus, load_feature_table, save_feature_table, split_by_label, synth_audio, synth_source
from .errors import EarballsError
from .evaluation import EvalReport, corpus_mean_pairwise_distance, evaluate_model, run_sweep
from .geometry import (
    l2_separates,
    metric_loss,
    nearest_centroid_accuracy,
    pairwise_distances,
    pearson_distance_correlation,
    sample_unit_sphere,
)
from .models import (
    DiscriminatorConfig,
    GeneratorConfig,
    ModelState,
    discriminate,
    discriminator_loss,
    generate,
    generator_loss,
    gradient_penalty,
    load_checkpoint,
    phase_shuffle,
    save_checkpoint,
)
from .testgen import (
    ResponseRecord,
    TestPackage,
    check_package,
    generate_test,
    grade_responses,
    write_package,
)
from .training import TrainConfig, TrainLog, desk_config, make_batch, train

__all__ = [name for name in dir() if not name.startswith("_")]
