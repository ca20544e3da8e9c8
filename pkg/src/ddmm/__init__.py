"""Similarity retrieval for multivariate time series.

Train a sigmoid autoencoder on distance-weighted segment differences
and rank archive segments by the reconstruction error of the
query-archive difference vector.  Includes the preprocessing pipeline,
Euclidean and embedding baselines, ranking metrics and a multi-seed
benchmark harness.
"""

from .ingest import (NormalizationParams, TimeSeries, apply_profile,
                     downsample_block_min, drop_nan_rows, drop_sensor, load_csv,
                     load_preprocessed, normalize_min_max, remove_pulse_rows,
                     save_timeseries)
from .segment import (QuerySpec, SegmentStore, build_segments, load_queries,
                      overlaps, save_queries, segment_label, segment_vector,
                      select_queries)
from .neuralnet import (AdamState, MlpAutoencoder, TrainConfig, init_autoencoder,
                        persist_model, restore_model, train_step,
                        weighted_mse_loss)
from .ranking import RankedResult
from .model import (ComparisonModel, DdmmModel, PairBatch, dc1_distance,
                    ddm_distance, difference_vector, pair_weight, rescale,
                    retrieve, sample_pairs, train_ae_ddmm, train_comparison_model,
                    train_ddmm)
from .baselines import (AeEmbedder, ae_embedding_retrieve, euclidean_retrieve,
                        train_ae_baseline)
from .evaluation import (BenchmarkConfig, MetricsReport, average_precision_at_k,
                         mean_average_precision, precision_at_k, recall_at_k,
                         relevance, run_benchmark, time_difference_histogram)
from .synthetic import three_state_series, two_state_series

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AeEmbedder", "BenchmarkConfig", "ComparisonModel", "DdmmModel",
    "MetricsReport", "MlpAutoencoder", "NormalizationParams", "PairBatch",
    "QuerySpec", "RankedResult", "SegmentStore", "TimeSeries", "TrainConfig",
    "ae_embedding_retrieve", "apply_profile", "average_precision_at_k",
    "build_segments", "dc1_distance", "ddm_distance", "difference_vector",
    "downsample_block_min", "drop_nan_rows", "drop_sensor", "euclidean_retrieve",
    "init_autoencoder", "load_csv", "load_preprocessed", "load_queries",
    "mean_average_precision", "normalize_min_max", "overlaps", "pair_weight",
    "persist_model", "precision_at_k", "recall_at_k", "relevance", "remove_pulse_rows",
    "rescale", "restore_model", "retrieve", "run_benchmark", "sample_pairs",
    "save_queries", "save_timeseries", "segment_label", "segment_vector",
    "select_queries", "three_state_series", "time_difference_histogram",
    "train_ae_baseline", "train_ae_ddmm", "train_comparison_model", "train_ddmm",
    "train_step", "two_state_series", "weighted_mse_loss",
]
