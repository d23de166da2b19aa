"""Weighted false discovery rate control for large-scale multiple testing.

Oracle and data-driven procedures that maximize the expected weighted number
of true positives subject to a weighted FDR constraint, comparator
procedures, and a Monte Carlo harness for simulation studies.
"""

__version__ = "0.1.0"

from .exceptions import BatchFormatError, ConfigurationError, EstimationError, WFDRError
from .model import (
    GaussianComponent,
    GroupSpec,
    HypothesisBatch,
    MixtureModel,
    WeightScheme,
    covariate_weights,
    density,
    generate_batch,
    mixture_density,
    read_batch_csv,
    write_batch_csv,
)
from .lfdr import (
    DensityEstimate,
    LfdrOptions,
    LfdrVector,
    estimate_lfdr,
    estimate_proportion,
    kde_fit,
    oracle_lfdr,
    pvalues,
)
from .ranking import RankedHypotheses, lr_stat, r_stat, rank_all, vcr, wlr_stat, wpo_stat
from .procedures import (
    PROCEDURES,
    DecisionSet,
    adaptive_z,
    apply_procedure,
    bh_step_up,
    oracle_procedure,
    pfer_oracle,
    procedure1,
    procedure2,
    wpo_stepwise,
)
from .metrics import AggregateMetrics, ReplicationMetrics, aggregate, replication_metrics, top_k_true_positives
from .sim import ExperimentConfig, ReplicationSummary, Sweep, builtin_configs, get_builtin, run_experiment
