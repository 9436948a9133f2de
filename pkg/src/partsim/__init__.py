"""Partition-aware item-similarity collaborative filtering and a reproducible benchmark harness."""

__version__ = "0.1.0"

from .data import (ColumnFormat, DatasetStats, InteractionMatrix, NormalizedView, compute_stats, gini,
                   gram_operator, load_interactions, normalize)
from .splitter import ItemSegments, SplitBundle, SplitConfig, head_tail_partition, holdout_split
from .spectral import (EigenBasis, PartitionAssignment, fiedler_split, recursive_partition,
                       top_eigenpairs)
from .models import ScorerModel, SimilarityModel
from .baselines import (ease_fit, gfcf_fit, itemknn_fit, popularity_scores, random_scores,
                        rp3beta_fit)
from .fpsr import (FpsrConfig, HubSet, fpsr_fit, local_learn, model_footprint, select_hubs_degree,
                   select_hubs_fiedler)
from .bism import BismConfig, bdr_project, bism_fit
from .evaluation import MetricReport, RankedLists, metrics, paired_significance, recommend_topk
from .hpo import Choice, LogUniform, SearchSpace, TrialLog, Uniform, search, tau_sweep
