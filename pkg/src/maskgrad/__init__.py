"""maskgrad: train malware-category classifiers, rank their features by
attribution, and evaluate feature-masked targeted evasion attacks."""

from .attack import (AdversarialBatch, AttackConfig, fgsm_targeted,
                     grid_search, pgd_targeted, run_attack, select_attack_rows)
from .data import (LabeledDataset, load_csv, save_csv, stratified_split,
                   synth_dataset)
from .explain import (AttributionResult, BackgroundSet, DeepShapExplainer,
                      GlobalImportance, global_importance, select_background,
                      top_k_features)
from .metrics import (EvalMetrics, confusion_matrix, evaluate_classifier,
                      metrics_from_confusion)
from .model import MlpClassifier, load_checkpoint, save_checkpoint
from .network import Mlp, predict_classes, train_network
from .numerics import RngStream, identity, matmul, transpose
from .preprocessing import (SmoteOversampler, Standardizer, smote_balance,
                            smote_plan)
from .report import (SweepResult, SweepRow, attack_confusion, emit_report,
                     success_rate, sweep_features)

__version__ = "0.1.0"
