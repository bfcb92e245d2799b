"""Robust training under label noise: joint training with agreement
regularization, small-loss selection, and the classic baselines."""

from .data import (LabeledDataset, SyntheticSpec, load_idx_dataset, load_mnist,
                   make_synthetic, read_idx_images, read_idx_labels,
                   split_dataset, write_idx_images, write_idx_labels)
from .estimators import (CoTeachingClassifier, DecouplingClassifier,
                         EpochRecord, JoCoRClassifier, JointOnlyClassifier,
                         StandardClassifier, StandardPlusClassifier,
                         VARIANT_CLASSES, evaluate, joint_training_gradients,
                         label_precision, linear_decay_lr)
from .exceptions import (ConfigurationError, DataError, FormatError,
                         NotFittedError, NumericError, ShapeError)
from .losses import (KeepSchedule, LossBreakdown, Selection, contrastive_loss,
                     cross_entropy, joint_loss, joint_loss_gradients,
                     keep_rate, reduce_selected, select_small_loss,
                     supervised_loss)
from .nn import PROB_FLOOR, AdamConfig, AdamState, DenseLayer, ForwardTrace, \
    Mlp, adam_step, softmax
from .noise import (NoiseSpec, TransitionMatrix, asymmetric_transition,
                    corrupt_labels, symmetric_transition)

__version__ = "0.1.0"
