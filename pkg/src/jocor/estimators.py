"""Noisy-label trainers with an sklearn-style estimator surface.

Every variant shares one fit loop (seeded shuffle, fixed-size mini-batches
with the last short batch kept, linear LR decay, per-epoch metrics) and plugs
in its own batch update:

* ``JoCoRClassifier``       two networks, one joint loss (cross-entropy +
                            symmetric-KL agreement), small-loss selection by
                            the joint loss, one Adam state over both networks.
* ``JointOnlyClassifier``   the same with the agreement weight pinned to 0.
* ``CoTeachingClassifier``  each network selects by its own loss and trains on
                            its peer's selection; independent Adam states.
* ``DecouplingClassifier``  updates only on examples where the two networks'
                            argmax predictions disagree.
* ``StandardPlusClassifier``one network with small-loss selection by its own
                            cross-entropy.
* ``StandardClassifier``    one network, plain cross-entropy on every example.

``true_labels`` passed to ``fit`` feed the label-precision metric only; they
never reach an update path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DataError, NumericError, ShapeError
from .losses import (KeepSchedule, Selection, cross_entropy,
                     cross_entropy_gradient, joint_loss, joint_loss_gradients,
                     keep_rate, reduce_selected, select_small_loss)
from .nn import AdamConfig, AdamState, Mlp, adam_step
from .validation import (ParamsMixin, check_labels, check_matrix,
                         check_features_labels, ensure_fitted)


@dataclass
class EpochRecord:
    """One row of per-epoch metrics."""
    epoch: int                        # 1-based
    test_accuracies: tuple[float, ...]  # one entry per network (nan if no eval set)
    label_precision: float
    keep_rate: float
    mean_joint_loss: float
    learning_rate: float


def linear_decay_lr(base_lr: float, epoch_index: int, decay_start: int,
                    decay_end: int) -> float:
    """Constant before decay_start, linear to zero at decay_end, zero after."""
    if epoch_index < decay_start:
        return base_lr
    if epoch_index >= decay_end:
        return 0.0
    return base_lr * (decay_end - epoch_index) / (decay_end - decay_start)


def evaluate(networks, X, y) -> tuple[float, ...]:
    """Accuracy of each network's argmax prediction (ties: lowest class id)."""
    X = check_matrix(X, "X")
    if X.shape[0] == 0:
        raise DataError("evaluation set is empty")
    networks = list(networks)
    y = check_labels(y, networks[0].output_width, "y")
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    accuracies = []
    for net in networks:
        predicted = np.argmax(net.forward(X).probabilities, axis=1)
        accuracies.append(float(np.mean(predicted == y)))
    return tuple(accuracies)


def label_precision(selection: Selection, observed, true) -> float:
    """Fraction of the kept examples whose observed label is the true one."""
    kept = selection.kept_indices
    if kept.size == 0:
        raise DataError("selection is empty")
    observed = np.asarray(observed)
    true = np.asarray(true)
    if kept.max() >= observed.shape[0] or observed.shape != true.shape:
        raise ShapeError("selection does not match the label vectors")
    return float(np.mean(observed[kept] == true[kept]))


def joint_training_gradients(net1: Mlp, net2: Mlp, x, labels,
                             contrast_weight: float, rate: float):
    """One joint-training step's gradients for both networks.

    Forward both networks, blend the per-example losses, keep the small-loss
    subset, and differentiate the mean kept loss. Selection is frozen before
    differentiation, so gradients flow only to kept examples.

    Returns (grads1, grads2, selection, reduced_loss).
    """
    t1 = net1.forward(x)
    t2 = net2.forward(x)
    breakdown = joint_loss(t1.probabilities, t2.probabilities, labels,
                           contrast_weight)
    selection = select_small_loss(breakdown.joint, rate)
    loss = reduce_selected(breakdown.joint, selection)
    if not math.isfinite(loss):
        raise NumericError("non-finite joint loss")
    d1, d2 = joint_loss_gradients(t1.probabilities, t2.probabilities, labels,
                                  contrast_weight)
    kept = selection.kept_indices
    dl1 = np.zeros_like(d1)
    dl2 = np.zeros_like(d2)
    dl1[kept] = d1[kept] / kept.size
    dl2[kept] = d2[kept] / kept.size
    return net1.backward(t1, dl1), net2.backward(t2, dl2), selection, loss


def _masked_ce_step(net: Mlp, trace, labels, kept: np.ndarray,
                    adam_cfg: AdamConfig) -> None:
    """Adam-update one network on the mean cross-entropy over kept rows."""
    rows = cross_entropy_gradient(trace.probabilities, labels)
    dl = np.zeros_like(rows)
    dl[kept] = rows[kept] / kept.size
    net.adam_step(net.backward(trace, dl), adam_cfg)


class _NoisyLabelClassifier(ParamsMixin):
    """Shared constructor parameters and fit loop for all variants.

    ``noise_rate`` and ``ramp_epochs`` drive the keep-rate schedule and are
    ignored by variants without small-loss selection.
    """

    _n_networks = 2
    _uses_schedule = False
    _records_realized_keep = False

    def __init__(self, hidden_units=256, epochs=200, batch_size=128,
                 learning_rate=0.001, lr_decay_start=80, lr_decay_end=200,
                 noise_rate=0.0, ramp_epochs=10,
                 adam_beta1=0.9, adam_beta2=0.999, adam_epsilon=1e-8,
                 n_classes=None, random_state=0, network_seeds=None):
        self.hidden_units = hidden_units
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay_start = lr_decay_start
        self.lr_decay_end = lr_decay_end
        self.noise_rate = noise_rate
        self.ramp_epochs = ramp_epochs
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_epsilon = adam_epsilon
        self.n_classes = n_classes
        self.random_state = random_state
        self.network_seeds = network_seeds

    # -- variant hooks -----------------------------------------------------

    def _init_optimizer(self, nets):
        return None  # per-network Adam states live on the networks

    def _train_batch(self, nets, opt, x, y, rate, adam_cfg):
        raise NotImplementedError

    # -- fit / predict ------------------------------------------------------

    def fit(self, X, y, *, true_labels=None, eval_set=None,
            epoch_callback=None):
        self._check_params()
        y_arr = np.asarray(y)
        n_classes = self.n_classes
        if n_classes is None:
            top = int(y_arr.max()) if y_arr.size else 0
            if eval_set is not None:
                top = max(top, int(np.asarray(eval_set[1]).max()))
            n_classes = top + 1
        if n_classes < 2:
            raise ConfigurationError("need at least 2 classes")
        X, y = check_features_labels(X, y_arr, n_classes)
        if X.shape[0] == 0:
            raise DataError("training set is empty")
        if true_labels is None:
            true = y.copy()
        else:
            true = check_labels(true_labels, n_classes, "true_labels")
            if true.shape[0] != y.shape[0]:
                raise ShapeError("true_labels length does not match y")
        if eval_set is not None:
            X_eval = check_matrix(eval_set[0], "eval X")
            y_eval = check_labels(eval_set[1], n_classes, "eval y")
        schedule = (KeepSchedule(self.noise_rate, self.ramp_epochs)
                    if self._uses_schedule else None)
        if isinstance(self.hidden_units, (int, np.integer)):
            hidden = [int(self.hidden_units)]
        else:
            hidden = [int(h) for h in self.hidden_units]
        widths = [X.shape[1], *hidden, n_classes]
        net_seeds, shuffle_seed = self._seed_layout()
        nets = [Mlp(widths, s) for s in net_seeds]
        opt = self._init_optimizer(nets)
        adam_kw = dict(beta1=self.adam_beta1, beta2=self.adam_beta2,
                       epsilon=self.adam_epsilon)
        shuffle_rng = np.random.default_rng(shuffle_seed)
        n = X.shape[0]
        history: list[EpochRecord] = []
        for epoch in range(1, int(self.epochs) + 1):
            lr = linear_decay_lr(self.learning_rate, epoch - 1,
                                 self.lr_decay_start, self.lr_decay_end)
            adam_cfg = AdamConfig(learning_rate=lr, **adam_kw)
            rate = keep_rate(schedule, epoch - 1) if schedule else 1.0
            perm = shuffle_rng.permutation(n)
            kept_clean = kept_total = precision_pool = 0
            loss_sum, loss_batches, seen = 0.0, 0, 0
            for b, start in enumerate(range(0, n, int(self.batch_size)), 1):
                idx = perm[start:start + int(self.batch_size)]
                xb, yb, tb = X[idx], y[idx], true[idx]
                try:
                    selections, batch_loss = self._train_batch(
                        nets, opt, xb, yb, rate, adam_cfg)
                except NumericError as err:
                    raise NumericError(
                        f"epoch {epoch}, batch {b}: {err}") from err
                for kept in selections:
                    precision_pool += kept.size
                    kept_clean += int((yb[kept] == tb[kept]).sum())
                kept_total += selections[0].size if selections else 0
                if batch_loss is not None:
                    loss_sum += batch_loss
                    loss_batches += 1
                seen += idx.size
            if eval_set is not None:
                try:
                    accuracies = evaluate(nets, X_eval, y_eval)
                except NumericError as err:
                    raise NumericError(f"epoch {epoch}, evaluation: {err}") from err
            else:
                accuracies = (math.nan,) * len(nets)
            precision = (kept_clean / precision_pool if precision_pool
                         else math.nan)
            if self._records_realized_keep:
                recorded_rate = kept_total / seen
            else:
                recorded_rate = rate
            mean_loss = loss_sum / loss_batches if loss_batches else math.nan
            record = EpochRecord(epoch=epoch, test_accuracies=accuracies,
                                 label_precision=precision,
                                 keep_rate=recorded_rate,
                                 mean_joint_loss=mean_loss, learning_rate=lr)
            history.append(record)
            if epoch_callback is not None:
                epoch_callback(record)
        self.networks_ = nets
        self.history_ = history
        self.n_features_in_ = X.shape[1]
        self.n_classes_ = n_classes
        self.classes_ = np.arange(n_classes)
        return self

    def predict_proba(self, X) -> np.ndarray:
        ensure_fitted(self)
        X = check_matrix(X, "X")
        total = self.networks_[0].predict_proba(X)
        for net in self.networks_[1:]:
            total = total + net.predict_proba(X)
        return total / len(self.networks_)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def score(self, X, y) -> float:
        ensure_fitted(self)
        y = check_labels(y, self.n_classes_, "y")
        return float(np.mean(self.predict(X) == y))

    # -- internals -----------------------------------------------------------

    def _check_params(self):
        if not isinstance(self.epochs, (int, np.integer)) or self.epochs < 0:
            raise ConfigurationError(f"epochs must be a non-negative integer, "
                                     f"got {self.epochs}")
        if not isinstance(self.batch_size, (int, np.integer)) or self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got "
                                     f"{self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be >= 0")
        if not 0 <= self.lr_decay_start < self.lr_decay_end:
            raise ConfigurationError(
                f"need 0 <= lr_decay_start < lr_decay_end, got "
                f"{self.lr_decay_start}..{self.lr_decay_end}")
        if self.network_seeds is not None and \
                len(self.network_seeds) != self._n_networks:
            raise ConfigurationError(
                f"{type(self).__name__} needs {self._n_networks} network "
                f"seed(s), got {self.network_seeds!r}")

    def _seed_layout(self) -> tuple[list[int], int]:
        # fixed three-slot layout so single- and two-network variants with the
        # same random_state share the shuffle stream (paired comparisons)
        states = np.random.SeedSequence(int(self.random_state)).generate_state(3)
        if self.network_seeds is not None:
            net_seeds = [int(s) for s in self.network_seeds]
        else:
            net_seeds = [int(s) for s in states[:self._n_networks]]
        return net_seeds, int(states[2])


class JoCoRClassifier(_NoisyLabelClassifier):
    """Joint training of two networks with agreement co-regularization.

    Both networks share one Adam state and are updated from the same mean
    small-loss joint loss; ``contrast_weight`` blends the agreement term into
    the per-example loss.
    """

    _n_networks = 2
    _uses_schedule = True

    def __init__(self, hidden_units=256, epochs=200, batch_size=128,
                 learning_rate=0.001, lr_decay_start=80, lr_decay_end=200,
                 noise_rate=0.0, ramp_epochs=10,
                 adam_beta1=0.9, adam_beta2=0.999, adam_epsilon=1e-8,
                 n_classes=None, random_state=0, network_seeds=None,
                 contrast_weight=0.95):
        super().__init__(hidden_units=hidden_units, epochs=epochs,
                         batch_size=batch_size, learning_rate=learning_rate,
                         lr_decay_start=lr_decay_start,
                         lr_decay_end=lr_decay_end, noise_rate=noise_rate,
                         ramp_epochs=ramp_epochs, adam_beta1=adam_beta1,
                         adam_beta2=adam_beta2, adam_epsilon=adam_epsilon,
                         n_classes=n_classes, random_state=random_state,
                         network_seeds=network_seeds)
        self.contrast_weight = contrast_weight

    def _check_params(self):
        super()._check_params()
        if not 0.0 <= self.contrast_weight <= 1.0:
            raise ConfigurationError(f"contrast_weight must lie in [0, 1], "
                                     f"got {self.contrast_weight}")

    def _init_optimizer(self, nets):
        params = nets[0].parameters() + nets[1].parameters()
        names = ([f"net1.{n}" for n in nets[0].parameter_names()]
                 + [f"net2.{n}" for n in nets[1].parameter_names()])
        return params, AdamState(params), names

    def _train_batch(self, nets, opt, x, y, rate, adam_cfg):
        params, state, names = opt
        g1, g2, selection, loss = joint_training_gradients(
            nets[0], nets[1], x, y, self.contrast_weight, rate)
        adam_step(params, g1 + g2, state, adam_cfg, names)
        return [selection.kept_indices], loss


class JointOnlyClassifier(JoCoRClassifier):
    """Joint training without the agreement term (contrast weight 0)."""

    def __init__(self, hidden_units=256, epochs=200, batch_size=128,
                 learning_rate=0.001, lr_decay_start=80, lr_decay_end=200,
                 noise_rate=0.0, ramp_epochs=10,
                 adam_beta1=0.9, adam_beta2=0.999, adam_epsilon=1e-8,
                 n_classes=None, random_state=0, network_seeds=None):
        super().__init__(hidden_units=hidden_units, epochs=epochs,
                         batch_size=batch_size, learning_rate=learning_rate,
                         lr_decay_start=lr_decay_start,
                         lr_decay_end=lr_decay_end, noise_rate=noise_rate,
                         ramp_epochs=ramp_epochs, adam_beta1=adam_beta1,
                         adam_beta2=adam_beta2, adam_epsilon=adam_epsilon,
                         n_classes=n_classes, random_state=random_state,
                         network_seeds=network_seeds)
        self.contrast_weight = 0.0


class StandardPlusClassifier(_NoisyLabelClassifier):
    """One network; small-loss selection by its own cross-entropy."""

    _n_networks = 1
    _uses_schedule = True

    def _train_batch(self, nets, opt, x, y, rate, adam_cfg):
        net = nets[0]
        trace = net.forward(x)
        ce = cross_entropy(trace.probabilities, y)
        selection = select_small_loss(ce, rate)
        loss = reduce_selected(ce, selection)
        if not math.isfinite(loss):
            raise NumericError("non-finite cross-entropy loss")
        _masked_ce_step(net, trace, y, selection.kept_indices, adam_cfg)
        return [selection.kept_indices], loss


class StandardClassifier(StandardPlusClassifier):
    """One network, plain cross-entropy on the full batch (keep rate 1)."""

    _uses_schedule = False


class CoTeachingClassifier(_NoisyLabelClassifier):
    """Two networks; each trains on the small-loss picks of its peer."""

    _n_networks = 2
    _uses_schedule = True

    def _train_batch(self, nets, opt, x, y, rate, adam_cfg):
        t1 = nets[0].forward(x)
        t2 = nets[1].forward(x)
        ce1 = cross_entropy(t1.probabilities, y)
        ce2 = cross_entropy(t2.probabilities, y)
        sel1 = select_small_loss(ce1, rate)
        sel2 = select_small_loss(ce2, rate)
        loss1 = reduce_selected(ce1, sel2)  # network 1 learns from peer's picks
        loss2 = reduce_selected(ce2, sel1)
        if not (math.isfinite(loss1) and math.isfinite(loss2)):
            raise NumericError("non-finite cross-entropy loss")
        _masked_ce_step(nets[0], t1, y, sel2.kept_indices, adam_cfg)
        _masked_ce_step(nets[1], t2, y, sel1.kept_indices, adam_cfg)
        return [sel1.kept_indices, sel2.kept_indices], (loss1 + loss2) / 2.0


class DecouplingClassifier(_NoisyLabelClassifier):
    """Two networks updated only where their argmax predictions disagree."""

    _n_networks = 2
    _uses_schedule = False
    _records_realized_keep = True

    def _train_batch(self, nets, opt, x, y, rate, adam_cfg):
        t1 = nets[0].forward(x)
        t2 = nets[1].forward(x)
        pred1 = np.argmax(t1.probabilities, axis=1)
        pred2 = np.argmax(t2.probabilities, axis=1)
        disagree = np.flatnonzero(pred1 != pred2)
        if disagree.size == 0:
            return [], None  # nothing to update on this batch
        selection = Selection(kept_indices=disagree.astype(np.int64),
                              keep_rate=disagree.size / x.shape[0])
        ce1 = cross_entropy(t1.probabilities, y)
        ce2 = cross_entropy(t2.probabilities, y)
        loss1 = reduce_selected(ce1, selection)
        loss2 = reduce_selected(ce2, selection)
        if not (math.isfinite(loss1) and math.isfinite(loss2)):
            raise NumericError("non-finite cross-entropy loss")
        _masked_ce_step(nets[0], t1, y, selection.kept_indices, adam_cfg)
        _masked_ce_step(nets[1], t2, y, selection.kept_indices, adam_cfg)
        return [selection.kept_indices], (loss1 + loss2) / 2.0


VARIANT_CLASSES = {
    "jocor": JoCoRClassifier,
    "joint_only": JointOnlyClassifier,
    "standard": StandardClassifier,
    "standard_plus": StandardPlusClassifier,
    "co_teaching": CoTeachingClassifier,
    "decoupling": DecouplingClassifier,
}
