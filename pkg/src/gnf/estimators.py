"""scikit-learn compatible wrappers.

These estimators expose the fuzzy system, the backprop-trained network and
the GA-refined network through ``fit``/``predict`` so they compose with
``sklearn.pipeline``, ``clone`` and model-selection utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .fuzzy import FuzzySystem, builtin_tipper, infer
from .genetic import GAConfig, evolve
from .network import Dataset, TrainConfig, forward, init_network, train_backprop
from .pipeline import refine

__all__ = ["FuzzyInferenceRegressor", "NeuroFuzzyRegressor", "GNFRegressor"]


class FuzzyInferenceRegressor(RegressorMixin, BaseEstimator):
    """Predict with a fixed Mamdani system; ``fit`` only checks the input width.

    Columns of ``X`` are matched to the system's input variables in
    declaration order.

    Parameters
    ----------
    system : FuzzySystem, default=None
        The rule base. ``None`` uses the built-in tipper.
    resolution : int, default=None
        Output-universe grid size; ``None`` keeps the system's own setting.
    """

    def __init__(self, system: FuzzySystem | None = None, resolution: int | None = None):
        self.system = system
        self.resolution = resolution

    def fit(self, X, y=None):
        self.system_ = self.system if self.system is not None else builtin_tipper()
        X = check_array(X)
        if X.shape[1] != len(self.system_.inputs):
            raise ValueError(f"X has {X.shape[1]} columns, system has {len(self.system_.inputs)} inputs")
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "system_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        names = self.system_.input_names
        return np.array([infer(self.system_, dict(zip(names, row.tolist())), self.resolution)[0] for row in X])


class NeuroFuzzyRegressor(RegressorMixin, BaseEstimator):
    """Feedforward network trained by backpropagation.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int, default=(50,)
    hidden_activation : str, default="tan_sigmoid"
    output_activation : str, default="linear"
    solver : {"lm", "gd"}, default="lm"
        Levenberg-Marquardt or plain full-batch gradient descent.
    learning_rate : float, default=0.01
        Step size for ``solver="gd"``.
    max_epochs : int, default=5000
    tol : float, default=1e-3
        Stop once the training MSE reaches this value.
    input_range : (array-like, array-like), default=None
        Per-feature ``(lo, hi)`` mapped onto ``[-1, 1]``. ``None`` uses the
        training data's min and max.
    random_state : int, default=0
        Seed for weight initialisation.

    Attributes
    ----------
    network_ : Network
    train_trace_ : TrainTrace
    """

    def __init__(
        self,
        hidden_layer_sizes=(50,),
        hidden_activation="tan_sigmoid",
        output_activation="linear",
        solver="lm",
        learning_rate=0.01,
        max_epochs=5000,
        tol=1e-3,
        input_range=None,
        random_state=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.solver = solver
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.tol = tol
        self.input_range = input_range
        self.random_state = random_state

    def _dataset(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        self._y_1d = y.ndim == 1
        return Dataset(X, y)

    def _train(self, data: Dataset):
        if self.input_range is None:
            lo, hi = data.X.min(axis=0), data.X.max(axis=0)
            hi = np.where(hi > lo, hi, lo + 1.0)
        else:
            lo, hi = self.input_range
        sizes = [data.input_dim, *self.hidden_layer_sizes, data.target_dim]
        acts = [self.hidden_activation] * len(self.hidden_layer_sizes) + [self.output_activation]
        net = init_network(sizes, acts, self.random_state, input_range=(lo, hi))
        config = TrainConfig(
            method=self.solver,
            learning_rate=self.learning_rate,
            max_epochs=self.max_epochs,
            tolerance=self.tol,
            rng_seed=self.random_state,
        )
        return train_backprop(net, data, config)

    def fit(self, X, y):
        data = self._dataset(X, y)
        self.network_, self.train_trace_ = self._train(data)
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        y = forward(self.network_, X)
        return y[:, 0] if self._y_1d else y


class GNFRegressor(NeuroFuzzyRegressor):
    """Backprop-trained network refined by the genetic optimizer.

    Takes every :class:`NeuroFuzzyRegressor` parameter plus the GA settings
    below. The GA population is seeded with the backprop result, so the
    refined network's summed absolute training error never exceeds the
    backprop network's.

    Parameters
    ----------
    population_size : int, default=50
    elite_count : int, default=2
    crossover_fraction : float, default=0.8
    mutation_sigma : float, default=0.1
    sigma_decay : float, default=0.99
    max_generations : int, default=2000
    fitness_tol : float, default=1e-5
    seed_with_backprop : bool, default=True
        When False the GA starts from a random population instead.

    Attributes
    ----------
    nf_network_ : Network
        The network before GA refinement.
    network_ : Network
    train_trace_ : TrainTrace
    ga_trace_ : GATrace
    """

    def __init__(
        self,
        hidden_layer_sizes=(50,),
        hidden_activation="tan_sigmoid",
        output_activation="linear",
        solver="lm",
        learning_rate=0.01,
        max_epochs=5000,
        tol=1e-3,
        input_range=None,
        random_state=0,
        population_size=50,
        elite_count=2,
        crossover_fraction=0.8,
        mutation_sigma=0.1,
        sigma_decay=0.99,
        max_generations=2000,
        fitness_tol=1e-5,
        seed_with_backprop=True,
    ):
        super().__init__(
            hidden_layer_sizes=hidden_layer_sizes,
            hidden_activation=hidden_activation,
            output_activation=output_activation,
            solver=solver,
            learning_rate=learning_rate,
            max_epochs=max_epochs,
            tol=tol,
            input_range=input_range,
            random_state=random_state,
        )
        self.population_size = population_size
        self.elite_count = elite_count
        self.crossover_fraction = crossover_fraction
        self.mutation_sigma = mutation_sigma
        self.sigma_decay = sigma_decay
        self.max_generations = max_generations
        self.fitness_tol = fitness_tol
        self.seed_with_backprop = seed_with_backprop

    def fit(self, X, y):
        data = self._dataset(X, y)
        self.nf_network_, self.train_trace_ = self._train(data)
        ga = GAConfig(
            population_size=self.population_size,
            elite_count=self.elite_count,
            crossover_fraction=self.crossover_fraction,
            mutation_sigma=self.mutation_sigma,
            sigma_decay=self.sigma_decay,
            max_generations=self.max_generations,
            fitness_tolerance=self.fitness_tol,
            rng_seed=self.random_state,
        )
        if self.seed_with_backprop:
            self.network_, self.ga_trace_ = refine(self.nf_network_, data, ga)
        else:
            self.network_, self.ga_trace_ = evolve(self.nf_network_, data, ga)
        return self
