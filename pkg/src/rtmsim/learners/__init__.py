"""Seven binary classifiers behind ``fit``/``predict``."""

from .base import (ALGORITHMS, DEFAULTS, LearnerSpec, Model, Scaler, dump_model, fit, load_model,
                   predict)
from .linear import (fit_logistic_regression, fit_svm, logistic_loss, loss_gradient,
                     predict_logistic_regression, predict_svm, svm_objective)
from .simple import fit_knn, fit_naive_bayes, predict_knn, predict_naive_bayes
from .tree import (fit_decision_tree, fit_gradient_boosting, fit_random_forest,
                   predict_decision_tree, predict_gradient_boosting, predict_random_forest)

REGISTRY = {
    "knn": (fit_knn, predict_knn),
    "naive_bayes": (fit_naive_bayes, predict_naive_bayes),
    "decision_tree": (fit_decision_tree, predict_decision_tree),
    "random_forest": (fit_random_forest, predict_random_forest),
    "logistic_regression": (fit_logistic_regression, predict_logistic_regression),
    "gradient_boosting": (fit_gradient_boosting, predict_gradient_boosting),
    "svm": (fit_svm, predict_svm),
}

__all__ = ["ALGORITHMS", "DEFAULTS", "LearnerSpec", "Model", "Scaler", "dump_model", "fit",
           "load_model", "predict", "logistic_loss", "loss_gradient", "svm_objective", "REGISTRY"]
