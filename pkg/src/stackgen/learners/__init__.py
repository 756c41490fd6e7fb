"""Probability-emitting base learners: decision tree, naive Bayes, nearest neighbors."""
from __future__ import annotations

from .base import Classifier, Learner, PROB_SUM_ATOL, check_prob_vector, classes_batch, predict_class
from .bayes import NaiveBayesLearner, NaiveBayesModel, nb_class_probs, train_nb
from .neighbors import KnnLearner, KnnModel, knn_class_probs, mvdm_distance, train_knn
from .tree import TreeLearner, TreeModel, TreeParams, leaf_class_probs, train_tree, tree_class_probs

DEFAULT_LEVEL0_KNN_P = 3
DEFAULT_LEVEL1_KNN_P = 21


def default_level0() -> tuple[TreeLearner, NaiveBayesLearner, KnnLearner]:
    """The stock trio of base learners used by the selection and stacking methods."""
    return (TreeLearner(), NaiveBayesLearner(), KnnLearner(p=DEFAULT_LEVEL0_KNN_P))


__all__ = [
    "Classifier",
    "Learner",
    "PROB_SUM_ATOL",
    "check_prob_vector",
    "classes_batch",
    "predict_class",
    "NaiveBayesLearner",
    "NaiveBayesModel",
    "nb_class_probs",
    "train_nb",
    "KnnLearner",
    "KnnModel",
    "knn_class_probs",
    "mvdm_distance",
    "train_knn",
    "TreeLearner",
    "TreeModel",
    "TreeParams",
    "leaf_class_probs",
    "train_tree",
    "tree_class_probs",
    "DEFAULT_LEVEL0_KNN_P",
    "DEFAULT_LEVEL1_KNN_P",
    "default_level0",
]
