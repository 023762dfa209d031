"""Classic classifiers fed with learned features: forest, k-NN, linear SVM, k-FP."""

from .forest import (
    DecisionForest,
    DecisionTree,
    gini,
    gini_importance,
    load_forest,
    save_forest,
    train_forest,
)
from .neighbors import Vote, hamming, kfp_classify, knn_classify, knn_predict
from .svm import LinearSVM, Standardizer, train_linear_svm
