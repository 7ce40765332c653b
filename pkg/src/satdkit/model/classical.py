"""Classical classifiers behind one fit/predict contract, on bag-of-words.

The multinomial naive Bayes model is implemented here (with an exact
rational-arithmetic posterior for auditability); the other classifiers
delegate to scikit-learn estimators pinned to documented settings.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from ..preprocess.vocab import RESERVED, Vocabulary

CLASSICAL_KINDS = ("nbm", "lr", "knn", "svm", "rf")


def featurize_bow(tokens, vocab: Vocabulary) -> sp.csr_matrix:
    """Sparse token-count row; unknown tokens dropped, order irrelevant.

    Column j corresponds to vocabulary index j + 2 (the reserved pad/unknown
    slots have no column, so the feature width is vocab.size - 2).
    """
    return featurize_corpus([tokens], vocab)


def featurize_corpus(token_lists, vocab: Vocabulary) -> sp.csr_matrix:
    width = vocab.size - RESERVED
    if width == 0:
        raise ValueError("vocabulary has no content tokens to featurize")
    data, indices, indptr = [], [], [0]
    for tokens in token_lists:
        counts: dict[int, int] = {}
        for t in tokens:
            idx = vocab.token_to_index.get(t)
            if idx is not None:
                col = idx - RESERVED
                counts[col] = counts.get(col, 0) + 1
        for col in sorted(counts):
            indices.append(col)
            data.append(counts[col])
        indptr.append(len(indices))
    return sp.csr_matrix((np.array(data, dtype=np.float64),
                          np.array(indices, dtype=np.int32),
                          np.array(indptr, dtype=np.int32)),
                         shape=(len(indptr) - 1, width))


class MultinomialNaiveBayes:
    """Multinomial naive Bayes with add-one smoothing over the feature width."""

    def __init__(self):
        self.class_counts: np.ndarray | None = None
        self.token_counts: np.ndarray | None = None

    def fit(self, features: sp.csr_matrix, labels: np.ndarray) -> "MultinomialNaiveBayes":
        labels = np.asarray(labels, dtype=bool)
        self.class_counts = np.array([int(np.sum(~labels)), int(np.sum(labels))])
        self.token_counts = np.vstack([
            np.asarray(features[~labels].sum(axis=0)).ravel(),
            np.asarray(features[labels].sum(axis=0)).ravel(),
        ]).astype(np.int64)
        return self

    def _check_fitted(self):
        if self.class_counts is None:
            raise RuntimeError("model is not fitted")

    def log_scores(self, features: sp.csr_matrix) -> np.ndarray:
        self._check_fitted()
        width = self.token_counts.shape[1]
        prior = np.log(self.class_counts / self.class_counts.sum())
        log_prob = np.log((self.token_counts + 1)
                          / (self.token_counts.sum(axis=1, keepdims=True) + width))
        return features @ log_prob.T + prior

    def predict(self, features: sp.csr_matrix) -> np.ndarray:
        scores = self.log_scores(features)
        return scores[:, 1] > scores[:, 0]

    def predict_proba_exact(self, features: sp.csr_matrix) -> list[tuple[Fraction, Fraction]]:
        """Posteriors as exact rationals — integer counts make this possible.

        Converting each Fraction with float() yields the correctly rounded
        double, so results are reproducible to the last bit.
        """
        self._check_fitted()
        width = self.token_counts.shape[1]
        total = int(self.class_counts.sum())
        rows = []
        dense = features.toarray().astype(np.int64)
        for x in dense:
            joint = []
            for c in (0, 1):
                value = Fraction(int(self.class_counts[c]), total)
                denom = int(self.token_counts[c].sum()) + width
                for col in np.nonzero(x)[0]:
                    likelihood = Fraction(int(self.token_counts[c, col]) + 1, denom)
                    value *= likelihood ** int(x[col])
                joint.append(value)
            evidence = joint[0] + joint[1]
            rows.append((joint[0] / evidence, joint[1] / evidence))
        return rows


@dataclass
class ClassicalModel:
    kind: str
    backend: object

    def predict(self, features: sp.csr_matrix) -> np.ndarray:
        if self.kind == "nbm":
            return self.backend.predict(features)
        return np.asarray(self.backend.predict(features), dtype=bool)


def classical_fit(kind: str, features: sp.csr_matrix, labels, seed: int = 0) -> ClassicalModel:
    """Fit one of the five classical classifiers on bag-of-words counts.

    Pinned settings: nbm = add-one-smoothed multinomial Bayes; lr = L2
    logistic regression; knn = 5 nearest neighbors by cosine distance;
    svm = linear hinge-loss SGD; rf = 100 bagged trees of depth <= 32.
    """
    if kind not in CLASSICAL_KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}; expected one of {CLASSICAL_KINDS}")
    if features.shape[1] == 0:
        raise ValueError("empty vocabulary: no features to fit on")
    labels = np.asarray(labels, dtype=bool)
    if kind == "nbm":
        backend = MultinomialNaiveBayes().fit(features, labels)
        return ClassicalModel(kind=kind, backend=backend)
    if kind == "lr":
        from sklearn.linear_model import LogisticRegression

        backend = LogisticRegression(penalty="l2", max_iter=1000)
    elif kind == "knn":
        from sklearn.neighbors import KNeighborsClassifier

        backend = KNeighborsClassifier(n_neighbors=5, metric="cosine")
    elif kind == "svm":
        from sklearn.linear_model import SGDClassifier

        backend = SGDClassifier(loss="hinge", random_state=seed)
    else:
        from sklearn.ensemble import RandomForestClassifier

        backend = RandomForestClassifier(n_estimators=100, max_depth=32, random_state=seed)
    backend.fit(features, labels)
    return ClassicalModel(kind=kind, backend=backend)


def classical_predict(model: ClassicalModel, features: sp.csr_matrix) -> np.ndarray:
    return model.predict(features)
