"""Binary classification metrics with CWS as the positive class."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ContractError

POSITIVE_LABEL = "CWS"
NEGATIVE_LABEL = "CWNS"


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def sensitivity(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def specificity(self) -> float:
        d = self.tn + self.fp
        return self.tn / d if d else 0.0

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def f1(self) -> float:
        d = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / d if d else 0.0

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "sensitivity": self.sensitivity, "specificity": self.specificity,
            "accuracy": self.accuracy, "f1": self.f1,
        }

    @classmethod
    def from_predictions(cls, y_true: list[int], y_pred: list[int]) -> "Metrics":
        if not y_true:
            raise ContractError("metrics need at least one example")
        if len(y_true) != len(y_pred):
            raise ContractError("prediction/label counts disagree")
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == 1 and p == 1)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t == 0 and p == 1)
        tn = sum(1 for t, p in zip(y_true, y_pred) if t == 0 and p == 0)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == 1 and p == 0)
        return cls(tp=tp, fp=fp, tn=tn, fn=fn)


def label_to_index(label: str) -> int:
    return 1 if label == POSITIVE_LABEL else 0
