"""Person-disjoint fold construction.

Subjects are shuffled once per (seed) within each class; fold k then
rotates through the shuffled order, taking 2 test and 4 validation
subjects per class and leaving the rest for training.  The rotation
guarantees that over 10 folds every subject of a 10-per-class cohort
serves in the test set (twice), while each individual fold remains a
random person-disjoint partition.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError
from ..rng import derive

N_TEST_PER_CLASS = 2
N_VAL_PER_CLASS = 4


@dataclass(frozen=True)
class CohortSplit:
    fold: int
    seed: int
    test: tuple[str, ...]
    validation: tuple[str, ...]
    train: tuple[str, ...]

    def __post_init__(self):
        groups = (set(self.test), set(self.validation), set(self.train))
        total = len(self.test) + len(self.validation) + len(self.train)
        if len(groups[0] | groups[1] | groups[2]) != total:
            raise ConfigError("split subsets overlap")

    def subset_of(self, subject_id: str) -> str:
        if subject_id in self.test:
            return "test"
        if subject_id in self.validation:
            return "validation"
        if subject_id in self.train:
            return "train"
        raise KeyError(subject_id)


def person_disjoint_split(subject_labels: dict[str, str], fold: int, seed: int) -> CohortSplit:
    """Deterministic person-disjoint partition for one fold.

    subject_labels maps subject id -> class label.  Requires at least
    7 subjects per class so the 2+4 holdouts leave a nonempty training
    set.
    """
    by_class: dict[str, list[str]] = {}
    for sid in sorted(subject_labels):
        by_class.setdefault(subject_labels[sid], []).append(sid)
    need = N_TEST_PER_CLASS + N_VAL_PER_CLASS + 1
    for label, members in sorted(by_class.items()):
        if len(members) < need:
            raise ConfigError(
                f"class {label} has {len(members)} subjects; "
                f"at least {need} needed for a person-disjoint split")

    test: list[str] = []
    val: list[str] = []
    train: list[str] = []
    for label, members in sorted(by_class.items()):
        order = list(members)
        derive(seed, "split", label).shuffle(order)
        n = len(order)
        start = (fold * N_TEST_PER_CLASS) % n
        picks = [order[(start + i) % n] for i in range(N_TEST_PER_CLASS + N_VAL_PER_CLASS)]
        test.extend(picks[:N_TEST_PER_CLASS])
        val.extend(picks[N_TEST_PER_CLASS:])
        chosen = set(picks)
        train.extend(s for s in order if s not in chosen)
    return CohortSplit(fold=fold, seed=seed, test=tuple(test),
                       validation=tuple(val), train=tuple(train))
