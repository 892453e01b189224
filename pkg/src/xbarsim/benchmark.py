"""The 4-class letter benchmark and fidelity/robustness evaluation.

40 training patterns (10 stylized variants each of A, T, V, X on a 4x4
binary grid) ship as frozen data; the 640-pattern test set is every
single-pixel flip of every training pattern, inheriting the parent label.
The classes are deliberately not linearly separable: the set embeds a
4-pattern XOR-style quad between V and X (two V members and two X members
whose pixel sums coincide), which also makes several V/X test patterns
nearly indistinguishable.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigurationError
from .rng import stream

CLASS_NAMES = ("A", "T", "V", "X")


@dataclass(frozen=True)
class Pattern:
    pixels: tuple       # 16 binary values, 4x4 row-major
    label: str

    def __post_init__(self):
        if len(self.pixels) != 16 or any(p not in (0, 1) for p in self.pixels):
            raise ConfigurationError("pattern needs 16 binary pixels")
        if self.label not in CLASS_NAMES:
            raise ConfigurationError(f"unknown class {self.label!r}")

    @property
    def label_index(self) -> int:
        return CLASS_NAMES.index(self.label)

    def flipped(self, pixel: int) -> "Pattern":
        px = list(self.pixels)
        px[pixel] = 1 - px[pixel]
        return Pattern(tuple(px), self.label)

    def to_line(self) -> str:
        return "".join(str(p) for p in self.pixels) + " " + self.label


def parse_pattern_line(line: str) -> Pattern:
    try:
        bits, label = line.split()
    except ValueError as exc:
        raise ConfigurationError(f"bad pattern line {line!r}") from exc
    if len(bits) != 16 or set(bits) - {"0", "1"}:
        raise ConfigurationError(f"bad pixel field in {line!r}")
    return Pattern(tuple(int(b) for b in bits), label)


def load_patterns(path) -> list:
    with open(path) as fh:
        return [parse_pattern_line(line) for line in fh if line.strip()]


def save_patterns(patterns, path):
    with open(path, "w") as fh:
        for p in patterns:
            fh.write(p.to_line() + "\n")


def canonical_training_set() -> list:
    """The repository's frozen 40-pattern training set (10 per class)."""
    text = importlib.resources.files("xbarsim.data").joinpath(
        "training_patterns.txt").read_text()
    patterns = [parse_pattern_line(line) for line in text.splitlines() if line.strip()]
    if len(patterns) != 40:
        raise ConfigurationError("canonical set must hold exactly 40 patterns")
    return patterns


def generate_test_set(training) -> list:
    """All 640 single-pixel-flip variants, labels inherited from parents."""
    return [parent.flipped(i) for parent in training for i in range(16)]


def pixel_matrix(patterns) -> np.ndarray:
    return np.array([p.pixels for p in patterns], dtype=float)


def label_vector(patterns) -> np.ndarray:
    return np.array([p.label_index for p in patterns], dtype=int)


def evaluate_fidelity(model, patterns) -> tuple:
    """Fraction of patterns whose predicted class matches the label.

    ``model`` maps a Pattern to a class index.  Returns (fidelity,
    4x4 confusion matrix indexed [true, predicted]).
    """
    confusion = np.zeros((len(CLASS_NAMES), len(CLASS_NAMES)), dtype=int)
    correct = 0
    for p in patterns:
        predicted = int(model(p))
        confusion[p.label_index, predicted] += 1
        correct += predicted == p.label_index
    return correct / len(patterns), confusion


def linear_separability_check(patterns) -> bool:
    """True iff a single-layer argmax model can reach 100% train fidelity.

    Decided by LP feasibility of the pairwise class-margin constraints
    (w_true - w_other) . x >= 1 over all patterns and wrong classes.
    """
    if not patterns:
        raise ConfigurationError("empty pattern set")
    X = pixel_matrix(patterns)
    y = label_vector(patterns)
    n_cls = len(CLASS_NAMES)
    aug = np.hstack([X, np.ones((len(X), 1))])
    d = aug.shape[1]
    rows = []
    for i in range(len(X)):
        for k in range(n_cls):
            if k == y[i]:
                continue
            row = np.zeros(n_cls * d)
            row[y[i] * d:(y[i] + 1) * d] = -aug[i]
            row[k * d:(k + 1) * d] = aug[i]
            rows.append(row)
    res = linprog(np.zeros(n_cls * d), A_ub=np.array(rows),
                  b_ub=-np.ones(len(rows)), bounds=[(None, None)] * (n_cls * d),
                  method="highs")
    return res.status == 0


@dataclass
class SweepStats:
    """Fidelity statistics per noise level: median, quartiles, extremes."""

    sigmas: list = field(default_factory=list)
    median: list = field(default_factory=list)
    p25: list = field(default_factory=list)
    p75: list = field(default_factory=list)
    minimum: list = field(default_factory=list)
    maximum: list = field(default_factory=list)

    def append(self, sigma, fidelities):
        f = np.asarray(fidelities, dtype=float)
        self.sigmas.append(float(sigma))
        self.median.append(float(np.median(f)))
        self.p25.append(float(np.percentile(f, 25)))
        self.p75.append(float(np.percentile(f, 75)))
        self.minimum.append(float(f.min()))
        self.maximum.append(float(f.max()))

    def rows(self):
        return list(zip(self.sigmas, self.median, self.p25, self.p75,
                        self.minimum, self.maximum))

    def save_csv(self, path):
        with open(path, "w") as fh:
            fh.write("sigma,median,p25,p75,min,max\n")
            for row in self.rows():
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")


def precision_sweep(weights, noise_sigmas, runs: int = 100, seed: int = 0,
                    patterns=None, test_patterns=None) -> dict:
    """Monte Carlo of classification fidelity vs weight-import noise.

    Every weight is perturbed by N(0, sigma * w_scale) where w_scale is the
    largest trained weight magnitude, then clipped back to the representable
    range.  Common random numbers across sigma levels: run r uses the same
    normalized draw at every noise level, so medians trend monotonically.
    Returns {"train": SweepStats, "test": SweepStats}.
    """
    from .training import forward_batch, WEIGHT_CLIP        # cycle-free import

    if runs < 1:
        raise ConfigurationError("need at least one run")
    w1, w2 = weights
    scale = max(np.abs(w1).max(), np.abs(w2).max())
    if patterns is None:
        patterns = canonical_training_set()
    if test_patterns is None:
        test_patterns = generate_test_set(patterns)
    Xtr, ytr = pixel_matrix(patterns), label_vector(patterns)
    Xte, yte = pixel_matrix(test_patterns), label_vector(test_patterns)
    draws = []
    for r in range(runs):
        gen = stream(seed, "sweep", r)
        draws.append((gen.normal(size=w1.shape), gen.normal(size=w2.shape)))
    stats = {"train": SweepStats(), "test": SweepStats()}
    for sigma in noise_sigmas:
        train_f, test_f = [], []
        for z1, z2 in draws:
            n1 = np.clip(w1 + sigma * scale * z1, -WEIGHT_CLIP, WEIGHT_CLIP)
            n2 = np.clip(w2 + sigma * scale * z2, -WEIGHT_CLIP, WEIGHT_CLIP)
            train_f.append(float((forward_batch(n1, n2, Xtr).argmax(1) == ytr).mean()))
            test_f.append(float((forward_batch(n1, n2, Xte).argmax(1) == yte).mean()))
        stats["train"].append(sigma, train_f)
        stats["test"].append(sigma, test_f)
    return stats
