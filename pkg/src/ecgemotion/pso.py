"""Particle swarm search for the SVM's (C, gamma), in log10 space.

Velocity and position updates follow the classic formulation

    v <- inertia * v + c1 * r1 * (p_best - x) + c2 * r2 * (g_best - x)
    x <- x + v

with r1, r2 drawn uniformly from [0, 1) per particle per step. Inertia
defaults to 1.0, which reproduces the plain update verbatim; velocities
are clamped per axis, and positions are clamped to the search bounds with
the velocity zeroed on any clamped axis.

Fitness is the mean k-fold cross-validation accuracy of a one-vs-one SVM
trained at the particle's (C, gamma) on the training split only. The fold
geometry and all kernel-independent distance matrices are precomputed once,
so each fitness call only exponentiates and runs the dual solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import svm
from .types import Dataset, NUM_CLASSES, ParameterError
from .utils import derive_seed

DEFAULT_LOG10_C_BOUNDS = (-1.0, 3.0)
DEFAULT_LOG10_GAMMA_BOUNDS = (-4.0, 1.0)


@dataclass
class PsoConfig:
    swarm_size: int = 20
    iterations: int = 30
    c1: float = 2.0
    c2: float = 2.0
    inertia: float = 1.0
    log10_c_bounds: tuple[float, float] = DEFAULT_LOG10_C_BOUNDS
    log10_gamma_bounds: tuple[float, float] = DEFAULT_LOG10_GAMMA_BOUNDS
    velocity_clamp: float = 0.5  # fraction of each axis range
    seed: int = 0
    cv_folds: int = 5

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ParameterError("swarm_size must be >= 1")
        if self.iterations < 0:
            raise ParameterError("iterations must be >= 0")
        if self.c1 < 0 or self.c2 < 0:
            raise ParameterError("learning factors must be >= 0")
        for lo, hi in (self.log10_c_bounds, self.log10_gamma_bounds):
            if not lo < hi:
                raise ParameterError("search bounds must be non-degenerate")
        if self.cv_folds < 2:
            raise ParameterError("cv_folds must be >= 2")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.log10_c_bounds[0], self.log10_gamma_bounds[0]])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.log10_c_bounds[1], self.log10_gamma_bounds[1]])

    @property
    def velocity_max(self) -> np.ndarray:
        return self.velocity_clamp * (self.upper - self.lower)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_fitness: float


@dataclass
class PsoResult:
    c: float
    gamma: float
    fitness: float
    history: list[float] = field(default_factory=list)
    trace: list[tuple] = field(default_factory=list)


def step(swarm: list[Particle], global_best: np.ndarray, config: PsoConfig, rng) -> list[Particle]:
    """Advance every particle one velocity/position update; fitness untouched."""
    if not swarm:
        raise ParameterError("swarm must be non-empty")
    lower, upper = config.lower, config.upper
    vmax = config.velocity_max
    moved = []
    for particle in swarm:
        r1 = rng.random()
        r2 = rng.random()
        velocity = (
            config.inertia * particle.velocity
            + config.c1 * r1 * (particle.best_position - particle.position)
            + config.c2 * r2 * (global_best - particle.position)
        )
        velocity = np.clip(velocity, -vmax, vmax)
        position = particle.position + velocity
        below = position < lower
        above = position > upper
        position = np.clip(position, lower, upper)
        velocity = np.where(below | above, 0.0, velocity)
        moved.append(
            Particle(position, velocity, particle.best_position.copy(), particle.best_fitness)
        )
    return moved


class CvSvmFitness:
    """Mean k-fold CV accuracy of the one-vs-one SVM at (C, gamma).

    Folds are stratified by class and fixed at construction; squared-distance
    matrices for every (fold, pair) subproblem are precomputed because they do
    not depend on (C, gamma).
    """

    def __init__(self, x, codes, folds: int, seed: int, tolerance: float = 1e-3):
        x = np.asarray(x, dtype=np.float64)
        codes = np.asarray(codes, dtype=np.int64)
        counts = np.bincount(codes, minlength=NUM_CLASSES)
        short = [c for c in range(NUM_CLASSES) if counts[c] < folds]
        if short:
            raise ParameterError(
                f"classes {short} have fewer samples than cv_folds={folds}"
            )
        present = list(range(NUM_CLASSES))
        self.tolerance = tolerance
        self.seed = seed

        rng = np.random.default_rng(derive_seed(seed, "cv-folds"))
        fold_of = np.empty(len(codes), dtype=np.int64)
        for c in present:
            idx = np.flatnonzero(codes == c)
            idx = idx[rng.permutation(len(idx))]
            fold_of[idx] = np.arange(len(idx)) % folds

        self.folds = []
        for fold in range(folds):
            val = np.flatnonzero(fold_of == fold)
            fit = np.flatnonzero(fold_of != fold)
            pairs = []
            for a in range(NUM_CLASSES):
                for b in range(a + 1, NUM_CLASSES):
                    rows = fit[(codes[fit] == a) | (codes[fit] == b)]
                    if len(rows) == 0:
                        continue
                    y_pair = np.where(codes[rows] == a, 1.0, -1.0)
                    d2_fit = svm.pairwise_sq_dists(x[rows], x[rows])
                    d2_val = svm.pairwise_sq_dists(x[val], x[rows])
                    pairs.append((a, b, y_pair, d2_fit, d2_val))
            self.folds.append((codes[val], pairs))

    def __call__(self, position: np.ndarray) -> float:
        c = 10.0 ** float(position[0])
        gamma = 10.0 ** float(position[1])
        accuracies = []
        for fold_index, (val_codes, pairs) in enumerate(self.folds):
            votes = np.zeros((len(val_codes), NUM_CLASSES), dtype=np.int64)
            for a, b, y_pair, d2_fit, d2_val in pairs:
                kmat = np.exp(-gamma * d2_fit)
                rng = np.random.default_rng(derive_seed(self.seed, "smo", fold_index, a, b))
                alpha, bias = svm.solve_dual(
                    kmat, y_pair, c, self.tolerance, 10 * len(y_pair), rng
                )
                decisions = np.exp(-gamma * d2_val) @ (alpha * y_pair) + bias
                votes[:, a] += decisions >= 0
                votes[:, b] += decisions < 0
            predicted = votes.argmax(axis=1)
            accuracies.append(float(np.mean(predicted == val_codes)))
        return float(np.mean(accuracies))


def optimize(train, config: PsoConfig, fitness_fn=None) -> PsoResult:
    """Run the swarm and return the best (C, gamma) with its history and trace.

    ``fitness_fn`` replaces the cross-validation fitness when given (used by
    the benchmark suite); it receives a log10-space position and returns a
    score to maximize.
    """
    if fitness_fn is None:
        if train is None:
            raise ParameterError("either training data or a fitness function is required")
        if isinstance(train, Dataset):
            x, codes = train.train_arrays()
        else:
            x, codes = train
        fitness_fn = CvSvmFitness(x, codes, config.cv_folds, config.seed)

    rng = np.random.default_rng(derive_seed(config.seed, "swarm"))
    lower, upper = config.lower, config.upper
    swarm = []
    for _ in range(config.swarm_size):
        position = lower + rng.random(2) * (upper - lower)
        fitness = float(fitness_fn(position))
        swarm.append(Particle(position.copy(), np.zeros(2), position.copy(), fitness))

    best_index = int(np.argmax([p.best_fitness for p in swarm]))
    g_best = swarm[best_index].best_position.copy()
    g_fitness = swarm[best_index].best_fitness

    trace = [
        (0, idx, 10.0 ** p.position[0], 10.0 ** p.position[1], p.best_fitness, g_fitness)
        for idx, p in enumerate(swarm)
    ]
    history = [g_fitness]

    for iteration in range(1, config.iterations + 1):
        swarm = step(swarm, g_best, config, rng)
        for idx, particle in enumerate(swarm):
            fitness = float(fitness_fn(particle.position))
            if fitness > particle.best_fitness:
                particle.best_fitness = fitness
                particle.best_position = particle.position.copy()
            trace.append(
                (
                    iteration,
                    idx,
                    10.0 ** particle.position[0],
                    10.0 ** particle.position[1],
                    fitness,
                    g_fitness,
                )
            )
        best_index = int(np.argmax([p.best_fitness for p in swarm]))
        if swarm[best_index].best_fitness > g_fitness:
            g_fitness = swarm[best_index].best_fitness
            g_best = swarm[best_index].best_position.copy()
        history.append(g_fitness)
        # retrofit this iteration's trace rows with the post-reduction best
        start = len(trace) - len(swarm)
        trace[start:] = [row[:5] + (g_fitness,) for row in trace[start:]]

    return PsoResult(
        c=10.0 ** g_best[0],
        gamma=10.0 ** g_best[1],
        fitness=g_fitness,
        history=history,
        trace=trace,
    )
