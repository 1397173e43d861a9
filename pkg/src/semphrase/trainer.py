"""Batch training of the projection matrices and tuning of the log-linear weights.

The projection matrices are fit with limited-memory BFGS over the whole
corpus: two-loop recursion for the search direction and a strong-Wolfe line
search (sufficient decrease c1 = 1e-4, curvature c2 = 0.9).  Every accepted
step strictly lowers the loss, so the logged loss sequence is non-increasing.
The feature weights are tuned afterwards by deterministic coordinate ascent
on dev-set corpus BLEU, a light-weight stand-in for a full error-rate trainer.

Training is bitwise reproducible for a fixed seed and configuration: the
gradient reduction is worker-count independent and checkpoints are written
atomically (temp file, then rename).
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import bleu, model, objective
from .corpus import Vocabulary, build_vocabulary
from .model import ModelParams

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class LbfgsState:
    """Optimizer memory: displacement/gradient-difference pairs and line-search knobs."""

    m: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    gtol: float = 1e-6
    s_list: list = field(default_factory=list)
    y_list: list = field(default_factory=list)
    rho_list: list = field(default_factory=list)
    iteration: int = 0
    f: float | None = None
    g: np.ndarray | None = None
    n_evals: int = 0
    converged: bool = False
    failed: bool = False
    fail_reason: str = ""

    def store_pair(self, s: np.ndarray, y: np.ndarray) -> None:
        curvature = float(s @ y)
        if curvature <= 0.0:  # keep the inverse-Hessian estimate positive definite
            return
        self.s_list.append(s)
        self.y_list.append(y)
        self.rho_list.append(1.0 / curvature)
        if len(self.s_list) > self.m:
            self.s_list.pop(0)
            self.y_list.pop(0)
            self.rho_list.pop(0)


def _two_loop_direction(state: LbfgsState, g: np.ndarray) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(state.s_list), reversed(state.y_list), reversed(state.rho_list)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if state.y_list:
        s, y = state.s_list[-1], state.y_list[-1]
        gamma = float(s @ y) / float(y @ y)
    else:
        gamma = 1.0
    r = gamma * q
    for (s, y, rho), a in zip(
        zip(state.s_list, state.y_list, state.rho_list), reversed(alphas)
    ):
        b = rho * float(y @ r)
        r += (a - b) * s
    return -r


def _interpolate(a_lo: float, a_hi: float) -> float:
    return 0.5 * (a_lo + a_hi)


def _zoom(evaluate, f0, d0, a_lo, f_lo, g_lo, a_hi, f_hi, c1, c2, max_iter=40):
    for _ in range(max_iter):
        if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
            break
        a = _interpolate(a_lo, a_hi)
        f, g, d = evaluate(a)
        if not np.isfinite(f) or f > f0 + c1 * a * d0 or f >= f_lo:
            a_hi, f_hi = a, f
            continue
        if abs(d) <= -c2 * d0:
            return a, f, g
        if d * (a_hi - a_lo) >= 0.0:
            a_hi, f_hi = a_lo, f_lo
        a_lo, f_lo, g_lo = a, f, g
    # The interval collapsed before the curvature condition held; fall back to
    # the best point satisfying sufficient decrease, if any.
    if a_lo > 0.0 and g_lo is not None:
        return a_lo, f_lo, g_lo
    return None


def _strong_wolfe(loss_fn, x, f0, g0, p, c1, c2, max_iter=20):
    """Line search returning (alpha, f, g, evals) or None on failure."""
    d0 = float(g0 @ p)
    if d0 >= 0.0:
        return None
    evals = 0

    def evaluate(a: float):
        nonlocal evals
        evals += 1
        f, g = loss_fn(x + a * p)
        return f, g, float(g @ p)

    a_prev, f_prev, g_prev, d_prev = 0.0, f0, g0, d0
    a = 1.0
    for i in range(max_iter):
        f, g, d = evaluate(a)
        if not np.isfinite(f) or f > f0 + c1 * a * d0 or (i > 0 and f >= f_prev):
            result = _zoom(evaluate, f0, d0, a_prev, f_prev, g_prev, a, f, c1, c2)
            return None if result is None else (*result, evals)
        if abs(d) <= -c2 * d0:
            return a, f, g, evals
        if d >= 0.0:
            result = _zoom(evaluate, f0, d0, a, f, g, a_prev, f_prev, c1, c2)
            return None if result is None else (*result, evals)
        a_prev, f_prev, g_prev, d_prev = a, f, g, d
        a *= 2.0
    return None


def lbfgs_step(state: LbfgsState, x: np.ndarray, loss_fn) -> tuple[np.ndarray, LbfgsState]:
    """One quasi-Newton update of the flat parameter vector.

    ``loss_fn`` maps a vector to ``(loss, gradient)`` and must be
    deterministic.  When the gradient is already below the state's tolerance
    the step is a no-op and the state is marked converged; a failed line
    search marks the state failed and leaves the parameters at their last
    good value.
    """
    if state.f is None or state.g is None:
        state.f, state.g = loss_fn(x)
        state.n_evals += 1
    if float(np.max(np.abs(state.g))) <= state.gtol:
        state.converged = True
        return x, state
    p = _two_loop_direction(state, state.g)
    if float(state.g @ p) >= 0.0:  # stale curvature info: restart from steepest descent
        state.s_list.clear()
        state.y_list.clear()
        state.rho_list.clear()
        p = -state.g.copy()
    result = _strong_wolfe(loss_fn, x, state.f, state.g, p, state.c1, state.c2)
    if result is None:
        state.failed = True
        state.fail_reason = "line search failed to find an acceptable step"
        return x, state
    alpha, f_new, g_new, evals = result
    state.n_evals += evals
    x_new = x + alpha * p
    state.store_pair(x_new - x, g_new - state.g)
    state.f, state.g = f_new, g_new
    state.iteration += 1
    if float(np.max(np.abs(g_new))) <= state.gtol:
        state.converged = True
    return x_new, state


@dataclass
class TrainConfig:
    """Training hyperparameters and bookkeeping options."""

    max_iterations: int = 100
    tolerance: float = 1e-6  # infinity norm of the gradient
    rel_loss_tolerance: float = 1e-9  # per-iteration relative change, 3 in a row
    history: int = 10
    k1: int = 100
    k2: int = 100
    arch: str = model.ARCH_NONLINEAR
    sim_mode: str | None = None  # None picks the architecture default
    word_level: bool = False
    seed: int = 0
    lambda_feature: float = 1.0  # weight of the similarity feature during training
    weight_decay: float = 0.0
    threads: int = 1
    checkpoint_dir: str | None = None
    checkpoint_interval: int = 0  # 0 disables checkpoints
    init_model: str | None = None  # warm-start W1 from this model file
    resume: str | None = None  # checkpoint file to resume from
    timing: bool = True  # False logs 0.0 in the seconds column

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class LogRow:
    iteration: int
    loss: float
    xbleu: float
    grad_norm: float
    seconds: float


@dataclass
class TrainingLog:
    rows: list[LogRow] = field(default_factory=list)
    stop_reason: str = ""

    def add(self, iteration, loss, xbleu, grad_norm, seconds) -> None:
        self.rows.append(LogRow(iteration, loss, xbleu, grad_norm, seconds))

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iter\tloss\txbleu\tgradnorm\tseconds\n")
            for r in self.rows:
                fh.write(
                    f"{r.iteration}\t{r.loss!r}\t{r.xbleu!r}\t{r.grad_norm!r}\t{r.seconds:.6f}\n"
                )


@dataclass
class TrainResult:
    params: ModelParams
    vocab: Vocabulary
    log: TrainingLog
    state: LbfgsState


def _atomic_write(path, writer) -> None:
    tmp = f"{path}.tmp"
    writer(tmp)
    os.replace(tmp, path)


def save_checkpoint(path, params: ModelParams, state: LbfgsState, loss_window) -> None:
    """Model file with the optimizer history appended after the matrices."""
    header = {
        "format": model.MODEL_FORMAT,
        "version": model.MODEL_VERSION,
        "d": params.d,
        "k1": params.k1,
        "k2": params.k2,
        "arch": params.arch,
        "sim_mode": params.sim_mode,
        "word_level": params.word_level,
        "bleu_smoothing": bleu.SMOOTHING_TAG,
        "trainer": {
            "iteration": state.iteration,
            "history_len": len(state.s_list),
            "loss_window": [float(v) for v in loss_window],
        },
    }

    def write(tmp_path):
        with open(tmp_path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
            fh.write(np.ascontiguousarray(params.w1, dtype=np.float64).tobytes())
            if params.w2 is not None:
                fh.write(np.ascontiguousarray(params.w2, dtype=np.float64).tobytes())
            for vec in state.s_list:
                fh.write(np.ascontiguousarray(vec, dtype=np.float64).tobytes())
            for vec in state.y_list:
                fh.write(np.ascontiguousarray(vec, dtype=np.float64).tobytes())

    _atomic_write(path, write)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Read a checkpoint: parameters plus optimizer history and loss window."""
    header = model.read_model_header(path)
    if "trainer" not in header:
        raise model.ModelIOError(f"{path}: model file carries no optimizer state")
    d, k1, k2 = header["d"], header["k1"], header["k2"]
    arch = header["arch"]
    n_model = d * k1 + (k1 * k2 if arch == model.ARCH_NONLINEAR else 0)
    hist = header["trainer"]["history_len"]
    with open(path, "rb") as fh:
        fh.readline()
        payload = fh.read()
    expected = (n_model + 2 * hist * n_model) * 8
    if len(payload) != expected:
        raise model.ModelIOError(
            f"{path}: checkpoint payload is {len(payload)} bytes, header requires {expected}"
        )
    flat = np.frombuffer(payload, dtype=np.float64)
    w1 = flat[: d * k1].reshape(d, k1).copy()
    w2 = None
    offset = d * k1
    if arch == model.ARCH_NONLINEAR:
        w2 = flat[offset : offset + k1 * k2].reshape(k1, k2).copy()
        offset += k1 * k2
    params = ModelParams(w1, w2, arch, header["sim_mode"], header["word_level"])
    s_list = [flat[offset + i * n_model : offset + (i + 1) * n_model].copy() for i in range(hist)]
    offset += hist * n_model
    y_list = [flat[offset + i * n_model : offset + (i + 1) * n_model].copy() for i in range(hist)]
    trainer_state = {
        "iteration": header["trainer"]["iteration"],
        "s_list": s_list,
        "y_list": y_list,
        "loss_window": list(header["trainer"]["loss_window"]),
    }
    return params, trainer_state


def _initial_params(config: TrainConfig, vocab: Vocabulary) -> ModelParams:
    w1_init = None
    if config.init_model is not None:
        pre = model.load_model(config.init_model)
        if pre.w1.shape != (len(vocab), config.k1):
            raise ValueError(
                f"initial model W1 has shape {pre.w1.shape}, "
                f"expected {(len(vocab), config.k1)}"
            )
        w1_init = pre.w1
    return model.init_params(
        len(vocab),
        config.k1,
        config.k2,
        config.arch,
        config.sim_mode,
        config.word_level,
        config.seed,
        w1_init=w1_init,
    )


def train(samples, config: TrainConfig, lam, vocab: Vocabulary | None = None) -> TrainResult:
    """Fit the projection matrices on an N-best corpus with cached sentence BLEU.

    The similarity-feature weight is pinned to ``config.lambda_feature``
    (default 1.0) for the duration of training; the remaining weights are
    taken from ``lam`` unchanged.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("no training samples")
    if vocab is None:
        vocab = build_vocabulary(samples)
    lam = np.asarray(lam, dtype=np.float64).copy()
    lam[-1] = config.lambda_feature

    loss_window: list[float] = []
    if config.resume is not None:
        params, ck = load_checkpoint(config.resume)
        state = LbfgsState(m=config.history, gtol=config.tolerance, iteration=ck["iteration"])
        for s, y in zip(ck["s_list"], ck["y_list"]):
            state.store_pair(s, y)
        loss_window = list(ck["loss_window"])
    else:
        params = _initial_params(config, vocab)
        state = LbfgsState(m=config.history, gtol=config.tolerance)

    template = params
    x = model.pack_params(params)

    def loss_fn(vec: np.ndarray):
        p = model.unpack_params(template, vec)
        loss, grad = objective.full_gradient(samples, p, lam, vocab, threads=config.threads)
        g = grad.to_vector()
        if config.weight_decay != 0.0:
            loss = loss + 0.5 * config.weight_decay * float(vec @ vec)
            g = g + config.weight_decay * vec
        return loss, g

    log = TrainingLog()
    start = time.perf_counter()
    last_mark = start

    def elapsed() -> float:
        nonlocal last_mark
        if not config.timing:
            return 0.0
        now = time.perf_counter()
        seconds = now - last_mark
        last_mark = now
        return seconds

    state.f, state.g = loss_fn(x)
    state.n_evals += 1
    log.add(state.iteration, state.f, -state.f, float(np.max(np.abs(state.g))), elapsed())
    loss_window.append(state.f)

    def maybe_checkpoint():
        if config.checkpoint_dir and config.checkpoint_interval > 0:
            if state.iteration % config.checkpoint_interval == 0:
                os.makedirs(config.checkpoint_dir, exist_ok=True)
                path = os.path.join(config.checkpoint_dir, f"checkpoint-{state.iteration:04d}.mdl")
                save_checkpoint(
                    path, model.unpack_params(template, x), state, loss_window[-4:]
                )

    stop = ""
    if float(np.max(np.abs(state.g))) <= config.tolerance:
        stop = "gradient below tolerance at the starting point"
    steps_taken = 0
    while not stop:
        if steps_taken >= config.max_iterations:
            stop = "reached max iterations"
            break
        x, state = lbfgs_step(state, x, loss_fn)
        if state.failed:
            stop = f"halted: {state.fail_reason}"
            break
        steps_taken += 1
        log.add(state.iteration, state.f, -state.f, float(np.max(np.abs(state.g))), elapsed())
        loss_window.append(state.f)
        maybe_checkpoint()
        if state.converged:
            stop = "gradient below tolerance"
            break
        if len(loss_window) >= 4:
            recent = loss_window[-4:]
            small = all(
                abs(recent[i + 1] - recent[i]) <= config.rel_loss_tolerance * max(1.0, abs(recent[i]))
                for i in range(3)
            )
            if small:
                stop = "relative loss change below tolerance for 3 iterations"
                break

    log.stop_reason = stop
    return TrainResult(model.unpack_params(template, x), vocab, log, state)


def _selection_stats(dev_samples):
    """Cache per-candidate feature rows and BLEU statistics for fast tuning sweeps."""
    cached = []
    for sample in dev_samples:
        stats = [bleu.bleu_stats(sample.reference, e.tokens) for e in sample.candidates]
        cached.append(stats)
    return cached


def _dev_bleu(feature_rows, stats_cache, lam: np.ndarray) -> float:
    chosen = []
    for rows, stats in zip(feature_rows, stats_cache):
        idx = int(np.argmax(rows @ lam))  # ties resolve to the lowest index
        chosen.append(stats[idx])
    return bleu.corpus_bleu_from_stats(chosen)


def tune_lambda(
    dev_samples,
    params: ModelParams,
    vocab: Vocabulary,
    lam_init,
    span: float = 5.0,
    min_gain: float = 1e-6,
    max_sweeps: int = 20,
) -> np.ndarray:
    """Coordinate ascent on dev corpus BLEU of the argmax selection.

    Each coordinate is scanned over [-span, span] and the best bracket is
    refined by golden-section search; a new value is kept only when it
    improves corpus BLEU by more than ``min_gain``.  Sweeps repeat in a fixed
    coordinate order until none improves, so the result never scores below
    ``lam_init``.
    """
    dev_samples = list(dev_samples)
    if not dev_samples:
        raise ValueError("no dev samples")
    lam = np.asarray(lam_init, dtype=np.float64).copy()
    feature_rows = []
    for sample in dev_samples:
        rows = np.empty((len(sample.candidates), lam.size))
        for i, entry in enumerate(sample.candidates):
            if entry.features.size != lam.size - 1:
                raise ValueError(
                    f"candidate has {entry.features.size} baseline features, weights expect {lam.size - 1}"
                )
            rows[i, :-1] = entry.features
            rows[i, -1] = objective.candidate_feature(entry, params, vocab)
        feature_rows.append(rows)
    stats_cache = _selection_stats(dev_samples)

    def score_with(j: int, value: float) -> float:
        trial = lam.copy()
        trial[j] = value
        return _dev_bleu(feature_rows, stats_cache, trial)

    best = _dev_bleu(feature_rows, stats_cache, lam)
    for _ in range(max_sweeps):
        improved = False
        for j in range(lam.size):
            grid = np.linspace(-span, span, 201)
            values = [score_with(j, v) for v in grid]
            k = int(np.argmax(values))
            cand_value, cand_score = float(grid[k]), values[k]
            # golden-section refinement inside the winning bracket
            lo = float(grid[max(k - 1, 0)])
            hi = float(grid[min(k + 1, grid.size - 1)])
            a, b = lo, hi
            for _ in range(30):
                x1 = b - GOLDEN * (b - a)
                x2 = a + GOLDEN * (b - a)
                f1, f2 = score_with(j, x1), score_with(j, x2)
                if f1 > cand_score:
                    cand_value, cand_score = x1, f1
                if f2 > cand_score:
                    cand_value, cand_score = x2, f2
                if f1 >= f2:
                    b = x2
                else:
                    a = x1
            if cand_score > best + min_gain:
                lam[j] = cand_value
                best = cand_score
                improved = True
        if not improved:
            break
    return lam
