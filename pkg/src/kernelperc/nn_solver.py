"""Neural approximation of the minimal fixed point.

A small tanh network with a logistic output head is trained to satisfy the
fixed-point equation: the loss is the mean absolute fixed-point defect over
sample points plus a small multiple of the integral, which steers the
optimizer toward the minimal fixed point among all of them. All gradients
are derived analytically and chained through the quadrature, the Poisson
terms, and the network layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError
from .fixed_point import FixedPointResult, check_derivative_condition, _TraceWriter
from .operators import OperatorContext, infection_map, poisson_pmf, poisson_tail

__all__ = ["NeuralApproximator", "solve_nn", "default_rate_schedule"]

STREAM_NN_INIT = 0x6e6e69  # "nni"
STREAM_NN_SAMPLES = 0x6e6e73  # "nns"

DEFAULT_HIDDEN = (20, 20)
DEFAULT_GAMMA = 1e-3
DEFAULT_MAX_STEPS = 50_000


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class NeuralApproximator:
    """Fully-connected scalar network: tanh hidden layers, logistic output.

    The logistic head keeps every output inside (0, 1), so grid samples of
    the network are always valid infection profiles.
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    penalty_gamma: float = DEFAULT_GAMMA

    @classmethod
    def create(
        cls,
        hidden: Sequence[int] = DEFAULT_HIDDEN,
        penalty_gamma: float = DEFAULT_GAMMA,
        seed: int = 0,
        output_bias: float = 2.0,
    ) -> "NeuralApproximator":
        """Random small-weight init with a tunable output bias.

        The default bias starts the network near the saturated profile.
        Defect descent then approaches the fixed point from above, which
        avoids the spurious low plateau of the non-convex landscape; the
        integral penalty steers the final profile toward the minimal fixed
        point among nearby ones.
        """
        if not 0 < penalty_gamma < 1:
            raise ValueError("penalty_gamma must lie in (0, 1)")
        sizes = (1, *map(int, hidden), 1)
        rng = np.random.Generator(np.random.Philox(key=[seed % 2**64, STREAM_NN_INIT]))
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        biases[-1][:] = output_bias
        return cls(sizes, weights, biases, penalty_gamma)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Evaluate at points x, returning values and the activation cache."""
        a = np.asarray(x, dtype=float).reshape(-1, 1)
        cache = [a]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w.T + b)
            cache.append(a)
        out = _sigmoid(a @ self.weights[-1].T + self.biases[-1])
        cache.append(out)
        return out[:, 0], cache

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(
        self, cache: list[np.ndarray], cotangent: np.ndarray
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Parameter gradients of sum(cotangent * output) for the cached batch."""
        out = cache[-1]
        g = (cotangent[:, None]) * out * (1.0 - out)
        grads_w: list[np.ndarray] = [None] * len(self.weights)
        grads_b: list[np.ndarray] = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = g.T @ cache[layer]
            grads_b[layer] = g.sum(axis=0)
            if layer:
                g = (g @ self.weights[layer]) * (1.0 - cache[layer] ** 2)
        return grads_w, grads_b


def default_rate_schedule(base: float = 0.05, hold: int = 2000) -> Callable[[int], float]:
    """Fixed rate for ``hold`` steps, then harmonic decay."""

    def schedule(step: int) -> float:
        return base if step < hold else base * hold / step

    return schedule


class _Adam:
    def __init__(self, shapes, rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.rate, self.beta1, self.beta2, self.eps = rate, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        correct1 = 1.0 - self.beta1**self.t
        correct2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.rate * (m / correct1) / (np.sqrt(v / correct2) + self.eps)


def solve_nn(
    ctx: OperatorContext,
    net: NeuralApproximator | None = None,
    learning_rate: float | Callable[[int], float] | None = None,
    stop_epsilon: float | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    sample_count: int = 1000,
    seed: int = 0,
    optimizer: str = "gd",
    trace_path=None,
) -> FixedPointResult:
    """Train a network toward the minimal fixed point (gradient descent).

    Minimizes mean |f - Psi f| over sample points plus penalty_gamma times
    the integral of f. ``optimizer`` selects plain gradient descent with a
    fixed-then-decaying rate (default) or Adam. Raises ConvergenceError with
    the per-step loss trace if the objective never reaches ``stop_epsilon``.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    if optimizer not in ("gd", "adam"):
        raise ValueError("optimizer must be 'gd' or 'adam'")
    if net is None:
        net = NeuralApproximator.create(seed=seed)
    gamma = net.penalty_gamma
    if stop_epsilon is None:
        stop_epsilon = 1e-3 * (1.0 + gamma)

    rng = np.random.Generator(np.random.Philox(key=[seed % 2**64, STREAM_NN_SAMPLES]))
    samples = np.sort(rng.random(sample_count))
    grid = ctx.grid
    mids = grid.midpoints
    weights = grid.weights
    # Kernel at (grid point, sample point): the quadrature matrix of the
    # Riemann-sum intensity evaluated at the sample points.
    if hasattr(ctx.kernel, "evaluator"):
        quad = np.asarray(ctx.kernel.evaluator(mids[:, None], samples[None, :]), dtype=float)
    else:
        labels = ctx.kernel.cell_blocks(grid.cell_count)
        quad = ctx.kernel.block_values[labels[:, None], labels[grid.cell_of(samples)][None, :]]
    eta_samples = ctx.measure.densities[:, grid.cell_of(samples)]
    k_max = ctx.measure.max_threshold

    points = np.concatenate([samples, mids])
    n_s = sample_count

    if learning_rate is None:
        schedule = default_rate_schedule() if optimizer == "gd" else (lambda step: 0.01)
    elif callable(learning_rate):
        schedule = learning_rate
    else:
        schedule = lambda step, _r=float(learning_rate): _r

    params = net.weights + net.biases
    adam = _Adam([p.shape for p in params], rate=schedule(0)) if optimizer == "adam" else None

    trace = _TraceWriter(trace_path)
    loss_trace = []
    converged = False
    steps = 0
    try:
        for step in range(max_steps):
            values, cache = net.forward(points)
            f_s, f_g = values[:n_s], values[n_s:]
            lam = (f_g * weights) @ quad
            tails = poisson_tail(k_max, lam)
            psi_s = np.einsum("ks,ks->s", eta_samples, tails)
            defect = f_s - psi_s
            loss = float(np.mean(np.abs(defect)) + gamma * np.dot(f_g, weights))
            loss_trace.append(loss)
            trace.row(step, loss, float(np.dot(f_g, weights)))
            steps = step
            if loss < stop_epsilon:
                converged = True
                break

            sensitivity = np.zeros_like(lam)
            for k in range(1, k_max + 1):
                sensitivity += eta_samples[k] * poisson_pmf(k - 1, lam)
            u_s = np.sign(defect) / n_s
            u_g = gamma * weights - weights * (quad @ (u_s * sensitivity))
            grads_w, grads_b = net.backward(cache, np.concatenate([u_s, u_g]))
            grads = grads_w + grads_b
            if adam is not None:
                adam.step(params, grads)
            else:
                rate = schedule(step)
                for p, g in zip(params, grads):
                    p -= rate * g
    finally:
        trace.close()

    if not converged:
        raise ConvergenceError(
            f"objective stayed above {stop_epsilon:g} after {max_steps} steps "
            f"(last {loss_trace[-1]:.3e})",
            last=net,
            residual=loss_trace[-1],
            trace=loss_trace,
        )

    f_hat = net.predict(mids)
    residual = float(np.max(np.abs(infection_map(ctx, f_hat) - f_hat)))
    return FixedPointResult(
        f_hat=f_hat,
        integral=grid.integrate(f_hat),
        iterations=steps,
        residual=residual,
        derivative_condition=check_derivative_condition(ctx, f_hat),
        tail_mass=ctx.measure.tail_mass,
    )
