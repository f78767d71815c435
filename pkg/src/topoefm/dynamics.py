"""Stochastic majority-rule dynamics on an ErGraph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParameterError
from .graph import ErGraph
from .rng import as_generator

# How an agent whose neighbours are split exactly in half reads the majority.
#   "inactive": a tie counts as an inactive majority for every agent, so a tied
#               active agent switches off with probability 1 - eps.
#   "keep":     the tie falls in the "at most half" branch for both states,
#               which makes the rule complement-symmetric.
TIE_RULES = ("inactive", "keep")


@dataclass(frozen=True)
class NetworkState:
    bits: np.ndarray  # uint8, 0/1
    time_index: int = 0

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1:
            raise ContractError("state must be a 1-d vector")
        if bits.size and (bits.min() < 0 or bits.max() > 1):
            raise ContractError("state entries must be 0 or 1")

    @property
    def K(self) -> int:
        return len(self.bits)

    def active_ids(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def complement(self) -> "NetworkState":
        return NetworkState((1 - self.bits).astype(np.uint8), self.time_index)


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    T: int = 10
    d0: float = 0.1
    ties: str = "inactive"

    def __post_init__(self):
        check_epsilon(self.epsilon)
        if int(self.T) != self.T or self.T < 0:
            raise ParameterError(f"T must be a nonnegative integer, got {self.T}")
        if not 0.0 <= self.d0 <= 1.0:
            raise ParameterError(f"d0 must lie in [0, 1], got {self.d0}")
        check_ties(self.ties)


def check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 0.5:
        raise ParameterError(f"epsilon must lie strictly between 0 and 0.5, got {epsilon}")


def check_ties(ties: str) -> None:
    if ties not in TIE_RULES:
        raise ParameterError(f"unknown tie rule {ties!r}; expected one of {TIE_RULES}")


def active_count(K: int, d0: float) -> int:
    """round_half_up(K * d0), computed without binary floating-point surprises."""
    from decimal import ROUND_HALF_UP, Decimal

    return int((Decimal(K) * Decimal(repr(d0))).to_integral_value(rounding=ROUND_HALF_UP))


def init_state(K: int, d0: float, rng) -> NetworkState:
    if not 0.0 <= d0 <= 1.0:
        raise ParameterError(f"d0 must lie in [0, 1], got {d0}")
    n = active_count(K, d0)
    bits = np.zeros(K, dtype=np.uint8)
    bits[as_generator(rng).choice(K, size=n, replace=False)] = 1
    return NetworkState(bits, 0)


def density(state: NetworkState) -> float:
    return float(np.count_nonzero(state.bits)) / len(state.bits)


def _minority(graph: ErGraph, bits: np.ndarray, ties: str) -> np.ndarray:
    """True where an agent disagrees with its neighbourhood majority."""
    deg = graph.degree
    act = graph.adjacency @ bits.astype(np.int32)
    active = bits.astype(bool)
    if ties == "inactive":
        # a tie reads as an inactive majority for everyone
        return (2 * act > deg) ^ active
    if ties == "keep":
        return np.where(active, 2 * act < deg, 2 * act > deg)
    check_ties(ties)


def flip_probabilities(graph: ErGraph, bits: np.ndarray, epsilon: float,
                       ties: str = "inactive") -> np.ndarray:
    """Per-agent probability of changing state in the next synchronous step."""
    return np.where(_minority(graph, bits, ties), 1.0 - epsilon, epsilon)


def majority_step(graph: ErGraph, state: NetworkState, epsilon: float, rng,
                  ties: str = "inactive") -> NetworkState:
    """One synchronous update; every decision reads the time-t state."""
    if state.K != graph.node_count:
        raise ContractError(f"state has {state.K} agents, graph has {graph.node_count}")
    check_epsilon(epsilon)
    minority = _minority(graph, state.bits, ties)
    u = as_generator(rng).random(state.K)
    # minority agents flip when u < 1 - eps, majority agents when u < eps
    flip = np.where(minority, u < 1.0 - epsilon, u < epsilon)
    return NetworkState(state.bits ^ flip.view(np.uint8), state.time_index + 1)


def evolve(graph: ErGraph, state: NetworkState, epsilon: float, T: int, rng,
           ties: str = "inactive") -> NetworkState:
    """The evolution operator: T successive majority steps."""
    if state.K != graph.node_count:
        raise ContractError(f"state has {state.K} agents, graph has {graph.node_count}")
    for _ in range(T):
        state = majority_step(graph, state, epsilon, rng, ties)
    return state
