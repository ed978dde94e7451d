"""Bounded-optimal pedestrian road-crossing model: environment, noisy
perception, conditioned dueling Double-DQN, evaluation and fitting."""

__version__ = "0.1.0"
