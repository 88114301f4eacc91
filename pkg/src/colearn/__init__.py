"""Learned steering and cost-to-go for kinodynamic RRT on the pendulum swing-up.

Training data comes from integrating the state/costate equations of the
optimal control problem forward from sampled initial costates; a k-NN
regressor over (start, end) state pairs then stands in for the two-point
boundary value problem inside the planner.
"""
from .cleaning import CleanConfig, clean_dataset
from .datagen import Dataset, GenConfig, SteeringParams, generate_dataset, sample_costate
from .dynamics import Costate, State, integrate, optimal_hamiltonian
from .planner import PlannerConfig, PlanResult, plan
from .surrogate import SurrogateModel, build_index

__version__ = "0.1.0"
