"""Resonant cascades on the square lattice: frequency-set construction, the toy
model, the resonant and full cubic NLS truncations, and cascade experiments."""
from .lattice import FreqPoint
from .placement import LambdaSet, construct_good_lambda, unit_square_lambda, verify_lambda_set
from .toy import ToyState, integrate_toy, slider, oscillator

__all__ = ["FreqPoint", "LambdaSet", "construct_good_lambda", "unit_square_lambda",
           "verify_lambda_set", "ToyState", "integrate_toy", "slider", "oscillator"]
