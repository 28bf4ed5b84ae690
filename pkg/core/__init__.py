"""Tensor core: dense tensors, differentiation tape and gradient checks."""
from .tensor import Tensor, Tape, TapeNode, active_tape, backward
from .gradcheck import grad_check, numerical_gradient, analytic_gradient
from . import ops

__all__ = ['Tensor', 'Tape', 'TapeNode', 'active_tape', 'backward',
           'grad_check', 'numerical_gradient', 'analytic_gradient', 'ops']
