#    Copyright (C) 2026 The UniChange Development Team. See the AUTHORS.md file for a full list of copyright holders.
#
#    This file is part of UniChange.
#
#    UniChange is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    UniChange is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with UniChange.  If not, see <http://www.gnu.org/licenses/>.

'''Central-difference gradient checking for torch modules and functions.'''

import logging

import numpy as np
import torch

LOG = logging.getLogger(__package__)

DEFAULT_EPSILON = 1e-5

def relativeError(analytic, numeric):
    """ Relative distance of two gradient vectors.

    :returns: ||a - n|| / max(||a||, ||n||, 1e-12)
    :rtype: float
    """
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)

def _entrySubset(tensor, maxEntries, rng):
    count = tensor.numel()
    if maxEntries is None or count <= maxEntries:
        return np.arange(count)
    return np.sort(rng.choice(count, size=maxEntries, replace=False))

def checkGradients(function, tensors, epsilon=DEFAULT_EPSILON, maxEntries=None, seed=0):
    """ Compare autograd gradients of a scalar function with central differences.

    Every tensor in ``tensors`` must be a float64 leaf with requires_grad set;
    they are perturbed in place and restored. For tensors larger than
    ``maxEntries`` a seeded random subset of entries is checked.

    :arg function: Callable without arguments returning a scalar tensor.
    :arg list tensors: Leaf tensors to differentiate against.
    :arg float epsilon: Finite-difference step.
    :arg maxEntries: Optional cap on checked entries per tensor.
    :arg int seed: Seed of the entry subset.
    :returns: The largest relative error over the tensors.
    :rtype: float
    """
    tensors = list(tensors)
    for tensor in tensors:
        if tensor.dtype != torch.float64:
            raise TypeError('Gradient checks need float64 tensors, got '+str(tensor.dtype)+'.\n')
    value = function()
    analytic = torch.autograd.grad(value, tensors, allow_unused=True)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for tensor, gradient in zip(tensors, analytic):
        if gradient is None:
            gradient = torch.zeros_like(tensor)
        entries = _entrySubset(tensor, maxEntries, rng)
        flat = tensor.detach().view(-1)
        numeric = np.empty(len(entries))
        with torch.no_grad():
            for position, entry in enumerate(entries):
                original = flat[entry].item()
                flat[entry] = original + epsilon
                plus = function().item()
                flat[entry] = original - epsilon
                minus = function().item()
                flat[entry] = original
                numeric[position] = (plus - minus) / (2.0 * epsilon)
        error = relativeError(gradient.detach().view(-1)[entries].cpu().numpy(), numeric)
        LOG.debug('Gradient check on tensor of shape '+str(tuple(tensor.shape))+': relative error '+str(error))
        worst = max(worst, error)
    return worst

def gradcheckInputs(function, inputs, epsilon=DEFAULT_EPSILON, tolerance=1e-4):
    """ Check ``function(*inputs)`` with torch.autograd.gradcheck.

    Suited to pure functions of a few small float64 tensors, where every
    entry can be perturbed; parameters of a module are better served by
    checkGradients.

    :arg function: Callable mapping the inputs to a tensor.
    :arg list inputs: float64 tensors with requires_grad set.
    :arg float epsilon: Finite-difference step.
    :arg float tolerance: Relative and absolute tolerance.
    :returns: True when every Jacobian entry agrees.
    :rtype: bool
    """
    inputs = tuple(inputs)
    for tensor in inputs:
        if tensor.dtype != torch.float64:
            raise TypeError('Gradient checks need float64 tensors, got '+str(tensor.dtype)+'.\n')
    passed = torch.autograd.gradcheck(function, inputs, eps=epsilon, atol=tolerance, rtol=tolerance,
                                      raise_exception=False)
    if not passed:
        LOG.warning('torch.autograd.gradcheck disagrees with the analytic gradient of '+
                    getattr(function, '__name__', 'function'))
    return passed
