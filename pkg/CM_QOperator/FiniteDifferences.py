########################################################################
## IMPORTS
########################################################################
from collections import Counter
from itertools import product

import numpy as np

from .Errors import ParameterError

########################################################################
## CENTRAL STENCILS
########################################################################
# (offsets, weights) per derivative count; weights are scaled by h^-count
STENCILS = {
    2: {
        1: ((-1, 1), (-0.5, 0.5)),
        2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    },
    4: {
        1: ((-2, -1, 1, 2), (1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0)),
        2: ((-2, -1, 0, 1, 2), (-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0)),
    },
}


def check_fd_order(order):
    if order not in STENCILS:
        raise ParameterError("finite-difference order must be 2 or 4, got " + str(order))
    return order


class StencilEvaluator:
    '''
    Central finite differences of f around a fixed point x.

    Function values are cached by integer stencil offset, so the gradient,
    Laplacian and mixed derivatives of one point share evaluations.
    '''

    def __init__(self, f, x, h, order=2):
        if not h > 0:
            raise ParameterError("finite-difference step must be positive, got " + str(h))
        self.f = f
        self.x = np.asarray(x, dtype=float).copy()
        self.h = float(h)
        self.order = check_fd_order(order)
        self._cache = {}

    def _value_at(self, offsets):
        key = tuple(offsets)
        if key not in self._cache:
            self._cache[key] = self.f(self.x + self.h * np.asarray(key, dtype=float))
        return self._cache[key]

    @property
    def evaluations(self):
        return len(self._cache)

    def value(self):
        return self._value_at((0,) * self.x.size)

    def derivative(self, *axes):
        '''Mixed partial derivative, e.g. derivative(0, 0) or derivative(0, 1, 2).'''
        counts = Counter(axes)
        stencils = []
        for axis, count in sorted(counts.items()):
            if count not in STENCILS[self.order]:
                raise ParameterError("derivative order %d along one axis is not supported" % count)
            offsets, weights = STENCILS[self.order][count]
            stencils.append((axis, offsets, weights, count))

        total = 0.0
        for combo in product(*[list(zip(s[1], s[2])) for s in stencils]):
            offsets = [0] * self.x.size
            weight = 1.0
            for (axis, _, _, _), (offset, w) in zip(stencils, combo):
                offsets[axis] = offset
                weight *= w
            total = total + weight * self._value_at(offsets)
        scale = self.h ** sum(counts.values())
        return total / scale

    def gradient(self):
        return np.array([self.derivative(i) for i in range(self.x.size)])

    def laplacian(self):
        return sum(self.derivative(i, i) for i in range(self.x.size))
