"""Event-driven simulators and statistical checks for driven lattice exclusion processes.

The package provides exact continuous-time simulation of one-dimensional
exclusion dynamics in several guises (a tagged-particle environment view, a
static-obstacle variant, boundary-driven finite segments, and label-indexed
particle clouds), an order-preserving coupled simulator built on an explicit
target-site selector, and the statistical layer (currents, cylinder time
averages, batch-means intervals) used by the verification harness.
"""

__version__ = "0.1.0"

from . import event_core, kernels, observables  # noqa: F401
