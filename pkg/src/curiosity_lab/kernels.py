"""Backend selection for the numeric kernels.

The compiled ``_kernels`` extension is used when it was built; otherwise the
pure-Python ``_kernels_py`` module. Set ``CURIOSITY_LAB_KERNELS`` to
``python`` or ``cython`` to force one (``cython`` raises if unavailable).
"""

import os
from types import ModuleType


def _select() -> ModuleType:
    choice = os.environ.get("CURIOSITY_LAB_KERNELS", "auto").lower()
    if choice == "python":
        from curiosity_lab import _kernels_py as mod

        return mod
    try:
        from curiosity_lab import _kernels as mod  # type: ignore[attr-defined]
    except ImportError:
        if choice == "cython":
            raise
        from curiosity_lab import _kernels_py as mod
    return mod


_impl = _select()

BACKEND: str = _impl.BACKEND
normalize = _impl.normalize
belief_update = _impl.belief_update
dot = _impl.dot
entropy = _impl.entropy
kl_divergence = _impl.kl_divergence
temper = _impl.temper
masked_softmax = _impl.masked_softmax
sample_index = _impl.sample_index
accumulate_policy_grad = _impl.accumulate_policy_grad
gae_propagate = _impl.gae_propagate
discounted_returns = _impl.discounted_returns
strategy_probs = _impl.strategy_probs

__all__ = [
    "BACKEND",
    "normalize",
    "belief_update",
    "dot",
    "entropy",
    "kl_divergence",
    "temper",
    "masked_softmax",
    "sample_index",
    "accumulate_policy_grad",
    "gae_propagate",
    "discounted_returns",
    "strategy_probs",
]
