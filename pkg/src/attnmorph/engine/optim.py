"""Adam optimizer."""

import numpy as np

from ..errors import StateError


class AdamState:
    """First/second moment estimates and step count for a fixed parameter list."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


class Adam:
    """Adam with bias-corrected moments.

    Parameters
    ----------
    params : iterable of Tensor
        Tensors to update in place. Each must have ``requires_grad=True``.
    lr, beta1, beta2, eps : float
        The usual hyperparameters.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState(self.params, lr, beta1, beta2, eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        st = self.state
        for p in self.params:
            if p.grad is None:
                raise StateError(f"parameter {p!r} has no gradient; it was created with requires_grad=False")
        t = st.step_count + 1
        bc1 = 1.0 - st.beta1 ** t
        bc2 = 1.0 - st.beta2 ** t
        for p, m, v in zip(self.params, st.m, st.v):
            g = p.grad
            m *= st.beta1
            m += (1.0 - st.beta1) * g
            v *= st.beta2
            v += (1.0 - st.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            p.data -= (st.lr * m_hat / (np.sqrt(v_hat) + st.eps)).astype(p.data.dtype)
        st.step_count = t


def adam_step(params, state):
    """Functional form: apply one Adam update to ``params`` using ``state``."""
    opt = Adam.__new__(Adam)
    opt.params = list(params)
    if len(state.m) != len(opt.params) or any(m.shape != p.shape for m, p in zip(state.m, opt.params)):
        raise StateError("Adam state does not match the parameter shapes")
    opt.state = state
    opt.step()
    return opt.params, state
