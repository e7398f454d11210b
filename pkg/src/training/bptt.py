"""
Retropropagación en el tiempo a través de un desenrollado (Rollout).

Recorre los pasos en orden inverso y, dentro de cada paso, las capas en el
orden inverso al de forward_step: P_O, V_O, P_S, P_M, P_F, V_S, V_M, V_F.
Los caminos de realimentación v_out -> v_in y p_out -> p_in se siguen cuando
el Rollout marca la entrada como realimentada.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from config.networkConfig import HIDDEN_LAYERS, VISUAL_LAYERS
from network.dynamics import Rollout
from network.parameters import Parameters
from ops.activations import out_tanh_grad_from_output, scaled_tanh_grad, softmax_group_backward
from ops.convolution import conv_backward, conv_same_backward, conv_transposed_backward
from ops.dense import affine_backward


@dataclass
class BackwardResult:
    weights: Dict[str, np.ndarray]     # vacío cuando no se piden pesos
    initial_u: Dict[str, np.ndarray]   # dE/du0 por capa, con eje de lote


class _Accumulator:
    def __init__(self, params: Parameters, enabled: bool):
        self.enabled = enabled
        self.grads = {name: np.zeros_like(params.tensors[name])
                      for name in params.weight_names()} if enabled else {}

    def add(self, name: str, value: Optional[np.ndarray]):
        if self.enabled and value is not None:
            self.grads[name] += value


def _add(target: Dict[str, np.ndarray], name: str, value: Optional[np.ndarray]):
    if value is None:
        return
    if name in target:
        target[name] = target[name] + value
    else:
        target[name] = value


def backpropagate(params: Parameters, roll: Rollout,
                  grad_v_out: Optional[np.ndarray] = None,
                  grad_p_logits: Optional[np.ndarray] = None,
                  weights: bool = True) -> BackwardResult:
    """
    Gradientes exactos de una pérdida sobre las salidas de `roll`.

    Args:
        params: parámetros usados en el desenrollado
        roll: desenrollado de T pasos (lote B)
        grad_v_out: dE/dv_out directo de la pérdida, (B, T, 1, H, W) o None
        grad_p_logits: dE/d(logits de P_O) directo de la pérdida, (B, T, P) o None
        weights: en falso sólo se calculan los gradientes de los estados iniciales

    Returns:
        BackwardResult con gradientes de pesos y de u0
    """
    cfg = params.config
    w = params.tensors
    k = params.kernel
    acc = _Accumulator(params, weights)
    groups = cfg.groups

    dact_next: Dict[str, np.ndarray] = {}
    du_next: Dict[str, np.ndarray] = {}
    g_vin_next = None
    g_pin_next = None

    for t in reversed(range(roll.steps)):
        prev, cur = roll.states[t], roll.states[t + 1]
        dact = dict(dact_next)
        dact_prev: Dict[str, np.ndarray] = {}
        du_prev: Dict[str, np.ndarray] = {}
        dd: Dict[str, np.ndarray] = {}

        def integrate(name: str):
            # gradiente respecto al término (drive + b) de la capa en el paso t
            du = du_next.get(name, 0.0)
            if name in dact:
                du = du + dact[name] * scaled_tanh_grad(cur.u[name])
            if np.isscalar(du):
                return None
            tau = cfg.tau(name)
            du_prev[name] = (1.0 - 1.0 / tau) * du
            dd[name] = du / tau
            if name in VISUAL_LAYERS:
                acc.add(f"{name}.b", dd[name].sum(axis=(0, 2, 3)))
            else:
                acc.add(f"{name}.b", dd[name].sum(axis=0))
            return dd[name]

        # --- P_O
        d_logit = grad_p_logits[:, t] if grad_p_logits is not None else None
        if g_pin_next is not None:
            back = softmax_group_backward(roll.p_out[t], g_pin_next, groups)
            d_logit = back if d_logit is None else d_logit + back
        if d_logit is not None:
            gx, gw, gb = affine_backward(w["po.w"], cur.act["pf"], d_logit, need_weights=weights)
            acc.add("po.w", gw)
            acc.add("po.b", gb)
            _add(dact, "pf", gx)

        # --- V_O
        dv = grad_v_out[:, t] if grad_v_out is not None else None
        if g_vin_next is not None:
            dv = g_vin_next if dv is None else dv + g_vin_next
        if dv is not None:
            d_pre = dv * out_tanh_grad_from_output(roll.v_out[t])
            gy, gk, gb = conv_transposed_backward(cur.act["vf"], k("vo.k"), d_pre, need_kernel=weights)
            acc.add("vo.k", gk)
            acc.add("vo.b", gb)
            _add(dact, "vf", gy)

        # --- P_S
        g = integrate("ps")
        if g is not None:
            gx, gw, _ = affine_backward(w["ps.bu"], prev.act["pm"], g, need_weights=weights)
            acc.add("ps.bu", gw)
            _add(dact_prev, "pm", gx)
            gx, gw, _ = affine_backward(w["ps.rec"], prev.act["ps"], g, need_weights=weights)
            acc.add("ps.rec", gw)
            _add(dact_prev, "ps", gx)
            gx, gk, _ = conv_backward(cur.act["vs"], k("ps.lat"), g[:, :, None, None], need_kernel=weights)
            acc.add("ps.lat", gk)
            _add(dact, "vs", gx)

        # --- P_M
        g = integrate("pm")
        if g is not None:
            gx, gw, _ = affine_backward(w["pm.bu"], prev.act["pf"], g, need_weights=weights)
            acc.add("pm.bu", gw)
            _add(dact_prev, "pf", gx)
            gx, gw, _ = affine_backward(w["pm.td"], prev.act["ps"], g, need_weights=weights)
            acc.add("pm.td", gw)
            _add(dact_prev, "ps", gx)
            gx, gw, _ = affine_backward(w["pm.rec"], prev.act["pm"], g, need_weights=weights)
            acc.add("pm.rec", gw)
            _add(dact_prev, "pm", gx)

        # --- P_F
        g_pin = None
        g = integrate("pf")
        if g is not None:
            g_pin, gw, _ = affine_backward(w["pf.bu"], roll.p_in[t], g,
                                           need_input=roll.fed_back_p[t], need_weights=weights)
            acc.add("pf.bu", gw)
            gx, gw, _ = affine_backward(w["pf.td"], prev.act["pm"], g, need_weights=weights)
            acc.add("pf.td", gw)
            _add(dact_prev, "pm", gx)
            gx, gw, _ = affine_backward(w["pf.rec"], prev.act["pf"], g, need_weights=weights)
            acc.add("pf.rec", gw)
            _add(dact_prev, "pf", gx)

        # --- V_S
        g = integrate("vs")
        if g is not None:
            gx, gk, _ = conv_backward(prev.act["vm"], k("vs.bu"), g, need_kernel=weights)
            acc.add("vs.bu", gk)
            _add(dact_prev, "vm", gx)
            gx, gk, _ = conv_same_backward(prev.act["vs"], k("vs.rec"), g, need_kernel=weights)
            acc.add("vs.rec", gk)
            _add(dact_prev, "vs", gx)
            gy, gk, _ = conv_transposed_backward(prev.act["ps"][:, :, None, None], k("vs.lat"), g,
                                                 need_kernel=weights)
            acc.add("vs.lat", gk)
            _add(dact_prev, "ps", gy.reshape(gy.shape[0], -1))

        # --- V_M
        g = integrate("vm")
        if g is not None:
            gx, gk, _ = conv_backward(prev.act["vf"], k("vm.bu"), g, need_kernel=weights)
            acc.add("vm.bu", gk)
            _add(dact_prev, "vf", gx)
            gy, gk, _ = conv_transposed_backward(prev.act["vs"], k("vm.td"), g, need_kernel=weights)
            acc.add("vm.td", gk)
            _add(dact_prev, "vs", gy)
            gx, gk, _ = conv_same_backward(prev.act["vm"], k("vm.rec"), g, need_kernel=weights)
            acc.add("vm.rec", gk)
            _add(dact_prev, "vm", gx)

        # --- V_F
        g_vin = None
        g = integrate("vf")
        if g is not None:
            g_vin, gk, _ = conv_backward(roll.v_in[t], k("vf.bu"), g,
                                         need_input=roll.fed_back_v[t], need_kernel=weights)
            acc.add("vf.bu", gk)
            gy, gk, _ = conv_transposed_backward(prev.act["vm"], k("vf.td"), g, need_kernel=weights)
            acc.add("vf.td", gk)
            _add(dact_prev, "vm", gy)
            gx, gk, _ = conv_same_backward(prev.act["vf"], k("vf.rec"), g, need_kernel=weights)
            acc.add("vf.rec", gk)
            _add(dact_prev, "vf", gx)

        dact_next, du_next = dact_prev, du_prev
        g_vin_next = g_vin if roll.fed_back_v[t] else None
        g_pin_next = g_pin if roll.fed_back_p[t] else None

    # estados iniciales: act0 = scaled_tanh(u0)
    init = roll.states[0]
    initial_u = {}
    for name in HIDDEN_LAYERS:
        grad = np.zeros_like(init.u[name])
        if name in dact_next:
            grad = grad + dact_next[name] * scaled_tanh_grad(init.u[name])
        if name in du_next:
            grad = grad + du_next[name]
        initial_u[name] = grad
    return BackwardResult(weights=acc.grads, initial_u=initial_u)
