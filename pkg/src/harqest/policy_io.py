"""Lossless text export of solved policies.

Static entries are keyed "r,q"; Markov entries "r1,...,rB|q|xi" with
zero-based gain indices. Floats are written with repr so a round trip
reproduces them bit for bit.
"""

import numpy as np

from .errors import ConfigError
from .mdp_core import Policy

__all__ = ["save_policy", "load_policy"]


def _state_key(kind: str, state) -> str:
    if kind == "static":
        r, q = state
        return f"{r},{q}"
    omega, q, xi = state
    return f"{','.join(str(c) for c in omega)}|{q}|{xi}"


def _parse_state(kind: str, key: str):
    if kind == "static":
        r, q = key.split(",")
        return (int(r), int(q))
    omega, q, xi = key.split("|")
    return (tuple(int(c) for c in omega.split(",")), int(q), int(xi))


def save_policy(policy: Policy, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# transmission-control policy\n")
        fh.write(f"kind = {policy.kind}\n")
        fh.write(f"cost_mode = {policy.cost_mode}\n")
        fh.write(f"zeta = {policy.zeta!r}\n")
        fh.write(f"span = {policy.span!r}\n")
        fh.write(f"iterations = {policy.iterations}\n")
        fh.write(f"converged = {str(policy.converged).lower()}\n")
        if policy.kind == "static":
            fh.write(f"r_max = {policy.params['r_max']}\n")
            fh.write(f"q_max = {policy.params['q_max']}\n")
        else:
            caps = ",".join(str(c) for c in policy.params["omega_caps"])
            gains = ",".join(repr(float(g)) for g in policy.params["gains"])
            fh.write(f"omega_caps = {caps}\n")
            fh.write(f"q_max = {policy.params['q_max']}\n")
            fh.write(f"gains = {gains}\n")
        fh.write("[actions]\n")
        for state, action in zip(policy.states, policy.actions):
            fh.write(f"{_state_key(policy.kind, state)} = {int(action)}\n")


def load_policy(path) -> Policy:
    meta = {}
    actions = {}
    in_actions = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line == "[actions]":
                in_actions = True
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if in_actions:
                actions[key] = int(value)
            else:
                meta[key] = value
    for required in ("kind", "cost_mode", "zeta", "span", "iterations", "converged", "q_max"):
        if required not in meta:
            raise ConfigError(f"{path}: missing {required!r} header")
    kind = meta["kind"]
    if kind not in ("static", "markov"):
        raise ConfigError(f"{path}: unknown policy kind {kind!r}")
    if not actions:
        raise ConfigError(f"{path}: no actions listed")
    states = tuple(sorted((_parse_state(kind, key) for key in actions), key=_sort_key))
    table = np.array([actions[_state_key(kind, s)] for s in states], dtype=np.int8)
    if kind == "static":
        params = {"r_max": int(meta["r_max"]), "q_max": int(meta["q_max"])}
    else:
        params = {
            "omega_caps": tuple(int(c) for c in meta["omega_caps"].split(",")),
            "q_max": int(meta["q_max"]),
            "gains": tuple(float(g) for g in meta["gains"].split(",")),
        }
    return Policy(
        actions=table,
        states=states,
        zeta=float(meta["zeta"]),
        span=float(meta["span"]),
        iterations=int(meta["iterations"]),
        converged=meta["converged"] == "true",
        cost_mode=meta["cost_mode"],
        kind=kind,
        params=params,
    )


def _sort_key(state):
    if isinstance(state[0], tuple):
        omega, q, xi = state
        return (omega, q, xi)
    return state
