"""Compare the compiled physics kernel against the pure-Python fallback.

Runs identical rollouts through both backends, checks the outputs agree
bitwise, and reports steps/second plus the speedup. Usage:

    python3 benchmarks/kernel_bench.py [--steps 20000] [--repeats 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from contactgen.backend import get_kernel
from contactgen.dynamics import PhysicalParams, resting_object_pose
from contactgen.embodiments import make_arms, make_fingers


def _scenario(name: str):
    if name == "fingers":
        emb = make_fingers()
        params = PhysicalParams()
    else:
        from contactgen.dynamics import arms_physics

        emb = make_arms()
        params = arms_physics()
    state = np.zeros(14)
    state[0:3] = resting_object_pose(params).as_array()
    state[6:10] = emb.home_q
    # drive both tips through a slow sweep that stays in contact with the box
    times = np.array([0.0, 1.0, 2.0])
    span = 0.05 if name == "fingers" else 0.2
    knots = np.stack([emb.home_q, emb.home_q + span, emb.home_q - span])
    return emb, params, state, times, knots


def _run(kernel, emb, params, state, times, knots, n_steps: int):
    states = np.empty((n_steps + 1, 14))
    cmds = np.empty((n_steps, 4))
    t0 = time.perf_counter()
    rc = kernel.rollout(
        state.copy(),
        times,
        knots,
        n_steps,
        params.to_array(),
        emb.kind,
        emb.kernel_params(),
        states,
        cmds,
    )
    dt = time.perf_counter() - t0
    if rc != -1:
        raise RuntimeError(f"rollout blew up at step {rc}")
    return states, cmds, dt


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    backends = {}
    for name in ("python", "cython"):
        try:
            backends[name] = get_kernel(name)
        except ImportError:
            print(f"{name}: not available")
    if len(backends) < 2:
        print("need both backends for a comparison; timing what exists")

    for scenario in ("fingers", "arms"):
        emb, params, state, times, knots = _scenario(scenario)
        print(f"\n== {scenario}: {args.steps} steps x {args.repeats} repeats ==")
        outputs = {}
        for name, kernel in backends.items():
            best = float("inf")
            for _ in range(args.repeats):
                states, cmds, dt = _run(kernel, emb, params, state, times, knots, args.steps)
                best = min(best, dt)
            outputs[name] = (states, cmds)
            print(f"  {name:7s} {args.steps / best:12.0f} steps/s   ({best * 1e3:8.2f} ms best)")
        if len(outputs) == 2:
            s_py, c_py = outputs["python"]
            s_cy, c_cy = outputs["cython"]
            identical = np.array_equal(s_py, s_cy) and np.array_equal(c_py, c_cy)
            print(f"  outputs bitwise identical: {identical}")
            if not identical:
                raise SystemExit("kernel outputs disagree")


if __name__ == "__main__":
    main()
