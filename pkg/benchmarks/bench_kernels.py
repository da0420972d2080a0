"""Time one noisy memory trajectory with the numba kernels and the numpy fallback.

    python benchmarks/bench_kernels.py [--cutoffs 10 10] [--repeat 3]

The numpy timing runs in a child interpreter with EOMQSD_DISABLE_NUMBA=1, since
the backend is fixed at import time.
"""
import argparse
import json
import os
import subprocess
import sys
import time


def measure(cutoffs, repeat, dt):
    from eomqsd import (HamiltonianSpec, NoiseChannel, fock_state, fock_superposition,
                        integrate_trajectory, make_basis, memory_schedule,
                        tensor_product_state)
    from eomqsd._jit import USE_NUMBA

    b = make_basis(cutoffs)
    psi = tensor_product_state([fock_superposition(cutoffs[0]), fock_state(0, cutoffs[1])], b)
    spec = HamiltonianSpec(b, memory_schedule(0.1, 64))
    noise = NoiseChannel.from_quality(1000.0, 3.0)

    t0 = time.perf_counter()
    integrate_trajectory(psi, spec, noise, dt=dt, seed=0)  # includes compilation
    first = time.perf_counter() - t0
    times = []
    for k in range(repeat):
        t0 = time.perf_counter()
        res = integrate_trajectory(psi, spec, noise, dt=dt, seed=k + 1)
        times.append(time.perf_counter() - t0)
    steps = round((spec.schedule.t_end - spec.schedule.t_start) / dt)
    return {"backend": "numba" if USE_NUMBA else "numpy", "dim": b.total_dim,
            "first": first, "best": min(times), "steps": steps,
            "norm": res.final.norm}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cutoffs", type=int, nargs=2, default=[10, 10])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--dt", type=float, default=0.02)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)

    if args.child:
        print(json.dumps(measure(args.cutoffs, args.repeat, args.dt)))
        return

    fast = measure(args.cutoffs, args.repeat, args.dt)
    env = dict(os.environ, EOMQSD_DISABLE_NUMBA="1")
    cmd = [sys.executable, __file__, "--child", "--cutoffs", *map(str, args.cutoffs),
           "--repeat", str(args.repeat), "--dt", str(args.dt)]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    slow = json.loads(out.stdout.strip().splitlines()[-1])

    print(f"memory trajectory, dim {fast['dim']}, {fast['steps']} steps, dt={args.dt}")
    print(f"{'backend':8s} {'first call':>12s} {'best':>10s} {'us/step':>10s}")
    for r in (fast, slow):
        print(f"{r['backend']:8s} {r['first']:11.3f}s {r['best']:9.3f}s "
              f"{1e6 * r['best'] / r['steps']:10.1f}")
    if fast["backend"] == "numba":
        print(f"speedup {slow['best'] / fast['best']:.1f}x")


if __name__ == "__main__":
    main()
