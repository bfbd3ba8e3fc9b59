"""Timing decomposition of a two-site update at chi = 100.

For each local dimension the middle bond of a random six-site MPS is
updated with a random unitary gate, once with the deterministic and once
with the randomized decimation. Prints the share of the update spent in
decimation and its ratio to building Theta alone and to building plus
gating Theta.

    python scripts/profile_updates.py --dims 9,16,25
"""

import argparse

from rrtebd.bench import ProfileConfig, profile_two_site_update


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", default="9,16,25")
    ap.add_argument("--chi", type=int, default=100)
    ap.add_argument("--updates", type=int, default=5)
    ap.add_argument("--power-iterations", type=int, default=2)
    ap.add_argument("--oversampling", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    print(f"{'d':>4} {'backend':>8} {'theta ms':>9} {'gate ms':>9} {'svd ms':>9} {'svd share':>10} "
          f"{'svd/theta':>10} {'svd/(theta+gate)':>17}")
    for d in (int(v) for v in args.dims.split(",")):
        for backend in ("det", "rrsvd"):
            cfg = ProfileConfig(local_dim=d, chi=args.chi, updates=args.updates, backend=backend, crossover=0,
                                power_iterations=args.power_iterations, oversampling=args.oversampling,
                                threads=args.threads)
            _, s = profile_two_site_update(cfg)
            both = s["t_theta_us"] + s["t_gate_us"]
            print(f"{d:>4} {backend:>8} {s['t_theta_us'] / 1e3:9.1f} {s['t_gate_us'] / 1e3:9.1f} "
                  f"{s['t_svd_us'] / 1e3:9.1f} {s['decimate_fraction']:10.1%} {s['decimate_over_theta']:10.1f} "
                  f"{s['t_svd_us'] / both:17.1f}")


if __name__ == "__main__":
    main()
