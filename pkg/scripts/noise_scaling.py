"""Reconstruction error and purity versus counts per angle for the double-slit state.

    python3 scripts/noise_scaling.py --seeds 10 --pitch 0.2 0.15
"""

import argparse

import numpy as np

from phasetomo.apparatus import ApparatusConfig, measure, plan_angles, resolution, smooth_histogram
from phasetomo.phase_space import GridSpec, density_from_wavefunction, make_double_slit, marginal, purity, wigner_from_density
from phasetomo.tomography import Sinogram, fidelity, reconstruct, wigner_l2_error


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--angles", type=int, default=64)
    ap.add_argument("--pitch", type=float, nargs="+", default=[0.2])
    ap.add_argument("--counts", type=int, nargs="+", default=[10**3, 10**4, 10**5, 10**6])
    args = ap.parse_args()

    grid = GridSpec(256, 12.0)
    rho = density_from_wavefunction(make_double_slit(grid, 10, 1.0))
    w = wigner_from_density(rho)
    print(f"{'pitch':>6} {'N':>8} {'L2 mean':>10} {'L2 sd':>9} {'F mean':>8} {'purity min..max':>17}")
    for pitch in args.pitch:
        base = dict(v0=2650.0, box_half_length=0.1, accel_potential=500.0, particle_charge_mag=1.602176634e-19,
                    particle_mass=9.1093837015e-31, n_detector_bins=grid.n_points, detector_pitch=pitch,
                    detector_span=grid.span)
        plan = plan_angles(ApparatusConfig(total_counts_per_angle=1, **base), args.angles)
        margs = [marginal(w, th) for th in plan.thetas]
        for n in args.counts:
            cfg = ApparatusConfig(total_counts_per_angle=n, **base)
            l2, fid, pur = [], [], []
            for seed in range(args.seeds):
                recs = tuple(smooth_histogram(measure(m, cfg, seed, i, grid=grid), cfg) for i, m in enumerate(margs))
                w_rec, rho_rec, _ = reconstruct(Sinogram(recs, n, seed), resolution(cfg))
                l2.append(wigner_l2_error(w_rec, w))
                fid.append(fidelity(rho_rec, rho))
                pur.append(purity(rho_rec))
            print(f"{pitch:6.3f} {n:8d} {np.mean(l2):10.4e} {np.std(l2):9.2e} {np.mean(fid):8.4f} "
                  f"{min(pur):8.4f}..{max(pur):.4f}")


if __name__ == "__main__":
    main()
