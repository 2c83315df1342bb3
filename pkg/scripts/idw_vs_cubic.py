"""Polar-to-Cartesian assembly: inverse-distance weighting versus cubic polar interpolation.

Noiseless sinograms of the ground state and the double slit, for several angle counts.

    python3 scripts/idw_vs_cubic.py --angles 32 64 128
"""

import argparse
import math

import numpy as np

from phasetomo.phase_space import GridSpec, density_from_wavefunction, make_double_slit, make_gaussian, marginal, wigner_from_density
from phasetomo.tomography import Sinogram, fidelity, reconstruct, wigner_l2_error


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--angles", type=int, nargs="+", default=[32, 64, 128])
    args = ap.parse_args()

    cases = {
        "ground": density_from_wavefunction(make_gaussian(GridSpec(256, 8.0), 0.0, 1 / math.sqrt(2))),
        "double slit": density_from_wavefunction(make_double_slit(GridSpec(256, 12.0), 10, 1.0)),
    }
    print(f"{'state':>12} {'angles':>6} {'method':>6} {'fidelity':>9} {'L2':>9}")
    for name, rho in cases.items():
        w = wigner_from_density(rho)
        for n in args.angles:
            sino = Sinogram(tuple(marginal(w, t) for t in np.linspace(-math.pi / 2, math.pi / 2, n)))
            for method in ("idw", "cubic"):
                w_rec, rho_rec, _ = reconstruct(sino, rho.grid.dx, method=method)
                print(f"{name:>12} {n:6d} {method:>6} {fidelity(rho_rec, rho):9.5f} {wigner_l2_error(w_rec, w):9.2e}")


if __name__ == "__main__":
    main()
