"""Purity, fidelity to the coherent state and fringe visibility versus decoherence rate.

Compares the which-side observable (default) with the plain position kernel
exp(-lam (x - x')^2), and checks visibility after a noiseless reconstruction.

    python3 scripts/decoherence_sweep.py --lams 0 0.1 1 3 10 30
"""

import argparse
import math

import numpy as np

from phasetomo.phase_space import GridSpec, decohere, density_from_wavefunction, make_double_slit, marginal, purity, wigner_from_density
from phasetomo.tomography import Sinogram, fidelity, fringe_visibility, reconstruct


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--lams", type=float, nargs="+", default=[0.0, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0])
    ap.add_argument("--angles", type=int, default=64)
    args = ap.parse_args()

    grid = GridSpec(256, 12.0)
    pure = density_from_wavefunction(make_double_slit(grid, 10, 1.0))
    thetas = np.linspace(-math.pi / 2, math.pi / 2, args.angles)
    print(f"{'observable':>10} {'lam':>6} {'purity':>8} {'F(pure)':>8} {'V truth':>9} {'V recon':>9}")
    for observable in ("which_side", "position"):
        for lam in args.lams:
            rho = decohere(pure, lam, observable)
            w = wigner_from_density(rho)
            w_rec, _, _ = reconstruct(Sinogram(tuple(marginal(w, t) for t in thetas)), grid.dx)
            print(f"{observable:>10} {lam:6.2f} {purity(rho):8.5f} {fidelity(rho, pure):8.5f} "
                  f"{fringe_visibility(marginal(w, math.pi / 2), 10.0):9.2e} "
                  f"{fringe_visibility(marginal(w_rec, math.pi / 2), 10.0):9.2e}")


if __name__ == "__main__":
    main()
