"""Effective coefficient P^2 and averaged alpha as the detuning constant varies."""

import numpy as np

from droplet_inverse.droplets import alpha_bar, make_resonance, solve_ball_spectrum


def main():
    spec = solve_ball_spectrum()
    print(f"{'c_n0':>8} {'P^2':>10} {'alpha_bar':>10} {'omega^2':>8}")
    for c in -np.geomspace(2.0, 0.05, 8):
        try:
            p = make_resonance(spec, c_n0=c, k0=0.25, rho1=10.0, a=1 / 16, h=0.0)
        except ValueError as exc:
            print(f"{c:8.3f} rejected: {exc}")
            continue
        print(f"{c:8.3f} {p.P_sq:10.4g} {alpha_bar(p, spec):10.4g} {p.omega_sq:8.4f}")


if __name__ == "__main__":
    main()
