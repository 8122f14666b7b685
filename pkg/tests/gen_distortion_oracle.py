"""Generate frozen high-precision oracle values for distortion coefficients.

Run from the repository root:

    python tests/gen_distortion_oracle.py

Writes ``tests/data/distortion_oracle.npz`` holding tau and sigma on a
10^4-point (K, N, t, theta) grid plus the finite-difference derivative
coefficients on the matching (K, N, theta) grid. Infinite values are stored
as ``inf``; combinations outside the domain as ``nan``. The test suite
compares the library's closed forms against this file; it never recomputes
the oracle at test time.
"""

from __future__ import annotations

import pathlib

import numpy as np

from oracles import sigma_hp, sigma_tilde_fd, tau_hp, tau_tilde_fd

K_GRID = np.array([-2.0, -1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0, 2.0, 4.0])
N_GRID = np.array([1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 7.0, 10.0, 20.0, 50.0])
T_GRID = np.array([0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95])
THETA_GRID = np.array([0.05, 0.2, 0.5, 0.8, 1.2, 1.7, 2.2, 2.6, 2.9, 3.1])


def main():
    shape4 = (len(K_GRID), len(N_GRID), len(T_GRID), len(THETA_GRID))
    tau = np.empty(shape4)
    sigma = np.empty(shape4)
    for a, K in enumerate(K_GRID):
        for b, N in enumerate(N_GRID):
            for c, t in enumerate(T_GRID):
                for e, theta in enumerate(THETA_GRID):
                    tau[a, b, c, e] = float(tau_hp(K, N, t, theta))
                    sigma[a, b, c, e] = float(sigma_hp(K, N, t, theta))

    shape3 = (len(K_GRID), len(N_GRID), len(THETA_GRID))
    tau_tilde = np.empty(shape3)
    sigma_tilde = np.empty(shape3)
    for a, K in enumerate(K_GRID):
        for b, N in enumerate(N_GRID):
            for e, theta in enumerate(THETA_GRID):
                # The derivative coefficients blow up at the domain edge; the
                # finite difference needs tau(1 - s) finite.
                try:
                    tau_tilde[a, b, e] = float(tau_tilde_fd(K, N, theta))
                except (ValueError, ZeroDivisionError):
                    tau_tilde[a, b, e] = np.nan
                try:
                    sigma_tilde[a, b, e] = float(sigma_tilde_fd(K, N, theta))
                except (ValueError, ZeroDivisionError):
                    sigma_tilde[a, b, e] = np.nan

    out = pathlib.Path(__file__).parent / "data" / "distortion_oracle.npz"
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        out,
        K=K_GRID,
        N=N_GRID,
        t=T_GRID,
        theta=THETA_GRID,
        tau=tau,
        sigma=sigma,
        tau_tilde=tau_tilde,
        sigma_tilde=sigma_tilde,
        fd_step=np.array(1e-12),
    )
    print(f"wrote {out} ({out.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
