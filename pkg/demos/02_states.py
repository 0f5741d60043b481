#!/usr/bin/env python3
"""Build the states the protocol manipulates: Bell pairs, four-branch
qudit pairs, and the W state used for multiplexed verification."""

import numpy as np

from maqmsim import (
    CellAddress,
    DensityMatrix,
    MemoryId,
    atom_mode,
    bin_mode,
    fidelity,
    make_bell_pair,
    make_qudit_pair,
    signal_mode,
    state_fidelity,
    w_state,
)


def mode_name(label):
    if isinstance(label.address, int):
        return f"{label.kind.value}[{label.address}]"
    return f"{label.kind.value}({label.address.x},{label.address.y})"


def main():
    up = CellAddress(MemoryId.MAQM1, 1, 1)
    down = CellAddress(MemoryId.MAQM1, 1, 2)
    photon = [signal_mode(up), signal_mode(down)]
    atoms = [atom_mode(up), atom_mode(down)]

    print("Two-branch write: (|U>|U> + e^{i phi} |D>|D>) / sqrt(2)")
    bell = make_bell_pair(photon, atoms, relative_phase=0.0)
    for element, amp in zip(bell.basis, bell.amplitudes):
        names = " x ".join(mode_name(m) for m in element)
        print(f"  {names:<30}  {amp.real:+.6f}{amp.imag:+.6f}j")

    # a pure state is self-consistent: overlap with itself is 1
    rho = bell.to_density()
    print(f"  <bell|rho|bell> = {fidelity(rho, bell):.12f}")

    shifted = make_bell_pair(photon, atoms, relative_phase=np.pi / 3)
    print(f"  overlap with phase-shifted copy: {fidelity(rho, shifted):.6f}"
          f"  (expected cos^2(pi/6) = {np.cos(np.pi / 6) ** 2:.6f})")

    print()
    print("Four-branch qudit pair, one branch per time bin")
    cells = [CellAddress(MemoryId.MAQM1, 2 + x, 2 + y)
             for x in range(2) for y in range(2)]
    qudit = make_qudit_pair([bin_mode(k) for k in range(4)],
                            [atom_mode(c) for c in cells])
    print(f"  {len(qudit.basis)} basis elements, nonzero amplitudes all"
          f" {max(abs(qudit.amplitudes)):.6f} = 1/2")

    print()
    print("W state over 4 bins")
    w4 = w_state(4)
    print(f"  amplitudes all {w4.amplitudes[0].real:.6f} = 1/sqrt(4)")
    rho_w = w4.to_density()
    print(f"  Uhlmann fidelity with itself: {state_fidelity(rho_w, rho_w):.12f}")

    # mixing with the maximally mixed state dilutes fidelity linearly
    d = len(w4.basis)
    for p in (1.0, 0.9, 0.5):
        mixed = DensityMatrix(
            rho_w.basis,
            p * rho_w.entries + (1 - p) * np.eye(d) / d,
        )
        expected = p + (1 - p) / d
        print(f"  p={p:.1f} mixture: F_W = {fidelity(mixed, w4):.6f}"
              f"  (expected {expected:.6f})")


if __name__ == "__main__":
    main()
