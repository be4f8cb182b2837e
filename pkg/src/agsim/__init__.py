"""Trotterized adiabatic preparation of Hubbard ground states on honeycomb lattices.

Modules: ``lattice`` (geometry and snake qubit map), ``fermion`` (Jordan-Wigner
operators and exact diagonalization), ``gates``, ``netcompile`` (fermionic
swap schedules), ``sim`` (statevector and MPS backends), ``prep`` (Slater
determinants), ``evolve``, ``measure`` and ``cli``.
"""

__version__ = "0.1.0"
