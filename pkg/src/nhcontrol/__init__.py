"""Control toolkit for fully controllable three-atom unit cells.

Conventions: energies in E_u, times in hbar/E_u, hbar = 1. Register basis
index ``x = sum_r x_r 2**r`` with atom ``i`` storing bit ``i - 1``.
"""

__version__ = "0.1.0"
