"""Packed-array layout and status codes shared by the kernel twins.

The compiled kernel duplicates these as compile-time constants; the
backend-equivalence tests would catch any drift immediately.
"""

DEV_LAM = 0
DEV_C = 1
DEV_Z = 2
DEV_FMD = 3
DEV_EPSL = 4
DEV_EPSTX = 5
DEV_DMAX = 6
DEV_EMAX = 7
DEV_PMAX = 8
DEV_THD = 9
DEV_THE = 10
DEV_THP = 11
DEV_R = 12
DEV_S2 = 13
DEV_LEN = 14

STATUS_OK = 0
STATUS_SATURATED = 1

SOLVE_OK = 0
SOLVE_INFEASIBLE = 1
SOLVE_NO_CONVERGENCE = 2
