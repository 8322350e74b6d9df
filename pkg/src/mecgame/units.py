"""Unit conversions between native input units and internal SI.

Everything inside the package is SI: tasks/second, cycles, bits, hertz
(cycles/second for CPU rates), watts, joules, seconds, dollars/cycle,
dollars/second.  Scenario files and CLI flags use the native units their
field names carry; conversion happens exactly once, at ingestion.
"""


def tasks_per_min_to_si(value):
    """tasks/minute -> tasks/second."""
    return value / 60.0


def mcycles_to_si(value):
    """megacycles -> cycles."""
    return value * 1e6


def kbits_to_si(value):
    """kilobits -> bits (K = 1000)."""
    return value * 1e3


def mhz_to_si(value):
    """MHz -> Hz (or Mcycles/s -> cycles/s)."""
    return value * 1e6


def ghz_to_si(value):
    """GHz -> Hz (or Gcycles/s -> cycles/s)."""
    return value * 1e9


def gbps_to_si(value):
    """Gbit/s -> bit/s."""
    return value * 1e9


def db_to_linear(value_db):
    """dB -> linear power gain."""
    return 10.0 ** (value_db / 10.0)


def usd_per_gcycle_to_si(value):
    """$/Gcycle -> $/cycle."""
    return value * 1e-9


def si_to_usd_per_gcycle(value):
    """$/cycle -> $/Gcycle."""
    return value * 1e9


def mw_to_si(value):
    """milliwatts -> watts."""
    return value * 1e-3
