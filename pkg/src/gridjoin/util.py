"""Small shared helpers: seed derivation and hardware introspection."""

from __future__ import annotations

import os

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixer; stable across platforms and versions."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master: int, stream: int) -> int:
    """Deterministic 64-bit sub-seed for stream index `stream`."""
    s = master & _MASK64
    for _ in range(stream + 1):
        s = splitmix64(s)
    return s


def physical_core_count() -> int:
    """Physical core count when detectable, else 4.

    Hyperthread siblings share execution resources, so pools are sized by
    physical cores, not logical CPUs.
    """
    try:
        cores = set()
        with open("/proc/cpuinfo") as f:
            phys = core = None
            for line in f:
                if line.startswith("physical id"):
                    phys = line.split(":")[1].strip()
                elif line.startswith("core id"):
                    core = line.split(":")[1].strip()
                elif not line.strip():
                    if phys is not None and core is not None:
                        cores.add((phys, core))
                    phys = core = None
            if phys is not None and core is not None:
                cores.add((phys, core))
        if cores:
            return len(cores)
    except OSError:
        pass
    n = os.cpu_count()
    return n if n else 4
