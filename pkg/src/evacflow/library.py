"""Built-in floor plans used by the oracle suite, tests and examples.

Each ``*_mask`` returns mask rows (top row first); ``builtin`` wraps one
into a Scenario with cell sizes chosen so the INSIDE region has the
stated physical extent.
"""

from __future__ import annotations

from .scenario import Scenario


def strip_mask(nx: int, ny: int | None = None) -> list[str]:
    """(0, 1) x (0, 0.5) with the whole right edge an exit."""
    ny = nx // 2 if ny is None else ny
    return ["." * nx + "E"] * ny


def square_room_mask(n: int = 64) -> list[str]:
    """Unit room, one exit of width 1/4 centered on the right wall."""
    lo, hi = 3 * n // 8, 5 * n // 8
    return ["." * n + ("E" if lo <= r < hi else "#") for r in range(n)]


def two_exit_room_mask(nx: int, ny: int) -> list[str]:
    """Both short walls are exits; the mid column is the stagnation line."""
    return ["E" + "." * nx + "E" for _ in range(ny)]


def l_room_mask(n: int = 32) -> list[str]:
    """L-shaped room (one concave corner), exit at the end of the short leg."""
    h = n // 2
    rows = []
    for r in range(n):
        if r < h:
            rows.append("." * h + "#" * (h + 1))
        else:
            rows.append("." * n + ("E" if r >= n - n // 4 else "#"))
    return rows


def pillar_room_mask(n: int = 32) -> list[str]:
    """Room with a square pillar in the middle and exits on the left and top."""
    a, b = 3 * n // 8, 5 * n // 8
    top = "#" + "#" * (n // 4) + "E" * (n // 4) + "#" * (n - n // 2)
    rows = [top]
    for r in range(n):
        left = "E" if n // 2 <= r < n // 2 + n // 8 else "#"
        rows.append(left + "".join("#" if a <= r < b and a <= c < b else "." for c in range(n)))
    return rows


def corridor_mask(nx: int = 48, ny: int = 8) -> list[str]:
    """Long corridor, exits at both ends of different widths."""
    rows = []
    for r in range(ny):
        left = "E" if r < ny // 2 else "#"
        rows.append(left + "." * nx + "E")
    return rows


def builtin(name: str, n: int | None = None, **kw) -> Scenario:
    """Scenario for a named floor plan; ``kw`` overrides scenario fields."""
    if name == "strip":
        nx = n or 64
        m = strip_mask(nx)
        sc = Scenario(mask=tuple(m), hx=1.0 / nx, hy=0.5 / (nx // 2))
    elif name == "square_room":
        n = n or 64
        sc = Scenario(mask=tuple(square_room_mask(n)), hx=1.0 / n, hy=1.0 / n)
    elif name == "two_exit_room":
        nx = n or 31
        ny = (nx - 1) // 2
        sc = Scenario(mask=tuple(two_exit_room_mask(nx, ny)), hx=2.0 / nx, hy=1.0 / ny)
    elif name == "l_room":
        n = n or 32
        sc = Scenario(mask=tuple(l_room_mask(n)), hx=1.0 / n, hy=1.0 / n)
    elif name == "pillar_room":
        n = n or 32
        sc = Scenario(mask=tuple(pillar_room_mask(n)), hx=1.0 / n, hy=1.0 / n)
    elif name == "corridor":
        nx = n or 48
        sc = Scenario(mask=tuple(corridor_mask(nx, max(nx // 6, 2))), hx=3.0 / nx, hy=3.0 / nx)
    else:
        raise KeyError(f"unknown builtin scenario {name!r}")
    return sc.replace(**kw) if kw else sc


BUILTINS = ("strip", "square_room", "two_exit_room", "l_room", "pillar_room", "corridor")
