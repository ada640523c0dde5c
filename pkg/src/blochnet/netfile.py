"""Reader for the plain-text network description format.

The format is a sequence of sections, each opened by a bracketed header
and followed by ``key = value`` lines.  Blank lines and ``#`` comments are
ignored.  Sections may repeat::

    [spin]                      # optional flag: values are exchange couplings J

    [chain]
    label = A
    sites = 50
    hopping = 1.0               # optional, default 1

    [joint]
    a = A:50
    b = B:1
    amplitude_re = 0.7071067811865476
    amplitude_im = 0            # optional, default 0

    [potential]
    site = A:50
    value = -1.0

    [flux]
    loop = A:50>B:1..50>C:50..1>A:50
    phi = 0.25
    gauge = single              # optional: single | uniform

Sites are written ``label:local`` with 1-based local indices.  A loop is a
comma-separated list of directed paths ``s1>s2>...``; a site token may be a
range ``B:1..50`` (or descending ``C:50..1``) standing for the run of sites
in between.  Consecutive paths must join up, and the whole loop must close.

Under ``[spin]`` the chain ``hopping`` and joint ``amplitude_re`` values are
exchange constants ``J``; the network is the one-magnon image (``t = -J``).
Flux and potentials are not allowed in a spin file.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .net import ChainSpec, JointSpec, Network, NetworkError, build_network, thread_loop_flux
from .spinmap import SpinNetworkSpec, magnon_to_tbn

__all__ = ["parse_network", "load_network", "parse_site", "parse_loop", "format_network"]

_KEYS = {
    "chain": ({"label", "sites"}, {"hopping"}),
    "joint": ({"a", "b", "amplitude_re"}, {"amplitude_im"}),
    "potential": ({"site", "value"}, set()),
    "flux": ({"loop", "phi"}, {"gauge"}),
    "spin": (set(), set()),
}


def parse_site(token: str) -> tuple:
    label, sep, local = token.strip().rpartition(":")
    if not sep or not label:
        raise NetworkError(f"bad site {token!r}; expected label:index")
    try:
        return label, int(local)
    except ValueError:
        raise NetworkError(f"bad site index in {token!r}") from None


def _expand(token: str) -> list:
    token = token.strip()
    if ".." not in token:
        return [parse_site(token)]
    label, sep, rng = token.rpartition(":")
    lo, _, hi = rng.partition("..")
    try:
        a, b = int(lo), int(hi)
    except ValueError:
        raise NetworkError(f"bad site range {token!r}") from None
    step = 1 if b >= a else -1
    return [(label, j) for j in range(a, b + step, step)]


def parse_loop(text: str) -> list:
    """Directed links ``[((label, i), (label, j)), ...]`` of a loop expression."""
    links = []
    for piece in text.split(","):
        if not piece.strip():
            raise NetworkError("empty link in loop")
        sites = [s for tok in piece.split(">") for s in _expand(tok)]
        if len(sites) < 2:
            raise NetworkError(f"loop piece {piece.strip()!r} has no link")
        links.extend(zip(sites, sites[1:]))
    return links


def _sections(text: str, source: str):
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _KEYS:
                raise NetworkError(f"{source}:{lineno}: unknown section [{name}]")
            current = (name, {}, lineno)
            yield current
            continue
        if current is None:
            raise NetworkError(f"{source}:{lineno}: key outside any section")
        key, eq, value = line.partition("=")
        key = key.strip().lower()
        if not eq:
            raise NetworkError(f"{source}:{lineno}: expected key = value")
        required, optional = _KEYS[current[0]]
        if key not in required | optional:
            raise NetworkError(f"{source}:{lineno}: unknown key {key!r} in [{current[0]}]")
        if key in current[1]:
            raise NetworkError(f"{source}:{lineno}: repeated key {key!r}")
        current[1][key] = value.strip()


def _num(sec: str, key: str, value: str, kind=float):
    try:
        return kind(value)
    except ValueError:
        raise NetworkError(f"[{sec}] {key}: cannot read {value!r} as {kind.__name__}") from None


def parse_network(text: str, gauge: str | None = None, source: str = "<string>") -> Network:
    """Build a :class:`Network` from description text.

    ``gauge``, when given, overrides the gauge named in every ``[flux]``
    section.
    """
    chains, joints, pots, fluxes = [], [], [], []
    spin = False
    for name, kv, lineno in list(_sections(text, source)):
        missing = _KEYS[name][0] - kv.keys()
        if missing:
            raise NetworkError(f"{source}:{lineno}: [{name}] is missing {sorted(missing)}")
        if name == "spin":
            spin = True
        elif name == "chain":
            chains.append((kv["label"], _num(name, "sites", kv["sites"], int),
                           _num(name, "hopping", kv.get("hopping", "1"))))
        elif name == "joint":
            amp = complex(_num(name, "amplitude_re", kv["amplitude_re"]),
                          _num(name, "amplitude_im", kv.get("amplitude_im", "0")))
            joints.append((parse_site(kv["a"]), parse_site(kv["b"]), amp))
        elif name == "potential":
            pots.append((parse_site(kv["site"]), _num(name, "value", kv["value"])))
        else:
            fluxes.append((parse_loop(kv["loop"]), _num(name, "phi", kv["phi"]),
                           kv.get("gauge", "single")))

    if spin:
        if fluxes or pots:
            raise NetworkError("a [spin] network cannot carry flux or potentials")
        if any(a.imag != 0 for _, _, a in joints):
            raise NetworkError("spin exchange couplings must be real")
        spec = SpinNetworkSpec(tuple(chains), tuple((a, b, amp.real) for a, b, amp in joints))
        return magnon_to_tbn(spec)

    net = build_network([ChainSpec(*c) for c in chains],
                        [JointSpec(a, b, amp) for a, b, amp in joints], pots)
    for loop, phi, g in fluxes:
        net = thread_loop_flux(net, loop, phi, gauge or g)
    return net


def load_network(path, gauge: str | None = None) -> Network:
    path = Path(path)
    return parse_network(path.read_text(), gauge, str(path))


def _site(net: Network, u: int) -> str:
    label, local = net.label_of(u)
    return f"{label}:{local}"


def format_network(net: Network, loops=()) -> str:
    """Description text for ``net``; ``loops`` are ``(loop text, phi, gauge)`` to re-thread."""
    out = []
    for c in net.chains:
        out += ["[chain]", f"label = {c.label}", f"sites = {c.n_sites}", f"hopping = {c.hopping!r}", ""]
    for j in net.joints:
        amp = complex(j.amplitude)
        out += ["[joint]", f"a = {j.a[0]}:{j.a[1]}", f"b = {j.b[0]}:{j.b[1]}",
                f"amplitude_re = {amp.real!r}", f"amplitude_im = {amp.imag!r}", ""]
    for u, mu in net.potentials:
        out += ["[potential]", f"site = {_site(net, u)}", f"value = {float(mu)!r}", ""]
    for loop, phi, gauge in loops:
        out += ["[flux]", f"loop = {loop}", f"phi = {phi!r}", f"gauge = {gauge}", ""]
    return "\n".join(out)
