"""Extended FCIDUMP text format for NEO integral sets.

Header::

    &NEO NELEC=2, NPROT_A=1, NPROT_B=0, NORB_E=2, NORB_P=4, ECORE=0.0
    &END

then one record per line, ``value p q r s BLOCK`` with 1-based indices and
``BLOCK`` one of EE, PP, EP (two-body), HE, HP (core one-body, ``r = s = 0``),
OVE, OVP (overlap, optional; identity when absent).  A row ``value 0 0 0 0``
(with or without a block tag) carries the core energy and overrides ECORE.
Two-body values are plain Coulomb integrals; the electron-proton sign comes
from the species charges at Hamiltonian build time.
"""

from __future__ import annotations

import itertools
import re
from pathlib import Path

import numpy as np

from .integrals import IntegralSet

BLOCKS = ("EE", "PP", "EP", "HE", "HP", "OVE", "OVP")
CONFLICT_TOL = 1e-10


class FCIDumpError(ValueError):
    """Malformed record; ``line`` is 1-based."""

    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


class IncompleteIntegralSet(ValueError):
    pass


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def export_integrals(ints: IntegralSet, path: str | Path, tol: float = 0.0) -> None:
    """Write the unique elements of every block (``|value| > tol``)."""
    ne = ints.norb("e")
    npr = ints.norb("p")
    na_e, nb_e = ints.n_particles.get("e", (0, 0))
    na_p, nb_p = ints.n_particles.get("p", (0, 0))
    lines = [f"&NEO NELEC={na_e + nb_e}, MS2_E={na_e - nb_e}, NPROT_A={na_p}, NPROT_B={nb_p}, "
             f"NORB_E={ne}, NORB_P={npr}, ECORE={_fmt(ints.e_core)}", "&END"]

    def two_body(tag, g, same):
        n1, n2 = g.shape[0], g.shape[2]
        for i, j in itertools.combinations_with_replacement(range(n1), 2):
            for k, l in itertools.combinations_with_replacement(range(n2), 2):
                if same and (k, l) < (i, j):
                    continue
                v = g[j, i, l, k]
                if abs(v) > tol:
                    lines.append(f"{_fmt(v)} {j + 1} {i + 1} {l + 1} {k + 1} {tag}")

    def one_body(tag, m):
        for i, j in itertools.combinations_with_replacement(range(m.shape[0]), 2):
            if abs(m[j, i]) > tol:
                lines.append(f"{_fmt(m[j, i])} {j + 1} {i + 1} 0 0 {tag}")

    for key, tag in (("e", "E"), ("p", "P")):
        if key not in ints.h:
            continue
        two_body(tag * 2, ints.eri[(key, key)], True)
        one_body("H" + tag, ints.h[key])
        if key in ints.s:
            one_body("OV" + tag, ints.s[key])
    if ("e", "p") in ints.eri:
        two_body("EP", ints.eri[("e", "p")], False)
    lines.append(f"{_fmt(ints.e_core)} 0 0 0 0")
    Path(path).write_text("\n".join(lines) + "\n")


_HEADER_ITEM = re.compile(r"([A-Z_0-9]+)\s*=\s*([^,\s]+)")


def _parse_header(text: str) -> dict[str, str]:
    return dict(_HEADER_ITEM.findall(text.upper()))


def import_integrals(path: str | Path) -> IntegralSet:
    """Read an extended FCIDUMP file, completing index symmetry and checking duplicates."""
    raw = Path(path).read_text().splitlines()
    header, body_start = [], None
    for n, line in enumerate(raw):
        header.append(line)
        if line.strip().upper().startswith(("&END", "/")):
            body_start = n + 1
            break
    if body_start is None or not header[0].strip().upper().startswith("&NEO"):
        raise FCIDumpError("missing &NEO ... &END header", 1)
    hd = _parse_header(" ".join(header))
    try:
        ne, npr = int(hd["NORB_E"]), int(hd.get("NORB_P", 0))
        nelec = int(hd["NELEC"])
        ms2 = int(hd.get("MS2_E", nelec % 2))
        na_p, nb_p = int(hd.get("NPROT_A", 0)), int(hd.get("NPROT_B", 0))
        e_core = float(hd.get("ECORE", 0.0))
    except KeyError as err:
        raise FCIDumpError(f"header lacks {err.args[0]}", 1) from None
    except ValueError as err:
        raise FCIDumpError(f"bad header value ({err})", 1) from None
    if (nelec + ms2) % 2:
        raise FCIDumpError("NELEC and MS2_E have different parity", 1)

    shape = {"EE": (ne,) * 4, "PP": (npr,) * 4, "EP": (ne, ne, npr, npr),
             "HE": (ne, ne), "HP": (npr, npr), "OVE": (ne, ne), "OVP": (npr, npr)}
    data = {b: np.full(shape[b], np.nan) for b in BLOCKS}
    seen = {b: False for b in BLOCKS}

    def store(block, idx, v, lineno):
        arr = data[block]
        old = arr[idx]
        if not np.isnan(old) and abs(old - v) > CONFLICT_TOL:
            raise FCIDumpError(f"{block}{tuple(i + 1 for i in idx)} = {v!r} conflicts with {old!r}", lineno)
        arr[idx] = v

    for lineno, line in enumerate(raw[body_start:], start=body_start + 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        f = s.split()
        if len(f) not in (5, 6):
            raise FCIDumpError(f"expected 'value p q r s BLOCK', got {len(f)} fields", lineno)
        try:
            v = float(f[0])
            p, q, r, t = (int(x) for x in f[1:5])
        except ValueError:
            raise FCIDumpError(f"cannot parse numbers in {s!r}", lineno) from None
        block = f[5].upper() if len(f) == 6 else None
        if (p, q, r, t) == (0, 0, 0, 0):
            e_core = v
            continue
        if block is None:
            raise FCIDumpError("record without BLOCK tag", lineno)
        if block not in BLOCKS:
            raise FCIDumpError(f"unknown block {block!r}", lineno)
        dims = shape[block]
        if len(dims) == 2:
            if (r, t) != (0, 0):
                raise FCIDumpError(f"one-body block {block} needs r = s = 0", lineno)
            idx = (p - 1, q - 1)
        else:
            idx = (p - 1, q - 1, r - 1, t - 1)
        if any(not 0 <= i < d for i, d in zip(idx, dims)):
            raise FCIDumpError(f"index out of range for {block} with shape {dims}", lineno)
        seen[block] = True
        if len(idx) == 2:
            i, j = idx
            store(block, (i, j), v, lineno)
            store(block, (j, i), v, lineno)
        else:
            i, j, k, l = idx
            perms = [(i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k)]
            if block != "EP":
                perms += [(k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)]
            for pidx in perms:
                store(block, pidx, v, lineno)

    required = ["EE", "HE"] + (["PP", "HP", "EP"] if npr else [])
    missing = [b for b in required if not seen[b]]
    if missing:
        raise IncompleteIntegralSet(f"{path}: missing blocks {missing}")
    for b in BLOCKS:
        arr = data[b]
        if b in ("OVE", "OVP") and not seen[b]:
            arr[...] = np.eye(arr.shape[0])
        else:
            arr[np.isnan(arr)] = 0.0  # unlisted elements are zero

    s = {"e": data["OVE"]}
    h = {"e": data["HE"]}
    eri = {("e", "e"): data["EE"]}
    n_particles = {"e": ((nelec + ms2) // 2, (nelec - ms2) // 2)}
    if npr:
        s["p"], h["p"] = data["OVP"], data["HP"]
        eri[("p", "p")], eri[("e", "p")] = data["PP"], data["EP"]
        n_particles["p"] = (na_p, nb_p)
    out = IntegralSet(s, h, eri, e_core, n_particles)
    out.check()
    return out
