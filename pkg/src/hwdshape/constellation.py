"""Symbol sets, gray labels, and the translation/rotation shaping transform."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PRIOR_TOL = 1e-12
POWER_TOL = 1e-9

# 32-QAM cross: the |I| = 7 column of an 8x4 gray grid folded onto the
# |Q| = 5 rows. Labels chosen by exhaustive search so that nearest neighbours
# differ in at most two bits.
_CROSS32_FOLD = {(-3, -5): 0, (-3, 5): 2, (-1, -5): 1, (-1, 5): 3,
                 (1, -5): 17, (1, 5): 19, (3, -5): 16, (3, 5): 18}


def gray(n):
    return n ^ (n >> 1)


@dataclass(frozen=True, eq=False)
class Constellation:
    """Symbols with integer bit labels and a prior probability vector.

    ``labels[m]`` holds the ``bits_per_symbol``-bit gray label of symbol ``m``
    as an integer; :attr:`label_strings` gives the bit-string form.
    """

    symbols: np.ndarray
    labels: np.ndarray
    priors: np.ndarray = field(default=None)

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=complex).copy()
        lab = np.asarray(self.labels, dtype=np.int64).copy()
        M = s.size
        if M < 2 or M & (M - 1):
            raise ValueError(f"number of symbols must be a power of two >= 2, got {M}")
        if lab.shape != s.shape:
            raise ValueError("labels and symbols differ in length")
        if np.unique(lab).size != M or lab.min() < 0 or lab.max() >= M:
            raise ValueError("labels must be a permutation of 0..M-1")
        p = np.full(M, 1.0 / M) if self.priors is None else np.asarray(self.priors, float).copy()
        if p.shape != s.shape:
            raise ValueError("priors and symbols differ in length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > PRIOR_TOL * M:
            raise ValueError("priors must be a probability vector")
        for a in (s, lab, p):
            a.setflags(write=False)
        object.__setattr__(self, "symbols", s)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "priors", p)

    @property
    def M(self) -> int:
        return self.symbols.size

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.M))

    @property
    def label_strings(self) -> list[str]:
        return [format(int(v), f"0{self.bits_per_symbol}b") for v in self.labels]

    @property
    def energies(self) -> np.ndarray:
        return np.abs(self.symbols) ** 2

    def differences(self) -> np.ndarray:
        """Matrix d[m, n] = x_m - x_n."""
        return self.symbols[:, None] - self.symbols[None, :]

    def with_priors(self, priors) -> Constellation:
        return Constellation(self.symbols, self.labels, priors)

    def with_symbols(self, symbols) -> Constellation:
        return Constellation(symbols, self.labels, self.priors)

    def is_power_feasible(self, cap: float = 1.0) -> bool:
        return distribution_power(self) <= cap + POWER_TOL

    def nearest_neighbor_pairs(self, rtol: float = 1e-9) -> list[tuple[int, int]]:
        d = np.abs(self.differences())
        np.fill_diagonal(d, np.inf)
        dmin = d.min()
        idx = np.argwhere(np.triu(d <= dmin * (1 + rtol), 1))
        return [tuple(map(int, r)) for r in idx]


@dataclass(frozen=True)
class ShapingParams:
    """Translation ``zeta`` and rotation ``theta`` of the A(zeta) R(theta) map."""

    zeta: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.zeta < 1.0:
            raise ValueError(f"zeta must lie in [0, 1), got {self.zeta}")
        if not 0.0 <= self.theta <= 2 * math.pi + 1e-12:
            raise ValueError(f"theta must lie in [0, 2pi], got {self.theta}")

    @property
    def A(self) -> np.ndarray:
        return translation_matrix(self.zeta)

    @property
    def R(self) -> np.ndarray:
        return rotation_matrix(self.theta)

    @property
    def matrix(self) -> np.ndarray:
        return self.A @ self.R

    @property
    def is_identity(self) -> bool:
        return self.zeta == 0.0 and self.theta == 0.0


IDENTITY = ShapingParams()


def translation_matrix(zeta: float) -> np.ndarray:
    return np.diag([math.sqrt(1 + zeta), math.sqrt(1 - zeta)])


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _normalize(points: np.ndarray) -> np.ndarray:
    return points / math.sqrt(np.mean(np.abs(points) ** 2))


def _square_qam(M: int):
    k = int(round(math.sqrt(M)))
    bits = int(math.log2(k))
    lev = 2 * np.arange(k) - (k - 1)
    pts, labs = [], []
    for i, a in enumerate(lev):
        for q, b in enumerate(lev):
            pts.append(complex(a, b))
            labs.append((gray(i) << bits) | gray(q))
    return pts, labs


def _rect_qam8():
    lev_i, lev_q = [-3, -1, 1, 3], [-1, 1]
    pts, labs = [], []
    for i, a in enumerate(lev_i):
        for q, b in enumerate(lev_q):
            pts.append(complex(a, b))
            labs.append((gray(i) << 1) | q)
    return pts, labs


def _pinwheel_qam8():
    # Inner square carries a 2-bit gray cycle; each outer point hangs off one
    # inner corner with the leading bit flipped. Invariant under 90 deg rotation.
    inner = [complex(1, 1), complex(-1, 1), complex(-1, -1), complex(1, -1)]
    cycle = [0b00, 0b01, 0b11, 0b10]
    outer = [complex(3, 1), complex(-1, 3), complex(-3, -1), complex(1, -3)]
    pts = inner + outer
    labs = cycle + [0b100 | c for c in cycle]
    return pts, labs


def _cross_qam32():
    pts, labs = [], []
    lev_i = 2 * np.arange(8) - 7
    lev_q = 2 * np.arange(4) - 3
    for i, a in enumerate(lev_i):
        if abs(a) == 7:
            continue
        for q, b in enumerate(lev_q):
            pts.append(complex(a, b))
            labs.append((gray(i) << 2) | gray(q))
    for (a, b), lab in _CROSS32_FOLD.items():
        pts.append(complex(a, b))
        labs.append(lab)
    return pts, labs


def make_constellation(kind: str, M: int, layout: str | None = None) -> Constellation:
    """Build a unit-power (under uniform priors) gray-labeled constellation.

    Args:
        kind: ``"QAM"``, ``"PSK"`` or ``"PAM"`` (case-insensitive).
        M: constellation order, one of 2, 4, 8, 16, 32, 64.
        layout: only for 8-QAM; ``"pinwheel"`` (default, rotation symmetric)
            or ``"rectangular"`` (4x2 grid).
    """
    kind = kind.upper()
    if M not in (2, 4, 8, 16, 32, 64):
        raise ValueError(f"unsupported order M={M}")
    if kind == "QAM":
        if M == 2:
            return make_constellation("PAM", 2)
        if M == 8:
            layout = (layout or "pinwheel").lower()
            if layout == "pinwheel":
                pts, labs = _pinwheel_qam8()
            elif layout in ("rect", "rectangular"):
                pts, labs = _rect_qam8()
            else:
                raise ValueError(f"unknown 8-QAM layout {layout!r}")
        elif M == 32:
            pts, labs = _cross_qam32()
        else:
            pts, labs = _square_qam(M)
    elif kind == "PSK":
        k = np.arange(M)
        pts = list(np.exp(2j * np.pi * k / M))
        labs = [gray(int(i)) for i in k]
    elif kind == "PAM":
        k = np.arange(M)
        pts = list((2 * k - (M - 1)).astype(complex))
        labs = [gray(int(i)) for i in k]
    else:
        raise ValueError(f"unknown constellation kind {kind!r}")
    return Constellation(_normalize(np.array(pts, dtype=complex)), np.array(labs))


def shape_symbols(symbols, s: ShapingParams) -> np.ndarray:
    x = np.asarray(symbols, dtype=complex)
    c, sn = math.cos(s.theta), math.sin(s.theta)
    rI = x.real * c - x.imag * sn
    rQ = x.real * sn + x.imag * c
    return math.sqrt(1 + s.zeta) * rI + 1j * math.sqrt(1 - s.zeta) * rQ


def apply_shaping(c: Constellation, s: ShapingParams) -> Constellation:
    """Map every symbol through v = A(zeta) R(theta) x; labels and priors are kept."""
    return c.with_symbols(shape_symbols(c.symbols, s))


def unshape_symbols(symbols, s: ShapingParams) -> np.ndarray:
    v = np.asarray(symbols, dtype=complex)
    aI = v.real / math.sqrt(1 + s.zeta)
    aQ = v.imag / math.sqrt(1 - s.zeta)
    c, sn = math.cos(s.theta), math.sin(s.theta)
    return (aI * c + aQ * sn) + 1j * (-aI * sn + aQ * c)


def distribution_power(c: Constellation) -> float:
    return float(np.dot(c.priors, c.energies))


def entropy(p) -> float:
    """Shannon entropy in bits with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def discrete_circularity(c: Constellation) -> float:
    power = distribution_power(c)
    if power <= 0:
        raise ValueError("circularity undefined for a zero-power distribution")
    return float(abs(np.dot(c.priors, c.symbols ** 2)) / power)


CSV_HEADER = ("index", "re", "im", "label", "prior")


def write_csv(c: Constellation, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for m, (x, lab, p) in enumerate(zip(c.symbols, c.label_strings, c.priors)):
            w.writerow([m, repr(float(x.real)), repr(float(x.imag)), lab, repr(float(p))])


def read_csv(path) -> Constellation:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["index"]))
    return Constellation(
        np.array([complex(float(r["re"]), float(r["im"])) for r in rows]),
        np.array([int(r["label"], 2) for r in rows]),
        np.array([float(r["prior"]) for r in rows]),
    )
