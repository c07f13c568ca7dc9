"""Asymptotic-convergence diagnostics of the normal form on the center manifold.

Norms are taken of ``K~_n``, the degree-``n`` part of the normal form with
``Q1 = P1 = 0``.  Odd degrees vanish, so the ratio criterion compares
consecutive even degrees and takes the square root to keep it per degree.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .normal_form import ResonantNormalForm
from .poly_algebra import polynomial_norm

RATIO_CONVENTION = "sqrt(norm_n / norm_(n-2)) over even degrees"


@dataclass
class ConvergenceReport:
    degrees: list[int]
    norms: list[float]
    root: list[float]
    ratio: list[float]  # NaN where undefined
    optimal_order: int | None = None
    reference_amplitude: float | None = None
    metadata: dict = field(default_factory=dict)

    def rows(self):
        for n, nm, r, q in zip(self.degrees, self.norms, self.root, self.ratio):
            yield {"degree": n, "order": n // 2 - 1, "norm": nm, "root": r, "ratio": q}

    def even_ratios(self) -> list[tuple[int, float]]:
        return [(n, q) for n, q in zip(self.degrees, self.ratio) if not math.isnan(q)]

    def to_csv(self, digits: int = 9) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["degree", "order", "norm", "root", "ratio"])
        fmt = f"{{:.{digits}g}}"
        for row in self.rows():
            w.writerow([row["degree"], row["order"]] + [fmt.format(row[k]) for k in ("norm", "root", "ratio")])
        return buf.getvalue()


def root_value(norm: float, n: int) -> float:
    return norm ** (1.0 / n)


def convergence_report(nf: ResonantNormalForm, reference_amplitude: float | None = None) -> ConvergenceReport:
    """Root and ratio criteria for degrees 3..2N+2.

    The optimal order minimizes ``norm(K~_(2n+2)) * E_ref^(n+1)``: a degree
    ``2n+2`` term scales like the action to the power ``n+1``.
    """
    if nf.order < 2:
        raise ValueError("diagnostics need a normal form of order >= 2")
    degrees = list(range(3, nf.max_degree + 1))
    norms = [polynomial_norm(nf.center_manifold_part(n)) for n in degrees]
    root = [root_value(v, n) for v, n in zip(norms, degrees)]
    by_degree = dict(zip(degrees, norms))
    ratio = []
    for n in degrees:
        prev = by_degree.get(n - 2, 0.0)
        ratio.append(math.sqrt(by_degree[n] / prev) if n % 2 == 0 and prev > 0 else math.nan)
    optimal = None
    if reference_amplitude is not None and reference_amplitude > 0:
        scores = {k: by_degree[2 * k + 2] * reference_amplitude ** (k + 1)
                  for k in range(1, nf.order + 1) if 2 * k + 2 in by_degree}
        optimal = min(scores, key=scores.get)
    return ConvergenceReport(degrees, norms, root, ratio, optimal, reference_amplitude,
                             {"ratio_convention": RATIO_CONVENTION, "point": nf.spec.point,
                              "mu": nf.spec.mu})
