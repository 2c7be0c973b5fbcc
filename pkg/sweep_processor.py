"""Batch RIR computation over a range of odd network sizes."""

import logging
from dataclasses import dataclass, fields, replace
from functools import partial
from typing import List, Optional

from complexpoly import RationalFn
from config_reader import AnalysisSettings
from cyclicnet import CyclicNetwork
from errors import CycrirError, ValidationError
from rirbounds import _map, rir_report

logger = logging.getLogger(__name__)

BASE_COLUMNS = ["n", "rho_p", "rho_plus", "rho_upper_homogeneous", "rho_c_estimate", "nominal_unstable"]
FIRST_ORDER_COLUMNS = ["closed_form_first_order", "norm_based_first_order"]


@dataclass(frozen=True)
class SweepRow:
    """One network size. Radii stay None when the nominal network is not strictly unstable."""

    n: int
    nominal_unstable: bool = False
    rho_p: Optional[float] = None
    rho_plus: Optional[float] = None
    rho_upper_homogeneous: Optional[float] = None
    rho_c_estimate: Optional[float] = None
    closed_form_first_order: Optional[float] = None
    norm_based_first_order: Optional[float] = None
    error: Optional[str] = None

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _sweep_row(n: int, h: RationalFn, mu: float, settings: AnalysisSettings) -> SweepRow:
    try:
        net = CyclicNetwork(n=n, mu=mu, h=h)
        report = rir_report(net, settings)
    except CycrirError as exc:
        return SweepRow(n=n, error=f"{exc.kind}: {exc}")
    except Exception as exc:
        logger.debug("n=%d failed unexpectedly", n, exc_info=True)
        return SweepRow(n=n, error=f"internal: {type(exc).__name__}: {exc}")
    if not report.nominal.is_strictly_unstable:
        return SweepRow(n=n)
    return SweepRow(
        n=n,
        nominal_unstable=True,
        rho_p=report.rho_p,
        rho_plus=report.rho_plus,
        rho_upper_homogeneous=report.rho_upper_homogeneous,
        rho_c_estimate=report.rho_c_estimate,
        closed_form_first_order=report.closed_form_first_order,
        norm_based_first_order=report.norm_based_first_order,
    )


class SweepProcessor:
    """Compute RIR rows for every odd n in a range of network sizes."""

    def __init__(self, settings: Optional[AnalysisSettings] = None):
        self.settings = settings or AnalysisSettings()

    def odd_sizes(self, n_min: int, n_max: int) -> List[int]:
        """Odd n in [n_min, n_max] with n >= 3; empty when n_min > n_max."""
        if int(n_min) != n_min or int(n_max) != n_max:
            raise ValidationError("n range bounds must be integers")
        start = max(int(n_min), 3)
        if start % 2 == 0:
            start += 1
        return list(range(start, int(n_max) + 1, 2))

    def columns(self, h: RationalFn) -> List[str]:
        """CSV header for this agent; first-order lags carry the closed-form columns."""
        probe = CyclicNetwork(n=3, mu=1.0, h=h)
        extra = FIRST_ORDER_COLUMNS if probe.first_order() is not None else []
        return BASE_COLUMNS + extra + ["error"]

    def process_sweep(self, h: RationalFn, mu: float, n_values: List[int]) -> List[SweepRow]:
        """One row per n, in order. A failing n yields a row with ``error`` set and the sweep goes on.

        With more than one worker the rows are spread over processes and each
        row runs its own searches serially.
        """
        total = len(n_values)
        if total == 0:
            logger.info("No network sizes to process.")
            return []
        logger.info("Sweeping %d network size(s), mu=%g", total, mu)

        workers = self.settings.workers
        row_settings = replace(self.settings, workers=1) if workers > 1 and total > 1 else self.settings
        rows = _map(partial(_sweep_row, h=h, mu=mu, settings=row_settings), list(n_values), workers)

        for i, row in enumerate(rows, 1):
            if row.error:
                logger.warning("[%d/%d] failed n=%d: %s", i, total, row.n, row.error)
            elif row.nominal_unstable:
                logger.info("[%d/%d] n=%d rho_p=%.8g rho_plus=%.8g", i, total, row.n, row.rho_p, row.rho_plus)
            else:
                logger.info("[%d/%d] n=%d nominal not strictly unstable", i, total, row.n)
        return rows
