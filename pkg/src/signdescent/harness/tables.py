"""Bound tables and Monte-Carlo bound validation as CSV.

Both files use a long format: one row per grid cell, a ``table`` column
naming the grid, and empty cells for parameters a grid does not use.

Grids of :func:`emit_bound_tables`:

* ``gauss``, ``gauss-improved``: ``abs_g`` in {0.01, 0.1, 1, 10} x ``sigma`` in {0.1, 1, 10}
* ``chebyshev``: ``mu`` in {0.1, 1}, ``sigma`` in {0.1, 1, 10}, ``tau`` in {1, 2, 5, 8, 32, 128}
* ``clt``: as chebyshev, with ``nu`` = the Gaussian value ``sigma (2 sqrt(2/pi))^(1/3)``
* ``required-minibatch``: ``mu`` x ``sigma`` as above with the Gaussian ``nu``
* ``beta``: ``I(p; l, l)`` for ``p`` in {0.05, ..., 0.95} and ``l`` in 1..8
* ``hoeffding``: ``1 - exp(-(2 rho - 1)^2 l)`` for ``rho`` in {0.55, ..., 0.95}, ``M`` in 1..16
* ``sandwich``: ``rho_M / l1`` ratio with every ``rho_i = rho`` (``lower`` is the
  Hoeffding factor, ``upper`` is 1), ``rho`` in {0.55, ..., 0.95, 1}, ``M`` in 1..16
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .. import __version__
from ..core import RandomSource
from ..probes import gaussian_spb_grid, probe_point
from ..problems import minibatch, quadratic_problem, rosenbrock, RosenbrockComponentOracle
from ..special import (
    MomentEstimates,
    chebyshev_spb_bound,
    clt_spb_bound,
    gauss_spb_bound,
    hoeffding_speedup_bound,
    improved_gauss_spb_bound,
    reg_inc_beta_symmetric,
    required_minibatch,
    rho_m_norm,
    vote_count,
)

TABLE_COLUMNS = ("table", "abs_g", "mu", "sigma", "nu", "tau", "p", "rho", "M", "l", "lower", "value", "upper")
VALIDATION_COLUMNS = ("setting", "coordinate", "abs_g", "sigma", "tau", "bound", "value", "empirical",
                      "half_width", "margin", "passed", "informative")

# third absolute central moment of N(0, 1)
GAUSS_THIRD_ABS = 2.0 * math.sqrt(2.0 / math.pi)


def _row(table: str, **vals) -> dict:
    row = {c: "" for c in TABLE_COLUMNS}
    row["table"] = table
    row.update(vals)
    return row


def _cell(v) -> str:
    if v == "" or isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def bound_table_rows() -> list:
    rows = []
    for a in (0.01, 0.1, 1.0, 10.0):
        for s in (0.1, 1.0, 10.0):
            rows.append(_row("gauss", abs_g=a, sigma=s, value=gauss_spb_bound(a, s)))
            rows.append(_row("gauss-improved", abs_g=a, sigma=s, value=improved_gauss_spb_bound(a, s)))
    nu_factor = GAUSS_THIRD_ABS ** (1.0 / 3.0)
    for mu in (0.1, 1.0):
        for s in (0.1, 1.0, 10.0):
            nu = s * nu_factor
            for tau in (1, 2, 5, 8, 32, 128):
                rows.append(_row("chebyshev", mu=mu, sigma=s, tau=tau, value=chebyshev_spb_bound(mu, s * s, tau)))
                rows.append(_row("clt", mu=mu, sigma=s, nu=nu, tau=tau, value=clt_spb_bound(mu, s, nu, tau)))
            rows.append(_row("required-minibatch", mu=mu, sigma=s, nu=nu,
                             value=required_minibatch(MomentEstimates(mu, s * s, nu**3))))
    for l in range(1, 9):
        for p in np.round(np.arange(0.05, 0.96, 0.05), 2):
            rows.append(_row("beta", p=float(p), l=l, value=reg_inc_beta_symmetric(float(p), l)))
    rhos = [float(r) for r in np.round(np.arange(0.55, 0.96, 0.05), 2)]
    for rho in rhos:
        for M in range(1, 17):
            rows.append(_row("hoeffding", rho=rho, M=M, l=vote_count(M), value=hoeffding_speedup_bound(rho, M)))
    g = np.array([1.0, -2.0, 0.5, 3.0])
    l1 = float(np.sum(np.abs(g)))
    for rho in rhos + [1.0]:
        for M in range(1, 17):
            ratio = rho_m_norm(g, np.full(g.shape, rho), M) / l1
            rows.append(_row("sandwich", rho=rho, M=M, l=vote_count(M),
                             lower=hoeffding_speedup_bound(rho, M), value=ratio, upper=1.0))
    return rows


def _write(path: Path, columns, rows: list, comments: list) -> Path:
    path = Path(path)
    lines = [f"# signdescent {__version__}"] + comments + [",".join(columns)]
    lines += [",".join(_cell(r[c]) for c in columns) for r in rows]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_bound_tables(path) -> Path:
    """Write every grid of :func:`bound_table_rows` to ``path``."""
    return _write(path, TABLE_COLUMNS, bound_table_rows(),
                  ["# table = bound-tables", "# Gaussian nu = sigma * (2 sqrt(2/pi))^(1/3)"])


def bound_validation_rows(samples: int = 100_000, seed: int = 0) -> list:
    """Empirical success probabilities next to the lower bounds they should respect.

    Gaussian cells compare with both Gauss bounds; the two probe points (a
    noisy quadratic and the Rosenbrock component oracle with mini-batch 8)
    add the moment-based Chebyshev and CLT bounds.  Rows whose bound cannot
    be violated (at or below 1/2, or Gauss bounds for a biased oracle) carry
    ``informative = 0``.  ``margin = empirical + half_width - bound``.
    """
    rng = RandomSource(seed)
    rows = []
    grid = gaussian_spb_grid((0.1, 1.0, 10.0), (0.1, 1.0, 10.0), samples, rng.spawn(0))
    for c in grid:
        for name, bound in (("gauss", c.gauss), ("gauss-improved", c.improved)):
            margin = c.rho_hat + c.half_width - bound
            rows.append(dict(setting=f"gaussian-{name}", coordinate="", abs_g=c.abs_g, sigma=c.sigma, tau="",
                             bound=name, value=bound, empirical=c.rho_hat, half_width=c.half_width,
                             margin=margin, passed=int(margin >= 0), informative=1))
    obj, oracle = quadratic_problem(np.linspace(0.5, 2.0, 4), 1.0)
    points = [("quadratic", obj, oracle, obj.initial_point(), 1)]
    ros = rosenbrock(10)
    points.append(("rosenbrock", ros, minibatch(RosenbrockComponentOracle(ros, 1.0), 8), np.zeros(10), 8))
    probe_n = min(samples, 20_000)
    for j, (name, o, orc, x, tau) in enumerate(points):
        report = probe_point(o, orc, x, probe_n, rng.spawn(1, j))
        g = o.gradient(x)
        for chk in report.checks:
            m = report.moments[chk.coordinate]
            rows.append(dict(setting=name, coordinate=chk.coordinate, abs_g=abs(float(g[chk.coordinate])),
                             sigma=math.sqrt(m.variance), tau=tau, bound=chk.name, value=chk.bound,
                             empirical=chk.empirical, half_width=chk.half_width, margin=chk.margin,
                             passed=int(chk.passed), informative=int(chk.informative)))
    return rows


def emit_bound_validation(path, samples: int = 100_000, seed: int = 0) -> Path:
    return _write(path, VALIDATION_COLUMNS, bound_validation_rows(samples, seed),
                  [f"# table = bound-validation", f"# samples = {samples}", f"# seed = {seed}",
                   "# half_width = 3 sqrt(p (1 - p) / N)"])
