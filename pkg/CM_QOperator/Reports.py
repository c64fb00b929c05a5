########################################################################
## IMPORTS
########################################################################
import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional

import jsonschema

from . import __version__
from .Errors import ConfigError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "report-v1"
SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "Config", "report-v1.schema.json")
SWEEP_COLUMNS = ("axis", "value", "check", "residual", "tolerance", "passed", "mu_xi", "error")


########################################################################
## CHECKS
########################################################################
@dataclass
class CheckResult:
    '''
    One named residual against its tolerance. ``passed`` is None when the
    check is reported without judgement.
    '''
    name: str
    value: float
    tolerance: Optional[float] = None
    passed: Optional[bool] = None

    def to_dict(self):
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed}


########################################################################
## VERIFICATION REPORT
########################################################################
@dataclass
class VerificationReport:
    experiment: str
    config: dict
    seed: int = 0
    exploratory: bool = False
    checks: List[CheckResult] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    wall_time_ms: float = 0.0
    version: str = __version__
    schema: str = SCHEMA_VERSION

    def add_check(self, name, value, tolerance=None, judged=True):
        '''
        Record ``value <= tolerance``. Exploratory reports and unjudged
        checks keep passed = None.
        '''
        value = float(value)
        tolerance = None if tolerance is None else float(tolerance)
        passed = None
        if judged and tolerance is not None and not self.exploratory:
            passed = bool(value <= tolerance)
        check = CheckResult(name, value, tolerance, passed)
        self.checks.append(check)
        logger.info("check %-34s %.3e (tol %s) %s", name, value,
                    "-" if tolerance is None else "%.1e" % tolerance, _verdict(passed))
        return check

    def diagnose(self, **values):
        self.diagnostics.update(values)

    @property
    def passed(self):
        return all(check.passed is not False for check in self.checks)

    @property
    def headline(self):
        return self.checks[0] if self.checks else None

    def to_dict(self):
        return {
            "schema": self.schema,
            "version": self.version,
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "exploratory": self.exploratory,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
            "diagnostics": self.diagnostics,
            "wall_time_ms": self.wall_time_ms,
        }

    @classmethod
    def from_dict(cls, data):
        checks = [CheckResult(c["name"], c["value"], c["tolerance"], c["passed"]) for c in data["checks"]]
        return cls(experiment=data["experiment"], config=data["config"], seed=data["seed"],
                   exploratory=data["exploratory"], checks=checks, diagnostics=data["diagnostics"],
                   wall_time_ms=data["wall_time_ms"], version=data["version"], schema=data["schema"])

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def write_json(self, path):
        with open(path, "w") as handle:
            handle.write(self.to_json())
            handle.write("\n")
        logger.info("report written to %s", path)

    @classmethod
    def read_json(cls, path):
        if not os.path.isfile(path):
            raise ConfigError("Error loading your report files : '" + str(path) + "' does not exist")
        with open(path) as handle:
            return cls.from_dict(json.load(handle))

    def write_csv(self, path):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["name", "value", "tolerance", "passed"])
            for check in self.checks:
                writer.writerow([check.name, repr(check.value), _cell(check.tolerance), _cell(check.passed)])

    def format_table(self):
        '''Human readable table printed by the CLI.'''
        width = max([len(check.name) for check in self.checks] + [5])
        lines = [
            "experiment: %s   N = %s   lambda = %s   seed = %d%s" % (
                self.experiment, self.config.get("N"), self.config.get("lam"), self.seed,
                "   (exploratory)" if self.exploratory else ""),
            "%-*s  %12s  %10s  %s" % (width, "check", "value", "tolerance", "result"),
            "-" * (width + 36),
        ]
        for check in self.checks:
            tolerance = "-" if check.tolerance is None else "%.1e" % check.tolerance
            lines.append("%-*s  %12.4e  %10s  %s" % (width, check.name, check.value, tolerance,
                                                      _verdict(check.passed)))
        lines.append("-" * (width + 36))
        lines.append("%s in %.0f ms" % ("PASS" if self.passed else "FAIL", self.wall_time_ms))
        return "\n".join(lines)


def _verdict(passed):
    if passed is None:
        return "n/a"
    return "pass" if passed else "FAIL"


def _cell(value):
    return "" if value is None else repr(value)


########################################################################
## SCHEMA
########################################################################
def load_schema():
    with open(SCHEMA_PATH) as handle:
        return json.load(handle)


def validate_report(data):
    '''Validate a report dict (or VerificationReport) against report-v1.'''
    if isinstance(data, VerificationReport):
        data = data.to_dict()
    try:
        jsonschema.validate(instance=data, schema=load_schema())
    except jsonschema.ValidationError as error:
        raise ConfigError("report does not match %s: %s" % (SCHEMA_VERSION, error.message))
    return data


########################################################################
## SWEEP OUTPUT
########################################################################
@dataclass
class SweepRow:
    axis: str
    value: float
    check: str = ""
    residual: float = math.nan
    tolerance: Optional[float] = None
    passed: Optional[bool] = None
    mu_xi: Optional[float] = None
    error: str = ""

    @classmethod
    def from_report(cls, axis, value, report):
        headline = report.headline
        mu = report.diagnostics.get("mu_xi_abs")
        if headline is None:
            return cls(axis, value, passed=report.passed, mu_xi=mu)
        return cls(axis, value, headline.name, headline.value, headline.tolerance, report.passed, mu)

    @classmethod
    def from_error(cls, axis, value, error):
        return cls(axis, value, passed=False, error=str(error))

    def cells(self):
        return [self.axis, repr(float(self.value)), self.check, repr(float(self.residual)),
                _cell(self.tolerance), _cell(self.passed), _cell(self.mu_xi), self.error]


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(row.cells())
    logger.info("sweep of %d rows written to %s", len(rows), path)


def plot_sweep(rows, path, title=""):
    '''Residual column against the swept value, log scale.'''
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    good = [row for row in rows if not row.error and row.residual > 0 and math.isfinite(row.residual)]
    fig, ax = plt.subplots(figsize=(7, 5))
    if good:
        ax.semilogy([row.value for row in good], [row.residual for row in good], "o-", label=good[0].check)
        tolerances = [row.tolerance for row in good if row.tolerance is not None]
        if tolerances:
            ax.axhline(tolerances[0], color="gray", linestyle="--", label="tolerance")
        ax.legend()
    ax.set_xlabel(rows[0].axis if rows else "value")
    ax.set_ylabel("residual")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info("sweep plot written to %s", path)
