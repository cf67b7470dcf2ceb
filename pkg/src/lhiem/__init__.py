"""Dynamic microsimulation of household health expenditures.

A synthetic under-65 population is advanced year by year through income,
insurance, health, spending, mortality and demographic submodels, with an
optional loan-financed coverage policy layered on top.
"""

from .engine import ScenarioConfig, YearResult, calibrate_medical_inflation, run_simulation, step_year
from .errors import DataError, LhiemError, ParseError, ValidationError
from .policy import LoanLedger, PolicyParams
from .population import Population, read_population, save_population, validate_population
from .synthpop import generate_population, load_population

__version__ = "0.1.0"

__all__ = [
    "ScenarioConfig", "YearResult", "calibrate_medical_inflation", "run_simulation", "step_year",
    "DataError", "LhiemError", "ParseError", "ValidationError", "LoanLedger", "PolicyParams",
    "Population", "read_population", "save_population", "validate_population",
    "generate_population", "load_population",
]
