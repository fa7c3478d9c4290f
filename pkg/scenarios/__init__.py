from scenarios.drier_handler import (DrierConstrainedControlHandler, DrierEquilibriumHandler,
                                     DrierLinearControlHandler, DrierNonlinearControlHandler)
from scenarios.simple_handler import SimpleControlHandler, SimpleValidateHandler
from scenarios.spectrum_handler import SpectrumHandler

HANDLERS = {
    "simple-validate": SimpleValidateHandler,
    "simple-control": SimpleControlHandler,
    "drier-equilibrium": DrierEquilibriumHandler,
    "drier-linear-control": DrierLinearControlHandler,
    "drier-nonlinear-control": DrierNonlinearControlHandler,
    "drier-constrained-control": DrierConstrainedControlHandler,
    "spectrum": SpectrumHandler,
}
