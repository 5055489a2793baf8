"""Process POVMs (quantum testers): representations, extremality and faces."""

from .errors import PpovmError
from .quantum import Channel, Povm
from .process import ProcessPovm, RepresentationTriple, minimal_representation, realize

__all__ = ["PpovmError", "Channel", "Povm", "ProcessPovm", "RepresentationTriple", "minimal_representation", "realize"]
