"""Factorisation of commuting quantum operations across a tensor split.

Submodules
----------
tensor      labelled tensor-product layouts and operators
cpmaps      CP maps in Kraus form, Choi operators and map predicates
entropic    von Neumann entropy and conditional mutual information
algebra     matrix *-algebras, block decompositions, Markov structure
doubling    the doubling map of a block decomposition
factorise   conditions, certificates and the converse construction
multimap    factorisation of a chain of maps
tsirelson   commuting measurement families as local operators
prbox       the PR-box counterexample and CHSH scoring
"""
from .algebra import (Block, BlockDecomposition, MatrixAlgebra, decompose, generate_algebra,
                      markov_decomposition)
from .cpmaps import (ChoiOperator, CPMap, apply, compose, from_choi, is_tp, is_unital,
                     to_choi)
from .doubling import build_doubling_map, verify_doubling_properties
from .entropic import Partition, cond_mutual_info, vn_entropy
from .errors import (CertificateError, ConditionError, FactorisationImpossible,
                     NotMarkovError, QFactorError)
from .factorise import (FactorisationCertificate, FactorisationInstance, check_conditions,
                        converse_construct, factorise)
from .multimap import multi_factorise
from .tensor import Operator, SystemLayout

__version__ = "0.1.0"

__all__ = [
    "Block", "BlockDecomposition", "CPMap", "CertificateError", "ChoiOperator",
    "ConditionError", "FactorisationCertificate", "FactorisationImpossible",
    "FactorisationInstance", "MatrixAlgebra", "NotMarkovError", "Operator", "Partition",
    "QFactorError", "SystemLayout", "apply", "build_doubling_map", "check_conditions",
    "compose", "cond_mutual_info", "converse_construct", "decompose", "factorise",
    "from_choi", "generate_algebra", "is_tp", "is_unital", "markov_decomposition",
    "multi_factorise", "to_choi", "verify_doubling_properties", "vn_entropy",
]
