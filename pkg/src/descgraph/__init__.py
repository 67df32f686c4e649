"""Symbolic engine for countable digraphs whose descendant sets are q-ary trees."""
from .amalgam import (AmalgamProblem, AmalgamSolution, ComplementResult, Identification, MergeResult,
                      augment_predecessors, class_amalgam, complement, free_amalgam, merge_predecessors,
                      replay_free_extension)
from .embedding import EmbeddingMap, check_embedding, enumerate_le_embeddings, is_le_embedding
from .errors import (DescGraphError, InvariantViolation, MalformedAddress, MalformedPrefix, NotFound,
                     PreconditionError)
from .limit import (ExtensionDescriptor, LimitState, back_and_forth_probe, ball_at,
                    check_extension_property, enumerate_descriptors, grow, new_state)
from .presentation import (Presentation, Ref, adjacency, canonical_form, common_predecessors, desc_upto,
                           intersect_desc, is_independent, max_multiplicity, minimal_generators, reduce,
                           tn, tree, unfold, validate)

__version__ = "0.1.0"
