"""CTC alignment: vocabulary, loss, oracle and decoders."""
from .vocabulary import GlossVocabulary, BLANK_ID, BLANK_TOKEN
from .loss import (LogProbLattice, collapse, min_alignment_length, ctc_loss, ctc_loss_value,
                   ctc_loss_and_grad, ctc_log_likelihood, ctc_enumerate_oracle)
from .decoding import (greedy_decode, beam_search, beam_hypothesis, beam_decode, exhaustive_decode,
                       max_prefixes)

__all__ = ['GlossVocabulary', 'BLANK_ID', 'BLANK_TOKEN', 'LogProbLattice', 'collapse',
           'min_alignment_length', 'ctc_loss', 'ctc_loss_value', 'ctc_loss_and_grad',
           'ctc_log_likelihood', 'ctc_enumerate_oracle', 'greedy_decode', 'beam_search', 'beam_hypothesis',
           'beam_decode', 'exhaustive_decode', 'max_prefixes']
