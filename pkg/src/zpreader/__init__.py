"""Zero-pronoun reading pipeline: pseudo-sample generation, an attentive
recurrent reader trained in two steps, and antecedent resolution."""

__version__ = "0.1.0"
