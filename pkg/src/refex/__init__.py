"""Entity extraction from OCR'd referral faxes.

Core flow: group OCR lines into layout segments, tag tokens with BIO labels,
decode tags into entity spans, clean the spans with domain rules, pick one
value per page, and score against gold annotations with MUC-5 categories.
"""

__version__ = "0.1.0"
