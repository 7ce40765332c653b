"""Shipped data: the keyword-baseline phrase list, the EDA thesaurus, and the
default/tuned configuration presets."""
