"""Independent reference computations used to validate the closed forms and the MMF solver."""
