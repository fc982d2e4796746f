# Tests package for the phase-space measurement simulator
