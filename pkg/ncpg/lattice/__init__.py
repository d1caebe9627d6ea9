"""Momentum-lattice diagnostics."""
