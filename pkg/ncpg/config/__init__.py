"""Run configuration: flat run files, environment knobs and the report schema."""
