"""Web single sign-on scheme simulator and evaluator."""
