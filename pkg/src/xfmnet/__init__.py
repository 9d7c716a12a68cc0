"""XFMNet forecasting engine and signal diagnostics."""
