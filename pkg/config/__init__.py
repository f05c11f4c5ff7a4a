"""Config package - run configuration, vocabulary, caption templates and seed tables."""
