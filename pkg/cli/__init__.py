"""Command-line surface of the RPW urn toolkit."""
