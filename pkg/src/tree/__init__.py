"""GJR recombined pricing tree."""
