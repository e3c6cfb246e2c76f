"""RA-SHViT test suite: run with pytest, or each file as a script."""
