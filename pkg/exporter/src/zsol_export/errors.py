class ExportError(Exception):
    """Malformed dataset annotations, unreadable images, or bad job setup."""
