"""Small shared helpers (atomic file writes, number formatting)."""

import contextlib
import os
import tempfile


def fmt17(x):
    """17-significant-digit decimal form — round-trips float64 exactly."""
    return format(float(x), ".17g")


@contextlib.contextmanager
def atomic_writer(path):
    """Context manager yielding a text handle; renames into place on success.

    On any exception the temp file is removed and path is left untouched.
    """
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text):
    """Write text to path via a temp file + rename; never leaves partial files."""
    with atomic_writer(path) as fh:
        fh.write(text)
