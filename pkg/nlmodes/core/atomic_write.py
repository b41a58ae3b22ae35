"""
Atomic file writing utilities.

Family builds can run for many minutes; an interrupted or failed write must
never leave a truncated artifact or CSV behind. Uses the write-to-temp-then-
rename pattern which is atomic on POSIX systems.

Usage:
    from nlmodes.core.atomic_write import atomic_write, atomic_write_bytes

    atomic_write(Path("out/backbone.csv"), csv_text)
    atomic_write_bytes(Path("out/family.npz"), archive_bytes)
"""

import errno
import os
import tempfile
from pathlib import Path
from typing import Tuple, Union


class AtomicWriteError(Exception):
    """Error during atomic write operation."""
    pass


def atomic_write_bytes(file_path: Union[str, Path], data: bytes) -> bool:
    """
    Write bytes atomically.

    Args:
        file_path: Destination path (parent directories are created)
        data: Payload

    Returns:
        True if write succeeded

    Raises:
        AtomicWriteError: If the write fails, with a descriptive message
    """
    file_path = Path(file_path)
    temp_path = None

    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)

        # Same directory keeps the rename on one filesystem
        temp_fd, temp_path_str = tempfile.mkstemp(
            prefix=f".tmp_{file_path.name}_",
            dir=file_path.parent,
            suffix=".tmp"
        )
        temp_path = Path(temp_path_str)

        try:
            with os.fdopen(temp_fd, 'wb') as f:
                f.write(data)
                f.flush()
                os.fsync(f.fileno())
        except OSError as e:
            if e.errno == errno.ENOSPC:
                raise AtomicWriteError(
                    f"Disk full: Cannot write to {file_path}. "
                    f"Free up space and try again."
                ) from e
            elif e.errno == errno.EACCES:
                raise AtomicWriteError(
                    f"Permission denied: Cannot write to {file_path}. "
                    f"Check file/directory permissions."
                ) from e
            raise AtomicWriteError(f"Write error for {file_path}: {e}") from e

        if file_path.exists():
            try:
                os.chmod(temp_path, file_path.stat().st_mode)
            except OSError:
                pass

        os.replace(temp_path, file_path)
        return True

    except AtomicWriteError:
        _discard(temp_path)
        raise

    except Exception as e:
        _discard(temp_path)
        raise AtomicWriteError(f"Failed to write {file_path}: {e}") from e


def atomic_write(
    file_path: Union[str, Path],
    content: str,
    encoding: str = 'utf-8',
) -> bool:
    """
    Write text atomically with LF line endings preserved as given.

    Example:
        >>> atomic_write(Path("out/spectrum.csv"), "re,im\\n-0.05,0.999\\n")
        True
    """
    return atomic_write_bytes(file_path, content.encode(encoding))


def _discard(temp_path) -> None:
    if temp_path and temp_path.exists():
        try:
            temp_path.unlink()
        except OSError:
            pass


def check_write_permissions(file_path: Union[str, Path]) -> Tuple[bool, str]:
    """
    Check if we can write to a file path before starting a long computation.

    Args:
        file_path: Path to check

    Returns:
        Tuple of (can_write, reason_if_not)
    """
    file_path = Path(file_path)

    parent = file_path.parent
    if not parent.exists():
        try:
            parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            return False, f"Cannot create directory {parent}: {e}"

    if not os.access(parent, os.W_OK):
        return False, f"Permission denied: {parent}"

    if file_path.exists() and not os.access(file_path, os.W_OK):
        return False, f"Permission denied: {file_path}"

    try:
        stat = os.statvfs(parent)
        free_space = stat.f_frsize * stat.f_bavail
        if free_space < 1024 * 1024:
            return False, f"Low disk space: {free_space} bytes free"
    except (OSError, AttributeError):
        pass  # statvfs not available on Windows

    return True, ""
