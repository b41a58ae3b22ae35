"""
Signal handlers for graceful shutdown.

Continuation is sequential and each step can take seconds; Ctrl+C (SIGINT) or
SIGTERM should stop the build between steps so the partial family can still be
written. The handler only records the request; long loops poll it.

Usage:
    from nlmodes.core.signal_handlers import shutdown_manager

    shutdown_manager.install()
    family = build_family(..., should_stop=shutdown_manager.check_shutdown)
"""

import signal
from typing import Callable, List, Optional


class GracefulShutdown:
    """
    Record SIGINT/SIGTERM instead of raising KeyboardInterrupt.

    A second signal restores the original handlers and re-raises, so a stuck
    integration can still be killed.
    """

    def __init__(self):
        self.shutdown_requested = False
        self.signal_name: Optional[str] = None
        self.cleanup_actions: List[Callable[[], None]] = []
        self._original_sigint = None
        self._original_sigterm = None
        self._installed = False

    def install(self):
        """Install signal handlers (idempotent)."""
        if self._installed:
            return
        self._original_sigint = signal.signal(signal.SIGINT, self._signal_handler)
        self._original_sigterm = signal.signal(signal.SIGTERM, self._signal_handler)
        self._installed = True

    def uninstall(self):
        """Restore original signal handlers."""
        if not self._installed:
            return
        if self._original_sigint is not None:
            signal.signal(signal.SIGINT, self._original_sigint)
        if self._original_sigterm is not None:
            signal.signal(signal.SIGTERM, self._original_sigterm)
        self._installed = False

    def _signal_handler(self, signum: int, frame):
        if self.shutdown_requested:
            self.uninstall()
            signal.raise_signal(signum)
            return
        self.signal_name = "SIGINT" if signum == signal.SIGINT else "SIGTERM"
        self.shutdown_requested = True
        self._run_cleanup()

    def _run_cleanup(self):
        for action in self.cleanup_actions:
            try:
                action()
            except Exception:
                pass

    def register_cleanup(self, action: Callable[[], None]):
        """Register an action to run when the first signal arrives."""
        self.cleanup_actions.append(action)

    def check_shutdown(self) -> bool:
        """True once a shutdown was requested; poll between work units."""
        return self.shutdown_requested

    def reset(self):
        """Clear a previous request (used by tests and repeated CLI calls)."""
        self.shutdown_requested = False
        self.signal_name = None


# Global instance for convenience
shutdown_manager = GracefulShutdown()
