"""HTTP service wrapping the core package.

One shared base memory per loaded model, with per-user adaptive
overlays managed server-side, so many clients can query and personalize
against the same trained artifact.
"""

from .app import create_app

__all__ = ["create_app"]
