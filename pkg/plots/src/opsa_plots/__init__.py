"""Figure rendering for recovery-experiment CSVs and manifests."""

from .figures import (FigureSpec, RenderResult, read_trace,
                      render_convergence, render_rip_scatter)

__all__ = ["FigureSpec", "RenderResult", "read_trace", "render_convergence",
           "render_rip_scatter"]

__version__ = "0.1.0"
