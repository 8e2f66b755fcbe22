"""One-shot exporter: IGT translation lines -> TransEmb-v1 embedding files."""

from .export import ExportJob, ModelLoadError, TokenizationMismatch, export

__all__ = ["ExportJob", "ModelLoadError", "TokenizationMismatch", "export"]
