import importlib.metadata

try:
    __version__ = importlib.metadata.version('heisenmix')
except importlib.metadata.PackageNotFoundError:
    __version__ = 'unknown'
