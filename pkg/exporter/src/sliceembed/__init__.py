"""sliceembed: ResNet50 embedding exporter for slicereduce's deepnet metric."""

__version__ = "0.1.0"
