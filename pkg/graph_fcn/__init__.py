"""Graph-FCN: a desk-scale FCN backbone with a graph convolutional auxiliary head."""

__version__ = '0.1.0'
