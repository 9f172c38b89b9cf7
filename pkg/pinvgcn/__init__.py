"""
Pseudoinverse GCN: low-rank pseudoinverse spectral filters on graphs and hypergraphs
"""
__version__ = "1.0.0"
