"""Neural surrogate compilation workbench.

A hypernetwork maps C program text to the weights of a small fixed-topology
MLP ("covering architecture").  This package contains the corpus mining
pipeline that produces training data, the hypernetwork and its baselines
(MAML, pretrained, random), the finetuning/evaluation harnesses, and an
end-to-end color-quantization demo.
"""

__version__ = "0.1.0"
