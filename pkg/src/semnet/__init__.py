"""Snake-ordered selective state-space network for image inpainting."""
from .blocks import SEFN, SEMBlock, SemNet, SemNetConfig, SnakeMambaBlock
from .kernels import BACKEND_NAME
from .tensor import Tensor, backward, no_grad

__all__ = ["BACKEND_NAME", "SEFN", "SEMBlock", "SemNet", "SemNetConfig", "SnakeMambaBlock",
           "Tensor", "backward", "no_grad"]
__version__ = "0.1.0"
