from .autodiff import Tensor
from .models import ModelConfig, init_params, model_forward

__all__ = ["Tensor", "ModelConfig", "init_params", "model_forward"]
