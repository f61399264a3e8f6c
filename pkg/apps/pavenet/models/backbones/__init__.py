from apps.pavenet.models.backbones.tiny_convnet import FeaturePyramid, TinyConvBackbone
from apps.pavenet.models.backbones.tokenizer import PatchEmbed, TokenLayout, TokenSet
