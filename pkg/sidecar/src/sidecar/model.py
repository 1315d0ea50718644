"""A small vision transformer with inspectable attention.

The trunk (patch embedding, encoder blocks, final norm) is initialized
from a fixed stream of the run seed and frozen; only the linear head
trains. That keeps the CPU path fast and deterministic while exercising
the exact export surface a full-scale pretrained backbone would use.
Each attention module keeps its latest softmax weights so a forward hook
can read them; the class-token row of the last block, averaged over
heads, is the map the exports carry.
"""

import torch
from torch import nn

from rigorbench.rng import mix64

from sidecar.errors import DeviceUnavailable


class SelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)
        self.last_attention: torch.Tensor | None = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, d // self.heads)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)  # each (b, heads, n, head_dim)
        attn = torch.softmax(q @ k.transpose(-2, -1) * self.scale, dim=-1)
        self.last_attention = attn.detach()
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.proj(out)


class Block(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        hidden = int(dim * mlp_ratio)
        self.norm1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class TinyViT(nn.Module):
    def __init__(
        self,
        n_classes: int,
        image_size: int = 32,
        patch_size: int = 8,
        dim: int = 64,
        depth: int = 2,
        heads: int = 4,
        mlp_ratio: float = 2.0,
    ):
        super().__init__()
        if image_size % patch_size:
            raise ValueError(f"image size {image_size} not a multiple of patch {patch_size}")
        self.grid = image_size // patch_size
        n_patches = self.grid * self.grid
        self.patch_embed = nn.Conv2d(3, dim, kernel_size=patch_size, stride=patch_size)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, dim))
        self.pos_embed = nn.Parameter(torch.zeros(1, n_patches + 1, dim))
        nn.init.normal_(self.cls_token, std=0.02)
        nn.init.normal_(self.pos_embed, std=0.02)
        self.blocks = nn.ModuleList(Block(dim, heads, mlp_ratio) for _ in range(depth))
        self.norm = nn.LayerNorm(dim)
        self.head = nn.Linear(dim, n_classes)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Class-token embedding after the final norm, (b, dim)."""
        b = x.shape[0]
        tokens = self.patch_embed(x).flatten(2).transpose(1, 2)  # (b, patches, dim)
        cls = self.cls_token.expand(b, -1, -1)
        x = torch.cat([cls, tokens], dim=1) + self.pos_embed
        for block in self.blocks:
            x = block(x)
        return self.norm(x)[:, 0]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))

    def freeze_trunk(self) -> None:
        for name, param in self.named_parameters():
            param.requires_grad_(name.startswith("head."))


def class_attention_grid(attn: torch.Tensor, grid: int) -> torch.Tensor:
    """Head-mean class-token-to-patch attention reshaped to (grid, grid).

    attn is one block's softmax weights, (b, heads, tokens, tokens) with
    the class token at index 0.
    """
    if attn.ndim != 4:
        raise ValueError(f"expected (b, heads, n, n) attention, got {tuple(attn.shape)}")
    row = attn.mean(dim=1)[:, 0, 1:]  # (b, patches)
    return row.reshape(attn.shape[0], grid, grid)


def build_model(model_tag: str, n_classes: int, seed: int, image_size: int) -> TinyViT:
    """Construct the tagged model with a frozen trunk.

    The toy trunk is drawn from a named stream of the seed, so every run
    with one seed sees the same backbone. The large pretrained tag needs
    downloaded weights and accelerator memory, neither of which this
    environment provides, so it is reported as unavailable rather than
    silently swapped for something weaker.
    """
    if model_tag == "dinov2-large":
        raise DeviceUnavailable(
            "model 'dinov2-large' needs pretrained weights and a large-memory "
            "accelerator; neither is available in this environment"
        )
    torch.manual_seed(mix64(seed, "trunk") & 0x7FFF_FFFF_FFFF_FFFF)
    model = TinyViT(n_classes=n_classes, image_size=image_size)
    model.freeze_trunk()
    model.eval()
    return model
