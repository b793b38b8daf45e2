"""Transformer building blocks shared by the annotator and the generator.

Everything operates on unbatched (length, dim) float64 tensors; batching at
this scale is handled by looping over sequences and padding only inside the
loss functions, which keeps attention masks trivial.
"""

from __future__ import annotations

import math

import torch
from torch import nn


def sinusoidal_positions(length: int, dim: int) -> torch.Tensor:
    """Standard sine/cosine position encodings, shape (length, dim)."""
    if dim % 2 != 0:
        raise ValueError(f"position encoding needs an even dim, got {dim}")
    position = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    scale = torch.exp(
        torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim)
    )
    encoding = torch.zeros(length, dim, dtype=torch.float64)
    encoding[:, 0::2] = torch.sin(position * scale)
    encoding[:, 1::2] = torch.cos(position * scale)
    return encoding


def causal_mask(length: int) -> torch.Tensor:
    """Boolean (length, length) mask, True where attention is allowed."""
    return torch.tril(torch.ones(length, length, dtype=torch.bool))


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention over (length, dim) sequences."""

    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        if dim % num_heads != 0:
            raise ValueError(f"dim {dim} not divisible by num_heads {num_heads}")
        self.dim = dim
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.query = nn.Linear(dim, dim)
        self.key = nn.Linear(dim, dim)
        self.value = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, dim)

    def forward(
        self,
        query: torch.Tensor,
        memory: torch.Tensor,
        mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        len_q, len_k = query.shape[0], memory.shape[0]
        q = self.query(query).view(len_q, self.num_heads, self.head_dim).transpose(0, 1)
        k = self.key(memory).view(len_k, self.num_heads, self.head_dim).transpose(0, 1)
        v = self.value(memory).view(len_k, self.num_heads, self.head_dim).transpose(0, 1)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if mask is not None:
            scores = scores.masked_fill(~mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        pooled = (weights @ v).transpose(0, 1).reshape(len_q, self.dim)
        return self.out(pooled)


class FeedForward(nn.Module):
    def __init__(self, dim: int, hidden_dim: int):
        super().__init__()
        self.inner = nn.Linear(dim, hidden_dim)
        self.outer = nn.Linear(hidden_dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.outer(torch.relu(self.inner(x)))


class EncoderBlock(nn.Module):
    """Pre-norm self-attention block with residual connections."""

    def __init__(self, dim: int, num_heads: int, ff_dim: int):
        super().__init__()
        self.attn_norm = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, num_heads)
        self.ff_norm = nn.LayerNorm(dim)
        self.ff = FeedForward(dim, ff_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        normed = self.attn_norm(x)
        x = x + self.attn(normed, normed)
        x = x + self.ff(self.ff_norm(x))
        return x


class DecoderBlock(nn.Module):
    """Pre-norm causal self-attention plus cross-attention to a memory."""

    def __init__(self, dim: int, num_heads: int, ff_dim: int):
        super().__init__()
        self.self_norm = nn.LayerNorm(dim)
        self.self_attn = MultiHeadAttention(dim, num_heads)
        self.cross_norm = nn.LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, num_heads)
        self.ff_norm = nn.LayerNorm(dim)
        self.ff = FeedForward(dim, ff_dim)

    def forward(self, x: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        normed = self.self_norm(x)
        x = x + self.self_attn(normed, normed, mask=causal_mask(x.shape[0]))
        x = x + self.cross_attn(self.cross_norm(x), memory)
        x = x + self.ff(self.ff_norm(x))
        return x
