"""A miniature prompt-conditioned segmentation transformer.

Vision ViT encoder over image patches, causal text transformer with an
end-of-sequence pooled embedding projected into conditioning space, a
decoder that fuses intermediate vision activations under feature-wise
modulation by the conditional vector, and a small residual conv head that
sharpens the upsampled logits. PEFT modules hang off hook points: sublayer
outputs before each residual add, attention projections (low-rank pairs),
extracted features, the pooled text embedding, and the projected
conditional vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import RngStream, Tensor
from ..errors import DimensionError, InputError, InternalError
from .layers import Conv2d, LayerNorm, Linear, TransformerBlock
from .module import Module
from .spec import TEXT_LEN, ModelSpec

# Reserved token ids shared with the tokenizer.
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3

DECODER_HEADS = 4


@dataclass
class LayerRecord:
    """Activations of one encoder layer: block output plus both
    pre-residual hook values (after any adapter has applied)."""

    output: Tensor
    post_attention: Tensor
    post_mlp: Tensor


@dataclass
class EncoderActivations:
    records: list  # one LayerRecord per layer, index 0 = layer 1

    def layer(self, index: int) -> LayerRecord:
        return self.records[index - 1]

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class ConditionalEmbedding:
    z: Tensor  # pooled text embedding (B, text_dim), after any pooled adapter
    c: Tensor  # projected conditional vector (B, cond_dim)


class VisionEncoder(Module):
    def __init__(self, spec: ModelSpec, rng: RngStream):
        super().__init__()
        d = spec.vision_dim
        self.patch_embed = Linear(spec.patch_size**2, d, rng.child("patch_embed"))
        self.pos = ad.parameter(rng.child("pos").normal((spec.tokens, d), std=0.02))
        depth_scale = 1.0 / math.sqrt(2 * spec.vision_layers)
        self.blocks = [
            TransformerBlock(d, spec.vision_heads, spec.mlp_ratio, rng.child(f"block{i}"), depth_scale)
            for i in range(spec.vision_layers)
        ]
        self._spec = spec

    def _patchify(self, images: Tensor) -> Tensor:
        s = self._spec
        b = images.shape[0]
        g, p = s.grid, s.patch_size
        x = ad.reshape(images, (b, 1, g, p, g, p))
        x = ad.transpose(x, (0, 2, 4, 1, 3, 5))
        return ad.reshape(x, (b, s.tokens, p * p))

    def forward(self, images: Tensor) -> EncoderActivations:
        s = self._spec
        if images.shape[-3:] != (1, s.image_size, s.image_size):
            raise DimensionError(
                f"expected image extents (1, {s.image_size}, {s.image_size}), "
                f"got {images.shape}"
            )
        x = ad.add(self.patch_embed.forward(self._patchify(images)), self.pos)
        records = []
        for block in self.blocks:
            x, a, m = block.forward(x)
            records.append(LayerRecord(x, a, m))
        return EncoderActivations(records)


class TextEncoder(Module):
    def __init__(self, spec: ModelSpec, rng: RngStream):
        super().__init__()
        d = spec.text_dim
        self.tok_emb = ad.parameter(rng.child("tok").normal((spec.vocab_size, d), std=0.02))
        self.pos = ad.parameter(rng.child("pos").normal((TEXT_LEN, d), std=0.02))
        depth_scale = 1.0 / math.sqrt(2 * spec.text_layers)
        heads = spec.vision_heads if d % spec.vision_heads == 0 else 1
        self.blocks = [
            TransformerBlock(d, heads, spec.mlp_ratio, rng.child(f"block{i}"), depth_scale)
            for i in range(spec.text_layers)
        ]
        self.ln_final = LayerNorm(d)
        self.proj = Linear(d, spec.cond_dim, rng.child("proj"))
        mask = np.triu(np.full((TEXT_LEN, TEXT_LEN), -1e9), k=1)
        self._causal_mask = Tensor(mask)
        self._spec = spec

    def encode_tokens(self, token_ids: np.ndarray) -> Tensor:
        """Run the transformer and pool at the end-of-sequence position."""
        ids = np.atleast_2d(np.asarray(token_ids, dtype=np.intp))
        if ids.shape[1] != TEXT_LEN:
            raise InputError(f"token sequences must have length {TEXT_LEN}, got {ids.shape}")
        if ids.min() < 0 or ids.max() >= self._spec.vocab_size:
            raise InputError(
                f"token id out of range [0, {self._spec.vocab_size}): "
                f"{int(ids.min())}..{int(ids.max())}"
            )
        x = ad.add(ad.embedding(self.tok_emb, ids), self.pos)
        for block in self.blocks:
            x, _, _ = block.forward(x, attn_mask=self._causal_mask)
        x = self.ln_final.forward(x)
        has_eos = (ids == EOS_ID).any(axis=1)
        eos_pos = np.where(has_eos, np.argmax(ids == EOS_ID, axis=1), ids.shape[1] - 1)
        return ad.take_rows(x, eos_pos)


class Decoder(Module):
    """Fuses extracted vision activations under conditioning and emits
    per-pixel logits at image resolution."""

    def __init__(self, spec: ModelSpec, rng: RngStream):
        super().__init__()
        d, c = spec.vision_dim, spec.cond_dim
        self.reduces = [
            Linear(d, c, rng.child(f"reduce{i}")) for i in range(len(spec.extract_layers))
        ]
        # Zero-initialised modulation: a fresh decoder ignores the prompt.
        self.film_scale = Linear(c, c, rng.child("film_scale"), zero=True)
        self.film_shift = Linear(c, c, rng.child("film_shift"), zero=True)
        self.block = TransformerBlock(c, DECODER_HEADS, spec.mlp_ratio, rng.child("block"))
        self.ln = LayerNorm(c)
        self.head = Linear(c, 1, rng.child("head"))
        doublings = int(round(math.log2(spec.patch_size)))
        if 2**doublings != spec.patch_size:
            raise DimensionError(
                f"patch_size {spec.patch_size} must be a power of two so 2x "
                f"upsampling can reach the image resolution"
            )
        self._doublings = doublings
        self._spec = spec

    def forward(self, features: list, cond: Tensor) -> Tensor:
        """`features` holds one (B, T, vision_dim) tensor per extract layer."""
        s = self._spec
        if len(features) != len(s.extract_layers):
            raise InternalError(
                f"decoder expected {len(s.extract_layers)} extract tensors, got {len(features)}"
            )
        b = cond.shape[0]
        scale = ad.reshape(self.film_scale.forward(cond), (b, 1, s.cond_dim))
        shift = ad.reshape(self.film_shift.forward(cond), (b, 1, s.cond_dim))
        fused = None
        for reduce, tokens in zip(self.reduces, features):
            t = reduce.forward(tokens)
            t = ad.add(ad.add(t, ad.mul(t, scale)), shift)
            fused = t if fused is None else ad.add(fused, t)
        x, _, _ = self.block.forward(fused)
        per_token = self.head.forward(self.ln.forward(x))  # (B, T, 1)
        logits = ad.reshape(per_token, (b, 1, s.grid, s.grid))
        for _ in range(self._doublings):
            logits = ad.upsample2x(logits, "bilinear")
        return logits


class RefineHead(Module):
    """Two-conv residual refinement; the zeroed output conv makes a fresh
    head an exact identity."""

    def __init__(self, rng: RngStream):
        super().__init__()
        self.conv3 = Conv2d(1, 4, 3, rng.child("conv3"))
        self.conv1 = Conv2d(4, 1, 1, rng.child("conv1"), zero=True)

    def forward(self, logits: Tensor) -> Tensor:
        return ad.add(logits, self.conv1.forward(ad.silu(self.conv3.forward(logits))))


class SegmentationModel(Module):
    def __init__(self, spec: ModelSpec, rng: RngStream):
        super().__init__()
        self.vision = VisionEncoder(spec, rng.child("vision"))
        self.text = TextEncoder(spec, rng.child("text"))
        self.decoder = Decoder(spec, rng.child("decoder"))
        self.refine = RefineHead(rng.child("refine"))
        self.peft = None
        self._spec = spec

    @property
    def spec(self) -> ModelSpec:
        return self._spec

    # -- plan attachment -------------------------------------------------

    def attach_plan(self, plan, rng: RngStream):
        """Instantiate a placement plan and wire its modules to the hooks."""
        from ..peft.runtime import PeftRuntime  # here to avoid a module cycle

        if self.peft is not None:
            self.detach_plan()
        runtime = PeftRuntime(plan, self._spec, rng)
        runtime.train(self.training)
        for i, block in enumerate(self.vision.blocks):
            layer = i + 1
            block._adapter_attn = runtime.adapter_at("vision", layer, "post_attention")
            block._adapter_mlp = runtime.adapter_at("vision", layer, "post_mlp")
            block.attn._lora = runtime.lora_for_layer("vision", layer)
        for i, block in enumerate(self.text.blocks):
            layer = i + 1
            block._adapter_attn = runtime.adapter_at("text", layer, "post_attention")
            block._adapter_mlp = runtime.adapter_at("text", layer, "post_mlp")
            block.attn._lora = runtime.lora_for_layer("text", layer)
        self.peft = runtime
        return runtime

    def detach_plan(self) -> None:
        for block in self.vision.blocks + self.text.blocks:
            block._adapter_attn = None
            block._adapter_mlp = None
            block.attn._lora = None
        self.peft = None

    # -- forward passes ----------------------------------------------------

    @staticmethod
    def _as_image_batch(images) -> Tensor:
        t = images if isinstance(images, Tensor) else Tensor(images)
        if t.ndim == 3:
            t = ad.reshape(t, (1,) + t.shape)
        if t.ndim != 4:
            raise DimensionError(f"expected (1,H,W) or (B,1,H,W) images, got {t.shape}")
        return t

    def vision_encode(self, images) -> EncoderActivations:
        return self.vision.forward(self._as_image_batch(images))

    def text_encode(self, token_ids) -> ConditionalEmbedding:
        z = self.text.encode_tokens(token_ids)
        if self.peft is not None:
            pooled = self.peft.adapter_at("text", 0, "on_pooled")
            if pooled is not None:
                z = pooled.forward(z)
        c = self.text.proj.forward(z)
        if self.peft is not None:
            cond_adapter = self.peft.adapter_at("conditional", 0, "on_projection")
            if cond_adapter is not None:
                c = cond_adapter.forward(c)
        return ConditionalEmbedding(z=z, c=c)

    def _extract_features(self, acts: EncoderActivations) -> list:
        features = []
        for layer in self._spec.extract_layers:
            if layer > len(acts):
                raise InternalError(f"extract layer {layer} missing from activations")
            tokens = acts.layer(layer).output
            if self.peft is not None:
                adapter = self.peft.adapter_at("vision", layer, "on_features")
                if adapter is not None:
                    tokens = adapter.forward(tokens)
            features.append(tokens)
        return features

    def decode(self, acts: EncoderActivations, cond: ConditionalEmbedding) -> Tensor:
        c = cond.c
        if self.peft is not None and self.peft.cross_modal is not None:
            v_pooled = ad.tmean(acts.records[-1].output, axis=1)
            c = self.peft.cross_modal.forward(c, v_pooled, cond.z)
        return self.decoder.forward(self._extract_features(acts), c)

    def forward(self, images, token_ids) -> Tensor:
        """Images plus prompts -> per-pixel logits (B, 1, H, W)."""
        acts = self.vision_encode(images)
        cond = self.text_encode(token_ids)
        logits = self.decode(acts, cond)
        logits = self.refine.forward(logits)
        if self.peft is not None and self.peft.enhancement is not None:
            logits = self.peft.enhancement.forward(logits)
        return logits

    # -- freezing and accounting -------------------------------------------

    def freeze_backbone(self) -> list[str]:
        """Freeze everything except PEFT modules and the refinement head;
        returns the names that stayed trainable."""
        trainable = []
        for name, tensor in self.named_parameters():
            keep = name.startswith("peft.") or name.startswith("refine.")
            tensor.requires_grad = keep
            if keep:
                trainable.append(name)
        return trainable

    def unfreeze_all(self) -> None:
        for _, tensor in self.named_parameters():
            tensor.requires_grad = True

    def trainable_parameters(self) -> list[tuple[str, Tensor]]:
        return [(n, t) for n, t in self.named_parameters() if t.requires_grad]

    def trainable_scalar_count(self) -> int:
        return sum(t.data.size for _, t in self.trainable_parameters())

    def backbone_state(self) -> dict:
        """Frozen-core arrays only (no PEFT modules, no refinement head)."""
        return {
            name: arr
            for name, arr in self.state_arrays().items()
            if not (name.startswith("peft.") or name.startswith("refine."))
        }
