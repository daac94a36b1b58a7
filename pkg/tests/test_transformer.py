"""
Тесты трансформера, патчинга residual stream и AdamW.
"""

import math
from dataclasses import replace

import pytest
import torch

from state_tracking.core.config import ModelConfig
from state_tracking.core.errors import ConfigError, DataError, NumericError
from state_tracking.model import (
    AdamW,
    PatchEdit,
    PatchSpec,
    StateTrackingTransformer,
    init_model,
    parameter_count,
)


def tokens(*rows):
    return torch.tensor(rows, dtype=torch.long)


class TestConfigValidation:
    """Тесты проверки ModelConfig."""

    def test_heads_must_divide_width(self, tiny_config):
        with pytest.raises(ConfigError):
            init_model(replace(tiny_config, n_heads=3))

    def test_unknown_scheme(self, tiny_config):
        with pytest.raises(ConfigError):
            replace(tiny_config, positional_scheme="alibi").validate()

    @pytest.mark.parametrize(
        "scheme,tied", [("rotary", False), ("learned", False), ("learned", True)]
    )
    def test_parameter_count(self, tiny_config, scheme, tied):
        cfg = replace(tiny_config, positional_scheme=scheme, tied_embeddings=tied)
        model = StateTrackingTransformer(cfg)
        assert parameter_count(cfg) == sum(p.numel() for p in model.parameters())


class TestForward:
    """Тесты прямого прохода и захвата активаций."""

    def test_shapes(self, tiny_model, tiny_config):
        logits, trace = tiny_model(
            tokens([0, 1, 2, 3], [5, 4, 3, 2]), capture="resid+attn"
        )
        assert logits.shape == (2, 4, tiny_config.vocab_size)
        n_points = tiny_config.n_layers + 1
        assert trace.resid.shape == (2, n_points, 4, tiny_config.d_model)
        assert trace.attn.shape == (2, tiny_config.n_layers, tiny_config.n_heads, 4, 4)

    def test_attention_is_causal_and_stochastic(self, tiny_model):
        _, trace = tiny_model(tokens([0, 1, 2, 3, 4, 5]), capture="resid+attn")
        attn = trace.attn
        torch.testing.assert_close(attn.sum(-1), torch.ones_like(attn.sum(-1)))
        upper = torch.ones(6, 6, dtype=torch.bool).triu(1)
        assert attn[..., upper].abs().max() == 0

    def test_causality(self, tiny_model):
        a, _ = tiny_model(tokens([0, 1, 2, 3, 4]))
        b, _ = tiny_model(tokens([0, 1, 2, 5, 5]))
        torch.testing.assert_close(a[:, :3], b[:, :3])

    def test_batch_independence(self, tiny_model):
        batch = tokens([0, 1, 2, 3], [5, 4, 3, 2], [1, 1, 1, 1])
        full, _ = tiny_model(batch)
        shuffled, _ = tiny_model(batch[[2, 0, 1]])
        torch.testing.assert_close(full[[2, 0, 1]], shuffled, atol=1e-5, rtol=1e-5)

    def test_deterministic_init(self, tiny_config):
        a = init_model(tiny_config)
        b = init_model(tiny_config)
        for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert torch.equal(pa, pb)
        c = init_model(replace(tiny_config, seed=1))
        assert not torch.equal(a.embed.weight, c.embed.weight)

    def test_rejects_long_sequences(self, tiny_model, tiny_config):
        with pytest.raises(DataError):
            tiny_model(torch.zeros(1, tiny_config.max_positions + 1, dtype=torch.long))

    def test_rejects_out_of_vocab(self, tiny_model, tiny_config):
        with pytest.raises(DataError):
            tiny_model(tokens([0, tiny_config.vocab_size]))


class TestPatching:
    """Тесты правок residual stream."""

    def test_full_self_patch_is_identity(self, tiny_model):
        x = tokens([0, 3, 1, 4, 2])
        clean, trace = tiny_model(x, capture="resid")
        patched = tiny_model.forward_patched(x, PatchSpec.from_trace(trace))
        torch.testing.assert_close(clean, patched)

    def test_transplant_restores_clean_run(self, tiny_model):
        clean_x = tokens([0, 3, 1, 4, 2])
        corrupt_x = tokens([5, 3, 1, 4, 2])
        clean, trace = tiny_model(clean_x, capture="resid")
        edit = PatchEdit(layer=1, start=0, stop=4, vectors=trace.resid[:, 1])
        patched = tiny_model.forward_patched(corrupt_x, PatchSpec([edit]))
        torch.testing.assert_close(clean, patched)

    def test_patch_is_visible_in_trace(self, tiny_model):
        x = tokens([0, 1, 2])
        _, trace = tiny_model(x, capture="resid", patch=PatchSpec([PatchEdit(1, 1, 2)]))
        assert trace.resid[0, 1, 1:].abs().max() == 0

    def test_patch_shape_mismatch(self, tiny_model, tiny_config):
        edit = PatchEdit(1, 0, 2, vectors=torch.zeros(2, tiny_config.d_model))
        with pytest.raises(DataError):
            tiny_model.forward_patched(tokens([0, 1, 2]), PatchSpec([edit]))

    def test_patch_layer_out_of_range(self, tiny_model):
        with pytest.raises(DataError):
            tiny_model.forward_patched(
                tokens([0, 1, 2]), PatchSpec([PatchEdit(9, 0, 0)])
            )


class TestAdamW:
    """Тесты оптимизатора."""

    def test_matches_hand_computation(self):
        p = torch.nn.Parameter(torch.tensor([1.0, -2.0], dtype=torch.float64))
        opt = AdamW([p], lr=0.1, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01)
        grads = [
            torch.tensor([0.5, -1.0], dtype=torch.float64),
            torch.tensor([0.2, 0.3], dtype=torch.float64),
        ]

        expected = [1.0, -2.0]
        m = [0.0, 0.0]
        v = [0.0, 0.0]
        for t, g in enumerate(grads, start=1):
            p.grad = g.clone()
            opt.step()
            for i in range(2):
                expected[i] *= 1 - 0.1 * 0.01
                m[i] = 0.9 * m[i] + 0.1 * float(g[i])
                v[i] = 0.999 * v[i] + 0.001 * float(g[i]) ** 2
                m_hat = m[i] / (1 - 0.9 ** t)
                v_hat = v[i] / (1 - 0.999 ** t)
                expected[i] -= 0.1 * m_hat / (math.sqrt(v_hat) + 1e-8)
        assert p.detach().tolist() == pytest.approx(expected, abs=1e-10)

    def test_matches_torch_adamw(self):
        torch.manual_seed(0)
        a = torch.nn.Parameter(torch.randn(5, dtype=torch.float64))
        b = torch.nn.Parameter(a.detach().clone())
        ours = AdamW([a], lr=0.01, weight_decay=0.1)
        reference = torch.optim.AdamW([b], lr=0.01, weight_decay=0.1)
        for _ in range(10):
            g = torch.randn(5, dtype=torch.float64)
            a.grad, b.grad = g.clone(), g.clone()
            ours.step()
            reference.step()
        torch.testing.assert_close(a, b)

    def test_non_finite_update(self):
        p = torch.nn.Parameter(torch.ones(2))
        opt = AdamW([p])
        p.grad = torch.tensor([float("nan"), 1.0])
        with pytest.raises(NumericError):
            opt.step()

    def test_non_finite_update_leaves_state_untouched(self):
        healthy = torch.nn.Parameter(torch.ones(3))
        broken = torch.nn.Parameter(torch.ones(2))
        opt = AdamW([healthy, broken], lr=0.1, weight_decay=0.5)
        healthy.grad, broken.grad = torch.ones(3), torch.ones(2)
        opt.step()
        params_before = (healthy.detach().clone(), broken.detach().clone())
        moment_before = opt.state[healthy]["exp_avg"].clone()

        healthy.grad, broken.grad = torch.ones(3), torch.tensor([float("inf"), 1.0])
        with pytest.raises(NumericError):
            opt.step()
        torch.testing.assert_close(healthy.detach(), params_before[0])
        torch.testing.assert_close(broken.detach(), params_before[1])
        torch.testing.assert_close(opt.state[healthy]["exp_avg"], moment_before)
        assert opt.state[healthy]["step"] == opt.state[broken]["step"] == 1

    def test_failed_first_step_creates_no_state(self):
        a, b = torch.nn.Parameter(torch.ones(2)), torch.nn.Parameter(torch.ones(2))
        opt = AdamW([a, b])
        a.grad, b.grad = torch.ones(2), torch.tensor([float("nan"), 0.0])
        with pytest.raises(NumericError):
            opt.step()
        assert not opt.state.get(a) and not opt.state.get(b)
        torch.testing.assert_close(a.detach(), torch.ones(2))

    def test_invalid_hyperparameters(self):
        with pytest.raises(ValueError):
            AdamW([torch.nn.Parameter(torch.ones(1))], lr=0)


def test_config_with_tied_embeddings_runs(tiny_config):
    cfg = replace(tiny_config, tied_embeddings=True, positional_scheme="learned")
    model = init_model(cfg)
    logits, _ = model(tokens([0, 1, 2]))
    assert torch.isfinite(logits).all()


def test_model_config_defaults_validate():
    ModelConfig(vocab_size=8).validate()
