import pytest
import torch

from antispoof.errors import ShapeError, UsageError
from antispoof.models import (LiveSpoofClassifier, TemporalHead, build_encoder,
                              init_fan_in_, module_generator)
from antispoof.network import SpoofNet
from antispoof.profiles import get_profile


@pytest.fixture(scope="module")
def tiny_net():
    return SpoofNet(get_profile("tiny"), "full", num_domains=3, seed=0)


def zero_module_(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


# --- encoder ----------------------------------------------------------------

def test_tiny_encode_shape(tiny_net):
    x = torch.rand(5, 3, 32, 32)
    emb = tiny_net.encode(x, mode="eval")
    assert emb.shape == (5, 64)
    assert torch.isfinite(emb).all()


@pytest.mark.slow
def test_resnet50_shaped_encode_batch_48():
    profile = get_profile("resnet50-shaped")
    encoder = build_encoder(profile)
    encoder.eval()
    with torch.no_grad():
        emb = encoder(torch.rand(48, 3, 224, 224))
    assert emb.shape == (48, 2048)


def test_encode_rejects_wrong_size(tiny_net):
    with pytest.raises(ShapeError) as err:
        tiny_net.encode(torch.rand(2, 3, 16, 16))
    assert "32" in str(err.value) and "16" in str(err.value)


def test_zero_weight_projection_gives_zero_embedding():
    net = SpoofNet(get_profile("tiny"), "backbone", num_domains=3, seed=0)
    zero_module_(net.encoder)
    emb = net.encode(torch.zeros(2, 3, 32, 32), mode="eval")
    assert torch.equal(emb, torch.zeros(2, 64))


def test_eval_mode_encode_is_deterministic(tiny_net):
    x = torch.rand(3, 3, 32, 32)
    first = tiny_net.encode(x, mode="eval")
    second = tiny_net.encode(x, mode="eval")
    assert torch.equal(first, second)


# --- classifier ----------------------------------------------------------------

def test_classifier_shapes_resnet_profile():
    clf = LiveSpoofClassifier(2048, 512)
    clf.eval()
    logits = clf(torch.rand(48, 2048))
    assert logits.shape == (48, 2)


def test_zero_weights_give_symmetric_logits():
    clf = LiveSpoofClassifier(8, 4)
    zero_module_(clf)
    clf.eval()
    logits = clf(torch.rand(3, 8))
    assert torch.equal(logits, torch.zeros(3, 2))
    assert torch.allclose(torch.softmax(logits, dim=1), torch.full((3, 2), 0.5))


def test_classifier_matches_hand_matrix_arithmetic():
    clf = LiveSpoofClassifier(3, 2, dropout=0.0).double()
    with torch.no_grad():
        clf.fc1.weight.copy_(torch.tensor([[1.0, 0.0, -1.0], [0.5, 0.5, 0.5]],
                                          dtype=torch.float64))
        clf.fc1.bias.copy_(torch.tensor([0.1, -0.2], dtype=torch.float64))
        clf.fc2.weight.copy_(torch.tensor([[1.0, -1.0], [2.0, 0.5]],
                                          dtype=torch.float64))
        clf.fc2.bias.copy_(torch.tensor([0.0, 0.3], dtype=torch.float64))
    clf.eval()
    x = torch.tensor([[0.2, -0.4, 0.6]], dtype=torch.float64)
    # hand evaluation: h = relu(W1 x + b1); logits = W2 h + b2
    h1 = max(0.0, 1.0 * 0.2 + 0.0 * -0.4 + -1.0 * 0.6 + 0.1)      # -0.3 -> 0
    h2 = max(0.0, 0.5 * (0.2 - 0.4 + 0.6) - 0.2)                   # 0.0 -> 0
    expected = [1.0 * h1 - 1.0 * h2 + 0.0, 2.0 * h1 + 0.5 * h2 + 0.3]
    assert clf(x).tolist() == [pytest.approx(expected, abs=1e-12)]


def test_classifier_rejects_wrong_width(tiny_net):
    with pytest.raises(ShapeError):
        tiny_net.classify(torch.rand(2, 65))


# --- temporal head ----------------------------------------------------------------

def test_temporal_shapes_paper_profile():
    head = TemporalHead(get_profile("resnet50-shaped"))
    head.eval()
    out = head(torch.rand(8, 2, 2048))
    assert out.shape == (2, 2048)  # 8 steps x 256 hidden concatenated


def test_temporal_tiny_width_arithmetic(tiny_net):
    out = tiny_net.temporal_encode(torch.rand(4, 3, 64), mode="eval")
    assert out.shape == (3, 4 * 8)


def test_zeroed_lstm_zero_input_gives_zero_output():
    head = TemporalHead(get_profile("tiny"))
    zero_module_(head.lstm)
    head.eval()
    out = head(torch.zeros(4, 2, 64))
    assert torch.equal(out, torch.zeros(2, 32))


def test_temporal_rejects_wrong_sequence_length(tiny_net):
    with pytest.raises(ShapeError):
        tiny_net.temporal_encode(torch.rand(5, 2, 64))


def test_temporal_concatenates_in_time_order():
    head = TemporalHead(get_profile("tiny"))
    head.eval()
    seq = torch.rand(4, 2, 64)
    out = head(seq)
    raw, _ = head.lstm(head.norm(seq.reshape(8, 64)).reshape(4, 2, 64)
                       - head.norm(seq.reshape(8, 64)).reshape(4, 2, 64).mean(0, keepdim=True))
    for t in range(4):
        assert torch.allclose(out[:, t * 8:(t + 1) * 8], raw[t])


# --- composition and sharing ----------------------------------------------------------------

def test_paths_compose_without_reshaping(tiny_net):
    images = torch.rand(6, 3, 32, 32)
    logits = tiny_net.classify(tiny_net.encode(images, mode="eval"), mode="eval")
    assert logits.shape == (6, 2)
    clips = torch.rand(4, 2, 3, 32, 32)
    emb = tiny_net.encode(clips.reshape(8, 3, 32, 32), mode="eval").reshape(4, 2, 64)
    feats = tiny_net.temporal_encode(emb, mode="eval")
    tiny_net.eval()
    vb_logits = tiny_net.video_classifier(feats)
    assert vb_logits.shape == (2, 2)


def test_encoder_is_shared_object(tiny_net):
    image_params = tiny_net.image_step_params()
    video_params = tiny_net.video_step_params()
    for key in image_params:
        if key.startswith("encoder/"):
            assert image_params[key] is video_params[key]


def test_same_seed_gives_same_encoder_across_variants():
    a = SpoofNet(get_profile("tiny"), "backbone", num_domains=3, seed=5)
    b = SpoofNet(get_profile("tiny"), "full", num_domains=3, seed=5)
    for (na, pa), (nb, pb) in zip(a.encoder.named_parameters(),
                                  b.encoder.named_parameters()):
        assert na == nb and torch.equal(pa, pb)


def test_module_generator_is_stable():
    g1 = module_generator(3, "encoder")
    g2 = module_generator(3, "encoder")
    assert torch.rand(4, generator=g1).tolist() == torch.rand(4, generator=g2).tolist()
    g3 = module_generator(3, "temporal")
    assert torch.rand(4, generator=g3).tolist() != torch.rand(4, generator=g2).tolist()


def test_mode_validation(tiny_net):
    with pytest.raises(Exception):
        tiny_net.encode(torch.rand(1, 3, 32, 32), mode="training")


def test_concurrent_eval_is_consistent(tiny_net):
    from concurrent.futures import ThreadPoolExecutor

    x = torch.rand(4, 3, 32, 32)
    tiny_net.eval()
    with torch.no_grad():
        expected = tiny_net.encoder(x)

    def worker(_):
        with torch.no_grad():
            return tiny_net.encoder(x)

    with ThreadPoolExecutor(max_workers=4) as pool:
        results = list(pool.map(worker, range(8)))
    for r in results:
        assert torch.equal(r, expected)


def test_variant_without_video_branch_rejects_temporal_use():
    net = SpoofNet(get_profile("tiny"), "backbone", num_domains=3, seed=0)
    with pytest.raises(UsageError):
        net.temporal_encode(torch.rand(4, 1, 64))


def test_fan_in_init_bounds():
    layer = torch.nn.Linear(100, 50)
    init_fan_in_(layer, module_generator(0, "probe"))
    bound = (1.0 / 100) ** 0.5
    assert layer.weight.abs().max().item() <= bound
    assert layer.weight.abs().max().item() > bound * 0.5


def test_group_census_accounts_for_every_parameter(tiny_net):
    census = tiny_net.group_census()
    assert sum(census.values()) == sum(p.numel() for p in tiny_net.parameters())
    assert all(count > 0 for count in census.values())
