#include <cmath>
#include <random>

#include "torch_doctest.hpp"
#include "nvc/error.hpp"
#include "nvc/model/entropy.hpp"

using namespace nvc;

namespace {

struct Init {
  Init() {
    torch::set_num_threads(1);
    torch::manual_seed(0);
  }
} init;

torch::Tensor scalar(double v) { return torch::tensor({v}, torch::kFloat64); }

double bits_at(double q, double mu, double sigma) {
  return laplace_bits(scalar(q), scalar(mu), scalar(sigma)).item<double>();
}

}  // namespace

TEST_CASE("quantize examples") {
  auto v = torch::tensor({1.4f});
  auto mu = torch::tensor({0.2f});
  CHECK(quantize(v, mu, QuantMode::kInfer).item<float>() == doctest::Approx(1.2f));
  CHECK(quantize(torch::tensor({-0.5f}), torch::tensor({0.0f}), QuantMode::kInfer).item<float>() == -1.0f);
  CHECK(quantize(torch::tensor({0.5f}), torch::tensor({0.0f}), QuantMode::kInfer).item<float>() == 1.0f);
  CHECK(round_half_away(torch::tensor({-2.5, -1.49, 0.0, 2.5})).equal(torch::tensor({-3.0, -1.0, 0.0, 3.0})));
}

TEST_CASE("training noise is zero-mean") {
  torch::manual_seed(3);
  auto v = torch::zeros({1000000}, torch::kFloat64);
  auto q = quantize(v, v, QuantMode::kTrain);
  CHECK(std::abs((q - v).mean().item<double>()) < 0.002);
  CHECK(q.min().item<double>() >= -0.5);
  CHECK(q.max().item<double>() < 0.5);
}

TEST_CASE("round_ste passes gradients through") {
  auto x = torch::tensor({0.3, 1.7}, torch::requires_grad());
  round_ste(x).sum().backward();
  CHECK(x.grad().equal(torch::ones({2}, torch::kFloat64)));
}

TEST_CASE("laplace rate closed form") {
  const double p = 1.0 - std::exp(-0.5);
  CHECK(p == doctest::Approx(0.39347).epsilon(1e-5));
  CHECK(bits_at(0.0, 0.0, 1.0) == doctest::Approx(-std::log2(p)).epsilon(1e-12));
  CHECK(bits_at(0.0, 0.0, 1.0) == doctest::Approx(1.3456).epsilon(1e-4));
  // Away from the mean: 0.5 (e^{-(a-0.5)/b} - e^{-(a+0.5)/b}).
  const double far = 0.5 * (std::exp(-1.5 / 0.7) - std::exp(-2.5 / 0.7));
  CHECK(bits_at(3.0, 1.0, 0.7) == doctest::Approx(-std::log2(far)).epsilon(1e-12));
  CHECK(laplace_bits(2.0, 0.7) == doctest::Approx(-std::log2(far)).epsilon(1e-12));
}

TEST_CASE("laplace rate is even in the offset and concentrates at the floor scale") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-4.0, 4.0), s(0.02, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double mu = u(rng), d = u(rng), b = s(rng);
    CHECK(bits_at(mu + d, mu, b) == doctest::Approx(bits_at(mu - d, mu, b)).epsilon(1e-12));
  }
  const double tight = bits_at(0.0, 0.0, kScaleMin);
  CHECK(tight >= 0.0);
  CHECK(tight < 1e-12);
  CHECK(bits_at(500.0, 0.0, 0.1) == 16.0);
}

TEST_CASE("laplace rate gradients match central differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mu_d(-3.0, 3.0), sigma_d(0.05, 5.0);
  std::uniform_int_distribution<int> q_d(-6, 6);
  const double h = 1e-4;
  int checked = 0;
  double worst = 0.0;
  while (checked < 100) {
    const double q = q_d(rng), mu = mu_d(rng), sigma = sigma_d(rng);
    const double a = std::abs(q - mu);
    if (std::abs(a - 0.5) < 1e-2 || bits_at(q, mu, sigma) > 15.0) continue;
    auto m = scalar(mu).requires_grad_(true);
    auto s = scalar(sigma).requires_grad_(true);
    laplace_bits(scalar(q), m, s).sum().backward();
    const double gm = m.grad().item<double>(), gs = s.grad().item<double>();
    const double fm = (bits_at(q, mu + h, sigma) - bits_at(q, mu - h, sigma)) / (2 * h);
    const double fs = (bits_at(q, mu, sigma + h) - bits_at(q, mu, sigma - h)) / (2 * h);
    auto rel = [](double g, double f) { return std::abs(g - f) / std::max({std::abs(g), std::abs(f), 1e-6}); };
    worst = std::max({worst, rel(gm, fm), rel(gs, fs)});
    ++checked;
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("scale ladder round-trips its rungs") {
  for (int i = 0; i < scale_table_count(); ++i) CHECK(scale_index(scale_of_index(i)) == i);
  CHECK(scale_index(0.0) == 0);
  CHECK(scale_index(1e9) == scale_table_count() - 1);
  CHECK(scale_table(5).cdf.back() == kCdfTotal);
}

// ---------------------------------------------------------------------------

TEST_CASE("quadtree groups partition the latent") {
  auto s = quadtree_partition(4, 4);
  for (const auto& g : s.groups) CHECK(g.size() == 4);
  CHECK(s.groups[0].front() == std::pair{0, 0});
  CHECK(s.groups[1].front() == std::pair{1, 1});
  CHECK(s.groups[2].front() == std::pair{0, 1});
  CHECK(s.groups[3].front() == std::pair{1, 0});
  auto total = torch::zeros({1, 1, 6, 8});
  for (int k = 0; k < 4; ++k) total += quadtree_mask(6, 8, k, torch::TensorOptions());
  CHECK(torch::equal(total, torch::ones({1, 1, 6, 8})));
  try {
    quadtree_partition(5, 4);
    FAIL("expected odd-dims");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOddDimensions);
  }
}

TEST_CASE("quadtree causality over random configurations") {
  std::mt19937_64 rng(11);
  const ArchKind kinds[] = {ArchKind::kCnn, ArchKind::kMixed, ArchKind::kTransformer};
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 4 * (1 + static_cast<int>(rng() % 4));
    const int ch = 8 * (1 + static_cast<int>(rng() % 3));
    const int h = 4 * (1 + static_cast<int>(rng() % 3)), w = 4 * (1 + static_cast<int>(rng() % 3));
    const bool temporal = rng() % 2 == 0;
    const auto kind = kinds[rng() % 3];
    torch::manual_seed(trial);
    LatentEntropyModel model(c, ch, 4, temporal ? 8 : 0, true, kind, AttentionConfig{8, 4, 1});
    model->eval();
    torch::NoGradGuard guard;
    EntropyPriors priors{torch::randn({1, c, h, w}), temporal ? torch::randn({1, 8, 4 * h, 4 * w}) : torch::Tensor()};
    auto hyper = torch::randn({1, ch, h, w});
    auto decoded = torch::randn({1, c, h, w});
    for (int k = 0; k < kQuadtreeSteps; ++k) {
      auto base = model->step_params(k, hyper, decoded, priors);
      CHECK(base.mean.sizes() == torch::IntArrayRef{1, c, h, w});
      CHECK(base.scale.min().item<float>() >= static_cast<float>(kScaleMin));
      auto undecoded = 1.0 - quadtree_decoded_mask(h, w, k, decoded.options());
      auto perturbed = decoded + undecoded * torch::randn_like(decoded) * 10.0;
      auto again = model->step_params(k, hyper, perturbed, priors);
      CHECK(torch::equal(base.mean, again.mean));
      CHECK(torch::equal(base.scale, again.scale));
    }
  }
}

TEST_CASE("parameter prediction checks prior alignment") {
  LatentEntropyModel model(8, 16, 4, 12, true, ArchKind::kCnn, AttentionConfig{});
  torch::NoGradGuard guard;
  auto hyper = torch::randn({1, 16, 4, 4});
  auto spatial = torch::zeros({1, 16, 4, 4});
  auto p = model->predict_params(hyper, spatial, {torch::zeros({1, 8, 4, 4}), torch::zeros({1, 12, 16, 16})});
  CHECK(p.mean.sizes() == torch::IntArrayRef{1, 8, 4, 4});
  CHECK(torch::isfinite(p.scale).all().item<bool>());
  try {
    model->predict_params(hyper, spatial, {torch::zeros({1, 8, 2, 4}), torch::zeros({1, 12, 16, 16})});
    FAIL("expected alignment mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAlignmentMismatch);
  }
  CHECK_THROWS_AS(model->predict_params(hyper, spatial, {torch::zeros({1, 8, 4, 4}), {}}), Error);

  // Motion path: no temporal prior.
  LatentEntropyModel motion(8, 16, 4, 0, true, ArchKind::kCnn, AttentionConfig{});
  auto q = motion->predict_params(hyper, spatial, {torch::zeros({1, 8, 4, 4}), {}});
  CHECK(q.scale.sizes() == torch::IntArrayRef{1, 8, 4, 4});
}

// ---------------------------------------------------------------------------

TEST_CASE("factorized prior: monotone CDF, non-negative bits, 58 parameters per channel") {
  FactorizedPrior prior(5);
  CHECK(parameter_count(*prior) == 5 * 58);
  torch::NoGradGuard guard;
  auto grid = torch::linspace(-40, 40, 801).view({1, 1, -1}).expand({5, 1, 801});
  auto logits = prior->logits_cdf(grid);
  CHECK((logits.diff(1, 2) >= 0).all().item<bool>());
  auto b = prior->bits(torch::randn({2, 5, 3, 3}) * 20.0);
  CHECK(b.min().item<float>() >= 0.0f);
}

TEST_CASE("factorized prior learns to hold its mass inside [-30, 30]") {
  torch::manual_seed(5);
  FactorizedPrior prior(2);
  torch::optim::Adam opt(prior->parameters(), torch::optim::AdamOptions(1e-2));
  for (int step = 0; step < 400; ++step) {
    auto u = torch::rand({1, 2, 16, 16}) - 0.5;
    auto sample = torch::sign(u) * torch::log1p(-2 * u.abs()) * -3.0;
    auto loss = prior->bits(sample + torch::rand_like(sample) - 0.5).mean();
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  torch::NoGradGuard guard;
  auto v = torch::arange(-30, 31, torch::kFloat32).view({1, 1, -1}).expand({2, 1, 61});
  auto lower = torch::sigmoid(prior->logits_cdf(v - 0.5));
  auto upper = torch::sigmoid(prior->logits_cdf(v + 0.5));
  auto mass = (upper - lower).sum(2);
  CHECK(mass.min().item<float>() >= 0.999f);
}

TEST_CASE("hyper tables fold the tails and stay valid") {
  FactorizedPrior prior(3);
  auto tables = prior->tables(16);
  REQUIRE(tables.size() == 3);
  for (const auto& t : tables) {
    CHECK(t.min_symbol == -16);
    CHECK(t.size() == 33);
    CHECK_NOTHROW(check_cdf(t));
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("compress and decompress reproduce the same latent") {
  for (bool temporal : {false, true}) {
    torch::manual_seed(2);
    LatentEntropyModel model(6, 16, 4, temporal ? 8 : 0, true, ArchKind::kCnn, AttentionConfig{});
    model->eval();
    EntropyPriors priors{torch::randn({1, 6, 8, 4}), temporal ? torch::randn({1, 8, 32, 16}) : torch::Tensor()};
    auto y = torch::randn({1, 6, 8, 4}) * 4.0;
    auto coded = model->compress(y, priors);
    auto [y_hat, bits] = model->decompress(coded.hyper_bytes, coded.latent_bytes, 8, 4, priors);
    CHECK(torch::equal(coded.y_hat, y_hat));
    CHECK(torch::equal(coded.latent_bits, bits));
    CHECK((coded.y_hat - y).abs().max().item<float>() <= 0.5f + 1e-5f);
    const double payload = 8.0 * static_cast<double>(coded.hyper_bytes.size() + coded.latent_bytes.size());
    const double estimate = coded.estimated_hyper_bits + coded.estimated_latent_bits;
    CHECK(payload <= estimate * 1.02 + 256.0);
    CHECK(payload >= estimate * 0.98 - 256.0);
  }
}

TEST_CASE("training pass shapes and decoder input rounding") {
  LatentEntropyModel model(4, 8, 4, 0, false, ArchKind::kCnn, AttentionConfig{});
  auto y = torch::randn({2, 4, 8, 8}, torch::requires_grad());
  auto out = model->forward(y, EntropyPriors{});
  CHECK(out.latent_bits.sizes() == y.sizes());
  CHECK(out.hyper_bits.sizes() == torch::IntArrayRef{2, 4, 2, 2});
  CHECK((out.y_hat - y).abs().max().item<float>() <= 0.5f + 1e-5f);
  (out.latent_bits.sum() + out.hyper_bits.sum()).backward();
  CHECK(y.grad().abs().sum().item<float>() > 0.0f);
}
