#include "sdae/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sdae/distill.hpp"
#include "sdae/masking.hpp"
#include "sdae/ops.hpp"
#include "sdae/vit.hpp"

namespace sdae::gradcheck {

namespace {

double rel_err(double analytic, double fd) {
  const double denom = std::max(1e-6, std::abs(analytic) + std::abs(fd));
  return std::abs(analytic - fd) / denom;
}

TensorD rand_matrix(Rng& rng, std::size_t r, std::size_t c,
                    double amplitude = 1.0) {
  TensorD t = TensorD::zeros({r, c});
  for (double& v : t.data()) v = rng.normal() * amplitude;
  return t;
}

}  // namespace

CheckResult run_check(const CheckSpec& spec, std::uint64_t seed) {
  CheckResult res;
  res.name = spec.name;
  res.tolerance = spec.tolerance;
  res.cases = spec.cases;

  for (std::size_t c = 0; c < spec.cases; ++c) {
    Rng rng(Rng::derive(seed, {0x67636bULL, c}));
    Case cs = spec.make_case(rng);

    // Analytic gradients through the tape.
    std::vector<std::vector<double>> analytic(cs.inputs.size());
    {
      TapeD tape;
      TapeScopeT<double> scope(tape);
      TensorD loss = cs.loss(cs.inputs);
      tape.backward(loss);
      for (std::size_t i = 0; i < cs.inputs.size(); ++i)
        if (cs.inputs[i].requires_grad())
          analytic[i] = cs.inputs[i].has_grad()
                            ? cs.inputs[i].grad()
                            : std::vector<double>(cs.inputs[i].size(), 0.0);
    }

    // Central differences, forward evaluations only.
    NoTapeScopeT<double> no_tape;
    for (std::size_t i = 0; i < cs.inputs.size(); ++i) {
      if (!cs.inputs[i].requires_grad()) continue;
      auto& data = cs.inputs[i].data();
      for (std::size_t e = 0; e < data.size(); ++e) {
        const double keep = data[e];
        data[e] = keep + spec.step;
        const double up = cs.loss(cs.inputs).item();
        data[e] = keep - spec.step;
        const double down = cs.loss(cs.inputs).item();
        data[e] = keep;
        const double fd = (up - down) / (2.0 * spec.step);
        res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic[i][e], fd));
        ++res.compared;
      }
    }
  }
  res.pass = res.max_rel_err < res.tolerance;
  return res;
}

namespace {

// Scalar projection so every output element carries a distinct weight.
TensorD weighted(const TensorD& x, const TensorD& w) {
  return ops::sum(ops::mul(x, w));
}

std::vector<CheckSpec> make_kernel_specs() {
  std::vector<CheckSpec> specs;

  auto dims = [](Rng& rng) {
    return std::pair<std::size_t, std::size_t>{1 + rng.uniform_index(5),
                                               1 + rng.uniform_index(6)};
  };

  specs.push_back(
      {"add", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::add(in[0], in[1]), in[2]);
         };
         return cs;
       }});

  specs.push_back(
      {"sub", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::sub(in[0], in[1]), in[2]);
         };
         return cs;
       }});

  specs.push_back(
      {"mul", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::mul(in[0], in[1]), in[2]);
         };
         return cs;
       }});

  specs.push_back(
      {"scale", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::scale(in[0], -1.37), in[1]);
         };
         return cs;
       }});

  specs.push_back(
      {"matmul", [](Rng& rng) {
         const std::size_t m = 1 + rng.uniform_index(5);
         const std::size_t k = 1 + rng.uniform_index(5);
         const std::size_t n = 1 + rng.uniform_index(5);
         Case cs;
         cs.inputs = {rand_matrix(rng, m, k).set_requires_grad(true),
                      rand_matrix(rng, k, n).set_requires_grad(true),
                      rand_matrix(rng, m, n)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::matmul(in[0], in[1]), in[2]);
         };
         return cs;
       }});

  specs.push_back(
      {"transpose", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, c, r)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::transpose(in[0]), in[1]);
         };
         return cs;
       }});

  specs.push_back(
      {"reshape", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, 1, r * c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::reshape(in[0], {std::size_t(1), in[0].size()}),
                           in[1]);
         };
         return cs;
       }});

  specs.push_back(
      {"softmax", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c, 2.0).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::softmax(in[0]), in[1]);
         };
         return cs;
       }});

  specs.push_back(
      {"layernorm", [](Rng& rng) {
         const std::size_t r = 1 + rng.uniform_index(5);
         const std::size_t c = 2 + rng.uniform_index(6);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::layernorm(in[0], 1e-6), in[1]);
         };
         return cs;
       }});

  specs.push_back(
      {"gelu", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c, 2.0).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::gelu(in[0]), in[1]);
         };
         return cs;
       }});

  specs.push_back(
      {"add_rowvec", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, 1, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::add_rowvec(in[0], in[1]), in[2]);
         };
         return cs;
       }});

  specs.push_back(
      {"mul_rowvec", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, 1, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::mul_rowvec(in[0], in[1]), in[2]);
         };
         return cs;
       }});

  specs.push_back(
      {"broadcast_row", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, 1, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [r = r](const std::vector<TensorD>& in) {
           return weighted(ops::broadcast_row(in[0], r), in[1]);
         };
         return cs;
       }});

  specs.push_back(
      {"select_rows", [](Rng& rng) {
         const std::size_t r = 2 + rng.uniform_index(5);
         const std::size_t c = 1 + rng.uniform_index(6);
         const std::size_t k = 1 + rng.uniform_index(r + 1);
         std::vector<std::size_t> idx(k);
         for (auto& i : idx) i = rng.uniform_index(r);  // repeats allowed
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, k, c)};
         cs.loss = [idx](const std::vector<TensorD>& in) {
           return weighted(ops::select_rows(in[0], idx), in[1]);
         };
         return cs;
       }});

  specs.push_back(
      {"scatter_rows", [](Rng& rng) {
         const std::size_t r = 2 + rng.uniform_index(5);
         const std::size_t c = 1 + rng.uniform_index(6);
         std::vector<std::size_t> all(r);
         for (std::size_t i = 0; i < r; ++i) all[i] = i;
         rng.shuffle(all);
         const std::size_t k = 1 + rng.uniform_index(r);
         std::vector<std::size_t> idx(all.begin(), all.begin() + k);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, k, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [idx](const std::vector<TensorD>& in) {
           return weighted(ops::scatter_rows(in[0], idx, in[1]), in[2]);
         };
         return cs;
       }});

  specs.push_back(
      {"slice_rows", [](Rng& rng) {
         const std::size_t r = 2 + rng.uniform_index(5);
         const std::size_t c = 1 + rng.uniform_index(6);
         const std::size_t r0 = rng.uniform_index(r);
         const std::size_t len = 1 + rng.uniform_index(r - r0);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, len, c)};
         cs.loss = [r0, len](const std::vector<TensorD>& in) {
           return weighted(ops::slice_rows(in[0], r0, len), in[1]);
         };
         return cs;
       }});

  specs.push_back(
      {"slice_cols", [](Rng& rng) {
         const std::size_t r = 1 + rng.uniform_index(5);
         const std::size_t c = 2 + rng.uniform_index(6);
         const std::size_t c0 = rng.uniform_index(c);
         const std::size_t len = 1 + rng.uniform_index(c - c0);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, len)};
         cs.loss = [c0, len](const std::vector<TensorD>& in) {
           return weighted(ops::slice_cols(in[0], c0, len), in[1]);
         };
         return cs;
       }});

  specs.push_back(
      {"concat_rows", [](Rng& rng) {
         const std::size_t c = 1 + rng.uniform_index(6);
         const std::size_t r1 = 1 + rng.uniform_index(4);
         const std::size_t r2 = 1 + rng.uniform_index(4);
         Case cs;
         cs.inputs = {rand_matrix(rng, r1, c).set_requires_grad(true),
                      rand_matrix(rng, r2, c).set_requires_grad(true),
                      rand_matrix(rng, r1 + r2, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::concat_rows<double>({in[0], in[1]}), in[2]);
         };
         return cs;
       }});

  specs.push_back(
      {"concat_cols", [](Rng& rng) {
         const std::size_t r = 1 + rng.uniform_index(5);
         const std::size_t c1 = 1 + rng.uniform_index(4);
         const std::size_t c2 = 1 + rng.uniform_index(4);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c1).set_requires_grad(true),
                      rand_matrix(rng, r, c2).set_requires_grad(true),
                      rand_matrix(rng, r, c1 + c2)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return weighted(ops::concat_cols<double>({in[0], in[1]}), in[2]);
         };
         return cs;
       }});

  specs.push_back(
      {"sum", [dims](Rng& rng) {
         auto [r, c] = dims(rng);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return ops::sum(in[0]);
         };
         return cs;
       }});

  specs.push_back(
      {"cosine_loss", [](Rng& rng) {
         const std::size_t r = 1 + rng.uniform_index(5);
         const std::size_t c = 2 + rng.uniform_index(6);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return ops::cosine_loss(in[0], in[1], 1e-12, true);
         };
         return cs;
       }});

  specs.push_back(
      {"cosine_loss_global", [](Rng& rng) {
         const std::size_t r = 1 + rng.uniform_index(5);
         const std::size_t c = 2 + rng.uniform_index(6);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, c).set_requires_grad(true),
                      rand_matrix(rng, r, c)};
         cs.loss = [](const std::vector<TensorD>& in) {
           return ops::cosine_loss(in[0], in[1], 1e-12, false);
         };
         return cs;
       }});

  specs.push_back(
      {"softmax_cross_entropy", [](Rng& rng) {
         const std::size_t r = 1 + rng.uniform_index(5);
         const std::size_t k = 2 + rng.uniform_index(5);
         std::vector<std::size_t> labels(r);
         for (auto& y : labels) y = rng.uniform_index(k);
         Case cs;
         cs.inputs = {rand_matrix(rng, r, k, 2.0).set_requires_grad(true)};
         cs.loss = [labels](const std::vector<TensorD>& in) {
           return ops::softmax_cross_entropy(in[0], labels);
         };
         return cs;
       }});

  return specs;
}

}  // namespace

std::vector<CheckResult> kernel_suite(std::uint64_t seed,
                                      std::size_t cases_per_kernel) {
  std::vector<CheckResult> out;
  for (CheckSpec spec : make_kernel_specs()) {
    spec.cases = cases_per_kernel;
    out.push_back(run_check(spec, Rng::derive(seed, {out.size()})));
  }
  return out;
}

CheckResult end_to_end_check(std::uint64_t seed, double sample_fraction) {
  VitConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 4;
  cfg.channels = 3;
  cfg.encoder_depth = 2;
  cfg.decoder_depth = 1;
  cfg.embed_dim = 32;
  cfg.decoder_dim = 16;
  cfg.num_heads = 2;
  cfg.decoder_num_heads = 2;
  cfg.mlp_ratio = 2.0;

  VitStateT<double> state = init_vit<double>(cfg, Rng::derive(seed, {11}));
  const MaskPlan plan = make_plan(cfg.n_tokens(), 0.75, FeedingMode::multi_fold,
                                  3, 0.0, Rng::derive(seed, {12}));

  Rng data_rng(Rng::derive(seed, {13}));
  TensorD image = TensorD::zeros({cfg.image_size, cfg.image_size,
                                  cfg.channels});
  for (double& v : image.data()) v = data_rng.normal();
  const TensorD tokens = patchify(image, cfg.patch_size);
  TensorD target = rand_matrix(data_rng, plan.masked_idx.size(),
                               cfg.embed_dim);
  target = normalize_targets(target, 1e-6);

  auto loss_value = [&]() -> TensorD {
    TensorD visible = ops::select_rows(tokens, plan.visible_idx);
    TensorD latents = encoder_forward(cfg, state.encoder, state.enc_pos,
                                      visible, plan.visible_idx);
    TensorD pred = decoder_forward(state, latents, plan);
    return ops::cosine_loss(pred, target, 1e-12, true);
  };

  CheckResult res;
  res.name = "end_to_end";
  res.tolerance = 1e-3;
  res.cases = 1;

  NamedParamsT<double> params = named_params(state);

  // Analytic pass.
  {
    TapeT<double> tape;
    TapeScopeT<double> scope(tape);
    TensorD loss = loss_value();
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (auto& [name, p] : params)
    analytic.push_back(p.has_grad() ? p.grad()
                                    : std::vector<double>(p.size(), 0.0));

  // FD over a random sample of parameter elements.
  const std::size_t total = params.total_elements();
  auto n_samples = static_cast<std::size_t>(
      std::ceil(sample_fraction * static_cast<double>(total)));
  n_samples = std::max<std::size_t>(n_samples, 32);
  Rng pick(Rng::derive(seed, {14}));
  const double h = 1e-5;
  NoTapeScopeT<double> no_tape;
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::size_t flat = pick.uniform_index(total);
    std::size_t pi = 0;
    while (flat >= params[pi].second.size()) {
      flat -= params[pi].second.size();
      ++pi;
    }
    auto& data = params[pi].second.data();
    const double keep = data[flat];
    data[flat] = keep + h;
    const double up = loss_value().item();
    data[flat] = keep - h;
    const double down = loss_value().item();
    data[flat] = keep;
    const double fd = (up - down) / (2.0 * h);
    res.max_rel_err = std::max(res.max_rel_err,
                               rel_err(analytic[pi][flat], fd));
    ++res.compared;
  }
  res.pass = res.max_rel_err < res.tolerance;
  return res;
}

bool all_pass(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace sdae::gradcheck
