#include "sdae/eval.hpp"

#include <algorithm>
#include <cmath>

#include "sdae/kernels.hpp"
#include "sdae/ops.hpp"
#include "sdae/optim.hpp"
#include "sdae/rng.hpp"

namespace sdae {

FeatureSource feature_source_from_string(const std::string& s) {
  if (s == "mean_pool_patches") return FeatureSource::mean_pool_patches;
  if (s == "class_token") return FeatureSource::class_token;
  throw ConfigError("unknown feature source '" + s + "'");
}

const char* to_string(FeatureSource f) {
  return f == FeatureSource::mean_pool_patches ? "mean_pool_patches"
                                               : "class_token";
}

Tensor extract_features(const VitConfig& cfg, const EncoderParamsT<float>& enc,
                        const Tensor& enc_pos, const Dataset& ds,
                        FeatureSource source) {
  if (source == FeatureSource::class_token && !cfg.use_class_token)
    throw ConfigError("features: class_token source requires the class token");
  if (ds.image_size != cfg.image_size || ds.channels != cfg.channels)
    throw ConfigError("features: dataset images " +
                      std::to_string(ds.image_size) + "x" +
                      std::to_string(ds.channels) + " do not match the model");

  const std::size_t n = ds.n_items();
  const std::size_t d = cfg.embed_dim;
  const std::size_t n_tok = cfg.n_tokens();
  const std::size_t cls = cfg.use_class_token ? 1 : 0;
  std::vector<std::size_t> all(n_tok);
  for (std::size_t i = 0; i < n_tok; ++i) all[i] = i;

  Tensor out = Tensor::zeros({n, d});
  std::vector<std::string> errors(std::max<std::size_t>(n, 1));

#pragma omp parallel for num_threads(sdae::threads()) schedule(dynamic, 16) \
    if (sdae::threads() > 1)
  for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      NoTapeScope no_tape;
      const Tensor tokens =
          patchify(standardized_image(ds, i), cfg.patch_size);
      const Tensor latents =
          encoder_forward(cfg, enc, enc_pos, tokens, all);
      float* row = out.ptr() + i * d;
      if (source == FeatureSource::class_token) {
        std::copy_n(latents.ptr(), d, row);
      } else {
        const float inv = 1.0f / static_cast<float>(n_tok);
        for (std::size_t t = 0; t < n_tok; ++t) {
          const float* src = latents.ptr() + (cls + t) * d;
          for (std::size_t j = 0; j < d; ++j) row[j] += src[j] * inv;
        }
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& err : errors)
    if (!err.empty()) throw ContractError(err);
  return out;
}

ProbeResult probe_features(const Tensor& train_x,
                           const std::vector<std::uint16_t>& train_y,
                           const Tensor& eval_x,
                           const std::vector<std::uint16_t>& eval_y,
                           std::size_t class_count, const ProbeConfig& cfg) {
  if (class_count < 2) throw ConfigError("probe: need at least 2 classes");
  if (train_x.rows() != train_y.size() || eval_x.rows() != eval_y.size())
    throw ConfigError("probe: feature/label count mismatch");
  for (std::uint16_t y : train_y)
    if (y >= class_count)
      throw ConfigError("probe: label " + std::to_string(y) +
                        " outside class count " + std::to_string(class_count));
  const std::size_t d = train_x.cols();

  NamedParams params;
  Tensor w = Tensor::zeros({d, class_count}).set_requires_grad(true);
  Tensor b = Tensor::zeros({class_count}).set_requires_grad(true);
  params.add("probe.weight", w);
  params.add("probe.bias", b);
  AdamW opt(params, AdamWConfig{0.9f, 0.999f, 1e-8f, 0.0f});

  const std::size_t n = train_x.rows();
  const std::size_t batch = std::min(cfg.probe_batch, n);
  for (std::size_t epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
    for (const auto& idx :
         epoch_batches(n, batch, Rng::derive(cfg.seed, {0x70726fULL}), epoch)) {
      std::vector<std::size_t> labels;
      labels.reserve(idx.size());
      for (std::size_t i : idx) labels.push_back(train_y[i]);
      Tape tape;
      TapeScope scope(tape);
      Tensor x = ops::select_rows(train_x, idx);
      Tensor logits = ops::add_rowvec(ops::matmul(x, w), b);
      Tensor loss = ops::softmax_cross_entropy(logits, labels);
      tape.backward(loss);
      opt.step(static_cast<float>(cfg.probe_lr));
      opt.zero_grad();
    }
  }

  // Top-1 on the held-out set.
  NoTapeScope no_tape;
  Tensor logits = ops::add_rowvec(ops::matmul(eval_x, w), b);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < eval_x.rows(); ++i) {
    const float* row = logits.ptr() + i * class_count;
    std::size_t best = 0;
    for (std::size_t k = 1; k < class_count; ++k)
      if (row[k] > row[best]) best = k;
    hits += best == eval_y[i] ? 1 : 0;
  }
  return {static_cast<double>(hits) / static_cast<double>(eval_x.rows()),
          eval_x.rows()};
}

ProbeResult linear_probe(const VitConfig& cfg,
                         const EncoderParamsT<float>& enc,
                         const Tensor& enc_pos, const Dataset& train,
                         const Dataset& eval, const ProbeConfig& probe) {
  if (!train.has_labels || !eval.has_labels)
    throw ConfigError("probe: datasets must carry labels");
  const std::size_t classes = std::max(train.class_count, eval.class_count);
  const Tensor train_x = extract_features(cfg, enc, enc_pos, train,
                                          probe.feature);
  const Tensor eval_x = extract_features(cfg, enc, enc_pos, eval,
                                         probe.feature);
  return probe_features(train_x, train.labels, eval_x, eval.labels, classes,
                        probe);
}

BranchComparison compare_branches(VitState& student, TeacherState& teacher,
                                  const Dataset& train, const Dataset& eval,
                                  const ProbeConfig& probe) {
  BranchComparison out;
  out.student_acc = linear_probe(student.config, student.encoder,
                                 student.enc_pos, train, eval, probe)
                        .accuracy;
  out.teacher_acc = linear_probe(student.config, teacher.params,
                                 student.enc_pos, train, eval, probe)
                        .accuracy;
  VitState random_init = init_vit<float>(
      student.config, Rng::derive(probe.seed, {0x72616e64ULL}));
  out.random_acc = linear_probe(random_init.config, random_init.encoder,
                                random_init.enc_pos, train, eval, probe)
                       .accuracy;
  out.gap = std::abs(out.student_acc - out.teacher_acc);
  return out;
}

double fine_tune(const VitState& pretrained, const Dataset& train,
                 const Dataset& eval, std::size_t epochs, double lr,
                 const ProbeConfig& probe) {
  if (!train.has_labels || !eval.has_labels)
    throw ConfigError("fine_tune: datasets must carry labels");
  VitState model = clone_state(pretrained);
  const VitConfig& cfg = model.config;
  const std::size_t classes = std::max(train.class_count, eval.class_count);
  const std::size_t d = cfg.embed_dim;
  const std::size_t cls = cfg.use_class_token ? 1 : 0;

  NamedParams params;
  collect_encoder_params(model.encoder, cfg.use_class_token, params);
  Rng rng(Rng::derive(probe.seed, {0x6674ULL}));
  Tensor w = Tensor::trunc_normal({d, classes}, rng, 0.02f)
                 .set_requires_grad(true);
  Tensor b = Tensor::zeros({classes}).set_requires_grad(true);
  params.add("head.weight", w);
  params.add("head.bias", b);
  for (auto& [name, t] : params) t.set_requires_grad(true);
  AdamW opt(params, AdamWConfig{0.9f, 0.999f, 1e-8f, 0.0f});

  std::vector<std::size_t> all(cfg.n_tokens());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  auto logits_for = [&](const Dataset& ds, std::size_t item) {
    Tensor tokens = patchify(standardized_image(ds, item), cfg.patch_size);
    Tensor latents =
        encoder_forward(cfg, model.encoder, model.enc_pos, tokens, all);
    Tensor pooled;
    if (probe.feature == FeatureSource::class_token && cls) {
      pooled = ops::slice_rows(latents, 0, 1);
    } else {
      Tensor patches = ops::slice_rows(latents, cls, cfg.n_tokens());
      // Mean over patch tokens via a constant averaging matrix.
      Tensor avg = Tensor::full({std::size_t(1), cfg.n_tokens()},
                                1.0f / static_cast<float>(cfg.n_tokens()));
      pooled = ops::matmul(avg, patches);
    }
    return ops::add_rowvec(ops::matmul(pooled, w), b);
  };

  const std::size_t batch = std::min<std::size_t>(32, train.n_items());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& idx : epoch_batches(
             train.n_items(), batch, Rng::derive(probe.seed, {0x667462ULL}),
             epoch)) {
      const double inv = 1.0 / static_cast<double>(idx.size());
      for (std::size_t i : idx) {
        Tape tape;
        TapeScope scope(tape);
        Tensor logits = logits_for(train, i);
        Tensor loss = ops::softmax_cross_entropy(
            logits, {static_cast<std::size_t>(train.labels[i])});
        tape.backward(ops::scale(loss, static_cast<float>(inv)));
      }
      opt.step(static_cast<float>(lr));
      opt.zero_grad();
    }
  }

  NoTapeScope no_tape;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < eval.n_items(); ++i) {
    Tensor logits = logits_for(eval, i);
    const float* row = logits.ptr();
    std::size_t best = 0;
    for (std::size_t k = 1; k < classes; ++k)
      if (row[k] > row[best]) best = k;
    hits += best == eval.labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(eval.n_items());
}

}  // namespace sdae
