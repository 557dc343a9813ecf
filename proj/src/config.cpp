#include "sdae/config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace sdae {

RunConfig::RunConfig() {
  data.source = DataSource::synthetic;
  data.synth.seed = 1;
  data.synth.n_items = 5000;
  data.synth.class_count = 4;
  data.synth.image_size = model.image_size;
  data.synth.channels = model.channels;
  data.synth.noise_std = 0.05;
}

void apply_preset(RunConfig& cfg, const std::string& preset) {
  if (preset == "toy") {
    cfg = RunConfig();
    return;
  }
  if (preset == "paper") {
    cfg = RunConfig();
    cfg.model.image_size = 224;
    cfg.model.patch_size = 16;
    cfg.model.encoder_depth = 12;
    cfg.model.decoder_depth = 8;
    cfg.model.embed_dim = 768;
    cfg.model.decoder_dim = 512;
    cfg.model.num_heads = 12;
    cfg.model.decoder_num_heads = 16;
    cfg.model.drop_path_rate = 0.25;
    cfg.train.epochs = 300;
    cfg.train.warmup_epochs = 60;
    cfg.train.base_lr = 8e-4;
    cfg.train.batch_size = 768;
    cfg.train.weight_decay = 0.05;
    cfg.train.r = 0.75;
    cfg.train.t = 3;
    cfg.train.feeding_mode = FeedingMode::multi_fold;
    cfg.train.ema_mode = EmaMode::per_epoch;
    cfg.data.source = DataSource::ppm_dir;  // bring your own images
    cfg.data.synth.image_size = 224;
    return;
  }
  throw ConfigError("unknown preset '" + preset + "' (toy|paper)");
}

namespace {

struct Entry {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size() || x < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, "
                      "got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v +
                      "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + v +
                    "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> e;
    auto size_field = [&](const char* key, auto member) {
      e.push_back({key,
                   [member](const RunConfig& c) {
                     return std::to_string(c.*member);
                   },
                   [member, key = std::string(key)](RunConfig& c,
                                                    const std::string& v) {
                     c.*member = parse_size(key, v);
                   }});
    };
    (void)size_field;

    // model
    e.push_back({"image_size",
                 [](const RunConfig& c) {
                   return std::to_string(c.model.image_size);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.image_size = parse_size("image_size", v);
                 }});
    e.push_back({"patch_size",
                 [](const RunConfig& c) {
                   return std::to_string(c.model.patch_size);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.patch_size = parse_size("patch_size", v);
                 }});
    e.push_back({"channels",
                 [](const RunConfig& c) {
                   return std::to_string(c.model.channels);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.channels = parse_size("channels", v);
                 }});
    e.push_back({"encoder_depth",
                 [](const RunConfig& c) {
                   return std::to_string(c.model.encoder_depth);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.encoder_depth = parse_size("encoder_depth", v);
                 }});
    e.push_back({"decoder_depth",
                 [](const RunConfig& c) {
                   return std::to_string(c.model.decoder_depth);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.decoder_depth = parse_size("decoder_depth", v);
                 }});
    e.push_back({"embed_dim",
                 [](const RunConfig& c) {
                   return std::to_string(c.model.embed_dim);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.embed_dim = parse_size("embed_dim", v);
                 }});
    e.push_back({"decoder_dim",
                 [](const RunConfig& c) {
                   return std::to_string(c.model.decoder_dim);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.decoder_dim = parse_size("decoder_dim", v);
                 }});
    e.push_back({"num_heads",
                 [](const RunConfig& c) {
                   return std::to_string(c.model.num_heads);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.num_heads = parse_size("num_heads", v);
                 }});
    e.push_back({"decoder_num_heads",
                 [](const RunConfig& c) {
                   return std::to_string(c.model.decoder_num_heads);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.decoder_num_heads =
                       parse_size("decoder_num_heads", v);
                 }});
    e.push_back({"mlp_ratio",
                 [](const RunConfig& c) { return fmt(c.model.mlp_ratio); },
                 [](RunConfig& c, const std::string& v) {
                   c.model.mlp_ratio = parse_double("mlp_ratio", v);
                 }});
    e.push_back({"drop_path_rate",
                 [](const RunConfig& c) {
                   return fmt(c.model.drop_path_rate);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.drop_path_rate = parse_double("drop_path_rate", v);
                 }});
    e.push_back({"use_class_token",
                 [](const RunConfig& c) {
                   return c.model.use_class_token ? "true" : "false";
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.use_class_token = parse_bool("use_class_token", v);
                 }});
    e.push_back({"decoder_masked_only",
                 [](const RunConfig& c) {
                   return c.model.decoder_masked_only ? "true" : "false";
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.model.decoder_masked_only =
                       parse_bool("decoder_masked_only", v);
                 }});

    // train
    e.push_back({"epochs",
                 [](const RunConfig& c) {
                   return std::to_string(c.train.epochs);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.epochs = parse_size("epochs", v);
                 }});
    e.push_back({"warmup_epochs",
                 [](const RunConfig& c) {
                   return std::to_string(c.train.warmup_epochs);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.warmup_epochs = parse_size("warmup_epochs", v);
                 }});
    e.push_back({"base_lr",
                 [](const RunConfig& c) { return fmt(c.train.base_lr); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.base_lr = parse_double("base_lr", v);
                 }});
    e.push_back({"weight_decay",
                 [](const RunConfig& c) { return fmt(c.train.weight_decay); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.weight_decay = parse_double("weight_decay", v);
                 }});
    e.push_back({"batch_size",
                 [](const RunConfig& c) {
                   return std::to_string(c.train.batch_size);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.batch_size = parse_size("batch_size", v);
                 }});
    e.push_back({"seed",
                 [](const RunConfig& c) {
                   return std::to_string(c.train.seed);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.seed = parse_size("seed", v);
                 }});
    e.push_back({"feeding_mode",
                 [](const RunConfig& c) {
                   return std::string(to_string(c.train.feeding_mode));
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.feeding_mode = feeding_mode_from_string(v);
                 }});
    e.push_back({"t",
                 [](const RunConfig& c) { return std::to_string(c.train.t); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.t = parse_size("t", v);
                 }});
    e.push_back({"r",
                 [](const RunConfig& c) { return fmt(c.train.r); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.r = parse_double("r", v);
                 }});
    e.push_back({"r_c",
                 [](const RunConfig& c) { return fmt(c.train.r_c); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.r_c = parse_double("r_c", v);
                 }});
    e.push_back({"ema_mode",
                 [](const RunConfig& c) {
                   return std::string(to_string(c.train.ema_mode));
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.ema_mode = ema_mode_from_string(v);
                 }});
    e.push_back({"normalization_on",
                 [](const RunConfig& c) {
                   return c.train.normalization_on ? "true" : "false";
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.normalization_on =
                       parse_bool("normalization_on", v);
                 }});
    e.push_back({"log_every",
                 [](const RunConfig& c) {
                   return std::to_string(c.train.log_every);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.log_every = parse_size("log_every", v);
                 }});
    e.push_back({"checkpoint_every",
                 [](const RunConfig& c) {
                   return std::to_string(c.train.checkpoint_every);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.checkpoint_every =
                       parse_size("checkpoint_every", v);
                 }});
    e.push_back({"eta_start",
                 [](const RunConfig& c) { return fmt(c.train.eta_start); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.eta_start = parse_double("eta_start", v);
                 }});
    e.push_back({"eta_end",
                 [](const RunConfig& c) { return fmt(c.train.eta_end); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.eta_end = parse_double("eta_end", v);
                 }});
    e.push_back({"norm_epsilon",
                 [](const RunConfig& c) { return fmt(c.train.norm_epsilon); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.norm_epsilon = parse_double("norm_epsilon", v);
                 }});
    e.push_back({"loss_form",
                 [](const RunConfig& c) {
                   return std::string(to_string(c.train.loss_form));
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.loss_form = loss_form_from_string(v);
                 }});
    e.push_back({"fold_resample",
                 [](const RunConfig& c) {
                   return std::string(to_string(c.train.fold_resample));
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.fold_resample = fold_resample_from_string(v);
                 }});
    e.push_back({"augment",
                 [](const RunConfig& c) {
                   return c.train.augment ? "true" : "false";
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.train.augment = parse_bool("augment", v);
                 }});

    // data
    e.push_back({"data_source",
                 [](const RunConfig& c) {
                   return std::string(to_string(c.data.source));
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.data.source = data_source_from_string(v);
                 }});
    e.push_back({"data_path",
                 [](const RunConfig& c) { return c.data.path; },
                 [](RunConfig& c, const std::string& v) { c.data.path = v; }});
    e.push_back({"synth_seed",
                 [](const RunConfig& c) {
                   return std::to_string(c.data.synth.seed);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.data.synth.seed = parse_size("synth_seed", v);
                 }});
    e.push_back({"synth_items",
                 [](const RunConfig& c) {
                   return std::to_string(c.data.synth.n_items);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.data.synth.n_items = parse_size("synth_items", v);
                 }});
    e.push_back({"synth_classes",
                 [](const RunConfig& c) {
                   return std::to_string(c.data.synth.class_count);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.data.synth.class_count = parse_size("synth_classes", v);
                 }});
    e.push_back({"synth_noise_std",
                 [](const RunConfig& c) { return fmt(c.data.synth.noise_std); },
                 [](RunConfig& c, const std::string& v) {
                   c.data.synth.noise_std = parse_double("synth_noise_std", v);
                 }});
    e.push_back({"synth_size_jitter",
                 [](const RunConfig& c) {
                   return fmt(c.data.synth.size_jitter);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.data.synth.size_jitter =
                       parse_double("synth_size_jitter", v);
                 }});
    e.push_back({"synth_position_jitter",
                 [](const RunConfig& c) {
                   return fmt(c.data.synth.position_jitter);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.data.synth.position_jitter =
                       parse_double("synth_position_jitter", v);
                 }});

    // probe / eval
    e.push_back({"probe_feature",
                 [](const RunConfig& c) {
                   return std::string(to_string(c.probe.feature));
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.probe.feature = feature_source_from_string(v);
                 }});
    e.push_back({"probe_epochs",
                 [](const RunConfig& c) {
                   return std::to_string(c.probe.probe_epochs);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.probe.probe_epochs = parse_size("probe_epochs", v);
                 }});
    e.push_back({"probe_lr",
                 [](const RunConfig& c) { return fmt(c.probe.probe_lr); },
                 [](RunConfig& c, const std::string& v) {
                   c.probe.probe_lr = parse_double("probe_lr", v);
                 }});
    e.push_back({"probe_batch",
                 [](const RunConfig& c) {
                   return std::to_string(c.probe.probe_batch);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.probe.probe_batch = parse_size("probe_batch", v);
                 }});
    e.push_back({"probe_seed",
                 [](const RunConfig& c) {
                   return std::to_string(c.probe.seed);
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.probe.seed = parse_size("probe_seed", v);
                 }});
    e.push_back({"holdout",
                 [](const RunConfig& c) { return std::to_string(c.holdout); },
                 [](RunConfig& c, const std::string& v) {
                   c.holdout = parse_size("holdout", v);
                 }});
    e.push_back({"threads",
                 [](const RunConfig& c) { return std::to_string(c.threads); },
                 [](RunConfig& c, const std::string& v) {
                   c.threads = static_cast<int>(parse_size("threads", v));
                 }});
    return e;
  }();
  return table;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.push_back(e.key);
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key,
                      const std::string& value) {
  for (const auto& e : entries())
    if (e.key == key) {
      e.set(cfg, value);
      return;
    }
  throw ConfigError("config: unknown key '" + key + "'");
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  for (const auto& e : entries())
    if (e.key == key) return e.get(cfg);
  throw ConfigError("config: unknown key '" + key + "'");
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: '" + path + "' line " +
                        std::to_string(line_no) + ": expected key = value");
    set_config_value(cfg, trim(stripped.substr(0, eq)),
                     trim(stripped.substr(eq + 1)));
  }
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& e : entries()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/resolved.config";
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("config: cannot write '" + path + "'");
  os << serialize_config(cfg);
}

}  // namespace sdae
