#include "fstrans/config.hpp"

#include <fstream>

namespace fstrans {
namespace {

// Layered read: only keys present in `j` override the defaults already in place.
template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json dataset_json(const DatasetConfig& c) {
  return {{"root", c.root},
          {"source_classes", c.source_classes},
          {"target_classes", c.target_classes},
          {"image_size", c.image_size}};
}

void dataset_from(const json& j, DatasetConfig& c) {
  get(j, "root", c.root);
  get(j, "source_classes", c.source_classes);
  get(j, "target_classes", c.target_classes);
  get(j, "image_size", c.image_size);
}

json generator_json(const GeneratorConfig& c) {
  return {{"image_size", c.image_size},
          {"downsampling", c.downsampling},
          {"base_channels", c.base_channels},
          {"n_content_resblocks", c.n_content_resblocks},
          {"n_adain_resblocks", c.n_adain_resblocks},
          {"class_code_dim", c.class_code_dim},
          {"adain_hidden", c.adain_hidden},
          {"k_train", c.k_train},
          {"scale_mode", c.scale_mode}};
}

void generator_from(const json& j, GeneratorConfig& c) {
  get(j, "image_size", c.image_size);
  get(j, "downsampling", c.downsampling);
  get(j, "base_channels", c.base_channels);
  get(j, "n_content_resblocks", c.n_content_resblocks);
  get(j, "n_adain_resblocks", c.n_adain_resblocks);
  get(j, "class_code_dim", c.class_code_dim);
  get(j, "adain_hidden", c.adain_hidden);
  get(j, "k_train", c.k_train);
  get(j, "scale_mode", c.scale_mode);
}

json discriminator_json(const DiscriminatorConfig& c) {
  return {{"image_size", c.image_size},
          {"base_channels", c.base_channels},
          {"n_classes", c.n_classes},
          {"width_mults", c.width_mults},
          {"pool_after", c.pool_after},
          {"leaky_slope", c.leaky_slope}};
}

void discriminator_from(const json& j, DiscriminatorConfig& c) {
  get(j, "image_size", c.image_size);
  get(j, "base_channels", c.base_channels);
  get(j, "n_classes", c.n_classes);
  get(j, "width_mults", c.width_mults);
  get(j, "pool_after", c.pool_after);
  get(j, "leaky_slope", c.leaky_slope);
}

json losses_json(const LossConfig& c) {
  return {{"lambda_r", c.lambda_r},
          {"lambda_f", c.lambda_f},
          {"gamma_gp", c.gamma_gp},
          {"use_fm", c.use_fm},
          {"use_gp", c.use_gp},
          {"adv_form", c.adv_form},
          {"share_recon_batch", c.share_recon_batch},
          {"gp_every", c.gp_every}};
}

void losses_from(const json& j, LossConfig& c) {
  get(j, "lambda_r", c.lambda_r);
  get(j, "lambda_f", c.lambda_f);
  get(j, "gamma_gp", c.gamma_gp);
  get(j, "use_fm", c.use_fm);
  get(j, "use_gp", c.use_gp);
  get(j, "adv_form", c.adv_form);
  get(j, "share_recon_batch", c.share_recon_batch);
  get(j, "gp_every", c.gp_every);
}

json trainer_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"optimizer", c.optimizer},
          {"rmsprop_alpha", c.rmsprop_alpha},
          {"rmsprop_eps", c.rmsprop_eps},
          {"batch_size", c.batch_size},
          {"k_train", c.k_train},
          {"total_steps", c.total_steps},
          {"ema_weight", c.ema_weight},
          {"losses", losses_json(c.losses)},
          {"seed", c.seed},
          {"eval_every", c.eval_every},
          {"checkpoint_every", c.checkpoint_every},
          {"threads", c.threads},
          {"flip_augment", c.flip_augment}};
}

void trainer_from(const json& j, TrainConfig& c) {
  get(j, "lr", c.lr);
  get(j, "optimizer", c.optimizer);
  get(j, "rmsprop_alpha", c.rmsprop_alpha);
  get(j, "rmsprop_eps", c.rmsprop_eps);
  get(j, "batch_size", c.batch_size);
  get(j, "k_train", c.k_train);
  get(j, "total_steps", c.total_steps);
  get(j, "ema_weight", c.ema_weight);
  if (j.contains("losses")) losses_from(j.at("losses"), c.losses);
  get(j, "seed", c.seed);
  get(j, "eval_every", c.eval_every);
  get(j, "checkpoint_every", c.checkpoint_every);
  get(j, "threads", c.threads);
  get(j, "flip_augment", c.flip_augment);
}

json classifier_json(const ClassifierConfig& c) {
  return {{"image_size", c.image_size},
          {"base_channels", c.base_channels},
          {"feature_dim", c.feature_dim},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"holdout_frac", c.holdout_frac},
          {"seed", c.seed}};
}

void classifier_from(const json& j, ClassifierConfig& c) {
  get(j, "image_size", c.image_size);
  get(j, "base_channels", c.base_channels);
  get(j, "feature_dim", c.feature_dim);
  get(j, "epochs", c.epochs);
  get(j, "batch_size", c.batch_size);
  get(j, "lr", c.lr);
  get(j, "holdout_frac", c.holdout_frac);
  get(j, "seed", c.seed);
}

json eval_json(const EvalConfig& c) {
  return {{"n_content", c.n_content},
          {"k_values", c.k_values},
          {"is_splits", c.is_splits},
          {"batch_size", c.batch_size},
          {"protocol_seed", c.protocol_seed},
          {"classifier", classifier_json(c.classifier)}};
}

void eval_from(const json& j, EvalConfig& c) {
  get(j, "n_content", c.n_content);
  get(j, "k_values", c.k_values);
  get(j, "is_splits", c.is_splits);
  get(j, "batch_size", c.batch_size);
  get(j, "protocol_seed", c.protocol_seed);
  if (j.contains("classifier")) classifier_from(j.at("classifier"), c.classifier);
}

json fewshot_json(const FewshotConfig& c) {
  return {{"n_splits", c.n_splits},
          {"val_per_class", c.val_per_class},
          {"n_generated", c.n_generated},
          {"runs_per_split", c.runs_per_split},
          {"grid_wgen_points", c.grid_wgen_points},
          {"wgen_min", c.wgen_min},
          {"wgen_max", c.wgen_max},
          {"grid_wd_points", c.grid_wd_points},
          {"wd_min", c.wd_min},
          {"wd_max", c.wd_max},
          {"seed", c.seed}};
}

void fewshot_from(const json& j, FewshotConfig& c) {
  get(j, "n_splits", c.n_splits);
  get(j, "val_per_class", c.val_per_class);
  get(j, "n_generated", c.n_generated);
  get(j, "runs_per_split", c.runs_per_split);
  get(j, "grid_wgen_points", c.grid_wgen_points);
  get(j, "wgen_min", c.wgen_min);
  get(j, "wgen_max", c.wgen_max);
  get(j, "grid_wd_points", c.grid_wd_points);
  get(j, "wd_min", c.wd_min);
  get(j, "wd_max", c.wd_max);
  get(j, "seed", c.seed);
}

void apply_override(json& root, const std::string& expr) {
  auto eq = expr.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like section.key=value: " + expr);
  std::string path = expr.substr(0, eq);
  std::string value = expr.substr(eq + 1);

  json* node = &root;
  std::size_t pos = 0;
  while (true) {
    auto dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw ConfigError("empty key in override path: " + expr);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

}  // namespace

json to_json(const RunConfig& cfg) {
  return {{"dataset", dataset_json(cfg.dataset)},
          {"generator", generator_json(cfg.generator)},
          {"discriminator", discriminator_json(cfg.discriminator)},
          {"trainer", trainer_json(cfg.trainer)},
          {"eval", eval_json(cfg.eval)},
          {"fewshot", fewshot_json(cfg.fewshot)}};
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  try {
    if (j.contains("dataset")) dataset_from(j.at("dataset"), cfg.dataset);
    if (j.contains("generator")) generator_from(j.at("generator"), cfg.generator);
    if (j.contains("discriminator")) discriminator_from(j.at("discriminator"), cfg.discriminator);
    if (j.contains("trainer")) trainer_from(j.at("trainer"), cfg.trainer);
    if (j.contains("eval")) eval_from(j.at("eval"), cfg.eval);
    if (j.contains("fewshot")) fewshot_from(j.at("fewshot"), cfg.fewshot);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

RunConfig parse_config(const json& file_json, const std::vector<std::string>& overrides) {
  json merged = file_json;
  for (const auto& ov : overrides) apply_override(merged, ov);
  RunConfig cfg = config_from_json(merged);
  // Fields that are declared once but consumed by several modules.
  cfg.generator.image_size = cfg.dataset.image_size;
  cfg.discriminator.image_size = cfg.dataset.image_size;
  cfg.discriminator.n_classes = static_cast<int>(cfg.dataset.source_classes.size());
  cfg.eval.classifier.image_size = cfg.dataset.image_size;
  cfg.generator.k_train = cfg.trainer.k_train;
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  return parse_config(j, overrides);
}

void validate(const RunConfig& cfg) {
  const auto& ds = cfg.dataset;
  for (const auto& s : ds.source_classes)
    for (const auto& t : ds.target_classes)
      if (s == t) throw ConfigError("class listed as both source and target: " + s);
  if (ds.image_size <= 0) throw ConfigError("dataset.image_size must be positive");

  const auto& g = cfg.generator;
  if (g.downsampling < 1 || g.base_channels < 1 || g.class_code_dim < 1 ||
      g.n_content_resblocks < 0 || g.n_adain_resblocks < 1 || g.k_train < 1)
    throw ConfigError("generator config values must be positive");
  if (g.image_size % (1 << g.downsampling) != 0)
    throw ConfigError("image_size must be divisible by 2^downsampling");
  if (g.scale_mode != "direct" && g.scale_mode != "softplus")
    throw ConfigError("generator.scale_mode must be direct or softplus");

  const auto& d = cfg.discriminator;
  if (d.width_mults.empty()) throw ConfigError("discriminator.width_mults must not be empty");
  for (int p : d.pool_after)
    if (p < 1 || p > static_cast<int>(d.width_mults.size()))
      throw ConfigError("discriminator.pool_after indices out of range");
  if (d.image_size % (1 << d.pool_after.size()) != 0)
    throw ConfigError("image_size must be divisible by the discriminator pool factor");

  const auto& t = cfg.trainer;
  if (t.lr <= 0) throw ConfigError("trainer.lr must be > 0");
  if (t.ema_weight <= 0 || t.ema_weight > 1) throw ConfigError("trainer.ema_weight must be in (0,1]");
  if (t.batch_size < 1) throw ConfigError("trainer.batch_size must be >= 1");
  if (t.k_train < 1) throw ConfigError("trainer.k_train must be >= 1");
  if (t.optimizer != "rmsprop") throw ConfigError("unsupported optimizer: " + t.optimizer);
  const auto& l = t.losses;
  if (l.lambda_r < 0 || l.lambda_f < 0 || l.gamma_gp < 0)
    throw ConfigError("loss weights must be >= 0");
  if (l.adv_form != "hinge" && l.adv_form != "log" && l.adv_form != "softmax")
    throw ConfigError("losses.adv_form must be hinge, log or softmax");
  if (l.gp_every < 1) throw ConfigError("losses.gp_every must be >= 1");
}

}  // namespace fstrans
