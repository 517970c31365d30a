#include "dvgo/config_io.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dvgo {

using nlohmann::json;

static json weights_json(const LossWeights& w) {
  return {{"photo", w.photo}, {"pt_rgb", w.pt_rgb}, {"bg", w.bg}};
}

static void read_weights(const json& j, LossWeights& w) {
  w.photo = j.value("photo", w.photo);
  w.pt_rgb = j.value("pt_rgb", w.pt_rgb);
  w.bg = j.value("bg", w.bg);
}

std::string config_to_json(const TrainConfig& cfg) {
  json j;
  j["m_coarse"] = cfg.m_coarse;
  j["m_fine"] = cfg.m_fine;
  j["alpha_init_coarse"] = cfg.alpha_init_coarse;
  j["alpha_init_fine"] = cfg.alpha_init_fine;
  j["step_ratio"] = cfg.step_ratio;
  j["tau_coarse"] = cfg.tau_coarse;
  j["tau_fine"] = cfg.tau_fine;
  j["coarse_iters"] = cfg.coarse_iters;
  j["fine_iters"] = cfg.fine_iters;
  j["batch_rays"] = cfg.batch_rays;
  j["pg_ckpt"] = cfg.pg_ckpt;
  j["lr_grid"] = cfg.lr_grid;
  j["lr_mlp"] = cfg.lr_mlp;
  j["lr_decay_period"] = cfg.lr_decay_period;
  j["loss_coarse"] = weights_json(cfg.loss_coarse);
  j["loss_fine"] = weights_json(cfg.loss_fine);
  j["seed"] = cfg.seed;
  j["white_bg"] = cfg.white_bg;
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["mlp_layers"] = cfg.mlp_layers;
  j["feat_dim"] = cfg.feat_dim;
  j["posenc_x"] = cfg.posenc_x;
  j["posenc_d"] = cfg.posenc_d;
  j["threads"] = cfg.threads;
  j["low_density_init"] = cfg.low_density_init;
  j["view_count_lr"] = cfg.view_count_lr;
  j["enable_skipping"] = cfg.enable_skipping;
  j["diffuse_only"] = cfg.diffuse_only;
  j["term_transmittance"] = cfg.term_transmittance;
  return j.dump(1);
}

void apply_config_json(TrainConfig& cfg, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("cannot parse config: ") + e.what());
  }
  cfg.m_coarse = j.value("m_coarse", cfg.m_coarse);
  cfg.m_fine = j.value("m_fine", cfg.m_fine);
  cfg.alpha_init_coarse = j.value("alpha_init_coarse", cfg.alpha_init_coarse);
  cfg.alpha_init_fine = j.value("alpha_init_fine", cfg.alpha_init_fine);
  cfg.step_ratio = j.value("step_ratio", cfg.step_ratio);
  cfg.tau_coarse = j.value("tau_coarse", cfg.tau_coarse);
  cfg.tau_fine = j.value("tau_fine", cfg.tau_fine);
  cfg.coarse_iters = j.value("coarse_iters", cfg.coarse_iters);
  cfg.fine_iters = j.value("fine_iters", cfg.fine_iters);
  cfg.batch_rays = j.value("batch_rays", cfg.batch_rays);
  if (j.contains("pg_ckpt")) cfg.pg_ckpt = j["pg_ckpt"].get<std::vector<int>>();
  cfg.lr_grid = j.value("lr_grid", cfg.lr_grid);
  cfg.lr_mlp = j.value("lr_mlp", cfg.lr_mlp);
  cfg.lr_decay_period = j.value("lr_decay_period", cfg.lr_decay_period);
  if (j.contains("loss_coarse")) read_weights(j["loss_coarse"], cfg.loss_coarse);
  if (j.contains("loss_fine")) read_weights(j["loss_fine"], cfg.loss_fine);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.white_bg = j.value("white_bg", cfg.white_bg);
  cfg.mlp_hidden = j.value("mlp_hidden", cfg.mlp_hidden);
  cfg.mlp_layers = j.value("mlp_layers", cfg.mlp_layers);
  cfg.feat_dim = j.value("feat_dim", cfg.feat_dim);
  cfg.posenc_x = j.value("posenc_x", cfg.posenc_x);
  cfg.posenc_d = j.value("posenc_d", cfg.posenc_d);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.low_density_init = j.value("low_density_init", cfg.low_density_init);
  cfg.view_count_lr = j.value("view_count_lr", cfg.view_count_lr);
  cfg.enable_skipping = j.value("enable_skipping", cfg.enable_skipping);
  cfg.diffuse_only = j.value("diffuse_only", cfg.diffuse_only);
  cfg.term_transmittance = j.value("term_transmittance", cfg.term_transmittance);
}

void save_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << config_to_json(cfg) << "\n";
}

void load_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  apply_config_json(cfg, text);
}

}  // namespace dvgo
