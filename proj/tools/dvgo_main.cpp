// dvgo: direct voxel grid optimization for radiance fields.
//
// Subcommands: train, render, eval, toy2d, oracle1d, oracle2d, genscene, info.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "dvgo/config_io.hpp"
#include "dvgo/log.hpp"
#include "dvgo/sharp_surface.hpp"
#include "dvgo/threading.hpp"
#include "dvgo/toy2d.hpp"
#include "dvgo/trainer.hpp"

namespace fs = std::filesystem;
using namespace dvgo;

namespace {

// Shared config flags. Values parse into `flags`; resolve() layers them over
// (built-in defaults <- config file) so flags win.
struct ConfigCli {
  std::string config_path;
  TrainConfig flags;
  std::vector<std::function<void(TrainConfig&)>> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file");
    add(app, "--seed", flags.seed, [](TrainConfig& c) { return &c.seed; });
    add(app, "--threads", flags.threads, [](TrainConfig& c) { return &c.threads; });
    add(app, "--m-coarse", flags.m_coarse, [](TrainConfig& c) { return &c.m_coarse; });
    add(app, "--m-fine", flags.m_fine, [](TrainConfig& c) { return &c.m_fine; });
    add(app, "--step-ratio", flags.step_ratio, [](TrainConfig& c) { return &c.step_ratio; });
    add(app, "--alpha-init-coarse", flags.alpha_init_coarse,
        [](TrainConfig& c) { return &c.alpha_init_coarse; });
    add(app, "--alpha-init-fine", flags.alpha_init_fine,
        [](TrainConfig& c) { return &c.alpha_init_fine; });
    add(app, "--tau-coarse", flags.tau_coarse, [](TrainConfig& c) { return &c.tau_coarse; });
    add(app, "--tau-fine", flags.tau_fine, [](TrainConfig& c) { return &c.tau_fine; });
    add(app, "--iters-coarse", flags.coarse_iters,
        [](TrainConfig& c) { return &c.coarse_iters; });
    add(app, "--iters-fine", flags.fine_iters, [](TrainConfig& c) { return &c.fine_iters; });
    add(app, "--batch-rays", flags.batch_rays, [](TrainConfig& c) { return &c.batch_rays; });
    add(app, "--white-bg", flags.white_bg, [](TrainConfig& c) { return &c.white_bg; });
    add(app, "--lr-grid", flags.lr_grid, [](TrainConfig& c) { return &c.lr_grid; });
    add(app, "--lr-mlp", flags.lr_mlp, [](TrainConfig& c) { return &c.lr_mlp; });
    add(app, "--pg-ckpt", flags.pg_ckpt, [](TrainConfig& c) { return &c.pg_ckpt; });
    add(app, "--feat-dim", flags.feat_dim, [](TrainConfig& c) { return &c.feat_dim; });
    add(app, "--mlp-hidden", flags.mlp_hidden, [](TrainConfig& c) { return &c.mlp_hidden; });
    add(app, "--mlp-layers", flags.mlp_layers, [](TrainConfig& c) { return &c.mlp_layers; });
    add(app, "--low-density-init", flags.low_density_init,
        [](TrainConfig& c) { return &c.low_density_init; });
    add(app, "--view-count-lr", flags.view_count_lr,
        [](TrainConfig& c) { return &c.view_count_lr; });
    add(app, "--diffuse-only", flags.diffuse_only,
        [](TrainConfig& c) { return &c.diffuse_only; });
  }

  TrainConfig resolve() {
    TrainConfig out;
    if (!config_path.empty()) load_config_file(out, config_path);
    for (auto& apply : overrides) apply(out);
    return out;
  }

 private:
  template <typename T, typename Slot>
  void add(CLI::App* app, const std::string& name, T& storage, Slot slot) {
    CLI::Option* opt = app->add_option(name, storage);
    overrides.push_back([&storage, opt, slot](TrainConfig& out) {
      if (opt->count() > 0) *slot(out) = storage;
    });
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"direct voxel grid optimization for radiance fields"};
  app.require_subcommand(1);

  ConfigCli conf;

  // --- train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "run the coarse+fine pipeline on a dataset");
  std::string train_data, train_out = "out";
  train_cmd->add_option("data", train_data, "dataset directory")->required();
  train_cmd->add_option("--out", train_out, "output directory");
  conf.attach(train_cmd);

  // --- render / eval ---------------------------------------------------------
  auto* render_cmd = app.add_subcommand("render", "render a split from a checkpoint");
  auto* eval_cmd = app.add_subcommand("eval", "render the test split and report PSNR/SSIM");
  std::string rr_ckpt, rr_data, rr_out = "renders", rr_split = "test", rr_stage = "auto";
  for (CLI::App* c : {render_cmd, eval_cmd}) {
    c->add_option("--ckpt", rr_ckpt, "checkpoint file or train output directory")->required();
    c->add_option("--data", rr_data, "dataset directory")->required();
    c->add_option("--out", rr_out, "output directory");
    c->add_option("--stage", rr_stage)->check(CLI::IsMember({"auto", "coarse", "fine"}));
  }
  render_cmd->add_option("--split", rr_split)->check(CLI::IsMember({"train", "test"}));
  conf.attach(render_cmd);
  conf.attach(eval_cmd);

  // --- toy2d -----------------------------------------------------------------
  auto* toy_cmd = app.add_subcommand("toy2d", "2D grid image-fitting experiment");
  std::string toy_out = "toy2d";
  int toy_size = 64, toy_iters = 1500;
  std::uint64_t toy_seed = 0;
  std::vector<double> toy_strides = {2, 5, 8};
  std::vector<std::string> toy_targets = {"halfplane0", "halfplane30", "halfplane60", "disk"};
  toy_cmd->add_option("--out", toy_out);
  toy_cmd->add_option("--size", toy_size);
  toy_cmd->add_option("--iters", toy_iters);
  toy_cmd->add_option("--seed", toy_seed);
  toy_cmd->add_option("--strides", toy_strides);
  toy_cmd->add_option("--targets", toy_targets,
                      "halfplane<deg>, disk, checker (comma separated)");

  // --- oracle1d / oracle2d ----------------------------------------------------
  auto* o1_cmd = app.add_subcommand("oracle1d", "closed-form 1D sharp-boundary grid values");
  double o1_c = 0.5, o1_eps = 1e-4, o1_tol = 1e-2, o1_delta = 0.5;
  int o1_probes = 2001;
  std::string o1_out;
  o1_cmd->add_option("--c", o1_c, "boundary position")->required();
  o1_cmd->add_option("--eps", o1_eps);
  o1_cmd->add_option("--tol", o1_tol);
  o1_cmd->add_option("--delta", o1_delta, "volume rendering step");
  o1_cmd->add_option("--probes", o1_probes);
  o1_cmd->add_option("--out", o1_out, "probe CSV path (x, S, T)");

  auto* o2_cmd = app.add_subcommand("oracle2d", "closed-form 2D cell corner values");
  double o2_c0 = 0.3, o2_c1 = 0.8, o2_eps = 1e-4, o2_tol_top = 1e-2, o2_tol_bottom = -1,
         o2_delta = 0.5;
  int o2_slices = 5;
  o2_cmd->add_option("--c0", o2_c0, "boundary at the top edge")->required();
  o2_cmd->add_option("--c1", o2_c1, "boundary at the bottom edge")->required();
  o2_cmd->add_option("--eps", o2_eps);
  o2_cmd->add_option("--tol", o2_tol_top);
  o2_cmd->add_option("--tol-bottom", o2_tol_bottom, "defaults to --tol");
  o2_cmd->add_option("--delta", o2_delta);
  o2_cmd->add_option("--slices", o2_slices);

  // --- genscene ----------------------------------------------------------------
  auto* gen_cmd = app.add_subcommand("genscene", "write an analytic dataset");
  std::string gen_kind = "two_tone_sphere", gen_out = "scene";
  int gen_train = 20, gen_test = 5, gen_size = 100;
  std::uint64_t gen_seed = 0;
  bool gen_white = true;
  gen_cmd->add_option("--kind", gen_kind)->check(
      CLI::IsMember({"sphere", "boxes", "two_tone_sphere"}));
  gen_cmd->add_option("--n-train", gen_train);
  gen_cmd->add_option("--n-test", gen_test);
  gen_cmd->add_option("--size", gen_size);
  gen_cmd->add_option("--seed", gen_seed);
  gen_cmd->add_option("--white-bg", gen_white);
  gen_cmd->add_option("--out", gen_out)->required();

  // --- info --------------------------------------------------------------------
  auto* info_cmd = app.add_subcommand("info", "print resolved config and checkpoint metadata");
  std::string info_ckpt;
  info_cmd->add_option("ckpt", info_ckpt, "checkpoint file (optional)");
  conf.attach(info_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train_cmd) {
      TrainConfig cfg = conf.resolve();
      validate(cfg);
      Dataset ds = load_nerf_synthetic(train_data, {cfg.white_bg});
      fs::create_directories(train_out);
      save_config(cfg, train_out + "/config.json");
      CoarseResult coarse = train_coarse(ds, cfg);
      save_checkpoint(coarse.scene, train_out + "/coarse.ckpt");
      write_trace_csv(coarse.trace, train_out + "/loss_coarse.csv");
      FineResult fine = train_fine(ds, coarse.scene, cfg);
      save_checkpoint(fine.scene, train_out + "/fine.ckpt");
      write_trace_csv(fine.trace, train_out + "/loss_fine.csv");
      std::printf("trained: %s\n", train_out.c_str());
      return 0;
    }

    if (*render_cmd || *eval_cmd) {
      TrainConfig cfg = conf.resolve();
      // prefer the config snapshot saved next to the checkpoint
      std::string ckpt = rr_ckpt;
      std::optional<CoarseScene> coarse;
      if (fs::is_directory(ckpt)) {
        if (conf.config_path.empty() && fs::exists(ckpt + "/config.json"))
          load_config_file(cfg, ckpt + "/config.json");
        if (fs::exists(ckpt + "/coarse.ckpt")) coarse = load_coarse_checkpoint(ckpt + "/coarse.ckpt");
        std::string fine_path = ckpt + "/fine.ckpt";
        ckpt = (rr_stage != "coarse" && fs::exists(fine_path)) ? fine_path : ckpt + "/coarse.ckpt";
      }
      Dataset ds = load_nerf_synthetic(rr_data, {cfg.white_bg});
      const auto& views = (*eval_cmd || rr_split == "test") ? ds.test : ds.train;
      if (views.empty()) throw std::runtime_error("requested split is empty");
      fs::create_directories(rr_out);

      RenderOptions ropts;
      ropts.threads = resolve_threads(cfg.threads);
      ropts.tau_fine = cfg.tau_fine;
      std::optional<FreeSpaceMask> mask;
      bool fine_kind = peek_checkpoint_kind(ckpt) == CheckpointKind::fine && rr_stage != "coarse";
      CoarseScene coarse_scene;
      FineScene fine_scene;
      if (fine_kind) {
        fine_scene = load_fine_checkpoint(ckpt);
        if (coarse) {
          mask.emplace(*coarse, cfg.tau_coarse);
          ropts.mask = &*mask;
        }
      } else {
        coarse_scene = load_coarse_checkpoint(ckpt);
      }

      double psnr_sum = 0, ssim_sum = 0;
      std::ofstream metrics;
      if (*eval_cmd) {
        metrics.open(rr_out + "/metrics.csv");
        metrics << "view_index,psnr,ssim\n";
      }
      for (std::size_t i = 0; i < views.size(); ++i) {
        Image img = fine_kind ? render_view(fine_scene, views[i].camera, ds.background(), ropts)
                              : render_view(coarse_scene, views[i].camera, ds.background(), ropts);
        write_png(img, rr_out + "/r_" + std::to_string(i) + ".png");
        if (*eval_cmd) {
          double p = psnr(img, views[i].pixels);
          double s = ssim(img, views[i].pixels);
          psnr_sum += p;
          ssim_sum += s;
          metrics << i << "," << p << "," << s << "\n";
        }
      }
      if (*eval_cmd)
        std::printf("mean PSNR %.4f dB, mean SSIM %.5f over %zu views\n",
                    psnr_sum / views.size(), ssim_sum / views.size(), views.size());
      return 0;
    }

    if (*toy_cmd) {
      fs::create_directories(toy_out);
      std::ofstream csv(toy_out + "/toy2d.csv");
      csv << "target,stride,mode,psnr\n";
      Toy2DOptions topt;
      topt.iters = toy_iters;
      topt.seed = toy_seed;
      for (const std::string& tname : toy_targets) {
        Image target;
        if (tname.rfind("halfplane", 0) == 0)
          target = make_halfplane_target(toy_size, std::stod(tname.substr(9)));
        else if (tname == "disk")
          target = make_disk_target(toy_size);
        else if (tname == "checker")
          target = make_checker_target(toy_size);
        else
          throw CLI::ValidationError("unknown toy target: " + tname);
        write_png(target, toy_out + "/" + tname + "_target.png");
        for (double stride : toy_strides)
          for (auto [mode, mname] : {std::pair{ActivationMode::pre, "pre"},
                                     {ActivationMode::in, "in"},
                                     {ActivationMode::post, "post"}}) {
            Toy2DResult res = toy_image_fit(target, stride, mode, topt);
            csv << tname << "," << stride << "," << mname << "," << res.psnr << "\n";
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s_s%g_%s.png", tname.c_str(), stride, mname);
            write_png(res.fitted, toy_out + "/" + buf);
            std::printf("%-12s stride %-4g %-5s PSNR %6.2f\n", tname.c_str(), stride, mname,
                        res.psnr);
          }
      }
      return 0;
    }

    if (*o1_cmd) {
      SharpSurfaceSpec1D spec{o1_c, o1_eps, o1_tol, o1_delta};
      Solved1D sol = solve_1d(spec);
      Verify1DReport rep = verify_1d(sol.a, sol.b, spec, o1_probes);
      std::printf("c=%g eps=%g tol=%g delta=%g\n", o1_c, o1_eps, o1_tol, o1_delta);
      std::printf("a = %.4f\nb = %.4f\n", sol.a, sol.b);
      std::printf("S(c) = %.12f, max err below/above band = %.3g / %.3g\n", rep.s_at_c,
                  rep.max_err_below, rep.max_err_above);
      std::printf("%s\n", rep.pass ? "PASS" : "FAIL");
      if (!o1_out.empty()) {
        std::ofstream csv(o1_out);
        csv << "x,S,T\n";
        for (const ProbeRow& p : rep.probes) csv << p.x << "," << p.s << "," << p.t << "\n";
      }
      return rep.pass ? 0 : 2;
    }

    if (*o2_cmd) {
      if (o2_tol_bottom <= 0) o2_tol_bottom = o2_tol_top;
      GridCell2D cell = solve_2d(o2_c0, o2_c1, o2_eps, o2_tol_top, o2_tol_bottom, o2_delta);
      std::printf("boundary c(t) = %g + t*%g, eps=%g tol=(%g,%g) delta=%g\n", o2_c0,
                  o2_c1 - o2_c0, o2_eps, o2_tol_top, o2_tol_bottom, o2_delta);
      std::printf("V_tl = %9.2f  V_tr = %9.2f\nV_bl = %9.2f  V_br = %9.2f\n", cell.v_tl,
                  cell.v_tr, cell.v_bl, cell.v_br);
      bool all_pass = true;
      for (int s = 0; s < o2_slices; ++s) {
        double t = o2_slices == 1 ? 0.0 : static_cast<double>(s) / (o2_slices - 1);
        Solved1D ab = slice_2d(cell, t);
        double c_t = (1 - t) * o2_c0 + t * o2_c1;
        double tol_t = (1 - t) * o2_tol_top + t * o2_tol_bottom;
        Verify1DReport rep = verify_1d(ab.a, ab.b, {c_t, o2_eps, tol_t, o2_delta}, 2001);
        std::printf("slice t=%.2f: c=%.3f a=%.2f b=%.2f %s\n", t, c_t, ab.a, ab.b,
                    rep.pass ? "pass" : "FAIL");
        all_pass = all_pass && rep.pass;
      }
      std::printf("%s\n", all_pass ? "PASS" : "FAIL");
      return all_pass ? 0 : 2;
    }

    if (*gen_cmd) {
      AnalyticScene scene = generate_analytic_scene(scene_kind_from_string(gen_kind), gen_train,
                                                    gen_test, gen_size, gen_seed, gen_white);
      save_dataset(scene.dataset, scene.train_rgba, scene.test_rgba, gen_out);
      std::printf("wrote %d train / %d test views to %s\n", gen_train, gen_test,
                  gen_out.c_str());
      return 0;
    }

    if (*info_cmd) {
      TrainConfig cfg = conf.resolve();
      std::printf("%s\n", config_to_json(cfg).c_str());
      if (!info_ckpt.empty()) {
        if (peek_checkpoint_kind(info_ckpt) == CheckpointKind::fine) {
          FineScene s = load_fine_checkpoint(info_ckpt);
          std::printf("fine checkpoint: grid %dx%dx%d, D=%d, bias %.4f, step %.6f%s\n",
                      s.density.dims()[0], s.density.dims()[1], s.density.dims()[2],
                      s.feat_dim(), s.bias.b, s.step, s.diffuse_only ? " (diffuse only)" : "");
        } else {
          CoarseScene s = load_coarse_checkpoint(info_ckpt);
          std::printf("coarse checkpoint: grid %dx%dx%d, bias %.4f, step %.6f\n",
                      s.density.dims()[0], s.density.dims()[1], s.density.dims()[2], s.bias.b,
                      s.step);
        }
      }
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
