#include "dvgo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dvgo/adam.hpp"
#include "dvgo/log.hpp"
#include "dvgo/rng.hpp"
#include "dvgo/sampling.hpp"
#include "dvgo/threading.hpp"

namespace dvgo {

void validate(const TrainConfig& cfg) {
  auto in01 = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in01(cfg.alpha_init_coarse) || !in01(cfg.alpha_init_fine))
    throw std::invalid_argument("alpha_init values must lie in (0,1)");
  if (!in01(cfg.tau_coarse) || !in01(cfg.tau_fine))
    throw std::invalid_argument("tau thresholds must lie in (0,1)");
  if (cfg.m_coarse < 8 || cfg.m_fine < 8) throw std::invalid_argument("voxel budgets must be >= 8");
  if (cfg.coarse_iters < 0 || cfg.fine_iters < 0)
    throw std::invalid_argument("iteration counts must be >= 0");
  if (cfg.batch_rays < 1) throw std::invalid_argument("batch_rays must be >= 1");
  if (!(cfg.step_ratio > 0)) throw std::invalid_argument("step_ratio must be positive");
  if (!(cfg.lr_decay_period > 0)) throw std::invalid_argument("lr decay period must be positive");
  if (cfg.term_transmittance < 0 || cfg.term_transmittance >= 1)
    throw std::invalid_argument("term_transmittance must lie in [0,1)");
  for (std::size_t i = 0; i < cfg.pg_ckpt.size(); ++i) {
    if (cfg.pg_ckpt[i] < 1 || (i > 0 && cfg.pg_ckpt[i] <= cfg.pg_ckpt[i - 1]))
      throw std::invalid_argument("pg_ckpt must be positive and strictly ascending");
    if (cfg.pg_ckpt[i] >= cfg.fine_iters)
      throw std::invalid_argument("pg_ckpt entries must be < fine_iters");
  }
  if (cfg.feat_dim < 1 || cfg.mlp_hidden < 1 || cfg.mlp_layers < 1)
    throw std::invalid_argument("invalid fine model architecture");
  if (cfg.posenc_x < 0 || cfg.posenc_d < 0)
    throw std::invalid_argument("posenc orders must be >= 0");
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "iter,total,photo,pt_rgb,bg_entropy,lr_factor,seconds\n";
  char line[256];
  for (const TraceRow& r : trace) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.iter, r.total,
                  r.photo, r.pt_rgb, r.bg_entropy, r.lr_factor, r.seconds);
    f << line;
  }
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  std::getline(f, line);  // header
  std::vector<TraceRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    TraceRow r;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    ss >> r.iter >> r.total >> r.photo >> r.pt_rgb >> r.bg_entropy >> r.lr_factor >> r.seconds;
    rows.push_back(r);
  }
  return rows;
}

Bbox3 coarse_bbox(const std::vector<Camera>& cameras) {
  if (cameras.empty()) throw std::invalid_argument("coarse_bbox needs at least one camera");
  Bbox3 box;
  bool first = true;
  for (const Camera& cam : cameras) {
    for (Vec3 corner : frustum_corners(cam)) {
      if (first) {
        box.min = box.max = corner;
        first = false;
      } else {
        box.expand(corner);
      }
    }
  }
  validate(box);
  return box;
}

// ---------------------------------------------------------------------------
// FreeSpaceMask

FreeSpaceMask::FreeSpaceMask(const CoarseScene& coarse, double tau)
    : coarse_(&coarse), tau_(tau) {
  validate(coarse);
  const DenseGrid& g = coarse.density;
  for (int k = 0; k < 3; ++k) cells_[k] = g.dims()[k] - 1;
  cell_alpha_ub_.resize(static_cast<std::size_t>(cells_[0]) * cells_[1] * cells_[2]);
  // interp(x) <= max corner value inside a cell, and the post activation is
  // monotone, so alpha(max corner) bounds every query in the cell
  std::size_t n = 0;
  for (int ix = 0; ix < cells_[0]; ++ix)
    for (int iy = 0; iy < cells_[1]; ++iy)
      for (int iz = 0; iz < cells_[2]; ++iz, ++n) {
        double raw_max = -1e300;
        for (int dx = 0; dx < 2; ++dx)
          for (int dy = 0; dy < 2; ++dy)
            for (int dz = 0; dz < 2; ++dz)
              raw_max = std::max(raw_max, g.at(0, ix + dx, iy + dy, iz + dz));
        cell_alpha_ub_[n] =
            alpha_from_sigma(softplus_shifted(raw_max, coarse.bias), coarse.step);
      }
}

double FreeSpaceMask::alpha(Vec3 p) const {
  return activated_alpha(coarse_->density, p, coarse_->step, coarse_->bias,
                         ActivationMode::post);
}

bool FreeSpaceMask::occupied(Vec3 p) const { return alpha(p) >= tau_; }

bool FreeSpaceMask::occupied_possible(Vec3 p) const {
  Vec3 g = coarse_->density.world_to_grid(p);
  std::size_t i[3];
  for (int k = 0; k < 3; ++k) {
    double gk = std::clamp(g[k], 0.0, static_cast<double>(cells_[k]));
    int ik = static_cast<int>(gk);
    if (ik > cells_[k] - 1) ik = cells_[k] - 1;
    i[k] = static_cast<std::size_t>(ik);
  }
  return cell_alpha_ub_[(i[0] * cells_[1] + i[1]) * cells_[2] + i[2]] >= tau_;
}

Bbox3 fine_bbox(const FreeSpaceMask& mask) {
  const DenseGrid& g = mask.coarse().density;
  const Bbox3& box = g.bbox();
  Vec3 L = box.extent();
  std::array<int, 3> nprobe = {2 * g.dims()[0], 2 * g.dims()[1], 2 * g.dims()[2]};
  Bbox3 occ;
  bool any = false;
  for (int ix = 0; ix < nprobe[0]; ++ix)
    for (int iy = 0; iy < nprobe[1]; ++iy)
      for (int iz = 0; iz < nprobe[2]; ++iz) {
        Vec3 p{box.min.x + L.x * ix / (nprobe[0] - 1), box.min.y + L.y * iy / (nprobe[1] - 1),
               box.min.z + L.z * iz / (nprobe[2] - 1)};
        if (mask.alpha(p) < mask.tau()) continue;
        if (!any) {
          occ.min = occ.max = p;
          any = true;
        } else {
          occ.expand(p);
        }
      }
  if (!any) {
    DVGO_LOG_INFO("fine_bbox: no occupied probe found, falling back to the coarse bbox");
    return box;
  }
  for (int k = 0; k < 3; ++k) {
    double h = L[k] / (g.dims()[k] - 1);  // one coarse cell of padding
    occ.min[k] -= h;
    occ.max[k] += h;
  }
  validate(occ);
  return occ;
}

// ---------------------------------------------------------------------------
// Shared training machinery

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct PoolRay {
  Ray ray;
  Rgb target;
  double near = 0, far = 0;
};

// All training pixels of every view, in (view, v, u) order.
std::vector<PoolRay> build_ray_pool(const Dataset& ds, unsigned threads) {
  const auto& views = ds.train;
  std::size_t per_view = static_cast<std::size_t>(views.front().camera.width) *
                         views.front().camera.height;
  std::vector<PoolRay> pool(views.size() * per_view);
  parallel_for(views.size(), threads, [&](unsigned, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Camera& cam = views[i].camera;
      std::size_t base = i * per_view;
      for (int v = 0; v < cam.height; ++v)
        for (int u = 0; u < cam.width; ++u) {
          PoolRay& pr = pool[base + static_cast<std::size_t>(v) * cam.width + u];
          pr.ray = make_ray(cam, u, v);
          pr.target = views[i].pixels.rgb(u, v);
          pr.near = cam.near;
          pr.far = cam.far;
        }
    }
  });
  return pool;
}

std::size_t march_count(double near, double far, double step) {
  auto n = static_cast<std::size_t>(std::ceil((far - near) / step - 1e-9));
  return (n < 1 ? 1 : n) + 1;
}

struct RayLossAccum {
  double photo = 0, pt = 0, bg = 0;
};

// Per-worker scratch reused across rays; avoids per-ray allocation.
struct RayScratch {
  std::vector<Vec3> pos;
  std::vector<double> raw;
  std::vector<double> alphas;
  std::vector<Rgb> colors;
  std::vector<double> d_alphas;
  std::vector<Rgb> d_colors;
  std::vector<Rgb> d_colors_pt;

  void clear() {
    pos.clear();
    raw.clear();
    alphas.clear();
    colors.clear();
  }
};

struct LossGrads {
  Rgb d_color{0, 0, 0};
  double d_bgT = 0;
  double pt_upstream = 0;
};

// Shared loss bookkeeping: values into acc, upstream factors for one ray.
LossGrads ray_losses(const RenderResult& res, Rgb target, const std::vector<Rgb>& colors,
                     const LossWeights& w, double inv_batch, RayLossAccum& acc,
                     RayScratch& scratch) {
  double photo = sq_dist(res.color, target);
  double pt = per_point_rgb_loss(res.weights, colors, target);
  double bg = background_entropy_loss(res.bg_transmittance);
  acc.photo += photo;
  acc.pt += pt;
  acc.bg += bg;
  LossGrads g;
  for (int c = 0; c < 3; ++c) g.d_color[c] = w.photo * 2.0 * (res.color[c] - target[c]) * inv_batch;
  g.d_bgT = w.bg * background_entropy_loss_grad(res.bg_transmittance) * inv_batch;
  g.pt_upstream = w.pt_rgb * inv_batch;
  per_point_rgb_loss_backward(res.weights, colors, target, g.pt_upstream, scratch.d_colors_pt);
  return g;
}

void merge_buffers(std::vector<std::vector<double>>& worker_bufs, unsigned threads) {
  if (worker_bufs.size() < 2) return;
  std::vector<double>& dst = worker_bufs[0];
  parallel_for(dst.size(), threads, [&](unsigned, std::size_t b, std::size_t e) {
    for (std::size_t w = 1; w < worker_bufs.size(); ++w) {
      const std::vector<double>& src = worker_bufs[w];
      for (std::size_t i = b; i < e; ++i) dst[i] += src[i];
    }
  });
}

struct StageTracker {
  Clock::time_point t0 = Clock::now();
  std::vector<TraceRow> trace;

  void log(int iter, double photo, double pt, double bg, const LossWeights& w, double lr_factor) {
    TraceRow r;
    r.iter = iter;
    r.photo = photo;
    r.pt_rgb = pt;
    r.bg_entropy = bg;
    r.total = w.photo * photo + w.pt_rgb * pt + w.bg * bg;
    r.lr_factor = lr_factor;
    r.seconds = seconds_since(t0);
    trace.push_back(r);
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Coarse stage

namespace {

// Forward+backward for one coarse ray. Returns the composite; gradient
// buffers are per-worker.
RenderResult coarse_ray_pass(const CoarseScene& scene, const PoolRay& pr, double jitter_u,
                             Rgb bg, const LossWeights& weights, double inv_batch,
                             double term_T, bool backward, std::vector<double>* grad_density,
                             std::vector<double>* grad_rgb, RayLossAccum& acc,
                             RayScratch& s) {
  s.clear();
  const double step = scene.step;
  const std::size_t n = march_count(pr.near, pr.far, step);
  Vec3 x0 = pr.ray.origin + pr.near * pr.ray.dir;
  Vec3 jit = (jitter_u * step) * pr.ray.dir;
  double T = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p = x0 + (static_cast<double>(i) * step) * pr.ray.dir + jit;
    double raw = trilinear_sample1(scene.density, p);
    double alpha = alpha_from_sigma(softplus_shifted(raw, scene.bias), step);
    double logits[3];
    trilinear_sample(scene.rgb, p, logits);
    s.pos.push_back(p);
    s.raw.push_back(raw);
    s.alphas.push_back(alpha);
    s.colors.push_back({sigmoid(logits[0]), sigmoid(logits[1]), sigmoid(logits[2])});
    T *= 1.0 - alpha;
    if (term_T > 0 && T < term_T) break;
  }
  RenderResult res = composite(s.alphas, s.colors, bg);
  if (!backward) return res;

  LossGrads g = ray_losses(res, pr.target, s.colors, weights, inv_batch, acc, s);
  CompositeUpstream up;
  up.d_color = g.d_color;
  up.d_bg_transmittance = g.d_bgT;
  composite_backward(s.alphas, s.colors, bg, up, s.d_alphas, s.d_colors);

  for (std::size_t i = 0; i < s.alphas.size(); ++i) {
    // d alpha / d sigma = step * exp(-sigma*step) = step * (1 - alpha)
    double d_raw = s.d_alphas[i] * step * (1.0 - s.alphas[i]) *
                   softplus_shifted_grad(s.raw[i], scene.bias);
    trilinear_backward(scene.density, s.pos[i], &d_raw, *grad_density);
    double d_logits[3];
    for (int c = 0; c < 3; ++c) {
      double dc = s.d_colors[i][c] + s.d_colors_pt[i][c];
      d_logits[c] = dc * sigmoid_grad_from_value(s.colors[i][c]);
    }
    trilinear_backward(scene.rgb, s.pos[i], d_logits, *grad_rgb);
  }
  return res;
}

}  // namespace

CoarseResult train_coarse(const Dataset& ds, const TrainConfig& cfg) {
  validate(cfg);
  if (ds.train.size() < 2) throw std::invalid_argument("coarse training needs >= 2 views");
  const unsigned threads = resolve_threads(cfg.threads);

  std::vector<Camera> cams;
  for (const PosedImage& pi : ds.train) cams.push_back(pi.camera);
  Bbox3 box = coarse_bbox(cams);

  double s_c = voxel_size_for_budget(box, {cfg.m_coarse});
  CoarseResult out;
  CoarseScene& scene = out.scene;
  scene.density = allocate(box, {cfg.m_coarse}, 1);
  scene.rgb = allocate(box, {cfg.m_coarse}, 3);
  scene.step = cfg.step_ratio * s_c;
  scene.bias = cfg.low_density_init ? low_density_bias(cfg.alpha_init_coarse, s_c)
                                    : ActivationBias{0.0};
  if (cfg.view_count_lr) scene.density.set_lr_scale(view_count_scale(scene.density, cams));
  DVGO_LOG_INFO("coarse stage: grid %dx%dx%d, step %.5f, bias %.4f", scene.density.dims()[0],
                scene.density.dims()[1], scene.density.dims()[2], scene.step, scene.bias.b);

  std::vector<PoolRay> pool = build_ray_pool(ds, threads);
  const Rgb bg = ds.background();
  AdamState adam_density(cfg.lr_grid, scene.density.size());
  AdamState adam_rgb(cfg.lr_grid, scene.rgb.size());
  Rng rng(cfg.seed);

  std::vector<std::vector<double>> gd(threads), gr(threads);
  for (unsigned w = 0; w < threads; ++w) {
    gd[w].assign(scene.density.size(), 0.0);
    gr[w].assign(scene.rgb.size(), 0.0);
  }
  std::vector<RayScratch> scratch(threads);
  std::vector<RayLossAccum> acc(threads);
  std::vector<std::size_t> batch(cfg.batch_rays);
  std::vector<double> jitters(cfg.batch_rays);
  StageTracker tracker;

  for (int iter = 1; iter <= cfg.coarse_iters; ++iter) {
    for (int i = 0; i < cfg.batch_rays; ++i) batch[i] = rng.index(pool.size());
    for (int i = 0; i < cfg.batch_rays; ++i) jitters[i] = rng.uniform();
    for (unsigned w = 0; w < threads; ++w) {
      std::fill(gd[w].begin(), gd[w].end(), 0.0);
      std::fill(gr[w].begin(), gr[w].end(), 0.0);
      acc[w] = {};
    }
    const double inv_batch = 1.0 / cfg.batch_rays;
    parallel_for(batch.size(), threads, [&](unsigned w, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i)
        coarse_ray_pass(scene, pool[batch[i]], jitters[i], bg, cfg.loss_coarse, inv_batch,
                        cfg.term_transmittance, true, &gd[w], &gr[w], acc[w], scratch[w]);
    });
    merge_buffers(gd, threads);
    merge_buffers(gr, threads);
    RayLossAccum total{};
    for (unsigned w = 0; w < threads; ++w) {
      total.photo += acc[w].photo;
      total.pt += acc[w].pt;
      total.bg += acc[w].bg;
    }
    double lr_factor = lr_decay_factor(iter, cfg.lr_decay_period);
    adam_step(adam_density, scene.density.values(), gd[0], lr_factor,
              scene.density.lr_scale());
    adam_step(adam_rgb, scene.rgb.values(), gr[0], lr_factor);
    tracker.log(iter, total.photo * inv_batch, total.pt * inv_batch, total.bg * inv_batch,
                cfg.loss_coarse, lr_factor);
    if (iter % 500 == 0 || iter == cfg.coarse_iters)
      DVGO_LOG_INFO("coarse iter %d/%d loss %.6f", iter, cfg.coarse_iters,
                    tracker.trace.back().total);
  }
  out.trace = std::move(tracker.trace);
  return out;
}

// ---------------------------------------------------------------------------
// Fine stage

namespace {

struct RaySpec {
  Ray ray;
  double near = 0, far = 0;
  double jitter_u = 0;
  Rgb target{0, 0, 0};
};

struct PointRec {
  Vec3 x;
  double raw = 0;
  double alpha = 0;
  Rgb color{0, 0, 0};
  Rgb d_color{0, 0, 0};
  std::uint32_t ray = 0;
};

struct Span {
  std::uint32_t begin = 0;
  std::uint32_t count = 0;
};

struct Marched {
  std::vector<PointRec> pts;
  std::vector<Span> spans;  // one per ray
};

// Pass A: march rays, apply the two alpha tests, record survivors.
Marched march_fine(const FineScene& scene, const FreeSpaceMask* mask, double tau_fine,
                   const std::vector<RaySpec>& rays, double term_T, unsigned threads) {
  Marched out;
  std::vector<std::vector<PointRec>> wpts(threads);
  std::vector<std::vector<Span>> wspans(threads);
  const double step = scene.step;
  parallel_for(rays.size(), threads, [&](unsigned w, std::size_t b, std::size_t e) {
    auto& pts = wpts[w];
    auto& spans = wspans[w];
    for (std::size_t r = b; r < e; ++r) {
      const RaySpec& rs = rays[r];
      Span span;
      span.begin = static_cast<std::uint32_t>(pts.size());
      if (rs.near < rs.far) {
        const std::size_t n = march_count(rs.near, rs.far, step);
        Vec3 x0 = rs.ray.origin + rs.near * rs.ray.dir;
        Vec3 jit = (rs.jitter_u * step) * rs.ray.dir;
        double T = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
          Vec3 p = x0 + (static_cast<double>(i) * step) * rs.ray.dir + jit;
          if (mask) {
            if (!mask->occupied_possible(p) || !mask->occupied(p)) continue;
          }
          double raw = trilinear_sample1(scene.density, p);
          double alpha = alpha_from_sigma(softplus_shifted(raw, scene.bias), step);
          if (tau_fine > 0 && alpha < tau_fine) continue;
          PointRec rec;
          rec.x = p;
          rec.raw = raw;
          rec.alpha = alpha;
          rec.ray = static_cast<std::uint32_t>(r);
          pts.push_back(rec);
          T *= 1.0 - alpha;
          if (term_T > 0 && T < term_T) break;
        }
      }
      span.count = static_cast<std::uint32_t>(pts.size()) - span.begin;
      spans.push_back(span);
    }
  });
  // concatenate in worker order; rays stay in index order because the
  // partition is contiguous
  std::size_t total = 0;
  for (auto& v : wpts) total += v.size();
  out.pts.reserve(total);
  out.spans.resize(rays.size());
  std::size_t ray_cursor = 0;
  for (unsigned w = 0; w < threads; ++w) {
    std::uint32_t offset = static_cast<std::uint32_t>(out.pts.size());
    out.pts.insert(out.pts.end(), wpts[w].begin(), wpts[w].end());
    for (const Span& sp : wspans[w])
      out.spans[ray_cursor++] = {sp.begin + offset, sp.count};
  }
  return out;
}

constexpr std::size_t kMlpChunk = 4096;

// Pass B: batched MLP colors for all surviving points. Chunks are fixed-size
// so per-chunk results do not depend on the worker count.
void fine_colors(const FineScene& scene, const std::vector<RaySpec>& rays, Marched& m,
                 unsigned threads) {
  if (scene.diffuse_only) {
    parallel_for(m.pts.size(), threads, [&](unsigned, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        double logits[3];
        trilinear_sample(scene.feat, m.pts[i].x, logits);
        for (int c = 0; c < 3; ++c) m.pts[i].color[c] = sigmoid(logits[c]);
      }
    });
    return;
  }
  const int in_dim = scene.mlp_input_dim();
  const std::size_t n_chunks = (m.pts.size() + kMlpChunk - 1) / kMlpChunk;
  parallel_for(n_chunks, threads, [&](unsigned, std::size_t cb, std::size_t ce) {
    Eigen::MatrixXd input;
    for (std::size_t ch = cb; ch < ce; ++ch) {
      std::size_t b = ch * kMlpChunk;
      std::size_t e = std::min(b + kMlpChunk, m.pts.size());
      input.resize(in_dim, static_cast<Eigen::Index>(e - b));
      for (std::size_t i = b; i < e; ++i)
        fine_mlp_input(scene, m.pts[i].x, rays[m.pts[i].ray].ray.dir,
                       input.col(static_cast<Eigen::Index>(i - b)).data());
      Eigen::MatrixXd out = mlp_forward(scene.mlp, input, nullptr);
      for (std::size_t i = b; i < e; ++i)
        for (int c = 0; c < 3; ++c) m.pts[i].color[c] = out(c, static_cast<Eigen::Index>(i - b));
    }
  });
}

struct FineGrads {
  std::vector<std::vector<double>> density;  // per worker
  std::vector<std::vector<double>> feat;
  std::vector<MlpGrads> mlp;
  std::vector<RayLossAccum> acc;
};

// Pass C: composite per ray, losses, upstream color gradients, density grads.
void fine_ray_backward(const FineScene& scene, const std::vector<RaySpec>& rays, Marched& m,
                       Rgb bg, const LossWeights& weights, double inv_batch, FineGrads& grads,
                       std::vector<RayScratch>& scratch, unsigned threads) {
  const double step = scene.step;
  parallel_for(rays.size(), threads, [&](unsigned w, std::size_t b, std::size_t e) {
    RayScratch& s = scratch[w];
    for (std::size_t r = b; r < e; ++r) {
      const Span span = m.spans[r];
      s.alphas.assign(span.count, 0.0);
      s.colors.assign(span.count, Rgb{0, 0, 0});
      for (std::uint32_t i = 0; i < span.count; ++i) {
        s.alphas[i] = m.pts[span.begin + i].alpha;
        s.colors[i] = m.pts[span.begin + i].color;
      }
      RenderResult res = composite(s.alphas, s.colors, bg);
      LossGrads g = ray_losses(res, rays[r].target, s.colors, weights, inv_batch, grads.acc[w], s);
      CompositeUpstream up;
      up.d_color = g.d_color;
      up.d_bg_transmittance = g.d_bgT;
      composite_backward(s.alphas, s.colors, bg, up, s.d_alphas, s.d_colors);
      for (std::uint32_t i = 0; i < span.count; ++i) {
        PointRec& rec = m.pts[span.begin + i];
        double d_raw = s.d_alphas[i] * step * (1.0 - rec.alpha) *
                       softplus_shifted_grad(rec.raw, scene.bias);
        trilinear_backward(scene.density, rec.x, &d_raw, grads.density[w]);
        for (int c = 0; c < 3; ++c) rec.d_color[c] = s.d_colors[i][c] + s.d_colors_pt[i][c];
      }
    }
  });
}

// Pass D: MLP backward per chunk (forward recomputed for the tape) and
// feature-grid scatter. Diffuse mode goes straight through the sigmoid.
void fine_color_backward(const FineScene& scene, const std::vector<RaySpec>& rays, Marched& m,
                         FineGrads& grads, unsigned threads) {
  if (scene.diffuse_only) {
    parallel_for(m.pts.size(), threads, [&](unsigned w, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const PointRec& rec = m.pts[i];
        double d_logits[3];
        for (int c = 0; c < 3; ++c)
          d_logits[c] = rec.d_color[c] * sigmoid_grad_from_value(rec.color[c]);
        trilinear_backward(scene.feat, rec.x, d_logits, grads.feat[w]);
      }
    });
    return;
  }
  const int in_dim = scene.mlp_input_dim();
  const std::size_t n_chunks = (m.pts.size() + kMlpChunk - 1) / kMlpChunk;
  parallel_for(n_chunks, threads, [&](unsigned w, std::size_t cb, std::size_t ce) {
    Eigen::MatrixXd input, d_out, d_in;
    MlpTape tape;
    for (std::size_t ch = cb; ch < ce; ++ch) {
      std::size_t b = ch * kMlpChunk;
      std::size_t e = std::min(b + kMlpChunk, m.pts.size());
      const auto cols = static_cast<Eigen::Index>(e - b);
      input.resize(in_dim, cols);
      d_out.resize(3, cols);
      for (std::size_t i = b; i < e; ++i) {
        fine_mlp_input(scene, m.pts[i].x, rays[m.pts[i].ray].ray.dir,
                       input.col(static_cast<Eigen::Index>(i - b)).data());
        for (int c = 0; c < 3; ++c) d_out(c, static_cast<Eigen::Index>(i - b)) = m.pts[i].d_color[c];
      }
      mlp_forward(scene.mlp, input, &tape);
      mlp_backward(scene.mlp, tape, d_out, grads.mlp[w], &d_in);
      for (std::size_t i = b; i < e; ++i)
        trilinear_backward(scene.feat, m.pts[i].x, d_in.col(static_cast<Eigen::Index>(i - b)).data(),
                           grads.feat[w]);
    }
  });
}

void apply_mlp_adam(MlpParams& mlp, std::vector<AdamState>& states, const MlpGrads& grads,
                    double lr_factor) {
  std::size_t s = 0;
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    adam_step(states[s++], {mlp.W[l].data(), static_cast<std::size_t>(mlp.W[l].size())},
              {grads.dW[l].data(), static_cast<std::size_t>(grads.dW[l].size())}, lr_factor);
    adam_step(states[s++], {mlp.b[l].data(), static_cast<std::size_t>(mlp.b[l].size())},
              {grads.db[l].data(), static_cast<std::size_t>(grads.db[l].size())}, lr_factor);
  }
}

std::int64_t initial_fine_budget(const TrainConfig& cfg) {
  std::int64_t b = cfg.m_fine;
  for (std::size_t i = 0; i < cfg.pg_ckpt.size(); ++i) b /= 2;
  return std::max<std::int64_t>(b, 8);
}

}  // namespace

void scale_fine_grids(FineScene& scene, std::int64_t new_budget) {
  const Bbox3& box = scene.density.bbox();
  double s = voxel_size_for_budget(box, {new_budget});
  std::array<int, 3> nd = dims_for_voxel_size(box, s);
  scene.density = upsample(scene.density, nd);
  scene.feat = upsample(scene.feat, nd);
}

FineResult train_fine(const Dataset& ds, const CoarseScene& coarse, const TrainConfig& cfg) {
  validate(cfg);
  validate(coarse);
  const unsigned threads = resolve_threads(cfg.threads);

  FreeSpaceMask mask(coarse, cfg.tau_coarse);
  Bbox3 box = fine_bbox(mask);
  FineResult out;
  out.bbox = box;
  FineScene& scene = out.scene;

  const double s_f = voxel_size_for_budget(box, {cfg.m_fine});
  scene.step = cfg.step_ratio * s_f;
  scene.bias =
      cfg.low_density_init ? low_density_bias(cfg.alpha_init_fine, s_f) : ActivationBias{0.0};
  scene.posenc_x = cfg.posenc_x;
  scene.posenc_d = cfg.posenc_d;
  scene.diffuse_only = cfg.diffuse_only;

  std::int64_t budget = initial_fine_budget(cfg);
  const int feat_channels = cfg.diffuse_only ? 3 : cfg.feat_dim;
  scene.density = allocate(box, {budget}, 1);
  scene.feat = allocate(box, {budget}, feat_channels);
  Rng rng(cfg.seed ^ 0xD1B54A32D192ED03ULL);
  if (!cfg.diffuse_only)
    scene.mlp = MlpParams::create(scene.mlp_input_dim(), cfg.mlp_hidden, cfg.mlp_layers, 3, rng);
  DVGO_LOG_INFO("fine stage: bbox [%.3f %.3f %.3f]-[%.3f %.3f %.3f], grid %dx%dx%d, step %.5f",
                box.min.x, box.min.y, box.min.z, box.max.x, box.max.y, box.max.z,
                scene.density.dims()[0], scene.density.dims()[1], scene.density.dims()[2],
                scene.step);

  // training ray pool: drop rays that miss the fine bbox, tighten the rest
  std::vector<PoolRay> all = build_ray_pool(ds, threads);
  std::vector<RaySpec> pool;
  pool.reserve(all.size());
  for (const PoolRay& pr : all) {
    double t0 = pr.near, t1 = pr.far;
    if (!intersect_segment(box, pr.ray.origin, pr.ray.dir, t0, t1)) continue;
    RaySpec rs;
    rs.ray = pr.ray;
    rs.target = pr.target;
    rs.near = box.contains(pr.ray.origin + pr.near * pr.ray.dir) ? pr.near : t0;
    rs.far = t1;
    pool.push_back(rs);
  }
  if (pool.empty()) throw std::runtime_error("no training rays intersect the fine bbox");
  DVGO_LOG_INFO("fine stage: %zu/%zu rays intersect the bbox", pool.size(), all.size());

  const Rgb bg = ds.background();
  AdamState adam_density(cfg.lr_grid, scene.density.size());
  AdamState adam_feat(cfg.lr_grid, scene.feat.size());
  std::vector<AdamState> adam_mlp;
  for (std::size_t l = 0; l < scene.mlp.W.size(); ++l) {
    adam_mlp.emplace_back(cfg.lr_mlp, scene.mlp.W[l].size());
    adam_mlp.emplace_back(cfg.lr_mlp, scene.mlp.b[l].size());
  }

  FineGrads grads;
  grads.density.resize(threads);
  grads.feat.resize(threads);
  grads.acc.resize(threads);
  for (unsigned w = 0; w < threads; ++w) {
    grads.density[w].assign(scene.density.size(), 0.0);
    grads.feat[w].assign(scene.feat.size(), 0.0);
    if (!cfg.diffuse_only) grads.mlp.push_back(MlpGrads::zeros_like(scene.mlp));
  }
  std::vector<RayScratch> scratch(threads);
  std::vector<RaySpec> batch(cfg.batch_rays);
  StageTracker tracker;
  std::size_t next_ckpt = 0;

  for (int iter = 1; iter <= cfg.fine_iters; ++iter) {
    if (next_ckpt < cfg.pg_ckpt.size() && iter == cfg.pg_ckpt[next_ckpt]) {
      budget *= 2;
      scale_fine_grids(scene, budget);
      adam_density.resize(scene.density.size());
      adam_feat.resize(scene.feat.size());
      for (unsigned w = 0; w < threads; ++w) {
        grads.density[w].assign(scene.density.size(), 0.0);
        grads.feat[w].assign(scene.feat.size(), 0.0);
      }
      DVGO_LOG_INFO("fine iter %d: progressive scaling to %dx%dx%d", iter,
                    scene.density.dims()[0], scene.density.dims()[1], scene.density.dims()[2]);
      ++next_ckpt;
    }
    for (int i = 0; i < cfg.batch_rays; ++i) batch[i] = pool[rng.index(pool.size())];
    for (int i = 0; i < cfg.batch_rays; ++i) batch[i].jitter_u = rng.uniform();
    for (unsigned w = 0; w < threads; ++w) {
      std::fill(grads.density[w].begin(), grads.density[w].end(), 0.0);
      std::fill(grads.feat[w].begin(), grads.feat[w].end(), 0.0);
      if (!grads.mlp.empty()) {
        for (auto& dW : grads.mlp[w].dW) dW.setZero();
        for (auto& db : grads.mlp[w].db) db.setZero();
      }
      grads.acc[w] = {};
    }

    Marched m = march_fine(scene, cfg.enable_skipping ? &mask : nullptr,
                           cfg.enable_skipping ? cfg.tau_fine : 0.0, batch,
                           cfg.term_transmittance, threads);
    fine_colors(scene, batch, m, threads);
    const double inv_batch = 1.0 / cfg.batch_rays;
    fine_ray_backward(scene, batch, m, bg, cfg.loss_fine, inv_batch, grads, scratch, threads);
    fine_color_backward(scene, batch, m, grads, threads);

    merge_buffers(grads.density, threads);
    merge_buffers(grads.feat, threads);
    for (unsigned w = 1; w < threads && !grads.mlp.empty(); ++w) grads.mlp[0].add(grads.mlp[w]);
    RayLossAccum total{};
    for (unsigned w = 0; w < threads; ++w) {
      total.photo += grads.acc[w].photo;
      total.pt += grads.acc[w].pt;
      total.bg += grads.acc[w].bg;
    }

    double lr_factor = lr_decay_factor(iter, cfg.lr_decay_period);
    adam_step(adam_density, scene.density.values(), grads.density[0], lr_factor);
    adam_step(adam_feat, scene.feat.values(), grads.feat[0], lr_factor);
    if (!cfg.diffuse_only) apply_mlp_adam(scene.mlp, adam_mlp, grads.mlp[0], lr_factor);
    tracker.log(iter, total.photo * inv_batch, total.pt * inv_batch, total.bg * inv_batch,
                cfg.loss_fine, lr_factor);
    if (iter % 500 == 0 || iter == cfg.fine_iters)
      DVGO_LOG_INFO("fine iter %d/%d loss %.6f (%zu pts)", iter, cfg.fine_iters,
                    tracker.trace.back().total, m.pts.size());
  }
  out.trace = std::move(tracker.trace);
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

Image render_view(const CoarseScene& scene, const Camera& camera, Rgb bg,
                  const RenderOptions& opts) {
  validate(scene);
  Image img(camera.width, camera.height, 3);
  const unsigned threads = std::max(1u, opts.threads);
  parallel_for(static_cast<std::size_t>(camera.height), threads,
               [&](unsigned, std::size_t vb, std::size_t ve) {
                 RayScratch s;
                 RayLossAccum unused;
                 for (std::size_t v = vb; v < ve; ++v)
                   for (int u = 0; u < camera.width; ++u) {
                     PoolRay pr;
                     pr.ray = make_ray(camera, u, static_cast<int>(v));
                     pr.near = camera.near;
                     pr.far = camera.far;
                     RenderResult res =
                         coarse_ray_pass(scene, pr, 0.0, bg, {}, 0.0, opts.term_transmittance,
                                         false, nullptr, nullptr, unused, s);
                     img.set_rgb(u, static_cast<int>(v), res.color);
                   }
               });
  return img;
}

Image render_view(const FineScene& scene, const Camera& camera, Rgb bg,
                  const RenderOptions& opts) {
  validate(scene);
  const unsigned threads = std::max(1u, opts.threads);
  const Bbox3& box = scene.density.bbox();

  std::vector<RaySpec> rays(static_cast<std::size_t>(camera.width) * camera.height);
  parallel_for(static_cast<std::size_t>(camera.height), threads,
               [&](unsigned, std::size_t vb, std::size_t ve) {
                 for (std::size_t v = vb; v < ve; ++v)
                   for (int u = 0; u < camera.width; ++u) {
                     RaySpec& rs = rays[v * camera.width + u];
                     rs.ray = make_ray(camera, u, static_cast<int>(v));
                     double t0 = camera.near, t1 = camera.far;
                     if (!intersect_segment(box, rs.ray.origin, rs.ray.dir, t0, t1)) {
                       rs.near = rs.far = 0;  // renders as pure background
                       continue;
                     }
                     rs.near = box.contains(rs.ray.origin + camera.near * rs.ray.dir)
                                   ? camera.near
                                   : t0;
                     rs.far = t1;
                   }
               });

  Marched m = march_fine(scene, opts.mask, opts.tau_fine, rays, opts.term_transmittance, threads);
  fine_colors(scene, rays, m, threads);

  Image img(camera.width, camera.height, 3);
  parallel_for(rays.size(), threads, [&](unsigned, std::size_t b, std::size_t e) {
    std::vector<double> alphas;
    std::vector<Rgb> colors;
    for (std::size_t r = b; r < e; ++r) {
      const Span span = m.spans[r];
      alphas.assign(span.count, 0.0);
      colors.assign(span.count, Rgb{0, 0, 0});
      for (std::uint32_t i = 0; i < span.count; ++i) {
        alphas[i] = m.pts[span.begin + i].alpha;
        colors[i] = m.pts[span.begin + i].color;
      }
      RenderResult res = composite(alphas, colors, bg);
      img.set_rgb(static_cast<int>(r % camera.width), static_cast<int>(r / camera.width),
                  res.color);
    }
  });
  return img;
}

}  // namespace dvgo
